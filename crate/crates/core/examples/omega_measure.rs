// Monte-Carlo excluded measure in ω over a C0 sweep: linear in C0 for the
// maximal model, saturated for the cantor model where the normal-frequency
// strips overlap.

use kamtori::diophantine::excluded_measure_omega;
use kamtori::model::bundled;

pub fn run_example() -> kamtori::Result<()> {
    let sweep = [0.05, 0.1, 0.2];
    for (model, samples) in [(bundled::maximal(), 20_000), (bundled::cantor(), 5_000)] {
        let est = excluded_measure_omega(&[(1.0, 2.0), (1.0, 2.0)], &sweep, 1e-3, &model, samples, 64, 42)?;
        println!("{} ({} samples):", model.name, est.samples);
        for (c, (f, se)) in est.sweep.iter().zip(est.excluded.iter().zip(&est.stderr)) {
            println!("  C0 = {c:<5} excluded {f:.5} ± {se:.5}");
        }
        if let (Some(fit), Some(err)) = (est.fit, est.exponent_stat_err) {
            println!("  exponent {:.3} ± {:.3}, tail bound {:.2e}", fit.slope, err, est.tail_bound);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> kamtori::Result<()> {
    run_example()
}
