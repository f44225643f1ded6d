// Excised ε set on (ε0/4, ε0] across halvings of ε0, elliptic against
// hyperbolic normal frequencies.

use kamtori::diophantine::cantor_sweep;
use kamtori::model::bundled;
use kamtori::RotationVector;

pub fn run_example() -> kamtori::Result<()> {
    let omega = RotationVector::golden();
    for model in [bundled::cantor(), bundled::cantor_hyperbolic()] {
        println!("{} (a = {:?}):", model.name, model.hessian_eigs);
        for c in cantor_sweep(&omega, &model, 1e-2, 4, 128)? {
            println!(
                "  ε0 = {:.3e}  n0 = {}  G/ε0 = {:.4e}  intervals = {}",
                c.eps0,
                c.n0,
                c.ratio,
                c.excluded_intervals.len()
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> kamtori::Result<()> {
    run_example()
}
