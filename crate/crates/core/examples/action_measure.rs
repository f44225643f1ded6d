// Image of the admissible frequencies in action space for the maximal
// model: Jacobian of the frequency-to-action map and the uncovered share.

use kamtori::diophantine::action_space_measure;
use kamtori::model::bundled;

pub fn run_example() -> kamtori::Result<()> {
    let m = action_space_measure(&bundled::maximal(), &[(1.0, 2.0), (1.0, 2.0)], 0.05, 1e-3, 2, 2_000, 32, 7)?;
    println!("samples {}, admissible {}, differenced {}", m.samples, m.admissible, m.differenced);
    println!("excluded ω fraction {:.4}, action-space complement {:.4}", m.excluded_omega, m.complement);
    println!(
        "mean det ∂A/∂ω = {:.6}, max deviation from 1 = {:.2e}, max |A - ω|/ε = {:.3}",
        m.mean_det, m.max_det_deviation, m.displacement_ratio
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> kamtori::Result<()> {
    run_example()
}
