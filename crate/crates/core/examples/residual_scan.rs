// Sup-residual of the truncated torus against ε: slope K + 1 per order.

use kamtori::config::Thresholds;
use kamtori::model::bundled;
use kamtori::verify::residual_scan;
use kamtori::{make_profile, ProfileKind, RotationVector};

pub fn run_example() -> kamtori::Result<()> {
    let th = Thresholds::default();
    let eps = [1e-3, 2e-3, 5e-3, 1e-2];
    let golden = RotationVector::golden();
    let unit = RotationVector::new(&[1.0])?;
    let cases = [
        (bundled::maximal(), golden.clone(), 0.2),
        (bundled::elliptic(), unit, 0.5),
    ];
    for (model, omega, c0) in &cases {
        let profile = make_profile(omega, *c0, &ProfileKind::Identity, 10)?;
        let rep = residual_scan(model, omega, &profile, &[1, 2, 3], &eps, 16, th.residual_slope_tol)?;
        for f in &rep.fits {
            println!("{}: K={} slope {:.4} ± {:.1e} (expected {})", rep.model, f.k, f.slope, f.slope_stderr, f.expected);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> kamtori::Result<()> {
    run_example()
}
