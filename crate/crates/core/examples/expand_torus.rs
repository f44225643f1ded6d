// Order-by-order construction of the torus conjugation for the maximal
// and elliptic bundled models, with evaluation at a point of the torus.

use kamtori::model::bundled;
use kamtori::{evaluate_torus, expand_torus, make_profile, ProfileKind, RotationVector};

pub fn run_example() -> kamtori::Result<()> {
    let omega = RotationVector::golden();
    let profile = make_profile(&omega, 0.2, &ProfileKind::Identity, 10)?;
    let exp = expand_torus(&bundled::maximal(), &omega, &profile, 4)?;
    println!("maximal: {} coefficient rows up to order 4", exp.to_rows().len());
    for row in exp.to_rows().iter().filter(|r| r.k <= 2).take(6) {
        println!("  k={} nu={:?} comp={} {:+.6e}{:+.6e}i", row.k, row.nu, row.component, row.re, row.im);
    }
    let p = evaluate_torus(&exp, &[0.3, 1.1], 1e-2);
    println!("h(ψ=(0.3,1.1), ε=1e-2) = {:?}", p);

    let unit = RotationVector::new(&[1.0])?;
    let profile = make_profile(&unit, 0.5, &ProfileKind::Identity, 10)?;
    let exp = expand_torus(&bundled::elliptic(), &unit, &profile, 3)?;
    println!("elliptic: compatibility |[∂_α f]_0| per order {:?}", exp.compatibility);
    Ok(())
}

#[allow(dead_code)]
fn main() -> kamtori::Result<()> {
    run_example()
}
