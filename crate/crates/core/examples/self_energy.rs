// Cutoffs, propagators and the self-energy recursion for the elliptic
// model: λ̲ per scale, closeness ratios and fitted block exponents.

use kamtori::model::bundled;
use kamtori::multiscale::{fit_block_exponents, propagator, propagator_divisor, SelfEnergyState};
use kamtori::{make_profile, ProfileKind, RotationVector};

pub fn run_example() -> kamtori::Result<()> {
    let model = bundled::elliptic();
    let omega = RotationVector::new(&[1.0])?;
    let profile = make_profile(&omega, 0.5, &ProfileKind::Identity, 10)?;
    let state = SelfEnergyState::build(&model, &omega, &profile, 1e-2, 2, 4)?;
    for (n, lam) in state.lambda_bar.iter().enumerate() {
        println!("lambda^[{n}] = {lam:?}");
    }
    println!("closeness |λ^[n] - λ^[n-1]|/ε²: {:?}", state.closeness());

    let x = 0.3;
    for n in 0..=2 {
        let g = propagator(x, n, &state)?;
        println!(
            "n={n}: Δ(x={x}) = {:.4e}, ||g|| = {:.4e} <= {:.4e}",
            propagator_divisor(x, n, &state)?,
            g.norm(),
            state.propagator_norm_bound(n)
        );
    }

    let fits = fit_block_exponents(
        &model,
        &omega,
        &profile,
        1,
        &[1e-4, 3e-4, 1e-3],
        5e-3,
        &[1e-3, 3e-3, 1e-2],
        1e-3,
    )?;
    let names = ["αα", "αβ", "ββ"];
    for k in 0..3 {
        println!("{}: ε-exponent {:.3}, x-exponent {:.3}", names[k], fits.eps[k].slope, fits.x[k].slope);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> kamtori::Result<()> {
    run_example()
}
