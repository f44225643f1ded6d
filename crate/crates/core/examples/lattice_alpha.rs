// Small-divisor sequence α_n(ω) and the comparison profiles built from it.

use kamtori::{alpha_sequence, make_profile, ProfileKind, RotationVector};

pub fn run_example() -> kamtori::Result<()> {
    let omega = RotationVector::parse("1,phi")?;
    let alphas = alpha_sequence(&omega, 10)?;
    println!(" n   alpha_n(1,phi)");
    for (n, a) in alphas.iter().enumerate() {
        println!("{n:2}   {a:.6e}");
    }
    let identity = make_profile(&omega, 0.2, &ProfileKind::Identity, 10)?;
    let damped = make_profile(&omega, 0.2, &ProfileKind::Theorem1, 10)?;
    println!("B*(identity) = {:.4}", identity.b_star());
    println!("gamma*_10: identity {:.3e}, damped {:.3e}", identity.gamma(10), damped.gamma(10));
    match make_profile(&RotationVector::parse("1,2")?, 0.2, &ProfileKind::Identity, 4) {
        Err(e) => println!("resonant ω rejected: {e}"),
        Ok(_) => println!("unexpected: resonant ω accepted"),
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> kamtori::Result<()> {
    run_example()
}
