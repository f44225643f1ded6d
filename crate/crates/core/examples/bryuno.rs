// Continued fractions, the Bryuno function and the D(ω) bracket for the
// golden-mean and √2 rotation vectors.

use kamtori::arithmetic::bryuno_bracket;
use kamtori::{bryuno_function, continued_fraction, RotationVector};

pub fn run_example() -> kamtori::Result<()> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let cf = continued_fraction(g, 12)?;
    println!("golden partial quotients: {:?}", &cf.partial_quotients[..8]);
    for (name, x) in [("golden", g), ("sqrt2", 2f64.sqrt() - 1.0)] {
        let b = bryuno_function(x, 40)?;
        println!("B({name}) = {b:.10}  closed form {:.10}", -x.ln() / (1.0 - x));
    }
    for omega in [RotationVector::golden(), RotationVector::sqrt2()] {
        let br = bryuno_bracket(&omega, 14)?;
        println!(
            "ω = {:?}: B = {:.6}, D = {:.6}, D/4 - C1 = {:.4} <= B <= D + C2 = {:.4}: {}",
            omega.components(),
            br.bryuno,
            br.d,
            br.lower,
            br.upper,
            br.holds
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> kamtori::Result<()> {
    run_example()
}
