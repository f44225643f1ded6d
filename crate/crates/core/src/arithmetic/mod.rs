//! Number-theoretic input to the small-divisor analysis.
//!
//! Continued fractions and the one-dimensional Bryuno function live in
//! [`cf`]; the lattice minimum `α_n(ω)` in [`lattice`]; comparison profiles
//! `γ*_n` in [`profile`]. This module adds the generalized Bryuno sum and the
//! two-sided comparison between it and the convergent sum `D(ω)` for `r = 2`.

pub mod cf;
pub mod lattice;
pub mod profile;

use serde::Serialize;
use twofloat::TwoFloat;

pub use cf::{bryuno_function, bryuno_function_dd, continued_fraction, continued_fraction_dd, d_sum, ContinuedFraction};
pub use lattice::{alpha_sequence, scale_of, RotationVector};
pub use profile::{make_profile, theorem2_n0, BryunoProfile, ProfileKind, ProfileMode};

use crate::error::{Error, Result};

/// Increment size below which a truncated series is reported as converged.
pub const CONVERGENCE_TOL: f64 = 1e-9;

/// A truncated series: its value and the size of the last term added.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartialSum {
    pub value: f64,
    pub last_increment: f64,
}

impl PartialSum {
    pub fn converged(&self) -> bool {
        self.last_increment.abs() < CONVERGENCE_TOL
    }
}

/// `Σ_{n=0}^{n_max} 2^{-n} log(1/α_n)`.
pub fn generalized_bryuno_sum(alpha: &[f64], n_max: usize) -> f64 {
    generalized_bryuno_partial(alpha, n_max).value
}

pub fn generalized_bryuno_partial(alpha: &[f64], n_max: usize) -> PartialSum {
    let mut value = 0.0;
    let mut last = 0.0;
    for (n, a) in alpha.iter().take(n_max + 1).enumerate() {
        last = 0.5f64.powi(n as i32) * (1.0 / a).ln();
        value += last;
    }
    PartialSum {
        value,
        last_increment: last,
    }
}

/// Both sides of `D/4 − C1 ≤ B ≤ D + C2` for a two-dimensional `ω`.
///
/// Write `ω = ω_1 ω_0` with `ω_1 = max|ω_i|`, so `B(ω) = B(ω_0) − S log ω_1`
/// with `S = Σ 2^{-n}`. The lattice scales split into blocks
/// `[r_n, r_{n+1})`, `2^{r_n − 1} < 2 q_n ≤ 2^{r_n}`, each contributing
/// between `log(q_{n+1})/(4 q_n)` and `(log 2 + log q_{n+1})/q_n`, plus the
/// scale-0 term `log(1/α_0(ω_0))` before the first block. Both sums are cut at
/// the same block boundary so no block is counted partially.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BryunoBracket {
    pub bryuno: f64,
    pub d: f64,
    pub c1: f64,
    pub c2: f64,
    pub lower: f64,
    pub upper: f64,
    pub holds: bool,
    /// Last lattice scale included in `bryuno`.
    pub n_cut: usize,
    /// Number of complete blocks (convergent terms in `d`).
    pub blocks: usize,
}

pub fn bryuno_bracket(omega: &RotationVector, n_max: usize) -> Result<BryunoBracket> {
    if omega.dim() != 2 {
        return Err(Error::Precondition("bracket requires r = 2".into()));
    }
    let c = omega.components_dd();
    let (a0, a1) = (c[0].abs(), c[1].abs());
    let (w1, w_min) = if a0.hi() >= a1.hi() { (a0, a1) } else { (a1, a0) };
    let ratio: TwoFloat = w_min * cf::recip_dd(w1);
    let cf = continued_fraction_dd(ratio, 64).or_else(|e| match e {
        Error::Budget { .. } => continued_fraction_dd(ratio, 40),
        e => Err(e),
    })?;
    let q = cf.denominators();
    let block_start = |qn: u64| -> usize { (2 * qn).next_power_of_two().trailing_zeros() as usize };
    // Number of complete blocks whose end r_{m} − 1 is within n_max.
    let mut blocks = 0;
    while blocks + 1 < q.len() && block_start(q[blocks + 1]) <= n_max + 1 {
        blocks += 1;
    }
    if blocks == 0 {
        return Err(Error::InsufficientData(
            "n_max too small for a complete convergent block".into(),
        ));
    }
    let n_cut = block_start(q[blocks]) - 1;
    let alphas = omega.alphas(n_cut)?;
    let bryuno = generalized_bryuno_sum(&alphas, n_cut);
    let d = cf::d_sum_of_denominators(&q[..=blocks]);
    let s: f64 = (0..=n_cut).map(|n| 0.5f64.powi(n as i32)).sum();
    let log_w1 = w1.ln().hi();
    let alpha0_unit = ratio.hi().min(1.0);
    let inv_q: f64 = q[..blocks].iter().map(|&qn| 1.0 / qn as f64).sum();
    let c1 = (s * log_w1).max(0.0);
    let c2 = 2f64.ln() * inv_q + (1.0 / alpha0_unit).ln() + (-s * log_w1).max(0.0);
    let lower = d / 4.0 - c1;
    let upper = d + c2;
    Ok(BryunoBracket {
        bryuno,
        d,
        c1,
        c2,
        lower,
        upper,
        holds: lower <= bryuno && bryuno <= upper,
        n_cut,
        blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_alpha_gives_zero() {
        assert_eq!(generalized_bryuno_sum(&[1.0; 10], 9), 0.0);
    }

    #[test]
    fn bracket_holds_for_quadratic_irrationals() {
        for w in [RotationVector::golden(), RotationVector::sqrt2()] {
            let b = bryuno_bracket(&w, 14).unwrap();
            assert!(b.blocks >= 3, "{b:?}");
            assert!(b.holds, "{b:?}");
        }
    }

    #[test]
    fn partial_sum_reports_last_increment() {
        let w = RotationVector::golden();
        let a = w.alphas(12).unwrap();
        let p = generalized_bryuno_partial(&a, 12);
        assert!((p.last_increment - (1.0 / a[12]).ln() / 4096.0).abs() < 1e-15);
        assert!(!p.converged());
    }
}
