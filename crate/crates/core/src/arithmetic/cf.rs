//! Continued fractions, the one-dimensional Bryuno function and the
//! convergent sum `D`.

use twofloat::TwoFloat;

use crate::error::{Error, Result};

/// Remainders below this are treated as an exact hit: the input is rational
/// at working precision.
const UNDERFLOW: f64 = 1e-24;

/// Expansion `x = [0; a_1, a_2, ...]` with convergents `p_n / q_n`,
/// `(p_0, q_0) = (0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuedFraction {
    pub value: f64,
    pub partial_quotients: Vec<u64>,
    pub convergents: Vec<(u64, u64)>,
}

impl ContinuedFraction {
    pub fn denominators(&self) -> Vec<u64> {
        self.convergents.iter().map(|&(_, q)| q).collect()
    }
}

/// Double-double reciprocal. The crate's own division is only accurate to
/// about f64 precision, so two Newton steps restore the full width.
pub(crate) fn recip_dd(x: TwoFloat) -> TwoFloat {
    let one = TwoFloat::from(1.0);
    let mut y = TwoFloat::from(1.0 / x.hi());
    for _ in 0..2 {
        y += y * (one - x * y);
    }
    y
}

fn check_unit_interval(x: TwoFloat) -> Result<()> {
    if !(x.hi() > 0.0 && x.hi() < 1.0) {
        return Err(Error::Precondition(format!(
            "continued fraction input must lie in (0,1), got {}",
            x.hi()
        )));
    }
    Ok(())
}

/// Partial quotients `a_1..a_depth` of `x`, computed in double-double.
fn partial_quotients(x: TwoFloat, depth: usize) -> Result<Vec<u64>> {
    let mut rem = x;
    let mut out = Vec::with_capacity(depth);
    for k in 0..depth {
        if rem.hi() < UNDERFLOW {
            return Err(Error::Resonance {
                nu: vec![k as i32],
                value: rem.hi(),
            });
        }
        let inv = recip_dd(rem);
        let a = inv.floor();
        let a_int = u64::try_from(a).map_err(|_| Error::Resonance {
            nu: vec![k as i32],
            value: rem.hi(),
        })?;
        out.push(a_int);
        rem = inv - a;
    }
    Ok(out)
}

/// Continued-fraction expansion of `x ∈ (0,1)` to `depth` convergents.
pub fn continued_fraction(x: f64, depth: usize) -> Result<ContinuedFraction> {
    continued_fraction_dd(TwoFloat::from(x), depth)
}

/// Same as [`continued_fraction`] with a double-double input, so quadratic
/// irrationals keep their full precision.
pub fn continued_fraction_dd(x: TwoFloat, depth: usize) -> Result<ContinuedFraction> {
    if depth == 0 {
        return Err(Error::Precondition("depth must be at least 1".into()));
    }
    check_unit_interval(x)?;
    let quotients = partial_quotients(x, depth)?;
    let mut convergents = Vec::with_capacity(depth);
    let (mut p_prev, mut q_prev) = (1u64, 0u64);
    let (mut p, mut q) = (0u64, 1u64);
    convergents.push((p, q));
    for &a in quotients.iter().take(depth - 1) {
        let overflow = || Error::Budget {
            what: "convergent overflow".into(),
            limit: u64::MAX,
        };
        let p_next = a
            .checked_mul(p)
            .and_then(|v| v.checked_add(p_prev))
            .ok_or_else(overflow)?;
        let q_next = a
            .checked_mul(q)
            .and_then(|v| v.checked_add(q_prev))
            .ok_or_else(overflow)?;
        p_prev = p;
        q_prev = q;
        p = p_next;
        q = q_next;
        convergents.push((p, q));
    }
    Ok(ContinuedFraction {
        value: x.hi(),
        partial_quotients: quotients,
        convergents,
    })
}

/// Truncated Bryuno function `Σ_{k<depth} β_{k-1} log(1/x_k)` along the
/// Gauss-map orbit `x_0 = x`, `x_{k+1} = {1/x_k}`, `β_{-1} = 1`,
/// `β_k = x_0 ⋯ x_k`.
pub fn bryuno_function(x: f64, depth: usize) -> Result<f64> {
    bryuno_function_dd(TwoFloat::from(x), depth)
}

pub fn bryuno_function_dd(x: TwoFloat, depth: usize) -> Result<f64> {
    if depth == 0 {
        return Err(Error::Precondition("depth must be at least 1".into()));
    }
    check_unit_interval(x)?;
    let mut xk = x;
    let mut beta = TwoFloat::from(1.0);
    let mut sum = TwoFloat::from(0.0);
    for k in 0..depth {
        if xk.hi() < UNDERFLOW {
            return Err(Error::Resonance {
                nu: vec![k as i32],
                value: xk.hi(),
            });
        }
        sum += beta * (-xk.ln());
        beta *= xk;
        xk = recip_dd(xk).fract();
    }
    Ok(sum.hi())
}

/// Partial sum `Σ_n log(q_{n+1}) / q_n` over the available convergents.
pub fn d_sum(cf: &ContinuedFraction) -> Result<f64> {
    if cf.convergents.len() < 2 {
        return Err(Error::InsufficientData(
            "D sum needs at least two convergents".into(),
        ));
    }
    Ok(d_sum_of_denominators(&cf.denominators()))
}

pub(crate) fn d_sum_of_denominators(q: &[u64]) -> f64 {
    q.windows(2)
        .map(|w| (w[1] as f64).ln() / w[0] as f64)
        .sum()
}
