//! Rotation vectors and the small-divisor sequence
//! `α_n(ω) = min_{0<|ν|≤2^n} |ω·ν|` under the 1-norm.

use std::sync::RwLock;

use rayon::prelude::*;
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::norm1;

/// Relative tolerance below which `|ω·ν|` counts as an exact resonance.
pub const RESONANCE_TOL: f64 = 1e-12;

/// Cap on the number of lattice prefixes visited for one `α_n`.
pub const LATTICE_BUDGET: u64 = 200_000_000;

/// A frequency vector `ω ∈ R^r`, stored in double-double, with a lazily
/// extended cache of `α_n(ω)`.
#[derive(Debug)]
pub struct RotationVector {
    components: Vec<TwoFloat>,
    alpha_cache: RwLock<Vec<f64>>,
}

impl Clone for RotationVector {
    fn clone(&self) -> Self {
        Self {
            components: self.components.clone(),
            alpha_cache: RwLock::new(self.alpha_cache.read().unwrap().clone()),
        }
    }
}

impl PartialEq for RotationVector {
    fn eq(&self, other: &Self) -> bool {
        self.components == other.components
    }
}

fn golden_dd() -> TwoFloat {
    (TwoFloat::from(5.0).sqrt() + 1.0) * 0.5
}

fn parse_token(tok: &str) -> Result<TwoFloat> {
    let t = tok.trim().to_ascii_lowercase();
    let (sign, body) = match t.strip_prefix('-') {
        Some(rest) => (-1.0, rest.to_string()),
        None => (1.0, t.clone()),
    };
    let v = match body.as_str() {
        "phi" | "golden" => golden_dd(),
        "sqrt2" => TwoFloat::from(2.0).sqrt(),
        "sqrt3" => TwoFloat::from(3.0).sqrt(),
        "sqrt5" => TwoFloat::from(5.0).sqrt(),
        other => TwoFloat::from(
            other
                .parse::<f64>()
                .map_err(|_| Error::Schema(format!("cannot parse ω component {tok:?}")))?,
        ),
    };
    Ok(v * sign)
}

impl RotationVector {
    pub fn new(components: &[f64]) -> Result<Self> {
        Self::from_dd(components.iter().map(|&c| TwoFloat::from(c)).collect())
    }

    pub fn from_dd(components: Vec<TwoFloat>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Precondition("ω must have at least one component".into()));
        }
        if components.iter().any(|c| !c.hi().is_finite() || c.hi() == 0.0) {
            return Err(Error::Precondition(
                "ω components must be finite and nonzero".into(),
            ));
        }
        Ok(Self {
            components,
            alpha_cache: RwLock::new(Vec::new()),
        })
    }

    /// `(1, φ)` with `φ = (1+√5)/2`.
    pub fn golden() -> Self {
        Self::from_dd(vec![TwoFloat::from(1.0), golden_dd()]).unwrap()
    }

    /// `(1, √2)`.
    pub fn sqrt2() -> Self {
        Self::from_dd(vec![TwoFloat::from(1.0), TwoFloat::from(2.0).sqrt()]).unwrap()
    }

    /// Parses `golden`, `sqrt2`, or a comma list whose entries are decimals
    /// or the symbols `phi`, `sqrt2`, `sqrt3`, `sqrt5` (optionally negated).
    pub fn parse(spec: &str) -> Result<Self> {
        match spec.trim() {
            "golden" => return Ok(Self::golden()),
            "sqrt2" => return Ok(Self::sqrt2()),
            _ => {}
        }
        let comps = spec
            .split(',')
            .map(parse_token)
            .collect::<Result<Vec<_>>>()?;
        Self::from_dd(comps)
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.hi()).collect()
    }

    pub fn components_dd(&self) -> &[TwoFloat] {
        &self.components
    }

    /// `ω·ν` in double-double, rounded to f64.
    pub fn dot(&self, nu: &[i32]) -> f64 {
        self.dot_dd(nu).hi()
    }

    pub fn dot_dd(&self, nu: &[i32]) -> TwoFloat {
        self.components
            .iter()
            .zip(nu)
            .fold(TwoFloat::from(0.0), |acc, (w, &k)| acc + *w * k as f64)
    }

    /// `max_i |ω_i|`.
    pub fn max_abs(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.hi().abs())
            .fold(0.0, f64::max)
    }

    /// Scaled copy `t·ω` (fresh cache).
    pub fn scaled(&self, t: f64) -> Result<Self> {
        Self::from_dd(self.components.iter().map(|c| *c * t).collect())
    }

    /// `α_n(ω)`, extending the cache as needed.
    pub fn alpha(&self, n: usize) -> Result<f64> {
        Ok(self.alphas(n)?[n])
    }

    /// `α_0..=α_{n_max}`.
    pub fn alphas(&self, n_max: usize) -> Result<Vec<f64>> {
        {
            let cache = self.alpha_cache.read().unwrap();
            if cache.len() > n_max {
                return Ok(cache[..=n_max].to_vec());
            }
        }
        let mut cache = self.alpha_cache.write().unwrap();
        while cache.len() <= n_max {
            let n = cache.len();
            let (value, nu) = ball_minimum(&self.components, 1u64 << n)?;
            if value < RESONANCE_TOL * self.max_abs() {
                return Err(Error::Resonance { nu, value });
            }
            let prev = cache.last().copied().unwrap_or(f64::INFINITY);
            cache.push(value.min(prev));
        }
        Ok(cache[..=n_max].to_vec())
    }
}

/// `α_0..=α_{n_max}` of `ω` by exhaustive 1-norm lattice enumeration.
pub fn alpha_sequence(omega: &RotationVector, n_max: usize) -> Result<Vec<f64>> {
    omega.alphas(n_max)
}

/// Smallest `n` with `|ν|_1 ≤ 2^n`.
pub fn scale_of(nu: &[i32]) -> Result<usize> {
    let m = norm1(nu) as u64;
    if m == 0 {
        return Err(Error::Precondition("scale of the zero vector".into()));
    }
    Ok(m.next_power_of_two().trailing_zeros() as usize)
}

fn binomial_bound(radius: u64, dims: usize) -> f64 {
    // Number of integer points in the 1-norm ball of radius R in `dims`
    // dimensions is at most (2R+1)^dims / dims!.
    let mut v = 1.0;
    for k in 1..=dims {
        v *= (2 * radius + 1) as f64 / k as f64;
    }
    v
}

/// Minimum of `|ω·ν|` over `0 < |ν|_1 ≤ radius`, with its witness. The last
/// coordinate is optimized in closed form: for a fixed prefix the objective is
/// convex in `ν_r`, so the clamped floor/ceil of the unconstrained root is
/// exact.
fn ball_minimum(omega: &[TwoFloat], radius: u64) -> Result<(f64, Vec<i32>)> {
    let r = omega.len();
    let prefix_dims = r - 1;
    if binomial_bound(radius, prefix_dims) > LATTICE_BUDGET as f64 {
        return Err(Error::Budget {
            what: format!("lattice ball of radius {radius} in dimension {r}"),
            limit: LATTICE_BUDGET,
        });
    }
    let last = omega[r - 1];
    let radius = radius as i64;
    if prefix_dims == 0 {
        let mut nu = vec![0i32; r];
        nu[0] = 1;
        return Ok((last.hi().abs(), nu));
    }
    let best = (-radius..=radius)
        .into_par_iter()
        .map(|first| {
            let mut prefix = vec![0i32; prefix_dims];
            prefix[0] = first as i32;
            let mut best: Option<(f64, Vec<i32>)> = None;
            let partial = omega[0] * first as f64;
            enumerate_prefix(
                omega,
                &mut prefix,
                1,
                radius - first.abs(),
                partial,
                &mut |pre, dot, rem| {
                    let cand = best_last(pre, dot, last, rem);
                    if let Some(c) = cand {
                        if better(&c, &best) {
                            best = Some(c);
                        }
                    }
                },
            );
            best
        })
        .reduce(
            || None,
            |a, b| match (a, b) {
                (None, x) | (x, None) => x,
                (Some(a), Some(b)) => {
                    if better(&b, &Some(a.clone())) {
                        Some(b)
                    } else {
                        Some(a)
                    }
                }
            },
        );
    best.ok_or_else(|| Error::Precondition("empty lattice ball".into()))
}

fn better(c: &(f64, Vec<i32>), best: &Option<(f64, Vec<i32>)>) -> bool {
    match best {
        None => true,
        Some((v, nu)) => c.0 < *v || (c.0 == *v && c.1 < *nu),
    }
}

fn enumerate_prefix<F: FnMut(&[i32], TwoFloat, i64)>(
    omega: &[TwoFloat],
    prefix: &mut Vec<i32>,
    pos: usize,
    rem: i64,
    dot: TwoFloat,
    visit: &mut F,
) {
    if pos == prefix.len() {
        visit(prefix, dot, rem);
        return;
    }
    for k in -rem..=rem {
        prefix[pos] = k as i32;
        enumerate_prefix(
            omega,
            prefix,
            pos + 1,
            rem - k.abs(),
            dot + omega[pos] * k as f64,
            visit,
        );
    }
    prefix[pos] = 0;
}

fn best_last(prefix: &[i32], dot: TwoFloat, last: TwoFloat, rem: i64) -> Option<(f64, Vec<i32>)> {
    let zero_prefix = prefix.iter().all(|&k| k == 0);
    let t = (-dot / last).hi();
    let mut cands: Vec<i64> = vec![t.floor() as i64, t.ceil() as i64]
        .into_iter()
        .map(|k| k.clamp(-rem, rem))
        .collect();
    if zero_prefix {
        if rem == 0 {
            return None;
        }
        cands = vec![1];
    }
    cands
        .into_iter()
        .filter(|&k| !(zero_prefix && k == 0))
        .map(|k| {
            let v = (dot + last * k as f64).abs().hi();
            let mut nu = prefix.to_vec();
            nu.push(k as i32);
            (v, nu)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)))
}
