//! Comparison profiles `γ*_n` and their derived sums `B*`, `Γ*_p`.

use serde::{Deserialize, Serialize};

use super::lattice::RotationVector;
use crate::error::{Error, Result};

/// Relative slack on `α_n ≥ C0 γ*_n` to absorb rounding in the identity
/// profile.
const ADMISSIBILITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileMode {
    Theorem1,
    /// Damped beyond `n0`; conditions below `n0` are not imposed.
    Theorem2 { n0: usize },
}

/// How to build `γ*_n` from `ω`.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileKind {
    /// `γ*_n = γ_n(ω) = α_n(ω)/C0`.
    Identity,
    /// `min(γ_n, 2^{-n(r+½)})` normalized so `Σ γ*_n 2^{nr} = 1`.
    Theorem1,
    /// Caller-supplied `γ*_n`, checked for admissibility.
    Supplied(Vec<f64>),
    /// `γ_n` below `n0`, `γ_n 2^{-n(r+1)}` from `n0`, where `n0` is the
    /// smallest `n` with `α_{n+1} < 2√Λ0`.
    Theorem2 { lambda0: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BryunoProfile {
    pub c0: f64,
    pub r: usize,
    pub gamma_star: Vec<f64>,
    pub mode: ProfileMode,
}

impl BryunoProfile {
    /// Builds a profile from explicit values without an admissibility check.
    pub fn from_parts(c0: f64, r: usize, gamma_star: Vec<f64>, mode: ProfileMode) -> Result<Self> {
        if !(c0 > 0.0) || gamma_star.is_empty() || gamma_star.iter().any(|g| !(*g > 0.0)) {
            return Err(Error::Precondition(
                "profile needs C0 > 0 and positive γ*_n".into(),
            ));
        }
        Ok(Self {
            c0,
            r,
            gamma_star,
            mode,
        })
    }

    pub fn n_max(&self) -> usize {
        self.gamma_star.len() - 1
    }

    /// `γ*_n`, held at its last value beyond the computed range.
    pub fn gamma(&self, n: usize) -> f64 {
        self.gamma_star[n.min(self.n_max())]
    }

    /// `α*_n = C0 γ*_n`.
    pub fn alpha_star(&self, n: usize) -> f64 {
        self.c0 * self.gamma(n)
    }

    /// `B* = Σ 2^{-n} log(1/α*_n)` over the computed range.
    pub fn b_star(&self) -> f64 {
        (0..=self.n_max())
            .map(|n| (0.5f64).powi(n as i32) * (1.0 / self.alpha_star(n)).ln())
            .sum()
    }

    /// `Γ*_p = Σ α*_n 2^{np}` over the computed range.
    pub fn gamma_sum(&self, p: u32) -> f64 {
        self.c0 * self.gamma_bar(p)
    }

    /// `Γ̄*_p = Σ γ*_n 2^{np}`.
    pub fn gamma_bar(&self, p: u32) -> f64 {
        self.gamma_star
            .iter()
            .enumerate()
            .map(|(n, g)| g * 2f64.powi((n as u32 * p) as i32))
            .sum()
    }

    pub fn n0(&self) -> Option<usize> {
        match self.mode {
            ProfileMode::Theorem1 => None,
            ProfileMode::Theorem2 { n0 } => Some(n0),
        }
    }

    /// First `n` with `α_n(ω) < C0 γ*_n`, if any.
    pub fn first_violation(&self, omega: &RotationVector) -> Result<Option<(usize, f64, f64)>> {
        let alphas = omega.alphas(self.n_max())?;
        Ok(alphas.iter().enumerate().find_map(|(n, &a)| {
            let bound = self.alpha_star(n);
            (a < bound * (1.0 - ADMISSIBILITY_SLACK)).then_some((n, a, bound))
        }))
    }

    /// Same profile with every `γ*_n` multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            gamma_star: self.gamma_star.iter().map(|g| g * factor).collect(),
            ..self.clone()
        }
    }
}

/// `n0`: smallest `n` with `α_{n+1} < 2√Λ0`, requiring `α_{n0} ≥ 2√Λ0`.
pub fn theorem2_n0(alphas: &[f64], lambda0: f64) -> Result<usize> {
    if !(lambda0 > 0.0) {
        return Err(Error::Precondition(format!(
            "damped profile needs Λ0 > 0 (got {lambda0:e})"
        )));
    }
    let threshold = 2.0 * lambda0.sqrt();
    if alphas[0] < threshold {
        return Err(Error::Precondition(format!(
            "α_0 = {:e} < 2√Λ0 = {threshold:e}: no valid n0",
            alphas[0]
        )));
    }
    (0..alphas.len() - 1)
        .find(|&n| alphas[n + 1] < threshold)
        .ok_or_else(|| Error::Budget {
            what: format!("n0 beyond n_max = {} for 2√Λ0 = {threshold:e}", alphas.len() - 1),
            limit: alphas.len() as u64,
        })
}

/// Builds `γ*_0..=γ*_{n_max}` for `ω` and checks `α_n(ω) ≥ C0 γ*_n`.
pub fn make_profile(
    omega: &RotationVector,
    c0: f64,
    kind: &ProfileKind,
    n_max: usize,
) -> Result<BryunoProfile> {
    if !(c0 > 0.0) {
        return Err(Error::Precondition("C0 must be positive".into()));
    }
    let r = omega.dim();
    let alphas = omega.alphas(n_max)?;
    let gamma: Vec<f64> = alphas.iter().map(|a| a / c0).collect();
    let (gamma_star, mode) = match kind {
        ProfileKind::Identity => (gamma, ProfileMode::Theorem1),
        ProfileKind::Theorem1 => {
            let raw: Vec<f64> = gamma
                .iter()
                .enumerate()
                .map(|(n, &g)| g.min(2f64.powf(-(n as f64) * (r as f64 + 0.5))))
                .collect();
            let norm: f64 = raw
                .iter()
                .enumerate()
                .map(|(n, g)| g * 2f64.powi((n * r) as i32))
                .sum();
            (raw.iter().map(|g| g / norm).collect(), ProfileMode::Theorem1)
        }
        ProfileKind::Supplied(values) => {
            if values.len() < n_max + 1 {
                return Err(Error::Precondition(format!(
                    "supplied profile has {} entries, need {}",
                    values.len(),
                    n_max + 1
                )));
            }
            if values.windows(2).any(|w| w[1] > w[0]) {
                return Err(Error::Precondition("supplied γ*_n must be non-increasing".into()));
            }
            (values[..=n_max].to_vec(), ProfileMode::Theorem1)
        }
        ProfileKind::Theorem2 { lambda0 } => {
            let n0 = theorem2_n0(&alphas, *lambda0)?;
            let gs = gamma
                .iter()
                .enumerate()
                .map(|(n, &g)| {
                    if n < n0 {
                        g
                    } else {
                        g * 2f64.powi(-((n * (r + 1)) as i32))
                    }
                })
                .collect();
            (gs, ProfileMode::Theorem2 { n0 })
        }
    };
    let profile = BryunoProfile::from_parts(c0, r, gamma_star, mode)?;
    if let Some((n, alpha, bound)) = profile.first_violation(omega)? {
        return Err(Error::Admissibility { n, alpha, bound });
    }
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_profile_reproduces_alpha() {
        let w = RotationVector::golden();
        let p = make_profile(&w, 0.3, &ProfileKind::Identity, 6).unwrap();
        let a = w.alphas(6).unwrap();
        for n in 0..=6 {
            assert!((p.alpha_star(n) - a[n]).abs() < 1e-15);
        }
    }

    #[test]
    fn theorem1_default_is_normalized_and_admissible() {
        for w in [RotationVector::golden(), RotationVector::sqrt2()] {
            for c0 in [0.05, 0.2, 1.0] {
                let p = make_profile(&w, c0, &ProfileKind::Theorem1, 8).unwrap();
                assert!((p.gamma_bar(2) - 1.0).abs() < 1e-12);
                assert!(p.gamma_star.windows(2).all(|g| g[1] <= g[0]));
                assert!(p.gamma_sum(3) > p.gamma_sum(2));
                assert!(p.b_star().is_finite());
            }
        }
    }

    #[test]
    fn theorem2_n0_direct_scan() {
        let w = RotationVector::golden();
        let c0 = 0.1;
        let lambda0 = 1e-3 * 2.0;
        let p = make_profile(&w, c0, &ProfileKind::Theorem2 { lambda0 }, 10).unwrap();
        let gamma: Vec<f64> = w.alphas(10).unwrap().iter().map(|a| a / c0).collect();
        let thr = 2.0 * lambda0.sqrt();
        let expected = (0..10).find(|&n| c0 * gamma[n + 1] < thr).unwrap();
        assert_eq!(p.n0(), Some(expected));
        assert!(c0 * gamma[expected] >= thr);
        let r = 2;
        for n in 0..=10 {
            let want = if n < expected {
                gamma[n]
            } else {
                gamma[n] * 2f64.powi(-((n * (r + 1)) as i32))
            };
            assert!((p.gamma_star[n] - want).abs() <= 1e-15 * want.max(1.0));
        }
    }

    #[test]
    fn supplied_profile_violation_reports_first_index() {
        let w = RotationVector::golden();
        let a = w.alphas(4).unwrap();
        let mut g: Vec<f64> = a.iter().map(|x| x * 0.5).collect();
        g[3] = a[3] * 2.0;
        g[4] = g[3];
        g[2] = g[2].max(g[3]);
        g[1] = g[1].max(g[2]);
        g[0] = g[0].max(g[1]);
        match make_profile(&w, 1.0, &ProfileKind::Supplied(g), 4) {
            Err(Error::Admissibility { n, .. }) => assert!(n <= 3),
            other => panic!("expected admissibility failure, got {other:?}"),
        }
    }

    #[test]
    fn diophantine_profile_bryuno_sum_closed_form() {
        // α_n = C0 2^{-nτ}: Σ 2^{-n}(nτ log 2 + log 1/C0) → 2τ log 2 + 2 log 1/C0.
        let (c0, tau) = (0.3, 1.5);
        let alpha: Vec<f64> = (0..80).map(|n| c0 * 2f64.powf(-(n as f64) * tau)).collect();
        let s = super::super::generalized_bryuno_sum(&alpha, 79);
        let closed = 2.0 * tau * 2f64.ln() + 2.0 * (1.0 / c0).ln();
        assert!((s - closed).abs() < 1e-12);
    }
}
