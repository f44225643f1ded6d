//! Order-by-order construction of the torus conjugation `h = (a, b)`.
//!
//! With `ψ̃ = (ψ, β0)` the equations of motion read
//! `(ω·∂)² h = −ε ∂_{(α,β)} f(ψ̃ + h)`, so in Fourier space
//! `h^(k)_ν = [F^(k−1)]_ν / (ω·ν)²` for `ν ≠ 0`, where `F^(m)` is the `ε^m`
//! coefficient of `∂f(ψ̃ + h)`. The bare propagator `1/x²` is the sum of the
//! multiscale propagators over all scales when no self-energy is resummed, so
//! the coefficients are exact polynomials in `ε`.
//!
//! Zero modes: `a^(k)_0 = 0` fixes the translation freedom of the
//! parameterization, and `b^(k)_0` is chosen so that `[∂_β f]^(k)_0 = 0`,
//! which is a linear equation through the Hessian of `f_0` at `β0`. The
//! matching condition `[∂_α f]^(k)_0 = 0` is not imposed; it is checked.
//!
//! `F` is assembled from `E_m = exp(i m·h)` for each mode `m = (ν_m, μ_m)`,
//! expanded by `j E^(j) = i Σ_{l=1}^{j} l u^(l) E^(j−l)` with
//! `u = m·h` and products taken as Fourier convolutions.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::arithmetic::{scale_of, BryunoProfile, RotationVector};
use crate::error::{Error, Result};
use crate::fourier::{add_scaled, add_vec, convolve, phase, Series, VecSeries, C64};
use crate::model::{FourierModel, TorusPoint};

/// Relative size of `[∂_α f]^(k)_0` tolerated before the order is reported
/// as unsolvable.
pub const SOLVABILITY_TOL: f64 = 1e-9;

/// Largest order accepted by [`expand_torus`].
pub const K_MAX: usize = 12;

#[derive(Debug, Clone)]
pub struct TorusExpansion {
    pub r: usize,
    pub s: usize,
    pub omega: RotationVector,
    pub beta0: Vec<f64>,
    pub model_name: String,
    pub c0: f64,
    /// `orders[k-1][ν] = h^(k)_ν ∈ C^d`.
    pub orders: Vec<VecSeries>,
    /// `|[∂_α f]^(k)_0|` for `k = 0..K`.
    pub compatibility: Vec<f64>,
}

/// One row of the coefficient dump.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientRow {
    pub k: usize,
    pub nu: Vec<i32>,
    pub component: usize,
    pub re: f64,
    pub im: f64,
}

struct ModeData {
    nu: Vec<i32>,
    full: Vec<f64>,
    coeff: C64,
}

fn zero_c() -> C64 {
    C64::new(0.0, 0.0)
}

fn force_series(modes: &[ModeData], e: &[Series], d: usize) -> VecSeries {
    let i = C64::new(0.0, 1.0);
    let mut out = VecSeries::new();
    for (m, em) in modes.iter().zip(e) {
        for (nu, val) in em {
            let w = m.coeff * i * val;
            let entry = out
                .entry(add_vec(nu, &m.nu))
                .or_insert_with(|| vec![zero_c(); d]);
            for (slot, &mk) in entry.iter_mut().zip(&m.full) {
                *slot += w * mk;
            }
        }
    }
    out
}

fn project(m: &ModeData, h: &VecSeries) -> Series {
    h.iter()
        .map(|(nu, v)| {
            let s: C64 = v.iter().zip(&m.full).map(|(c, k)| c * *k).sum();
            (nu.clone(), s)
        })
        .collect()
}

/// `E^(k) = (i/k) Σ_{l=1}^{k} l u^(l) E^(k−l)`.
fn next_exponential(u: &[Series], e: &[Series], k: usize) -> Series {
    let mut out = Series::new();
    for l in 1..=k {
        let prod = convolve(&u[l - 1], &e[k - l]);
        add_scaled(&mut out, &prod, C64::new(0.0, l as f64 / k as f64));
    }
    out
}

/// Builds `h^(1)..h^(K)` for `model` at frequency `ω`, checking the first
/// Mel'nikov condition `|ω·ν| ≥ C0 γ*_{n(ν)}` of `profile` at every momentum
/// that gets divided by.
pub fn expand_torus(
    model: &FourierModel,
    omega: &RotationVector,
    profile: &BryunoProfile,
    order: usize,
) -> Result<TorusExpansion> {
    if omega.dim() != model.r {
        return Err(Error::Precondition(format!(
            "ω has {} components, model has r = {}",
            omega.dim(),
            model.r
        )));
    }
    if order == 0 || order > K_MAX {
        return Err(Error::Precondition(format!("order must be in 1..={K_MAX}")));
    }
    let (r, s, d) = (model.r, model.s, model.d());
    let modes: Vec<ModeData> = model
        .modes
        .iter()
        .map(|m| ModeData {
            nu: m.nu.clone(),
            full: m.full().iter().map(|&k| k as f64).collect(),
            coeff: model.shifted_coefficient(m),
        })
        .collect();
    let h_inv = if s > 0 {
        Some(
            model
                .hessian
                .clone()
                .try_inverse()
                .ok_or(Error::ZeroEigenvalue { index: 0, value: 0.0 })?,
        )
    } else {
        None
    };

    let zero_key = vec![0i32; r];
    let mut unit = Series::new();
    unit.insert(zero_key.clone(), C64::new(1.0, 0.0));
    let mut e: Vec<Vec<Series>> = modes.iter().map(|_| vec![unit.clone()]).collect();
    let mut u: Vec<Vec<Series>> = modes.iter().map(|_| Vec::new()).collect();
    let mut orders: Vec<VecSeries> = Vec::with_capacity(order);
    let mut compatibility = Vec::with_capacity(order + 1);

    let e0: Vec<Series> = e.iter().map(|v| v[0].clone()).collect();
    let mut force = force_series(&modes, &e0, d);

    for k in 1..=order {
        compatibility.push(check_alpha_average(&force, &zero_key, r, k - 1)?);
        let mut hk = VecSeries::new();
        for (nu, rhs) in &force {
            if *nu == zero_key {
                continue;
            }
            let x = omega.dot(nu);
            check_divisor(omega, profile, nu, x)?;
            let inv = 1.0 / (x * x);
            hk.insert(nu.clone(), rhs.iter().map(|c| c * inv).collect());
        }
        for (mi, m) in modes.iter().enumerate() {
            u[mi].push(project(m, &hk));
            let next = next_exponential(&u[mi], &e[mi], k);
            e[mi].push(next);
        }
        let ek: Vec<Series> = e.iter().map(|v| v[k].clone()).collect();
        force = force_series(&modes, &ek, d);

        if let Some(h_inv) = &h_inv {
            let rest = force.get(&zero_key).cloned().unwrap_or_else(|| vec![zero_c(); d]);
            let rhs = DMatrix::from_iterator(s, 1, rest[r..].iter().map(|c| c.re));
            let b0 = -(h_inv * rhs);
            let mut h0 = vec![zero_c(); d];
            for j in 0..s {
                h0[r + j] = C64::new(b0[j], 0.0);
            }
            for (mi, m) in modes.iter().enumerate() {
                let shift: f64 = (0..s).map(|j| m.full[r + j] * b0[j]).sum();
                *u[mi][k - 1].entry(zero_key.clone()).or_insert_with(zero_c) += shift;
                *e[mi][k].entry(zero_key.clone()).or_insert_with(zero_c) += C64::new(0.0, shift);
            }
            hk.insert(zero_key.clone(), h0);
            let ek: Vec<Series> = e.iter().map(|v| v[k].clone()).collect();
            force = force_series(&modes, &ek, d);
        }
        orders.push(hk);
    }
    compatibility.push(check_alpha_average(&force, &zero_key, r, order)?);

    Ok(TorusExpansion {
        r,
        s,
        omega: omega.clone(),
        beta0: model.beta0.clone(),
        model_name: model.name.clone(),
        c0: profile.c0,
        orders,
        compatibility,
    })
}

fn check_alpha_average(force: &VecSeries, zero: &[i32], r: usize, order: usize) -> Result<f64> {
    let scale = force
        .values()
        .flat_map(|v| v.iter().map(|c| c.norm()))
        .fold(1.0, f64::max);
    let residual = force
        .get(zero)
        .map(|v| v[..r].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt())
        .unwrap_or(0.0);
    if residual > SOLVABILITY_TOL * scale {
        return Err(Error::Solvability { order, residual });
    }
    Ok(residual)
}

fn check_divisor(omega: &RotationVector, profile: &BryunoProfile, nu: &[i32], x: f64) -> Result<()> {
    if x.abs() < crate::arithmetic::lattice::RESONANCE_TOL * omega.max_abs() {
        return Err(Error::Resonance {
            nu: nu.to_vec(),
            value: x.abs(),
        });
    }
    let n = scale_of(nu)?;
    if n > profile.n_max() {
        return Err(Error::Precondition(format!(
            "profile covers scales up to {}, momentum {nu:?} needs scale {n}",
            profile.n_max()
        )));
    }
    let margin = x.abs() - profile.alpha_star(n);
    if margin < -1e-12 * profile.alpha_star(n) {
        return Err(Error::Melnikov {
            nu: nu.to_vec(),
            margin,
        });
    }
    Ok(())
}

impl TorusExpansion {
    pub fn max_order(&self) -> usize {
        self.orders.len()
    }

    pub fn d(&self) -> usize {
        self.r + self.s
    }

    pub fn coefficient(&self, k: usize, nu: &[i32]) -> Option<&[C64]> {
        self.orders.get(k.checked_sub(1)?)?.get(nu).map(|v| v.as_slice())
    }

    /// `Σ_{k ≤ K} ε^k h^(k)_ν`.
    pub fn summed_coefficient(&self, nu: &[i32], eps: f64) -> Vec<C64> {
        let mut out = vec![zero_c(); self.d()];
        let mut pow = 1.0;
        for hk in &self.orders {
            pow *= eps;
            if let Some(v) = hk.get(nu) {
                for (o, c) in out.iter_mut().zip(v) {
                    *o += c * pow;
                }
            }
        }
        out
    }

    /// Largest `|h^(k)_{−ν} − conj h^(k)_ν|`.
    pub fn reality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for hk in &self.orders {
            for (nu, v) in hk {
                let neg: Vec<i32> = nu.iter().map(|x| -x).collect();
                match hk.get(&neg) {
                    Some(w) => {
                        for (a, b) in v.iter().zip(w) {
                            worst = worst.max((a - b.conj()).norm());
                        }
                    }
                    None => worst = worst.max(v.iter().map(|c| c.norm()).fold(0.0, f64::max)),
                }
            }
        }
        worst
    }

    /// `(ω·∂_ψ)^p h` at `ψ`, truncated at order `K`, for the given `ε`.
    pub fn flow_derivative(&self, psi: &[f64], eps: f64, p: u32) -> Vec<f64> {
        let mut out = vec![0.0; self.d()];
        let mut pow = 1.0;
        for hk in &self.orders {
            pow *= eps;
            for (nu, v) in hk {
                let x = self.omega.dot(nu);
                let factor = C64::new(0.0, x).powu(p) * C64::from_polar(pow, phase(nu, psi));
                for (o, c) in out.iter_mut().zip(v) {
                    *o += (c * factor).re;
                }
            }
        }
        out
    }

    /// The same expansion cut at order `k` (`k = 0` gives `h = 0`).
    pub fn truncated(&self, k: usize) -> TorusExpansion {
        let mut t = self.clone();
        t.orders.truncate(k);
        t.compatibility.truncate(k);
        t
    }

    pub fn to_rows(&self) -> Vec<CoefficientRow> {
        let mut rows = Vec::new();
        for (k0, hk) in self.orders.iter().enumerate() {
            for (nu, v) in hk {
                for (component, c) in v.iter().enumerate() {
                    rows.push(CoefficientRow {
                        k: k0 + 1,
                        nu: nu.clone(),
                        component,
                        re: c.re,
                        im: c.im,
                    });
                }
            }
        }
        rows
    }
}

/// Point of the truncated torus at angle `ψ`.
pub fn evaluate_torus(expansion: &TorusExpansion, psi: &[f64], eps: f64) -> TorusPoint {
    let r = expansion.r;
    let h = expansion.flow_derivative(psi, eps, 0);
    let dh = expansion.flow_derivative(psi, eps, 1);
    let omega = expansion.omega.components();
    let a = h[..r].to_vec();
    let b = h[r..].to_vec();
    TorusPoint {
        psi: psi.to_vec(),
        alpha: psi.iter().zip(&a).map(|(p, x)| p + x).collect(),
        beta: expansion.beta0.iter().zip(&b).map(|(p, x)| p + x).collect(),
        action_a: omega.iter().zip(&dh[..r]).map(|(w, x)| w + x).collect(),
        action_b: dh[r..].to_vec(),
        a,
        b,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::{make_profile, ProfileKind};
    use crate::model::bundled;

    fn identity(omega: &RotationVector) -> BryunoProfile {
        make_profile(omega, 1.0, &ProfileKind::Identity, 6).unwrap()
    }

    #[test]
    fn first_order_single_mode() {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let omega = RotationVector::parse("phi,1").unwrap();
        let model = bundled::get("one_mode").unwrap();
        let exp = expand_torus(&model, &omega, &identity(&omega), 1).unwrap();
        let c = exp.coefficient(1, &[1, 0]).unwrap();
        assert!((c[0] - C64::new(0.0, 1.0 / (2.0 * phi * phi))).norm() < 1e-15);
        assert_eq!(c[1], C64::new(0.0, 0.0));
        assert!(exp.coefficient(1, &[2, 0]).is_none());
    }

    #[test]
    fn coefficients_are_real_fourier_series() {
        for (model, omega) in [
            (bundled::maximal(), RotationVector::golden()),
            (bundled::elliptic(), RotationVector::new(&[1.0]).unwrap()),
            (bundled::cantor(), RotationVector::golden()),
        ] {
            let exp = expand_torus(&model, &omega, &identity(&omega), 4).unwrap();
            assert!(exp.reality_defect() < 1e-12, "{}", model.name);
            assert!(exp.compatibility.iter().all(|c| *c < 1e-12));
        }
    }

    #[test]
    fn scaling_f_scales_orders_polynomially() {
        // f → λ f multiplies h^(k) by λ^k.
        let omega = RotationVector::golden();
        let model = bundled::cantor();
        let mut doc = model.to_document();
        let lambda = 0.37;
        for m in &mut doc.modes {
            m.re *= lambda;
            m.im *= lambda;
        }
        let scaled = FourierModel::from_document(&doc).unwrap();
        let p = identity(&omega);
        let a = expand_torus(&model, &omega, &p, 3).unwrap();
        let b = expand_torus(&scaled, &omega, &p, 3).unwrap();
        for k in 1..=3 {
            for (nu, v) in &a.orders[k - 1] {
                let w = b.coefficient(k, nu).unwrap();
                for (x, y) in v.iter().zip(w) {
                    assert!((x * lambda.powi(k as i32) - y).norm() < 1e-12 * (1.0 + x.norm()));
                }
            }
        }
    }

    #[test]
    fn unperturbed_torus() {
        let omega = RotationVector::golden();
        let exp = expand_torus(&bundled::cantor(), &omega, &identity(&omega), 2).unwrap();
        let p = evaluate_torus(&exp, &[0.3, 1.2], 0.0);
        assert_eq!(p.alpha, vec![0.3, 1.2]);
        assert_eq!(p.beta, vec![0.0, 0.0]);
        assert_eq!(p.action_a, omega.components());
        assert_eq!(p.action_b, vec![0.0, 0.0]);
    }

    #[test]
    fn single_mode_point_is_closed_form_sinusoid() {
        // a^(1) = −sin(ψ1)/(2φ²)·2/2 … from h_{±1} = ±i/(2x²): a_1 = −sin ψ1 / x².
        let omega = RotationVector::parse("phi,1").unwrap();
        let x = omega.components()[0];
        let exp = expand_torus(&bundled::get("one_mode").unwrap(), &omega, &identity(&omega), 1).unwrap();
        let eps = 0.01;
        for psi1 in [0.0, 0.7, 2.9] {
            let p = evaluate_torus(&exp, &[psi1, 0.4], eps);
            assert!((p.a[0] + eps * psi1.sin() / (x * x)).abs() < 1e-15);
            assert!((p.action_a[0] - x + eps * psi1.cos() / x).abs() < 1e-15);
        }
    }

    #[test]
    fn action_matches_directional_derivative() {
        let omega = RotationVector::golden();
        let exp = expand_torus(&bundled::maximal(), &omega, &identity(&omega), 3).unwrap();
        let w = omega.components();
        let eps = 0.05;
        let psi = [0.4, 2.1];
        let p = evaluate_torus(&exp, &psi, eps);
        let t = 1e-6;
        let shift = |s: f64| {
            let q: Vec<f64> = psi.iter().zip(&w).map(|(p, wi)| p + s * wi).collect();
            evaluate_torus(&exp, &q, eps).a
        };
        let (ap, am) = (shift(t), shift(-t));
        for i in 0..2 {
            let fd = (ap[i] - am[i]) / (2.0 * t);
            assert!((p.action_a[i] - w[i] - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn inadmissible_profile_rejected() {
        let omega = RotationVector::golden();
        let base = identity(&omega);
        let inflated = base.scaled(3.0);
        assert!(matches!(
            expand_torus(&bundled::maximal(), &omega, &inflated, 2),
            Err(Error::Melnikov { .. })
        ));
    }
}
