//! Cutoffs, propagator divisors, propagators and the self-energy recursion.
//!
//! Scale `n` of a line with frequency `x` is selected by the smooth cutoffs
//! `χ_n(Δ) = χ(β⁻² γ*_n⁻² Δ)` and `ψ_n = 1 − χ_n`, evaluated on the
//! propagator divisor
//!
//! `Δ^[n](x) = ((1/d) Σ_j (x² − λ̲^[n]_j)^{−2})^{−1/2}`.
//!
//! The self-energy is truncated at degree two in `ε`:
//!
//! - `M^[0] = ε diag(0, ∂²_β f_0(β0))`, independent of `x`;
//! - for `n ≥ 1`, `M^[n](x) = Π_{p<n} χ_p(Δ^[p](x)) ε² S_n(x)`, where `S_n`
//!   sums the two-node clusters whose internal line sits on scale `n − 1`.
//!   That internal line carries the degree-one dressed propagator
//!   `Π_{p<n−1} χ_p ψ_{n−1} (y² − M^[0])⁻¹`.
//!
//! The scalars `λ̲^[n]_j` are eigenvalues of `M^{≤n}` at `x = √λ̲^[n−1]_j`,
//! continued in `n` by proximity.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::arithmetic::{BryunoProfile, ProfileMode, RotationVector};
use crate::error::{Error, Result};
use crate::fit::{loglog, LineFit};
use crate::fourier::C64;
use crate::model::{FourierModel, TorusKind};

/// Ratio between thresholds of consecutive conditions.
pub const BETA: f64 = 0.25;

/// `|x² − λ̲_j|` below this is a singular divisor.
pub const SINGULAR_TOL: f64 = 1e-14;

/// Eigenvalues closer than this (relative) are matched by eigenvector overlap.
const MATCH_TIE_TOL: f64 = 1e-9;

pub type CMatrix = DMatrix<C64>;

/// `K1` in the propagator bound `‖g^[n]‖ ≤ K1 (C0 γ*_n)^{−2}`.
pub fn k1(d: usize) -> f64 {
    128.0 * (d as f64).sqrt()
}

/// The radial bump: `1` for `|y| ≤ C0²/4`, `0` for `|y| ≥ C0²`, a quintic
/// smootherstep (C²) in between.
pub fn bump(y: f64, c0: f64) -> f64 {
    let lo = c0 * c0 / 4.0;
    let t = (y.abs() - lo) / (3.0 * lo);
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutoffFamily {
    pub profile: BryunoProfile,
}

impl CutoffFamily {
    pub fn new(profile: BryunoProfile) -> Self {
        Self { profile }
    }

    pub fn chi(&self, n: usize, x: f64) -> f64 {
        let g = self.profile.gamma(n);
        bump(x / (BETA * BETA * g * g), self.profile.c0)
    }

    pub fn psi(&self, n: usize, x: f64) -> f64 {
        1.0 - self.chi(n, x)
    }
}

/// `χ_n(x)` for the family.
pub fn chi_n(x: f64, n: usize, family: &CutoffFamily) -> f64 {
    family.chi(n, x)
}

/// Divisor with the continuous extension `Δ = 0` at a singular point.
fn divisor(x2: f64, lambda: &[f64]) -> f64 {
    let d = lambda.len() as f64;
    let mut acc = 0.0;
    for l in lambda {
        let t = x2 - l;
        if t.abs() < SINGULAR_TOL {
            return 0.0;
        }
        acc += 1.0 / (t * t);
    }
    (acc / d).powf(-0.5)
}

/// Ordered mode pair `(m1, m2)` with `ν1 = −ν2 ≠ 0`.
#[derive(Debug, Clone)]
struct ClusterPair {
    coeff: C64,
    m1: DVector<C64>,
    m2: DVector<C64>,
    w2: f64,
}

/// Self-energy data built scale by scale.
#[derive(Debug, Clone)]
pub struct SelfEnergyState {
    pub model: FourierModel,
    pub omega: RotationVector,
    pub family: CutoffFamily,
    pub eps: f64,
    pub k_max: usize,
    /// `λ̲^[n]_j` for the scales built so far.
    pub lambda_bar: Vec<Vec<f64>>,
    eigvecs: Vec<Vec<DVector<C64>>>,
    m0: CMatrix,
    m0_real: DMatrix<f64>,
    pairs: Vec<ClusterPair>,
}

impl SelfEnergyState {
    /// State holding `λ̲^[0] = (0_r, ε a)`.
    pub fn new(
        model: &FourierModel,
        omega: &RotationVector,
        profile: &BryunoProfile,
        eps: f64,
        k_max: usize,
    ) -> Result<Self> {
        if omega.dim() != model.r {
            return Err(Error::Precondition(format!(
                "ω has dimension {}, model has r = {}",
                omega.dim(),
                model.r
            )));
        }
        if !(1..=2).contains(&k_max) {
            return Err(Error::Precondition(format!("truncation degree {k_max} not in 1..=2")));
        }
        let (r, d) = (model.r, model.d());
        let mut m0_real = DMatrix::zeros(d, d);
        for i in 0..model.s {
            for j in 0..model.s {
                m0_real[(r + i, r + j)] = eps * model.hessian[(i, j)];
            }
        }
        let m0 = m0_real.map(|v| C64::new(v, 0.0));
        let mut pairs = Vec::new();
        for a in &model.modes {
            for b in &model.modes {
                if a.is_zero_nu() || a.nu.iter().zip(&b.nu).any(|(x, y)| x + y != 0) {
                    continue;
                }
                let vec = |m: &crate::model::Mode| {
                    DVector::from_iterator(d, m.full().into_iter().map(|k| C64::new(k as f64, 0.0)))
                };
                pairs.push(ClusterPair {
                    coeff: model.shifted_coefficient(a) * model.shifted_coefficient(b),
                    m1: vec(a),
                    m2: vec(b),
                    w2: omega.dot(&b.nu),
                });
            }
        }
        let mut lambda0 = vec![0.0; r];
        lambda0.extend(model.hessian_eigs.iter().map(|a| eps * a));
        let mut basis = Vec::with_capacity(d);
        for j in 0..d {
            let mut e = DVector::zeros(d);
            e[j] = C64::new(1.0, 0.0);
            basis.push(e);
        }
        if model.s > 0 {
            let eig = SymmetricEigen::new(model.hessian.clone());
            let mut order: Vec<usize> = (0..model.s).collect();
            order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
            for (slot, &k) in order.iter().enumerate() {
                let mut v = DVector::zeros(d);
                for i in 0..model.s {
                    v[r + i] = C64::new(eig.eigenvectors[(i, k)], 0.0);
                }
                basis[r + slot] = v;
            }
        }
        Ok(Self {
            model: model.clone(),
            omega: omega.clone(),
            family: CutoffFamily::new(profile.clone()),
            eps,
            k_max,
            lambda_bar: vec![lambda0],
            eigvecs: vec![basis],
            m0,
            m0_real,
            pairs,
        })
    }

    /// State with `λ̲^[0..=n_max]`.
    pub fn build(
        model: &FourierModel,
        omega: &RotationVector,
        profile: &BryunoProfile,
        eps: f64,
        k_max: usize,
        n_max: usize,
    ) -> Result<Self> {
        let mut s = Self::new(model, omega, profile, eps, k_max)?;
        while s.top_scale() < n_max {
            s.advance()?;
        }
        Ok(s)
    }

    pub fn d(&self) -> usize {
        self.model.d()
    }

    pub fn top_scale(&self) -> usize {
        self.lambda_bar.len() - 1
    }

    fn divisor_index(&self, n: usize) -> usize {
        match self.family.profile.mode {
            ProfileMode::Theorem2 { n0 } if n <= n0 => 0,
            _ => n,
        }
    }

    fn require_scale(&self, n: usize) -> Result<()> {
        if n > self.top_scale() {
            return Err(Error::Precondition(format!(
                "scale {n} requested, state built to {}",
                self.top_scale()
            )));
        }
        Ok(())
    }

    fn delta(&self, n: usize, x: f64) -> f64 {
        divisor(x * x, &self.lambda_bar[self.divisor_index(n)])
    }

    /// `Π_{p<n} χ_p(Δ^[p](x))`.
    fn cutoff_product(&self, n: usize, x: f64) -> f64 {
        let mut p = 1.0;
        for q in 0..n {
            p *= self.family.chi(q, self.delta(q, x));
            if p == 0.0 {
                break;
            }
        }
        p
    }

    /// `Π_{p<n} χ_p(Δ^[p](x)) ψ_n(Δ^[n](x))`.
    fn scale_weight(&self, n: usize, x: f64) -> f64 {
        let p = self.cutoff_product(n, x);
        if p == 0.0 {
            0.0
        } else {
            p * self.family.psi(n, self.delta(n, x))
        }
    }

    /// Scale-`n` internal propagator dressed with `M^[0]` only.
    fn internal_propagator(&self, n: usize, y: f64) -> Result<CMatrix> {
        let d = self.d();
        let w = self.scale_weight(n, y);
        if w == 0.0 {
            return Ok(CMatrix::zeros(d, d));
        }
        let a = DMatrix::<f64>::identity(d, d) * (y * y) - &self.m0_real;
        let inv = a.try_inverse().ok_or(Error::SingularDivisor {
            x2: y * y,
            index: 0,
            lambda: y * y,
        })?;
        Ok(inv.map(|v| C64::new(v * w, 0.0)))
    }

    /// `S_n(x)`, the two-node cluster sum with internal line on scale `n−1`.
    fn cluster_sum(&self, n: usize, x: f64) -> Result<CMatrix> {
        let d = self.d();
        let mut s = CMatrix::zeros(d, d);
        for p in &self.pairs {
            let g_chain = self.internal_propagator(n - 1, x + p.w2)?;
            let inner = (p.m1.transpose() * &g_chain * &p.m2)[(0, 0)];
            s += (&p.m1 * p.m2.transpose()) * (p.coeff * inner);
            let g_tad = self.internal_propagator(n - 1, p.w2)?;
            let inner = (p.m1.transpose() * &g_tad * &p.m2)[(0, 0)];
            s += (&p.m1 * p.m1.transpose()) * (p.coeff * inner);
        }
        Ok(s)
    }

    /// `M^[n](x)`.
    pub fn self_energy_matrix(&self, n: usize, x: f64) -> Result<CMatrix> {
        let d = self.d();
        if n == 0 {
            return Ok(self.m0.clone());
        }
        self.require_scale(n - 1)?;
        if self.k_max < 2 || self.eps == 0.0 {
            return Ok(CMatrix::zeros(d, d));
        }
        let p = self.cutoff_product(n, x);
        if p == 0.0 {
            return Ok(CMatrix::zeros(d, d));
        }
        Ok(self.cluster_sum(n, x)? * C64::new(p * self.eps * self.eps, 0.0))
    }

    /// `M^{≤n}(x)`.
    pub fn cumulative(&self, n: usize, x: f64) -> Result<CMatrix> {
        let mut m = self.m0.clone();
        for p in 1..=n {
            m += self.self_energy_matrix(p, x)?;
        }
        Ok(m)
    }

    /// Eigenpairs of `M^{≤n}(x)`, ascending.
    pub fn eigen(&self, n: usize, x: f64) -> Result<(Vec<f64>, Vec<DVector<C64>>)> {
        let m = self.cumulative(n, x)?;
        let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(h);
        let mut idx: Vec<usize> = (0..self.d()).collect();
        idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        Ok((
            idx.iter().map(|&i| eig.eigenvalues[i]).collect(),
            idx.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect(),
        ))
    }

    /// Adds `λ̲^[n]` for the next scale.
    pub fn advance(&mut self) -> Result<()> {
        let n = self.lambda_bar.len();
        let r = self.model.r;
        let elliptic = self.model.torus_kind(self.eps) == TorusKind::Elliptic;
        let prev = self.lambda_bar[n - 1].clone();
        let mut next = Vec::with_capacity(self.d());
        let mut vecs = Vec::with_capacity(self.d());
        for (j, &lb) in prev.iter().enumerate() {
            let x = if j < r {
                0.0
            } else if lb >= 0.0 {
                lb.sqrt()
            } else if elliptic {
                return Err(Error::NegativeSelfEnergy {
                    scale: n - 1,
                    index: j,
                    value: lb,
                });
            } else if self.k_max < 2 {
                0.0
            } else {
                return Err(Error::Precondition(
                    "degree-two recursion needs an elliptic or maximal configuration".into(),
                ));
            };
            let (vals, evs) = self.eigen(n, x)?;
            let best = vals
                .iter()
                .map(|v| (v - lb).abs())
                .fold(f64::INFINITY, f64::min);
            let tol = MATCH_TIE_TOL * lb.abs().max(self.eps.abs()).max(1e-300);
            let old = &self.eigvecs[n - 1][j];
            let k = (0..vals.len())
                .filter(|&k| (vals[k] - lb).abs() <= best + tol)
                .max_by(|&a, &b| {
                    let oa = (old.adjoint() * &evs[a])[(0, 0)].norm();
                    let ob = (old.adjoint() * &evs[b])[(0, 0)].norm();
                    oa.total_cmp(&ob)
                })
                .expect("at least one eigenvalue");
            if elliptic && j >= r && vals[k] < 0.0 {
                return Err(Error::NegativeSelfEnergy {
                    scale: n,
                    index: j,
                    value: vals[k],
                });
            }
            next.push(vals[k]);
            vecs.push(evs[k].clone());
        }
        self.lambda_bar.push(next);
        self.eigvecs.push(vecs);
        Ok(())
    }

    /// Bound `K1 (C0 γ*_n)^{−2}` on scale-`n` propagators.
    pub fn propagator_norm_bound(&self, n: usize) -> f64 {
        k1(self.d()) / self.family.profile.alpha_star(n).powi(2)
    }

    /// `max_j |λ̲^[n]_j − λ̲^[n−1]_j| / ε²` for `n = 1..=top`.
    pub fn closeness(&self) -> Vec<f64> {
        let e2 = self.eps * self.eps;
        self.lambda_bar
            .windows(2)
            .map(|w| {
                w[0].iter()
                    .zip(&w[1])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
                    / e2
            })
            .collect()
    }

    /// JSON-ready dump of `λ̲` and `M^{≤n}` on a probe grid.
    pub fn dump(&self, probes: &[f64]) -> Result<StateDump> {
        let mut scales = Vec::new();
        for n in 0..=self.top_scale() {
            let mut entries = Vec::new();
            for &x in probes {
                let m = self.cumulative(n, x)?;
                entries.push(ProbeDump {
                    x,
                    re: (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].re).collect()).collect(),
                    im: (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].im).collect()).collect(),
                });
            }
            scales.push(ScaleDump {
                n,
                lambda_bar: self.lambda_bar[n].clone(),
                probes: entries,
            });
        }
        Ok(StateDump {
            eps: self.eps,
            k_max: self.k_max,
            scales,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeDump {
    pub x: f64,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleDump {
    pub n: usize,
    pub lambda_bar: Vec<f64>,
    pub probes: Vec<ProbeDump>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateDump {
    pub eps: f64,
    pub k_max: usize,
    pub scales: Vec<ScaleDump>,
}

/// `Δ^[n](x)`; errors when `x²` hits some `λ̲^[n]_j`.
pub fn propagator_divisor(x: f64, n: usize, state: &SelfEnergyState) -> Result<f64> {
    state.require_scale(n)?;
    let lambda = &state.lambda_bar[state.divisor_index(n)];
    if let Some((index, &l)) = lambda
        .iter()
        .enumerate()
        .find(|(_, l)| (x * x - **l).abs() < SINGULAR_TOL)
    {
        return Err(Error::SingularDivisor {
            x2: x * x,
            index,
            lambda: l,
        });
    }
    Ok(divisor(x * x, lambda))
}

/// `g^[n](x) = Π_{p<n} χ_p ψ_n (x² − M^{≤n}(x))⁻¹`, with the lower bound
/// `min_j |x² − λ_j(x)| ≥ ½ min_j |x² − λ̲^[n]_j|` enforced when nonzero.
pub fn propagator(x: f64, n: usize, state: &SelfEnergyState) -> Result<CMatrix> {
    let d = state.d();
    for p in 0..=n {
        propagator_divisor(x, p, state)?;
    }
    let w = state.scale_weight(n, x);
    if w == 0.0 {
        return Ok(CMatrix::zeros(d, d));
    }
    let (vals, _) = state.eigen(n, x)?;
    let dressed = vals.iter().map(|l| (x * x - l).abs()).fold(f64::INFINITY, f64::min);
    let bare = state.lambda_bar[n]
        .iter()
        .map(|l| (x * x - l).abs())
        .fold(f64::INFINITY, f64::min);
    if dressed < 0.5 * bare {
        return Err(Error::PropagatorBound {
            x,
            scale: n,
            dressed,
            half_bare: 0.5 * bare,
        });
    }
    let a = CMatrix::identity(d, d) * C64::new(x * x, 0.0) - state.cumulative(n, x)?;
    let inv = a.try_inverse().ok_or(Error::SingularDivisor {
        x2: x * x,
        index: 0,
        lambda: x * x,
    })?;
    Ok(inv * C64::new(w, 0.0))
}

/// `λ̲^[n]` after one more recursion step.
pub fn self_energy_recursion(state: &mut SelfEnergyState) -> Result<&[f64]> {
    state.advance()?;
    Ok(state.lambda_bar.last().unwrap())
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// `(‖M − M†‖, ‖Mᵀ(x) − M(−x)‖)` for `M^{≤n}`.
pub fn symmetry_defects(state: &SelfEnergyState, n: usize, x: f64) -> Result<(f64, f64)> {
    let m = state.cumulative(n, x)?;
    let mm = state.cumulative(n, -x)?;
    Ok((max_abs(&(&m - m.adjoint())), max_abs(&(m.transpose() - mm))))
}

/// Frobenius norms of the `αα`, `αβ`, `ββ` blocks.
pub fn block_norms(m: &CMatrix, r: usize) -> [f64; 3] {
    let d = m.nrows();
    let norm = |rows: std::ops::Range<usize>, cols: std::ops::Range<usize>| {
        let mut acc = 0.0;
        for i in rows {
            for j in cols.clone() {
                acc += m[(i, j)].norm_sqr();
            }
        }
        acc.sqrt()
    };
    [norm(0..r, 0..r), norm(0..r, r..d), norm(r..d, r..d)]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockExponents {
    pub scale: usize,
    /// Fits of `log‖block‖` against `log ε` at fixed `x`.
    pub eps: [LineFit; 3],
    /// Fits against `log |x|` at fixed `ε`.
    pub x: [LineFit; 3],
}

/// Fits the `ε` and `x` exponents of the blocks of `M^[n]`.
#[allow(clippy::too_many_arguments)]
pub fn fit_block_exponents(
    model: &FourierModel,
    omega: &RotationVector,
    profile: &BryunoProfile,
    n: usize,
    eps_list: &[f64],
    x_fixed: f64,
    x_list: &[f64],
    eps_fixed: f64,
) -> Result<BlockExponents> {
    if n == 0 || model.s == 0 {
        return Err(Error::Precondition("block fits need n ≥ 1 and s ≥ 1".into()));
    }
    let mut by_eps = [Vec::new(), Vec::new(), Vec::new()];
    for &e in eps_list {
        let st = SelfEnergyState::build(model, omega, profile, e, 2, n - 1)?;
        let b = block_norms(&st.self_energy_matrix(n, x_fixed)?, model.r);
        for k in 0..3 {
            by_eps[k].push(b[k]);
        }
    }
    let st = SelfEnergyState::build(model, omega, profile, eps_fixed, 2, n - 1)?;
    let mut by_x = [Vec::new(), Vec::new(), Vec::new()];
    for &x in x_list {
        let b = block_norms(&st.self_energy_matrix(n, x)?, model.r);
        for k in 0..3 {
            by_x[k].push(b[k]);
        }
    }
    let xs: Vec<f64> = x_list.iter().map(|x| x.abs()).collect();
    Ok(BlockExponents {
        scale: n,
        eps: [
            loglog(eps_list, &by_eps[0])?,
            loglog(eps_list, &by_eps[1])?,
            loglog(eps_list, &by_eps[2])?,
        ],
        x: [loglog(&xs, &by_x[0])?, loglog(&xs, &by_x[1])?, loglog(&xs, &by_x[2])?],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WhitneyReport {
    /// `‖M(x') − M(x)‖ / (|x' − x| ε²)`.
    pub dx_ratio: f64,
    /// Log-log slope of the first-order Taylor remainder in `h`.
    pub taylor_slope: f64,
    /// `‖M(ω'·ν; ω') − M(ω·ν; ω)‖ / (ε² |ν| |ω' − ω|)`.
    pub domega_ratio: f64,
    /// `(λ̲_j(ε') − λ̲_j(ε)) / (ε' − ε)` for `j > r`.
    pub deps_lambda: Vec<f64>,
    pub deps_lower: f64,
    pub deps_upper: f64,
    pub deps_bracketed: bool,
    pub pass: bool,
}

/// Finite-difference regularity checks of `M^{≤n}` in `x`, `ω` and `ε`.
#[allow(clippy::too_many_arguments)]
pub fn whitney_checks(
    state: &SelfEnergyState,
    n: usize,
    x: f64,
    x2: f64,
    nu: &[i32],
    omega2: &RotationVector,
    eps2: f64,
) -> Result<WhitneyReport> {
    state.require_scale(n)?;
    let e2 = state.eps * state.eps;
    let fd = |a: f64, b: f64| -> Result<f64> {
        Ok(max_abs(&(state.cumulative(n, b)? - state.cumulative(n, a)?)) / (b - a).abs())
    };
    let dx_ratio = if e2 > 0.0 { fd(x, x2)? / e2 } else { 0.0 };

    let h0 = 1e-6 * x.abs().max(1e-3);
    let deriv = (state.cumulative(n, x + h0)? - state.cumulative(n, x - h0)?) * C64::new(0.5 / h0, 0.0);
    let base = state.cumulative(n, x)?;
    let hs: Vec<f64> = (0..5).map(|k| 1e-2 * x.abs().max(1e-2) * 0.5f64.powi(k)).collect();
    let mut rem = Vec::new();
    for &h in &hs {
        let r = state.cumulative(n, x + h)? - &base - &deriv * C64::new(h, 0.0);
        rem.push(max_abs(&r));
    }
    let taylor_slope = if rem.iter().all(|&v| v > 1e-300) {
        loglog(&hs, &rem)?.slope
    } else {
        f64::INFINITY
    };

    let st_omega = SelfEnergyState::build(
        &state.model,
        omega2,
        &state.family.profile,
        state.eps,
        state.k_max,
        n,
    )?;
    let dw: f64 = state
        .omega
        .components()
        .iter()
        .zip(omega2.components())
        .map(|(a, b)| (a - b).abs())
        .sum();
    let nu_norm = crate::norm1(nu).max(1) as f64;
    let m1 = state.cumulative(n, state.omega.dot(nu))?;
    let m2 = st_omega.cumulative(n, omega2.dot(nu))?;
    let domega_ratio = if e2 > 0.0 {
        max_abs(&(m2 - m1)) / (e2 * nu_norm * dw)
    } else {
        0.0
    };

    let st_eps = SelfEnergyState::build(
        &state.model,
        &state.omega,
        &state.family.profile,
        eps2,
        state.k_max,
        n,
    )?;
    let r = state.model.r;
    let deps_lambda: Vec<f64> = (r..state.d())
        .map(|j| (st_eps.lambda_bar[n][j] - state.lambda_bar[n][j]) / (eps2 - state.eps))
        .collect();
    let a_abs: Vec<f64> = state.model.hessian_eigs.iter().map(|a| a.abs()).collect();
    let deps_lower = a_abs.iter().cloned().fold(f64::INFINITY, f64::min) / 2.0;
    let deps_upper = 2.0 * a_abs.iter().cloned().fold(0.0, f64::max);
    let deps_bracketed = deps_lambda
        .iter()
        .all(|v| v.abs() >= deps_lower && v.abs() <= deps_upper);
    let pass = dx_ratio.is_finite() && domega_ratio.is_finite() && taylor_slope >= 1.5 && deps_bracketed;
    Ok(WhitneyReport {
        dx_ratio,
        taylor_slope,
        domega_ratio,
        deps_lambda,
        deps_lower,
        deps_upper,
        deps_bracketed,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arithmetic::{make_profile, ProfileKind};
    use crate::model::bundled;
    use proptest::prelude::*;

    fn elliptic_state(eps: f64, n: usize) -> SelfEnergyState {
        let omega = RotationVector::new(&[1.0]).unwrap();
        let p = make_profile(&omega, 0.5, &ProfileKind::Identity, 10).unwrap();
        SelfEnergyState::build(&bundled::elliptic(), &omega, &p, eps, 2, n).unwrap()
    }

    fn unit_family() -> CutoffFamily {
        CutoffFamily::new(BryunoProfile::from_parts(1.0, 1, vec![1.0; 4], ProfileMode::Theorem1).unwrap())
    }

    #[test]
    fn cutoff_plateau_and_support() {
        let f = unit_family();
        assert_eq!(chi_n(0.01 * BETA * BETA, 0, &f), 1.0);
        assert_eq!(chi_n(2.0 * BETA * BETA, 0, &f), 0.0);
        let mut last = 1.0;
        for k in 0..=100 {
            let x = BETA * BETA * (0.25 + 0.75 * k as f64 / 100.0);
            let v = chi_n(x, 0, &f);
            assert!((0.0..=1.0).contains(&v) && v <= last);
            last = v;
        }
    }

    #[test]
    fn bump_is_c1_at_the_edges() {
        let h = 1e-6;
        let c0 = 1.0;
        for y in [0.25, 1.0] {
            let left = (bump(y, c0) - bump(y - h, c0)) / h;
            let right = (bump(y + h, c0) - bump(y, c0)) / h;
            assert!(left.abs() < 1e-4 && right.abs() < 1e-4);
        }
    }

    #[test]
    fn divisor_closed_forms() {
        let maximal = bundled::maximal();
        let omega = RotationVector::golden();
        let p = make_profile(&omega, 0.2, &ProfileKind::Identity, 6).unwrap();
        let st = SelfEnergyState::new(&maximal, &omega, &p, 0.01, 2).unwrap();
        // d = 2, λ̲ = 0: Δ = x².
        assert!((propagator_divisor(0.3, 0, &st).unwrap() - 0.09).abs() < 1e-15);
        let st = elliptic_state(0.01, 0);
        let x: f64 = 0.2;
        let t1 = x * x;
        let t2 = x * x - 0.01;
        let direct = ((t1.powi(-2) + t2.powi(-2)) / 2.0).powf(-0.5);
        assert!((propagator_divisor(x, 0, &st).unwrap() - direct).abs() < 1e-15);
        assert!(matches!(
            propagator_divisor(0.1, 0, &st),
            Err(Error::SingularDivisor { .. })
        ));
        assert!(matches!(
            propagator_divisor(0.0, 0, &st),
            Err(Error::SingularDivisor { .. })
        ));
    }

    #[test]
    fn degree_one_reproduces_initialization() {
        let st = elliptic_state(0.01, 0);
        assert_eq!(st.lambda_bar[0], vec![0.0, 0.01]);
        let (vals, _) = st.eigen(0, 0.37).unwrap();
        assert!((vals[0]).abs() < 1e-15 && (vals[1] - 0.01).abs() < 1e-15);
        let zero = elliptic_state(0.0, 2);
        assert_eq!(max_abs(&zero.cumulative(2, 0.3).unwrap()), 0.0);
    }

    #[test]
    fn degree_one_recursion_is_stationary() {
        let omega = RotationVector::golden();
        let p = make_profile(&omega, 0.2, &ProfileKind::Identity, 6).unwrap();
        let st = SelfEnergyState::build(&bundled::cantor(), &omega, &p, 0.01, 1, 3).unwrap();
        for l in &st.lambda_bar {
            assert_eq!(l, &st.lambda_bar[0]);
        }
    }

    #[test]
    fn first_step_is_order_eps_squared() {
        for eps in [1e-3, 1e-2] {
            let st = elliptic_state(eps, 1);
            let diff = (st.lambda_bar[1][1] - st.lambda_bar[0][1]).abs();
            assert!(diff > 0.0 && diff < 10.0 * eps * eps, "{diff}");
        }
    }

    #[test]
    fn off_scale_self_energy_vanishes() {
        // With ω = 1 there are no small divisors: nothing beyond scale 1.
        let st = elliptic_state(0.01, 3);
        for x in [0.05, 0.1, 0.3] {
            assert_eq!(max_abs(&st.self_energy_matrix(2, x).unwrap()), 0.0);
            assert_eq!(max_abs(&st.self_energy_matrix(3, x).unwrap()), 0.0);
        }
    }

    #[test]
    fn plateau_line_has_zero_propagator() {
        let st = elliptic_state(0.01, 2);
        // |x| ≥ C0 sits on scale 0 only.
        assert_eq!(max_abs(&propagator(2.0, 1, &st).unwrap()), 0.0);
        let g = propagator(2.0, 0, &st).unwrap();
        assert!(max_abs(&g) > 0.0 && max_abs(&g) <= st.propagator_norm_bound(0));
    }

    #[test]
    fn maximal_sector_at_zero_eps_is_scalar() {
        let omega = RotationVector::golden();
        let p = make_profile(&omega, 0.2, &ProfileKind::Identity, 6).unwrap();
        let st = SelfEnergyState::build(&bundled::maximal(), &omega, &p, 0.0, 2, 1).unwrap();
        let x = 0.7;
        let g = propagator(x, 0, &st).unwrap();
        let w = st.family.psi(0, x * x);
        assert!((g[(0, 0)].re - w / (x * x)).abs() < 1e-15);
        assert_eq!(g[(0, 1)].norm(), 0.0);
    }

    #[test]
    fn whitney_degree_one_bracket() {
        let omega = RotationVector::new(&[1.0]).unwrap();
        let p = make_profile(&omega, 0.5, &ProfileKind::Identity, 10).unwrap();
        let st = SelfEnergyState::build(&bundled::elliptic(), &omega, &p, 0.01, 1, 1).unwrap();
        let w2 = RotationVector::new(&[1.001]).unwrap();
        let rep = whitney_checks(&st, 1, 0.05, 0.051, &[1], &w2, 0.011).unwrap();
        assert!((rep.deps_lambda[0] - 1.0).abs() < 1e-12);
        assert!(rep.deps_bracketed);
    }

    proptest! {
        #[test]
        fn hermitian_and_transpose_symmetric(x in -1.5f64..1.5, eps in 1e-4f64..2e-2) {
            let st = elliptic_state(eps, 2);
            let (h, t) = symmetry_defects(&st, 2, x).unwrap();
            prop_assert!(h < 1e-12 && t < 1e-12);
        }
    }
}
