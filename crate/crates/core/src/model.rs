//! The perturbation `f(α, β) = Σ c_{ν,μ} e^{i(ν·α + μ·β)}`, its stationary
//! point `β0` and the Hessian eigenvalues `a_i` of `f_0 = [f]_{ν=0}` there.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{phase, C64};
use crate::norm1;

/// `|∂_β f_0(β0)|` above this rejects `β0`.
pub const STATIONARITY_TOL: f64 = 1e-10;
/// `|a_i|` below this is a degenerate Hessian.
pub const EIGENVALUE_TOL: f64 = 1e-10;
/// Minimum gap between Hessian eigenvalues for the ε-parameter scans.
pub const DISTINCTNESS_TOL: f64 = 1e-6;
/// Tolerance on `c_{-ν,-μ} = conj c_{ν,μ}` for explicitly given pairs.
pub const REALITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeEntry {
    pub nu: Vec<i32>,
    pub mu: Vec<i32>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// On-disk model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub r: usize,
    pub s: usize,
    pub kappa0: f64,
    #[serde(default)]
    pub beta0: Vec<f64>,
    pub modes: Vec<ModeEntry>,
}

/// One Fourier mode `m = (ν, μ)` with coefficient `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub nu: Vec<i32>,
    pub mu: Vec<i32>,
    pub c: C64,
}

impl Mode {
    /// `(ν, μ)` as a `d`-vector.
    pub fn full(&self) -> Vec<i32> {
        self.nu.iter().chain(&self.mu).copied().collect()
    }

    pub fn is_zero_nu(&self) -> bool {
        self.nu.iter().all(|&k| k == 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TorusKind {
    /// `s = 0`: the torus is maximal.
    Maximal,
    /// Every `ε a_i > 0`.
    Elliptic,
    /// Every `ε a_i < 0`.
    Hyperbolic,
    Mixed,
}

#[derive(Debug, Clone)]
pub struct FourierModel {
    pub name: String,
    pub r: usize,
    pub s: usize,
    pub kappa0: f64,
    pub beta0: Vec<f64>,
    /// Sorted by `(ν, μ)`, conjugates included.
    pub modes: Vec<Mode>,
    /// `max |ν| + |μ|` over the modes.
    pub degree: u32,
    /// `max |c| e^{κ0 |ν|}`.
    pub f0_bound: f64,
    /// `∂²_β f_0(β0)`.
    pub hessian: DMatrix<f64>,
    /// Eigenvalues of the Hessian, ascending.
    pub hessian_eigs: Vec<f64>,
}

/// A point on the constructed torus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TorusPoint {
    pub psi: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// `ψ + a`.
    pub alpha: Vec<f64>,
    /// `β0 + b`.
    pub beta: Vec<f64>,
    #[serde(rename = "A")]
    pub action_a: Vec<f64>,
    #[serde(rename = "B")]
    pub action_b: Vec<f64>,
}

pub fn load_model(doc: &ModelDocument) -> Result<FourierModel> {
    FourierModel::from_document(doc)
}

impl FourierModel {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        Self::from_document(&doc)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut model = Self::from_json_str(&text)?;
        if model.name.is_empty() {
            model.name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
        }
        Ok(model)
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        let (r, s) = (doc.r, doc.s);
        if r == 0 {
            return Err(Error::Schema("r must be at least 1".into()));
        }
        if !(doc.kappa0 > 0.0) {
            return Err(Error::Schema("kappa0 must be positive".into()));
        }
        if doc.beta0.len() != s {
            return Err(Error::Schema(format!(
                "beta0 has {} entries, expected s = {s}",
                doc.beta0.len()
            )));
        }
        let mut table: BTreeMap<(Vec<i32>, Vec<i32>), C64> = BTreeMap::new();
        for m in &doc.modes {
            if m.nu.len() != r || m.mu.len() != s {
                return Err(Error::Schema(format!(
                    "mode ν = {:?}, μ = {:?} has wrong dimensions for r = {r}, s = {s}",
                    m.nu, m.mu
                )));
            }
            if !m.re.is_finite() || !m.im.is_finite() {
                return Err(Error::Schema("non-finite coefficient".into()));
            }
            if table
                .insert((m.nu.clone(), m.mu.clone()), C64::new(m.re, m.im))
                .is_some()
            {
                return Err(Error::Schema(format!(
                    "duplicate mode ν = {:?}, μ = {:?}",
                    m.nu, m.mu
                )));
            }
        }
        let keys: Vec<_> = table.keys().cloned().collect();
        for (nu, mu) in keys {
            let c = table[&(nu.clone(), mu.clone())];
            let conj_key = (nu.iter().map(|k| -k).collect::<Vec<_>>(), mu.iter().map(|k| -k).collect::<Vec<_>>());
            match table.get(&conj_key) {
                Some(&cc) => {
                    if (cc - c.conj()).norm() > REALITY_TOL * (1.0 + c.norm()) {
                        return Err(Error::Reality { nu, mu });
                    }
                }
                None => {
                    table.insert(conj_key, c.conj());
                }
            }
        }
        let modes: Vec<Mode> = table
            .into_iter()
            .filter(|(_, c)| c.norm() > 0.0)
            .map(|((nu, mu), c)| Mode { nu, mu, c })
            .collect();
        if modes.is_empty() {
            return Err(Error::Schema("model has no nonzero modes".into()));
        }
        let degree = modes.iter().map(|m| norm1(&m.nu) + norm1(&m.mu)).max().unwrap_or(0);
        let f0_bound = modes
            .iter()
            .map(|m| m.c.norm() * (doc.kappa0 * norm1(&m.nu) as f64).exp())
            .fold(0.0, f64::max);

        let mut model = FourierModel {
            name: doc.name.clone().unwrap_or_default(),
            r,
            s,
            kappa0: doc.kappa0,
            beta0: doc.beta0.clone(),
            modes,
            degree,
            f0_bound,
            hessian: DMatrix::zeros(s, s),
            hessian_eigs: Vec::new(),
        };
        if s > 0 {
            let grad = model.zero_mode_gradient();
            let residual = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if residual > STATIONARITY_TOL {
                return Err(Error::Stationarity { residual });
            }
            model.hessian = model.zero_mode_hessian();
            let mut eigs: Vec<f64> = SymmetricEigen::new(model.hessian.clone())
                .eigenvalues
                .iter()
                .copied()
                .collect();
            eigs.sort_by(f64::total_cmp);
            if let Some((index, &value)) = eigs.iter().enumerate().find(|(_, a)| a.abs() < EIGENVALUE_TOL) {
                return Err(Error::ZeroEigenvalue { index, value });
            }
            model.hessian_eigs = eigs;
        }
        Ok(model)
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            name: (!self.name.is_empty()).then(|| self.name.clone()),
            r: self.r,
            s: self.s,
            kappa0: self.kappa0,
            beta0: self.beta0.clone(),
            modes: self
                .modes
                .iter()
                .map(|m| ModeEntry {
                    nu: m.nu.clone(),
                    mu: m.mu.clone(),
                    re: m.c.re,
                    im: m.c.im,
                })
                .collect(),
        }
    }

    pub fn d(&self) -> usize {
        self.r + self.s
    }

    /// `c_m e^{iμ·β0}`: the coefficient seen by the expansion around `β0`.
    pub fn shifted_coefficient(&self, m: &Mode) -> C64 {
        m.c * C64::from_polar(1.0, phase(&m.mu, &self.beta0))
    }

    /// `∂_β f_0(β0)`.
    pub fn zero_mode_gradient(&self) -> Vec<f64> {
        let mut g = vec![0.0; self.s];
        for m in self.modes.iter().filter(|m| m.is_zero_nu()) {
            let c = self.shifted_coefficient(m) * C64::new(0.0, 1.0);
            for (j, &mj) in m.mu.iter().enumerate() {
                g[j] += (c * mj as f64).re;
            }
        }
        g
    }

    /// `∂²_β f_0(β0)`.
    pub fn zero_mode_hessian(&self) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.s, self.s);
        for m in self.modes.iter().filter(|m| m.is_zero_nu()) {
            let c = -self.shifted_coefficient(m);
            for i in 0..self.s {
                for j in 0..self.s {
                    h[(i, j)] += (c * (m.mu[i] * m.mu[j]) as f64).re;
                }
            }
        }
        h
    }

    /// Elliptic/hyperbolic/mixed classification from the signs of `ε a_i`.
    pub fn torus_kind(&self, eps: f64) -> TorusKind {
        if self.s == 0 {
            return TorusKind::Maximal;
        }
        if self.hessian_eigs.iter().all(|a| a * eps > 0.0) {
            TorusKind::Elliptic
        } else if self.hessian_eigs.iter().all(|a| a * eps < 0.0) {
            TorusKind::Hyperbolic
        } else {
            TorusKind::Mixed
        }
    }

    /// Pairwise distinct Hessian eigenvalues, as the ε-parameter scans need.
    pub fn check_distinct_eigs(&self) -> Result<()> {
        let a = &self.hessian_eigs;
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                if (a[i] - a[j]).abs() <= DISTINCTNESS_TOL {
                    return Err(Error::DegenerateSpectrum { i, j, ai: a[i], aj: a[j] });
                }
            }
        }
        Ok(())
    }

    /// Mixed partial derivative `∂^k f` at `(α, β)`; `multi_index[i]` is the
    /// derivative order in coordinate `i` of `(α, β)`.
    pub fn eval_f_derivatives(&self, alpha: &[f64], beta: &[f64], multi_index: &[usize]) -> f64 {
        assert_eq!(multi_index.len(), self.d());
        let i = C64::new(0.0, 1.0);
        self.modes
            .iter()
            .map(|m| {
                let full = m.full();
                let factor: C64 = full
                    .iter()
                    .zip(multi_index)
                    .map(|(&k, &p)| (i * k as f64).powu(p as u32))
                    .product();
                let ph = phase(&m.nu, alpha) + phase(&m.mu, beta);
                (m.c * factor * C64::from_polar(1.0, ph)).re
            })
            .sum()
    }

    pub fn eval_f(&self, alpha: &[f64], beta: &[f64]) -> f64 {
        self.eval_f_derivatives(alpha, beta, &vec![0; self.d()])
    }

    /// `∂_{(α,β)} f` at `(α, β)`.
    pub fn gradient(&self, alpha: &[f64], beta: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.d()];
        for m in &self.modes {
            let ph = phase(&m.nu, alpha) + phase(&m.mu, beta);
            let w = m.c * C64::new(0.0, 1.0) * C64::from_polar(1.0, ph);
            for (gk, k) in g.iter_mut().zip(m.full()) {
                *gk += (w * k as f64).re;
            }
        }
        g
    }

    /// Largest `|ν|` among the modes.
    pub fn max_nu_norm(&self) -> u32 {
        self.modes.iter().map(|m| norm1(&m.nu)).max().unwrap_or(0)
    }
}

/// Models shipped with the crate, addressable by name.
pub mod bundled {
    use super::*;

    pub const MAXIMAL: &str = include_str!("../models/maximal.json");
    pub const ELLIPTIC: &str = include_str!("../models/elliptic.json");
    pub const CANTOR: &str = include_str!("../models/cantor.json");
    pub const CANTOR_HYPERBOLIC: &str = include_str!("../models/cantor_hyperbolic.json");
    pub const ONE_MODE: &str = include_str!("../models/one_mode.json");

    pub fn names() -> &'static [&'static str] {
        &["maximal", "elliptic", "cantor", "cantor_hyperbolic", "one_mode"]
    }

    pub fn get(name: &str) -> Result<FourierModel> {
        let text = match name {
            "maximal" => MAXIMAL,
            "elliptic" => ELLIPTIC,
            "cantor" => CANTOR,
            "cantor_hyperbolic" => CANTOR_HYPERBOLIC,
            "one_mode" => ONE_MODE,
            other => return Err(Error::Schema(format!("unknown bundled model {other:?}"))),
        };
        FourierModel::from_json_str(text)
    }

    pub fn maximal() -> FourierModel {
        get("maximal").unwrap()
    }

    pub fn elliptic() -> FourierModel {
        get("elliptic").unwrap()
    }

    pub fn cantor() -> FourierModel {
        get("cantor").unwrap()
    }

    pub fn cantor_hyperbolic() -> FourierModel {
        get("cantor_hyperbolic").unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(r: usize, s: usize, beta0: Vec<f64>, modes: &[(&[i32], &[i32], f64)]) -> ModelDocument {
        ModelDocument {
            name: None,
            r,
            s,
            kappa0: 1.0,
            beta0,
            modes: modes
                .iter()
                .map(|(nu, mu, re)| ModeEntry {
                    nu: nu.to_vec(),
                    mu: mu.to_vec(),
                    re: *re,
                    im: 0.0,
                })
                .collect(),
        }
    }

    #[test]
    fn maximal_model_is_valid() {
        let m = bundled::maximal();
        assert_eq!((m.r, m.s, m.degree), (2, 0, 2));
        assert_eq!(m.modes.len(), 4);
        assert_eq!(m.torus_kind(0.1), TorusKind::Maximal);
    }

    #[test]
    fn vanishing_average_is_degenerate() {
        // cos α cos β has no ν = 0 component.
        let d = doc(1, 1, vec![0.0], &[(&[1], &[1], 0.25), (&[1], &[-1], 0.25)]);
        assert!(matches!(load_model(&d), Err(Error::ZeroEigenvalue { .. })));
    }

    #[test]
    fn cos_beta_plus_cos_alpha_beta() {
        // f = cos β + cos(α+β): f_0 = cos β, a_1 = −1.
        let d = doc(1, 1, vec![0.0], &[(&[0], &[1], 0.5), (&[1], &[1], 0.5)]);
        let m = load_model(&d).unwrap();
        assert!((m.hessian_eigs[0] + 1.0).abs() < 1e-15);
        assert_eq!(m.torus_kind(0.1), TorusKind::Hyperbolic);
        assert_eq!(m.torus_kind(-0.1), TorusKind::Elliptic);
    }

    #[test]
    fn schema_and_reality_errors() {
        assert!(matches!(
            FourierModel::from_json_str("{\"r\": 1}"),
            Err(Error::Schema(_))
        ));
        let mut d = doc(1, 0, vec![], &[(&[1], &[], 0.5), (&[-1], &[], 0.5)]);
        d.modes[1].im = 0.3;
        assert!(matches!(load_model(&d), Err(Error::Reality { .. })));
    }

    #[test]
    fn non_stationary_beta0_rejected() {
        let d = doc(1, 1, vec![0.4], &[(&[0], &[1], 0.5), (&[1], &[1], 0.5)]);
        assert!(matches!(load_model(&d), Err(Error::Stationarity { .. })));
    }

    #[test]
    fn derivative_examples() {
        let d = doc(1, 1, vec![0.0], &[(&[0], &[1], 0.5)]);
        let m = load_model(&d).unwrap();
        assert!((m.eval_f_derivatives(&[0.0], &[0.0], &[0, 2]) + 1.0).abs() < 1e-15);
        let d = doc(1, 1, vec![0.0], &[(&[0], &[1], 0.5), (&[1], &[1], 0.5)]);
        let m = load_model(&d).unwrap();
        // ∂α∂β cos(α+β) = −cos(α+β) = −1 at the origin.
        assert!((m.eval_f_derivatives(&[0.0], &[0.0], &[1, 1]) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn distinctness() {
        assert!(bundled::cantor().check_distinct_eigs().is_ok());
        let d = doc(1, 2, vec![0.0, 0.0], &[(&[0], &[1, 0], -0.5), (&[0], &[0, 1], -0.5), (&[1], &[1, 1], 0.5)]);
        let m = load_model(&d).unwrap();
        assert!(matches!(m.check_distinct_eigs(), Err(Error::DegenerateSpectrum { .. })));
    }

    proptest::proptest! {
        #[test]
        fn derivatives_match_finite_differences(
            a1 in -3.0f64..3.0, a2 in -3.0f64..3.0, b1 in -3.0f64..3.0, b2 in -3.0f64..3.0,
            idx in 0usize..4,
        ) {
            let m = bundled::cantor();
            let (al, be) = ([a1, a2], [b1, b2]);
            let h = 1e-5;
            let shift = |delta: f64| {
                let mut x = [a1, a2, b1, b2];
                x[idx] += delta;
                m.eval_f(&x[..2], &x[2..])
            };
            let fd = (shift(h) - shift(-h)) / (2.0 * h);
            let mut mi = [0usize; 4];
            mi[idx] = 1;
            let exact = m.eval_f_derivatives(&al, &be, &mi);
            proptest::prop_assert!((fd - exact).abs() < 1e-8);
            proptest::prop_assert!((m.gradient(&al, &be)[idx] - exact).abs() < 1e-12);
        }

        #[test]
        fn f_is_real_and_matches_alpha_derivative_coefficients(a in -3.0f64..3.0, b in -3.0f64..3.0) {
            // Fourier coefficients of ∂_α f are iν c: check against evaluation.
            let m = bundled::elliptic();
            let direct: f64 = m.modes.iter().map(|md| {
                (md.c * C64::new(0.0, md.nu[0] as f64) * C64::from_polar(1.0, md.nu[0] as f64 * a + md.mu[0] as f64 * b)).re
            }).sum();
            proptest::prop_assert!((direct - m.gradient(&[a], &[b])[0]).abs() < 1e-12);
            let im: f64 = m.modes.iter().map(|md| (md.c * C64::from_polar(1.0, md.nu[0] as f64 * a + md.mu[0] as f64 * b)).im).sum();
            proptest::prop_assert!(im.abs() < 1e-12);
        }
    }
}
