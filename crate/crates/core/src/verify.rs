//! Residual, decay and propagator-product audits, and the aggregated lemma
//! suite.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::arithmetic::{generalized_bryuno_sum, make_profile, BryunoProfile, ProfileKind, RotationVector};
use crate::config::Thresholds;
use crate::error::{Error, Result};
use crate::expansion::{expand_torus, TorusExpansion};
use crate::fit::{loglog, ols};
use crate::model::{bundled, FourierModel};
use crate::multiscale::{propagator, symmetry_defects, whitney_checks, SelfEnergyState};
use crate::norm1;
use crate::trees::{counting_sweep, scale_assignments, CountingMode, Tree, TreeForest};

/// `sup_ψ ‖(ω·∂)² h + ε ∂f(ψ + a, β0 + b)‖_∞` over a uniform grid with
/// `grid` points per angle.
pub fn residual_sup(exp: &TorusExpansion, model: &FourierModel, eps: f64, grid: usize) -> f64 {
    let r = model.r;
    let total = grid.pow(r as u32);
    (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut psi = vec![0.0; r];
            for p in psi.iter_mut() {
                *p = (idx % grid) as f64 * std::f64::consts::TAU / grid as f64;
                idx /= grid;
            }
            let h = exp.flow_derivative(&psi, eps, 0);
            let d2 = exp.flow_derivative(&psi, eps, 2);
            let alpha: Vec<f64> = psi.iter().zip(&h[..r]).map(|(p, a)| p + a).collect();
            let beta: Vec<f64> = exp.beta0.iter().zip(&h[r..]).map(|(p, b)| p + b).collect();
            let g = model.gradient(&alpha, &beta);
            d2.iter()
                .zip(&g)
                .map(|(a, b)| (a + eps * b).abs())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub k: usize,
    pub eps: f64,
    pub sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualFit {
    pub k: usize,
    pub slope: f64,
    pub slope_stderr: f64,
    pub expected: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub model: String,
    pub rows: Vec<ResidualRow>,
    pub fits: Vec<ResidualFit>,
    pub pass: bool,
}

/// Sup-residual for each truncation order and `ε`, with the log-log slope
/// per order compared against `K + 1`.
pub fn residual_scan(
    model: &FourierModel,
    omega: &RotationVector,
    profile: &BryunoProfile,
    k_list: &[usize],
    eps_list: &[f64],
    grid: usize,
    slope_tol: f64,
) -> Result<ResidualReport> {
    let k_top = k_list.iter().copied().max().unwrap_or(0).max(1);
    let full = expand_torus(model, omega, profile, k_top)?;
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for &k in k_list {
        let exp = full.truncated(k);
        let sups: Vec<f64> = eps_list
            .iter()
            .map(|&e| residual_sup(&exp, model, e, grid))
            .collect();
        for (&eps, &sup) in eps_list.iter().zip(&sups) {
            rows.push(ResidualRow { k, eps, sup });
        }
        if eps_list.len() >= 2 {
            let f = loglog(eps_list, &sups)?;
            let expected = (k + 1) as f64;
            fits.push(ResidualFit {
                k,
                slope: f.slope,
                slope_stderr: f.slope_stderr,
                expected,
                pass: (f.slope - expected).abs() <= slope_tol,
            });
        }
    }
    let pass = !fits.is_empty() && fits.iter().all(|f| f.pass);
    Ok(ResidualReport {
        model: model.name.clone(),
        rows,
        fits,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// `(|ν|, max_{|ν'| = |ν|} ‖h_ν'‖)`.
    pub shells: Vec<(u32, f64)>,
    pub slope: f64,
    pub kappa: f64,
}

/// Fits `log max‖h_ν‖` per shell against `|ν|`.
pub fn decay_fit_shells(shells: &[(u32, f64)]) -> Result<DecayFit> {
    let pts: Vec<(u32, f64)> = shells.iter().copied().filter(|(_, v)| *v > 0.0).collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} populated |ν| shells, need at least 2",
            pts.len()
        )));
    }
    let x: Vec<f64> = pts.iter().map(|(n, _)| *n as f64).collect();
    let y: Vec<f64> = pts.iter().map(|(_, v)| v.ln()).collect();
    let f = ols(&x, &y)?;
    Ok(DecayFit {
        shells: pts,
        slope: f.slope,
        kappa: -f.slope,
    })
}

/// Decay rate of the summed coefficients `h_ν(ε)` over `|ν|` shells
/// (`ν = 0` excluded).
pub fn decay_fit(exp: &TorusExpansion, eps: f64) -> Result<DecayFit> {
    let mut shells: std::collections::BTreeMap<u32, f64> = Default::default();
    let mut keys: Vec<Vec<i32>> = exp.orders.iter().flat_map(|o| o.keys().cloned()).collect();
    keys.sort();
    keys.dedup();
    for nu in keys {
        let m = norm1(&nu);
        if m == 0 {
            continue;
        }
        let v = exp
            .summed_coefficient(&nu, eps)
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        let e = shells.entry(m).or_insert(0.0);
        *e = e.max(v);
    }
    decay_fit_shells(&shells.into_iter().collect::<Vec<_>>())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductRow {
    pub k: usize,
    pub trees: usize,
    pub assignments: usize,
    /// `max log Π_ℓ ‖g^{[n_ℓ]}(ω·ν_ℓ)‖` over trees and scale assignments.
    pub max_log_product: f64,
    /// `4 N k B(ω)`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductAudit {
    pub bryuno: f64,
    pub degree: u32,
    pub rows: Vec<ProductRow>,
    /// Slope `b` of `max_log_product ≈ a + b k`.
    pub slope: Option<f64>,
    pub slope_limit: f64,
    pub pass: bool,
}

/// Propagator products over every tree of order `≤ k_max` and every
/// admissible scale assignment.
pub fn product_bound_audit(
    model: &FourierModel,
    omega: &RotationVector,
    profile: &BryunoProfile,
    k_max: usize,
    eps: f64,
    budget: u64,
) -> Result<ProductAudit> {
    let state = SelfEnergyState::build(model, omega, profile, eps, 1, profile.n_max())?;
    let forest = TreeForest::generate(model, k_max, budget)?;
    let alphas = omega.alphas(profile.n_max())?;
    let bryuno = generalized_bryuno_sum(&alphas, profile.n_max());
    let degree = model.max_nu_norm();
    let mut rows = Vec::new();
    for k in 1..=k_max {
        let roots: Vec<_> = forest.levels[k - 1].values().flatten().collect();
        let per_tree: Vec<Result<(usize, f64)>> = roots
            .par_iter()
            .map(|root| {
                let mut tree = Tree::from_node(root, model);
                let assignments = scale_assignments(&tree, omega, profile)?;
                let mut best = f64::NEG_INFINITY;
                for a in &assignments {
                    tree.scales = a.clone();
                    let mut log = 0.0;
                    for (v, s) in tree.scales.iter().enumerate() {
                        let Some(n) = *s else { continue };
                        let x = omega.dot(&tree.line_momentum[v]);
                        let g = propagator(x, n, &state)?.norm();
                        log += g.ln();
                    }
                    best = best.max(log);
                }
                Ok((assignments.len(), best))
            })
            .collect();
        let mut assignments = 0;
        let mut best = f64::NEG_INFINITY;
        for r in per_tree {
            let (a, b) = r?;
            assignments += a;
            best = best.max(b);
        }
        rows.push(ProductRow {
            k,
            trees: roots.len(),
            assignments,
            max_log_product: best,
            bound: 4.0 * degree as f64 * k as f64 * bryuno,
        });
    }
    let finite: Vec<&ProductRow> = rows.iter().filter(|r| r.max_log_product.is_finite()).collect();
    let slope = if finite.len() >= 2 {
        let x: Vec<f64> = finite.iter().map(|r| r.k as f64).collect();
        let y: Vec<f64> = finite.iter().map(|r| r.max_log_product).collect();
        Some(ols(&x, &y)?.slope)
    } else {
        None
    };
    let slope_limit = 4.0 * degree as f64 * bryuno;
    let pass = slope.map(|b| b <= slope_limit).unwrap_or(true);
    Ok(ProductAudit {
        bryuno,
        degree,
        rows,
        slope,
        slope_limit,
        pass,
    })
}

/// Which checks the suite runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteScope {
    pub checks: Vec<String>,
    /// Tree order for the counting checks.
    pub k_max: usize,
    /// Inflate `γ*` by 16 in the counting checks.
    pub inject_fault: bool,
    pub seed: u64,
}

pub const SUITE_CHECKS: [&str; 7] = [
    "counting_lemmas",
    "counting_damped",
    "closeness",
    "propagator_bounds",
    "self_energy_symmetry",
    "regularity",
    "product_bound",
];

impl SuiteScope {
    /// `default` (every check), `empty`, or a comma-separated list.
    pub fn parse(spec: &str) -> Result<Self> {
        let checks: Vec<String> = match spec.trim() {
            "default" | "all" => SUITE_CHECKS.iter().map(|s| s.to_string()).collect(),
            "empty" | "" => Vec::new(),
            list => {
                let names: Vec<String> = list.split(',').map(|s| s.trim().to_string()).collect();
                if let Some(bad) = names.iter().find(|n| !SUITE_CHECKS.contains(&n.as_str())) {
                    return Err(Error::Schema(format!(
                        "unknown check `{bad}`; known: {}",
                        SUITE_CHECKS.join(", ")
                    )));
                }
                names
            }
        };
        Ok(Self {
            checks,
            k_max: 4,
            inject_fault: false,
            seed: 0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub inputs: serde_json::Value,
    pub observed: serde_json::Value,
    pub threshold: String,
    pub pass: bool,
    pub witness: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationSuite {
    pub scope: SuiteScope,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

impl VerificationSuite {
    /// Copy with wall-clock data removed, for reproducible artifacts.
    pub fn without_timings(&self) -> Self {
        let mut s = self.clone();
        for c in &mut s.checks {
            c.runtime_ms = None;
        }
        s
    }
}

fn to_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

fn run_check(name: &str, scope: &SuiteScope, th: &Thresholds) -> Result<CheckResult> {
    let golden = RotationVector::golden();
    let unit = RotationVector::new(&[1.0])?;
    let fault = if scope.inject_fault { 16.0 } else { 1.0 };
    let check = |inputs, observed, threshold: &str, pass, witness| CheckResult {
        name: name.to_string(),
        inputs,
        observed,
        threshold: threshold.to_string(),
        pass,
        witness,
        runtime_ms: None,
    };
    Ok(match name {
        "counting_lemmas" => {
            let p = make_profile(&golden, 0.2, &ProfileKind::Identity, 10)?.scaled(fault);
            let rep = counting_sweep(&bundled::maximal(), &golden, &p, scope.k_max, CountingMode::Theorem1, th.tree_budget)?;
            check(
                json!({"model": "maximal", "omega": "golden", "c0": 0.2, "k_max": scope.k_max, "gamma_scale": fault}),
                to_json(&rep),
                &format!("N_n <= {}·2^-n·M, M(T) > 2^(n_T-1), |nu| > 2^(n-1)", th.counting_k),
                rep.pass(),
                rep.witness.as_ref().map(|w| format!("{}: {} [{}]", w.check, w.detail, w.tree)),
            )
        }
        "counting_damped" => {
            let model = bundled::cantor();
            let lambda0 = 1e-2 * model.hessian_eigs.iter().cloned().fold(0.0, f64::max);
            let p = make_profile(&golden, 0.2, &ProfileKind::Theorem2 { lambda0 }, 10)?.scaled(fault);
            let k = scope.k_max.min(3);
            let rep = counting_sweep(&model, &golden, &p, k, CountingMode::Theorem2, th.tree_budget)?;
            check(
                json!({"model": "cantor", "omega": "golden", "lambda0": lambda0, "k_max": k, "gamma_scale": fault}),
                to_json(&rep),
                &format!("N_n <= {}·2^(-n/2)·M", th.counting_k),
                rep.pass(),
                rep.witness.as_ref().map(|w| format!("{}: {} [{}]", w.check, w.detail, w.tree)),
            )
        }
        "closeness" => {
            let p = make_profile(&unit, 0.5, &ProfileKind::Identity, 10)?;
            let mut ratios = Vec::new();
            let mut ok = true;
            for eps in [1e-3, 1e-2] {
                let st = SelfEnergyState::build(&bundled::elliptic(), &unit, &p, eps, 2, 4)?;
                let c = st.closeness();
                ok &= c.iter().all(|v| v.is_finite()) && c.windows(2).all(|w| w[1] <= w[0]);
                ratios.push(json!({"eps": eps, "ratios": c}));
            }
            check(
                json!({"model": "elliptic", "omega": [1.0], "n_max": 4}),
                json!(ratios),
                "max_j |lambda^[n] - lambda^[n-1]| / eps^2 finite and non-increasing",
                ok,
                None,
            )
        }
        "propagator_bounds" => {
            let mut evaluated = 0usize;
            let mut worst: f64 = 0.0;
            let mut witness = None;
            let cases = [
                (bundled::elliptic(), unit.clone(), 0.5),
                (bundled::cantor(), golden.clone(), 0.2),
            ];
            for (model, omega, c0) in &cases {
                let p = make_profile(omega, *c0, &ProfileKind::Identity, 10)?;
                let st = SelfEnergyState::build(model, omega, &p, 1e-2, 2, 3)?;
                for i in 0..=600 {
                    let x = -3.0 + 6.0 * (i as f64 + 0.37) / 600.0;
                    for n in 0..=3 {
                        match propagator(x, n, &st) {
                            Ok(g) => {
                                evaluated += 1;
                                let ratio = g.norm() / st.propagator_norm_bound(n);
                                worst = worst.max(ratio);
                                if ratio > 1.0 && witness.is_none() {
                                    witness = Some(format!("{}: x = {x:e}, n = {n}, ratio {ratio:e}", model.name));
                                }
                            }
                            Err(Error::SingularDivisor { .. }) => {}
                            Err(e) => {
                                if witness.is_none() {
                                    witness = Some(format!("{}: {e}", model.name));
                                }
                                worst = f64::INFINITY;
                            }
                        }
                    }
                }
            }
            check(
                json!({"models": ["elliptic", "cantor"], "eps": 1e-2, "x_range": [-3.0, 3.0], "n_max": 3}),
                json!({"evaluated": evaluated, "max_norm_over_bound": worst}),
                "dressed divisors >= half bare divisors; ||g^[n]|| <= K1 (C0 gamma*_n)^-2",
                witness.is_none(),
                witness,
            )
        }
        "self_energy_symmetry" => {
            let mut rng = ChaCha8Rng::seed_from_u64(scope.seed);
            let mut worst: f64 = 0.0;
            let cases = [
                (bundled::elliptic(), unit.clone(), 0.5),
                (bundled::cantor(), golden.clone(), 0.2),
            ];
            for (model, omega, c0) in &cases {
                let p = make_profile(omega, *c0, &ProfileKind::Identity, 10)?;
                for _ in 0..50 {
                    let eps = 10f64.powf(rng.gen_range(-4.0..-1.7));
                    let x = rng.gen_range(-2.0..2.0);
                    let st = SelfEnergyState::build(model, omega, &p, eps, 2, 4)?;
                    let n = rng.gen_range(0..=4);
                    let (h, t) = symmetry_defects(&st, n, x)?;
                    worst = worst.max(h).max(t);
                }
            }
            check(
                json!({"models": ["elliptic", "cantor"], "probes": 100, "seed": scope.seed}),
                json!({"max_defect": worst}),
                &format!("defect <= {:e}", th.symmetry_tol),
                worst <= th.symmetry_tol,
                None,
            )
        }
        "regularity" => {
            let p = make_profile(&unit, 0.5, &ProfileKind::Identity, 10)?;
            let st = SelfEnergyState::build(&bundled::elliptic(), &unit, &p, 1e-2, 2, 2)?;
            let w2 = RotationVector::new(&[1.0 + 1e-3])?;
            let ell = whitney_checks(&st, 2, 0.05, 0.0505, &[1], &w2, 1.1e-2)?;
            let p = make_profile(&golden, 0.2, &ProfileKind::Identity, 10)?;
            let st = SelfEnergyState::build(&bundled::cantor(), &golden, &p, 1e-2, 2, 2)?;
            let phi = golden.components()[1];
            let w2 = RotationVector::new(&[1.0, phi + 1e-5])?;
            let nu = [-8, 5];
            let x = golden.dot(&nu);
            let can = whitney_checks(&st, 2, x, x * 1.01, &nu, &w2, 1.1e-2)?;
            let pass = [&ell, &can].iter().all(|r| r.pass && r.taylor_slope >= th.taylor_slope_min);
            check(
                json!({"cases": [
                    {"model": "elliptic", "eps": [1e-2, 1.1e-2], "x": [0.05, 0.0505], "nu": [1], "omega2": [1.001]},
                    {"model": "cantor", "eps": [1e-2, 1.1e-2], "x": [x, x * 1.01], "nu": nu, "omega2": [1.0, phi + 1e-5]},
                ]}),
                json!([to_json(&ell), to_json(&can)]),
                &format!("taylor slope >= {}, |d_eps lambda| in [min|a|/2, 2 max|a|]", th.taylor_slope_min),
                pass,
                None,
            )
        }
        "product_bound" => {
            let p = make_profile(&golden, 0.2, &ProfileKind::Identity, 10)?;
            let audit = product_bound_audit(&bundled::maximal(), &golden, &p, scope.k_max.min(4), 1e-3, th.tree_budget)?;
            check(
                json!({"model": "maximal", "omega": "golden", "k_max": scope.k_max.min(4), "eps": 1e-3}),
                to_json(&audit),
                "slope of max log product in k <= 4 N B(omega)",
                audit.pass,
                None,
            )
        }
        other => return Err(Error::Schema(format!("unknown check `{other}`"))),
    })
}

/// Runs the checks selected by `scope`.
pub fn lemma_suite(scope: &SuiteScope, thresholds: &Thresholds) -> Result<VerificationSuite> {
    let mut checks = Vec::new();
    for name in &scope.checks {
        let t = Instant::now();
        let mut c = run_check(name, scope, thresholds)?;
        c.runtime_ms = Some(t.elapsed().as_secs_f64() * 1e3);
        checks.push(c);
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(VerificationSuite {
        scope: scope.clone(),
        checks,
        pass,
    })
}
