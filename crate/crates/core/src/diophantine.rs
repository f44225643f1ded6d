//! Mel'nikov conditions and the measure of the parameters they exclude.
//!
//! A line frequency `x = ω·ν` must stay away from the normal frequencies:
//! `|x| ≥ C0 γ*_{n(ν)}`, `|x ± √λ̲_i| ≥ C0 γ*_{n(ν)}` and
//! `|x ± √λ̲_i ± √λ̲_j| ≥ C0 γ*_{n(ν)}`. A negative `λ̲_i` gives an imaginary
//! `√λ̲_i`, and conditions involving it hold trivially.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::arithmetic::{
    make_profile, scale_of, theorem2_n0, BryunoProfile, ProfileKind, ProfileMode, RotationVector,
};
use crate::error::{Error, Result};
use crate::expansion::{evaluate_torus, expand_torus};
use crate::fit::{loglog, LineFit};
use crate::model::FourierModel;
use crate::multiscale::SelfEnergyState;
use crate::norm1;

/// Smallest Monte-Carlo sample accepted by the measure scans.
pub const MIN_SAMPLES: usize = 100;

/// One condition, with `margin = |value| − bound`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    pub nu: Vec<i32>,
    /// Scale of `λ̲` used; `None` for `|ω·ν|` alone.
    pub n: Option<usize>,
    pub i: Option<usize>,
    pub j: Option<usize>,
    pub signs: (i8, i8),
    pub value: f64,
    pub bound: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub subject: String,
    pub checked: u64,
    pub violations: u64,
    pub min_margin: f64,
    /// Tightest violated condition, or tightest condition on a pass.
    pub witness: Option<Condition>,
    pub pass: bool,
}

/// Nonzero `ν` with `|ν| ≤ nu_max` whose first nonzero entry is positive.
pub fn half_lattice(r: usize, nu_max: u32) -> Vec<Vec<i32>> {
    fn rec(prefix: &mut Vec<i32>, r: usize, left: i32, out: &mut Vec<Vec<i32>>) {
        if prefix.len() == r {
            let first = prefix.iter().find(|&&k| k != 0);
            if matches!(first, Some(&k) if k > 0) {
                out.push(prefix.clone());
            }
            return;
        }
        for k in -left..=left {
            prefix.push(k);
            rec(prefix, r, left - k.abs(), out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(r), r, nu_max as i32, &mut out);
    out
}

/// Checks every condition for `0 < |ν| ≤ nu_max` and `n ≤ n_max` against
/// the `λ̲^[n]` of `state`. With a damped profile, only `n(ν) ≥ n0` and
/// `n ≥ n0` are checked.
pub fn check_melnikov(state: &SelfEnergyState, nu_max: u32, n_max: usize) -> Result<AdmissibilityReport> {
    let profile = &state.family.profile;
    if n_max > state.top_scale() {
        return Err(Error::Precondition(format!(
            "λ̲ needed to scale {n_max}, state built to {}",
            state.top_scale()
        )));
    }
    if scale_of(&[nu_max as i32])? > profile.n_max() {
        return Err(Error::Precondition(format!(
            "profile stops at scale {}, |ν| ≤ {nu_max} needs {}",
            profile.n_max(),
            scale_of(&[nu_max as i32])?
        )));
    }
    let n0 = match profile.mode {
        ProfileMode::Theorem2 { n0 } => n0,
        ProfileMode::Theorem1 => 0,
    };
    let r = state.model.r;
    let s = state.model.s;
    let mut rep = AdmissibilityReport {
        subject: format!("omega={:?} eps={:e}", state.omega.components(), state.eps),
        checked: 0,
        violations: 0,
        min_margin: f64::INFINITY,
        witness: None,
        pass: true,
    };
    let consider = |rep: &mut AdmissibilityReport, c: Condition| {
        rep.checked += 1;
        let violated = c.margin < 0.0;
        if violated {
            rep.violations += 1;
        }
        let replace = match &rep.witness {
            None => true,
            Some(w) => (violated && w.margin >= 0.0) || c.margin < w.margin,
        };
        rep.min_margin = rep.min_margin.min(c.margin);
        if replace {
            rep.witness = Some(c);
        }
    };
    for nu in half_lattice(r, nu_max) {
        let nn = scale_of(&nu)?;
        if nn < n0 {
            continue;
        }
        let x = state.omega.dot(&nu);
        let bound = profile.alpha_star(nn);
        consider(
            &mut rep,
            Condition {
                nu: nu.clone(),
                n: None,
                i: None,
                j: None,
                signs: (0, 0),
                value: x,
                bound,
                margin: x.abs() - bound,
            },
        );
        for n in n0..=n_max {
            let roots: Vec<Option<f64>> = state.lambda_bar[n][r..]
                .iter()
                .map(|&l| (l >= 0.0).then(|| l.sqrt()))
                .collect();
            for i in 0..s {
                let Some(si) = roots[i] else { continue };
                for sign_i in [1i8, -1] {
                    let v = x + sign_i as f64 * si;
                    consider(
                        &mut rep,
                        Condition {
                            nu: nu.clone(),
                            n: Some(n),
                            i: Some(r + i),
                            j: None,
                            signs: (sign_i, 0),
                            value: v,
                            bound,
                            margin: v.abs() - bound,
                        },
                    );
                    for j in i..s {
                        let Some(sj) = roots[j] else { continue };
                        for sign_j in [1i8, -1] {
                            let v = x + sign_i as f64 * si + sign_j as f64 * sj;
                            consider(
                                &mut rep,
                                Condition {
                                    nu: nu.clone(),
                                    n: Some(n),
                                    i: Some(r + i),
                                    j: Some(r + j),
                                    signs: (sign_i, sign_j),
                                    value: v,
                                    bound,
                                    margin: v.abs() - bound,
                                },
                            );
                        }
                    }
                }
            }
        }
    }
    rep.pass = rep.violations == 0;
    Ok(rep)
}

/// `γ*_n = (1 − 2^{−1/2}) 2^{−n(r+½)}`, normalized so `Σ γ*_n 2^{nr} = 1`.
pub fn fixed_profile(r: usize, c0: f64, n_max: usize) -> Result<BryunoProfile> {
    let g = (0..=n_max)
        .map(|n| (1.0 - 0.5f64.sqrt()) * 2f64.powf(-(n as f64) * (r as f64 + 0.5)))
        .collect();
    BryunoProfile::from_parts(c0, r, g, ProfileMode::Theorem1)
}

/// `Σ_{n > n_cut} γ*_n 2^{n(r−1)}` for the fixed profile.
pub fn tail_bound(r: usize, n_cut: usize) -> f64 {
    (n_cut + 1..n_cut + 200)
        .map(|n| (1.0 - 0.5f64.sqrt()) * 2f64.powf(-(n as f64) * (r as f64 + 0.5) + (n * (r - 1)) as f64))
        .sum()
}

/// Shifts `σ` and widening factors: `0` with factor 1, and the real
/// `±√(ε a_i)`, `±√(ε a_i) ± √(ε a_j)` with factor 2.
fn shifts(model: &FourierModel, eps: f64) -> Vec<(f64, f64)> {
    let roots: Vec<f64> = model
        .hessian_eigs
        .iter()
        .filter(|a| **a * eps > 0.0)
        .map(|a| (a * eps).sqrt())
        .collect();
    let mut out: Vec<(f64, f64)> = vec![(0.0, 1.0)];
    for (i, &a) in roots.iter().enumerate() {
        out.push((a, 2.0));
        out.push((-a, 2.0));
        for &b in &roots[i..] {
            for v in [a + b, a - b, -a + b, -a - b] {
                out.push((v, 2.0));
            }
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    out.dedup();
    out
}

/// `min |ω·ν + σ| / (w γ*_{n(ν)})` over `0 < |ν| ≤ nu_max`, restricted to
/// candidates with `|ω·ν + σ| < w γ*_0 c_max`: the largest `C0` for which
/// `ω` is excluded, capped at `c_max`.
fn exclusion_threshold(
    omega: &[f64],
    shifts: &[(f64, f64)],
    gamma: &BryunoProfile,
    nu_max: u32,
    c_max: f64,
) -> f64 {
    let r = omega.len();
    let last = omega[r - 1];
    let mut best = f64::INFINITY;
    let mut prefix = vec![0i32; r - 1];
    fn walk(
        depth: usize,
        left: i32,
        partial: f64,
        prefix: &mut Vec<i32>,
        ctx: &mut dyn FnMut(&[i32], f64, i32),
        omega: &[f64],
    ) {
        if depth == prefix.len() {
            ctx(prefix, partial, left);
            return;
        }
        for k in -left..=left {
            prefix[depth] = k;
            walk(depth + 1, left - k.abs(), partial + k as f64 * omega[depth], prefix, ctx, omega);
        }
        prefix[depth] = 0;
    }
    let width0 = 2.0 * c_max * gamma.gamma(0);
    let mut visit = |pre: &[i32], partial: f64, left: i32| {
        for &(sigma, w) in shifts {
            let centre = -(partial + sigma) / last;
            let half = width0 / last.abs();
            let lo = ((centre - half).ceil() as i64).max(-(left as i64));
            let hi = ((centre + half).floor() as i64).min(left as i64);
            for k in lo..=hi {
                let k = k as i32;
                let nu: Vec<i32> = pre.iter().copied().chain([k]).collect();
                let m = norm1(&nu);
                if m == 0 {
                    continue;
                }
                let n = crate::arithmetic::scale_of(&nu).unwrap_or(0);
                let v = (partial + k as f64 * last + sigma).abs();
                let t = v / (w * gamma.gamma(n));
                if t < best {
                    best = t;
                }
            }
        }
    };
    walk(0, nu_max as i32, 0.0, &mut prefix, &mut visit, omega);
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureEstimate {
    pub description: String,
    pub samples: usize,
    pub sweep: Vec<f64>,
    pub excluded: Vec<f64>,
    /// Binomial standard error of each excluded fraction.
    pub stderr: Vec<f64>,
    /// Log-log fit of excluded fraction against the sweep parameter.
    pub fit: Option<LineFit>,
    /// Sampling error of the fitted exponent.
    pub exponent_stat_err: Option<f64>,
    /// Mass of the profile beyond the enumerated `|ν|`.
    pub tail_bound: f64,
}

fn sample_box(domain: &[(f64, f64)], n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| domain.iter().map(|&(a, b)| rng.gen_range(a..b)).collect())
        .collect()
}

fn fit_sweep(sweep: &[f64], excluded: &[f64], samples: usize) -> (Option<LineFit>, Option<f64>) {
    if sweep.len() < 2 || excluded.iter().any(|&f| f <= 0.0) {
        return (None, None);
    }
    let Ok(fit) = loglog(sweep, excluded) else {
        return (None, None);
    };
    let lx: Vec<f64> = sweep.iter().map(|c| c.ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let sxx: f64 = lx.iter().map(|v| (v - mx).powi(2)).sum();
    let var: f64 = lx
        .iter()
        .zip(excluded)
        .map(|(l, f)| ((l - mx) / sxx).powi(2) * (1.0 - f) / (samples as f64 * f))
        .sum();
    (Some(fit), Some(var.sqrt()))
}

/// Monte-Carlo fraction of `ω` in `domain` excluded by the conditions at
/// degree-one `λ̲ = ε a`, for each `C0` in the sweep, on common samples.
/// Conditions involving `λ̲` use intervals widened to `2 C0 γ*_{n(ν)}`.
pub fn excluded_measure_omega(
    domain: &[(f64, f64)],
    c0_sweep: &[f64],
    eps: f64,
    model: &FourierModel,
    sample_size: usize,
    nu_max: u32,
    seed: u64,
) -> Result<MeasureEstimate> {
    let r = domain.len();
    if r != model.r || r < 2 {
        return Err(Error::Precondition(format!(
            "domain dimension {r} must equal r = {} and be at least 2",
            model.r
        )));
    }
    if sample_size < MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{sample_size} samples, need at least {MIN_SAMPLES}"
        )));
    }
    if c0_sweep.iter().any(|c| !(*c > 0.0)) || c0_sweep.is_empty() {
        return Err(Error::Precondition("C0 sweep needs positive values".into()));
    }
    let n_cut = scale_of(&[nu_max as i32])?;
    let gamma = fixed_profile(r, 1.0, n_cut)?;
    let sh = shifts(model, eps);
    let c_max = c0_sweep.iter().cloned().fold(0.0, f64::max);
    let points = sample_box(domain, sample_size, seed);
    let thresholds: Vec<f64> = points
        .par_iter()
        .map(|w| exclusion_threshold(w, &sh, &gamma, nu_max, c_max))
        .collect();
    let excluded: Vec<f64> = c0_sweep
        .iter()
        .map(|&c| thresholds.iter().filter(|&&t| t < c).count() as f64 / sample_size as f64)
        .collect();
    let stderr = excluded
        .iter()
        .map(|f| (f * (1.0 - f) / sample_size as f64).sqrt())
        .collect();
    let (fit, exponent_stat_err) = fit_sweep(c0_sweep, &excluded, sample_size);
    Ok(MeasureEstimate {
        description: format!(
            "omega box {domain:?}, eps={eps:e}, model={}, |nu|<={nu_max}, seed={seed}",
            model.name
        ),
        samples: sample_size,
        sweep: c0_sweep.to_vec(),
        excluded,
        stderr,
        fit,
        exponent_stat_err,
        tail_bound: tail_bound(r, n_cut),
    })
}

/// Excised part of `(ε0/4, ε0]` for a fixed `ω`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CantorEstimate {
    pub eps0: f64,
    pub n0: usize,
    /// Disjoint excluded intervals in `ε`, sorted.
    pub excluded_intervals: Vec<(f64, f64)>,
    /// `G(ε0)`, the excluded measure.
    pub excluded: f64,
    pub kept: f64,
    pub ratio: f64,
}

/// Excludes the `ε ∈ (ε0/4, ε0]` violating a condition with
/// `|ν| ≤ nu_max` and `n(ν) ≥ n0` at degree-one `λ̲ = ε a`, where `n0`
/// comes from `Λ0 = ε0 max|a|`. In `t = √ε` each violation is an exact
/// interval.
pub fn epsilon_cantor_set(
    omega: &RotationVector,
    model: &FourierModel,
    eps0: f64,
    nu_max: u32,
) -> Result<CantorEstimate> {
    if !(eps0 > 0.0) {
        return Err(Error::Precondition("ε0 must be positive".into()));
    }
    let lo = eps0 / 4.0;
    let full = eps0 - lo;
    let roots: Vec<f64> = model.hessian_eigs.iter().filter(|a| **a > 0.0).map(|a| a.sqrt()).collect();
    if model.s == 0 || roots.is_empty() {
        return Ok(CantorEstimate {
            eps0,
            n0: 0,
            excluded_intervals: Vec::new(),
            excluded: 0.0,
            kept: full,
            ratio: 0.0,
        });
    }
    model.check_distinct_eigs()?;
    let n_cut = scale_of(&[nu_max as i32])?;
    let alphas = omega.alphas(n_cut)?;
    let lambda0 = eps0 * model.hessian_eigs.iter().map(|a| a.abs()).fold(0.0, f64::max);
    let n0 = theorem2_n0(&alphas, lambda0)?;
    let profile = make_profile(omega, 1.0, &ProfileKind::Theorem2 { lambda0 }, n_cut)?;
    let mut speeds: Vec<f64> = Vec::new();
    for (i, &a) in roots.iter().enumerate() {
        speeds.push(a);
        for &b in &roots[i..] {
            speeds.push(a + b);
            if (a - b).abs() > 0.0 {
                speeds.push((a - b).abs());
            }
        }
    }
    let (t_lo, t_hi) = (lo.sqrt(), eps0.sqrt());
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    for nu in half_lattice(model.r, nu_max) {
        let n = scale_of(&nu)?;
        if n < n0 {
            continue;
        }
        let x = omega.dot(&nu).abs();
        let w = profile.alpha_star(n);
        for &v in &speeds {
            let a = ((x - w) / v).max(t_lo);
            let b = ((x + w) / v).min(t_hi);
            if a < b {
                intervals.push((a * a, b * b));
            }
        }
    }
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (a, b) in intervals {
        match merged.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => merged.push((a, b)),
        }
    }
    let excluded: f64 = merged.iter().map(|(a, b)| b - a).sum();
    Ok(CantorEstimate {
        eps0,
        n0,
        excluded_intervals: merged,
        excluded,
        kept: full - excluded,
        ratio: excluded / eps0,
    })
}

/// `epsilon_cantor_set` at `ε0, ε0/2, …, ε0/2^halvings`.
pub fn cantor_sweep(
    omega: &RotationVector,
    model: &FourierModel,
    eps0: f64,
    halvings: usize,
    nu_max: u32,
) -> Result<Vec<CantorEstimate>> {
    (0..=halvings)
        .map(|k| epsilon_cantor_set(omega, model, eps0 / 2f64.powi(k as i32), nu_max))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionMeasure {
    pub samples: usize,
    pub admissible: usize,
    /// Admissible samples whose coordinate neighbours are admissible too.
    pub differenced: usize,
    pub excluded_omega: f64,
    /// Estimated fraction of the action box not covered by tori.
    pub complement: f64,
    pub mean_det: f64,
    pub max_det_deviation: f64,
    /// `max |A − ω| / |ε|` over differenced samples.
    pub displacement_ratio: f64,
}

/// Image of the admissible `ω` under `A(ω) = ω + (ω·∂_ψ) a(0)` for a
/// maximal torus, with `∂_ω A` from finite differences between
/// admissible neighbours.
#[allow(clippy::too_many_arguments)]
pub fn action_space_measure(
    model: &FourierModel,
    domain: &[(f64, f64)],
    c0: f64,
    eps: f64,
    order: usize,
    sample_size: usize,
    nu_max: u32,
    seed: u64,
) -> Result<ActionMeasure> {
    let r = model.r;
    if model.s != 0 || domain.len() != r || r < 2 {
        return Err(Error::Precondition("action measure needs a maximal torus with r ≥ 2".into()));
    }
    if sample_size < MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{sample_size} samples, need at least {MIN_SAMPLES}"
        )));
    }
    let n_cut = scale_of(&[nu_max.max((order as u32) * model.max_nu_norm()) as i32])?;
    let gamma = fixed_profile(r, c0, n_cut)?;
    let sh = shifts(model, eps);
    let points = sample_box(domain, sample_size, seed);
    let h = 1e-6;
    let admissible = |w: &[f64]| exclusion_threshold(w, &sh, &gamma, nu_max, c0) >= c0;
    let action = |w: &[f64]| -> Option<Vec<f64>> {
        let omega = RotationVector::new(w).ok()?;
        let exp = expand_torus(model, &omega, &gamma, order).ok()?;
        Some(evaluate_torus(&exp, &vec![0.0; r], eps).action_a)
    };
    let rows: Vec<Option<(bool, Option<(f64, f64)>)>> = points
        .par_iter()
        .map(|w| {
            if !admissible(w) {
                return Some((false, None));
            }
            let base = action(w)?;
            let mut jac = nalgebra::DMatrix::<f64>::zeros(r, r);
            for k in 0..r {
                let mut wk = w.clone();
                wk[k] += h;
                if !admissible(&wk) {
                    return Some((true, None));
                }
                let ak = action(&wk)?;
                for i in 0..r {
                    jac[(i, k)] = (ak[i] - base[i]) / h;
                }
            }
            let disp = base
                .iter()
                .zip(w)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            Some((true, Some((jac.determinant(), disp))))
        })
        .collect();
    let mut adm = 0;
    let mut dets = Vec::new();
    let mut disp_max: f64 = 0.0;
    for row in rows.into_iter().flatten() {
        if row.0 {
            adm += 1;
        }
        if let Some((det, disp)) = row.1 {
            dets.push(det);
            disp_max = disp_max.max(disp);
        }
    }
    if dets.len() < MIN_SAMPLES / 10 {
        return Err(Error::InsufficientData(format!(
            "{} admissible pairs for differencing",
            dets.len()
        )));
    }
    let mean_det = dets.iter().sum::<f64>() / dets.len() as f64;
    let max_det_deviation = dets.iter().map(|d| (d - 1.0).abs()).fold(0.0, f64::max);
    let excluded_omega = 1.0 - adm as f64 / sample_size as f64;
    let covered = adm as f64 / sample_size as f64 * mean_det.abs();
    Ok(ActionMeasure {
        samples: sample_size,
        admissible: adm,
        differenced: dets.len(),
        excluded_omega,
        complement: 1.0 - covered,
        mean_det,
        max_det_deviation,
        displacement_ratio: if eps != 0.0 { disp_max / eps.abs() } else { 0.0 },
    })
}
