//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Tolerances and runtime limits are pinned here.

use std::time::{Duration, Instant};

use kamtori::arithmetic::bryuno_bracket;
use kamtori::cli::{execute, Command, RunConfig};
use kamtori::diophantine::{cantor_sweep, check_melnikov, excluded_measure_omega};
use kamtori::fit::loglog;
use kamtori::fourier::C64;
use kamtori::model::{bundled, FourierModel};
use kamtori::multiscale::{fit_block_exponents, symmetry_defects, SelfEnergyState};
use kamtori::trees::{counting_sweep, CountingMode, TreeEvaluator, TreeForest, TREE_BUDGET};
use kamtori::verify::{lemma_suite, residual_sup, SuiteScope};
use kamtori::{bryuno_function, expand_torus, make_profile, ProfileKind, RotationVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BRYUNO_TOL: f64 = 1e-6;
const BRYUNO_DEPTH: usize = 40;
const COUNTING_K_MAX: usize = 5;
const TREE_K_MAX: usize = 4;
const TREE_REL_TOL: f64 = 1e-9;
const TREE_ABS_FLOOR: f64 = 1e-13;
const RESIDUAL_SLOPE_TOL: f64 = 0.2;
const RESIDUAL_GRID: usize = 32;
const SYMMETRY_TOL: f64 = 1e-12;
const SYMMETRY_PROBES: usize = 100;
const BLOCK_TOL: f64 = 0.2;
const MEASURE_RANGE: (f64, f64) = (0.8, 1.2);
const MEASURE_SAMPLES: usize = 100_000;
const MEASURE_NU_MAX: u32 = 64;
const CANTOR_HALVINGS: usize = 4;

struct Outcome {
    pass: bool,
    detail: String,
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> (Outcome, Duration, bool) {
    let t = Instant::now();
    let out = f();
    let elapsed = t.elapsed();
    (out, elapsed, elapsed <= limit)
}

fn golden_1phi() -> RotationVector {
    RotationVector::parse("1,phi").unwrap()
}

fn unit() -> RotationVector {
    RotationVector::new(&[1.0]).unwrap()
}

fn c1_bryuno_fixed_points() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (name, x) in [("golden", (5f64.sqrt() - 1.0) / 2.0), ("sqrt2", 2f64.sqrt() - 1.0)] {
        let b = bryuno_function(x, BRYUNO_DEPTH).unwrap();
        let closed = -x.ln() / (1.0 - x);
        worst = worst.max((b - closed).abs());
        parts.push(format!("B({name}) = {b:.9} vs {closed:.9}"));
    }
    Outcome {
        pass: worst <= BRYUNO_TOL,
        detail: format!("{}; max error {worst:.2e} <= {BRYUNO_TOL:e}", parts.join(", ")),
    }
}

fn c2_bracket() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, omega) in [("golden", RotationVector::golden()), ("sqrt2", RotationVector::sqrt2())] {
        let b = bryuno_bracket(&omega, 14).unwrap();
        pass &= b.holds && b.lower <= b.bryuno && b.bryuno <= b.upper;
        parts.push(format!("{name}: {:.4} <= {:.4} <= {:.4}", b.lower, b.bryuno, b.upper));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn c3_counting() -> Outcome {
    let omega = golden_1phi();
    let profile = make_profile(&omega, 0.2, &ProfileKind::Identity, 10).unwrap();
    let rep = counting_sweep(&bundled::maximal(), &omega, &profile, COUNTING_K_MAX, CountingMode::Theorem1, TREE_BUDGET).unwrap();
    Outcome {
        pass: rep.pass(),
        detail: format!(
            "k <= {COUNTING_K_MAX}: {} trees, {} assignments, {} clusters, {} failures",
            rep.trees, rep.assignments, rep.clusters, rep.failures
        ),
    }
}

fn c4_tree_oracle() -> Outcome {
    let cases: Vec<(FourierModel, RotationVector, f64)> = vec![
        (bundled::maximal(), RotationVector::golden(), 0.2),
        (bundled::elliptic(), unit(), 0.5),
        (bundled::cantor(), RotationVector::golden(), 0.2),
    ];
    let mut compared = 0usize;
    let mut worst: f64 = 0.0;
    let mut witness = None;
    for (model, omega, c0) in &cases {
        let profile = make_profile(omega, *c0, &ProfileKind::Identity, 10).unwrap();
        let exp = expand_torus(model, omega, &profile, TREE_K_MAX).unwrap();
        let forest = TreeForest::generate(model, TREE_K_MAX, TREE_BUDGET).unwrap();
        let eval = TreeEvaluator::new(model, omega).unwrap();
        for k in 1..=TREE_K_MAX {
            let mut keys: Vec<Vec<i32>> = exp.orders[k - 1].keys().cloned().collect();
            keys.extend(forest.momenta(k));
            keys.sort();
            keys.dedup();
            for nu in keys {
                let sum = eval.tree_sum(&forest, k, &nu);
                let rec = exp
                    .coefficient(k, &nu)
                    .map(|v| v.to_vec())
                    .unwrap_or_else(|| vec![C64::new(0.0, 0.0); model.d()]);
                for (a, b) in sum.iter().zip(&rec) {
                    compared += 1;
                    let diff = (a - b).norm();
                    if diff < TREE_ABS_FLOOR {
                        continue;
                    }
                    let rel = diff / b.norm().max(1e-300);
                    worst = worst.max(rel);
                    if rel > TREE_REL_TOL && witness.is_none() {
                        witness = Some(format!("{} k={k} ν={nu:?}: {a} vs {b}", model.name));
                    }
                }
            }
        }
    }
    Outcome {
        pass: witness.is_none(),
        detail: format!(
            "{compared} components on maximal/elliptic/cantor, worst relative error {worst:.2e}{}",
            witness.map(|w| format!("; {w}")).unwrap_or_default()
        ),
    }
}

fn c5_residual() -> Outcome {
    let eps_grid: Vec<f64> = (0..7).map(|i| 1e-3 * 10f64.powf(i as f64 / 6.0)).collect();
    let mut pass = true;
    let mut parts = Vec::new();

    let model = bundled::maximal();
    let omega = RotationVector::golden();
    let profile = make_profile(&omega, 0.2, &ProfileKind::Identity, 10).unwrap();
    let exp = expand_torus(&model, &omega, &profile, 3).unwrap();
    for k in 1..=3 {
        let t = exp.truncated(k);
        let sups: Vec<f64> = eps_grid.iter().map(|&e| residual_sup(&t, &model, e, RESIDUAL_GRID)).collect();
        let slope = loglog(&eps_grid, &sups).unwrap().slope;
        pass &= (slope - (k + 1) as f64).abs() <= RESIDUAL_SLOPE_TOL;
        parts.push(format!("maximal K={k}: {slope:.3}"));
    }

    let model = bundled::elliptic();
    let omega = unit();
    let profile = make_profile(&omega, 0.5, &ProfileKind::Theorem1, 10).unwrap();
    let admissible: Vec<f64> = eps_grid
        .iter()
        .copied()
        .filter(|&e| {
            let st = SelfEnergyState::build(&model, &omega, &profile, e, 2, 4).unwrap();
            check_melnikov(&st, 16, 4).map(|r| r.pass).unwrap_or(false)
        })
        .collect();
    parts.push(format!("elliptic admissible ε: {}/{}", admissible.len(), eps_grid.len()));
    if admissible.len() < 3 {
        pass = false;
    } else {
        let exp = expand_torus(&model, &omega, &profile, 3).unwrap();
        for k in 1..=3 {
            let t = exp.truncated(k);
            let sups: Vec<f64> = admissible.iter().map(|&e| residual_sup(&t, &model, e, RESIDUAL_GRID)).collect();
            let slope = loglog(&admissible, &sups).unwrap().slope;
            pass &= (slope - (k + 1) as f64).abs() <= RESIDUAL_SLOPE_TOL;
            parts.push(format!("elliptic K={k}: {slope:.3}"));
        }
    }
    Outcome {
        pass,
        detail: format!("{} (tolerance ±{RESIDUAL_SLOPE_TOL})", parts.join(", ")),
    }
}

fn c6_symmetry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cases = [
        (bundled::elliptic(), unit(), 0.5),
        (bundled::cantor(), RotationVector::golden(), 0.2),
    ];
    let mut worst: f64 = 0.0;
    for i in 0..SYMMETRY_PROBES {
        let (model, omega, c0) = &cases[i % 2];
        let profile = make_profile(omega, *c0, &ProfileKind::Identity, 10).unwrap();
        let eps = 10f64.powf(rng.gen_range(-4.0..-1.7));
        let x = rng.gen_range(-2.0..2.0);
        let n = rng.gen_range(0..=4);
        let st = SelfEnergyState::build(model, omega, &profile, eps, 2, n).unwrap();
        let (h, t) = symmetry_defects(&st, n, x).unwrap();
        worst = worst.max(h).max(t);
    }
    Outcome {
        pass: worst <= SYMMETRY_TOL,
        detail: format!("{SYMMETRY_PROBES} probes, max defect {worst:.2e} <= {SYMMETRY_TOL:e}"),
    }
}

fn c7_block_exponents() -> Outcome {
    let omega = unit();
    let profile = make_profile(&omega, 0.5, &ProfileKind::Identity, 10).unwrap();
    let fits = fit_block_exponents(
        &bundled::elliptic(),
        &omega,
        &profile,
        1,
        &[1e-4, 2e-4, 5e-4, 1e-3],
        5e-3,
        &[1e-3, 2e-3, 5e-3, 1e-2],
        1e-3,
    )
    .unwrap();
    let eps_expected = [2.0, 2.0, 2.0];
    let x_expected = [2.0, 1.0, 0.0];
    let eps: Vec<f64> = fits.eps.iter().map(|f| f.slope).collect();
    let x: Vec<f64> = fits.x.iter().map(|f| f.slope).collect();
    let pass = (0..3).all(|k| (eps[k] - eps_expected[k]).abs() <= BLOCK_TOL && (x[k] - x_expected[k]).abs() <= BLOCK_TOL);
    Outcome {
        pass,
        detail: format!(
            "ε-exponents [{:.3}, {:.3}, {:.3}], x-exponents [{:.3}, {:.3}, {:.3}] (±{BLOCK_TOL})",
            eps[0], eps[1], eps[2], x[0], x[1], x[2]
        ),
    }
}

fn c8_closeness() -> Outcome {
    let omega = unit();
    let profile = make_profile(&omega, 0.5, &ProfileKind::Identity, 10).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for eps in [1e-3, 1e-2] {
        let st = SelfEnergyState::build(&bundled::elliptic(), &omega, &profile, eps, 2, 4).unwrap();
        let c = st.closeness();
        pass &= c.len() == 4 && c.iter().all(|v| v.is_finite() && *v <= 1.0) && c.windows(2).all(|w| w[1] < w[0] || w[0] == 0.0);
        parts.push(format!(
            "ε={eps:e}: [{}]",
            c.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>().join(", ")
        ));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn c9_measure() -> Outcome {
    let est = excluded_measure_omega(
        &[(1.0, 2.0), (1.0, 2.0)],
        &[0.05, 0.1, 0.2],
        1e-3,
        &bundled::maximal(),
        MEASURE_SAMPLES,
        MEASURE_NU_MAX,
        42,
    )
    .unwrap();
    let (Some(fit), Some(err)) = (est.fit, est.exponent_stat_err) else {
        return Outcome {
            pass: false,
            detail: format!("no fit, excluded {:?}", est.excluded),
        };
    };
    Outcome {
        pass: fit.slope >= MEASURE_RANGE.0 && fit.slope <= MEASURE_RANGE.1,
        detail: format!(
            "fractions [{:.5}, {:.5}, {:.5}], p = {:.4} ± {:.4} (stat) in [{}, {}], n = {MEASURE_SAMPLES}",
            est.excluded[0], est.excluded[1], est.excluded[2], fit.slope, err, MEASURE_RANGE.0, MEASURE_RANGE.1
        ),
    }
}

fn c10_cantor() -> Outcome {
    let omega = RotationVector::golden();
    let ell = cantor_sweep(&omega, &bundled::cantor(), 1e-2, CANTOR_HALVINGS, 128).unwrap();
    let hyp = cantor_sweep(&omega, &bundled::cantor_hyperbolic(), 1e-2, CANTOR_HALVINGS, 128).unwrap();
    let ratios: Vec<f64> = ell.iter().map(|c| c.ratio).collect();
    let decreasing = ratios.len() == CANTOR_HALVINGS + 1 && ratios.windows(2).all(|w| w[1] < w[0]);
    let full = hyp.iter().all(|c| c.excluded == 0.0);
    Outcome {
        pass: decreasing && full,
        detail: format!(
            "G/ε0 = [{}] strictly decreasing: {decreasing}; hyperbolic excluded = 0: {full}",
            ratios.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(", ")
        ),
    }
}

fn run_cli_set(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let base = RunConfig {
        out_dir: Some(dir.to_path_buf()),
        seed: Some(42),
        ..Default::default()
    };
    let commands = vec![
        Command::Suite(RunConfig {
            scope: Some("default".into()),
            ..base.clone()
        }),
        Command::Measure(RunConfig {
            samples: Some(20_000),
            ..base.clone()
        }),
        Command::Bryuno(base.clone()),
        Command::Expand(RunConfig {
            k: Some(3),
            ..base.clone()
        }),
        Command::Residual(base.clone()),
        Command::Counting(base.clone()),
        Command::Cantor(base.clone()),
    ];
    let mut files = Vec::new();
    for c in &commands {
        let out = execute(c).unwrap();
        for f in out.files {
            let name = f.file_name().unwrap().to_string_lossy().to_string();
            files.push((name, std::fs::read(&f).unwrap()));
        }
    }
    files.sort();
    files
}

fn c11_determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let fa = run_cli_set(a.path());
    let fb = run_cli_set(b.path());
    let mut scope = SuiteScope::parse("default").unwrap();
    scope.seed = 42;
    let th = kamtori::config::Thresholds::default();
    let s1 = serde_json::to_string(&lemma_suite(&scope, &th).unwrap().without_timings()).unwrap();
    let s2 = serde_json::to_string(&lemma_suite(&scope, &th).unwrap().without_timings()).unwrap();
    let differing: Vec<&str> = fa
        .iter()
        .zip(&fb)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    Outcome {
        pass: fa.len() == fb.len() && !fa.is_empty() && differing.is_empty() && s1 == s2,
        detail: format!(
            "{} artifacts compared byte for byte, {} differ; in-process suite reports identical: {}",
            fa.len(),
            differing.len(),
            s1 == s2
        ),
    }
}

fn main() {
    let criteria: Vec<(&str, Duration, fn() -> Outcome)> = vec![
        ("bryuno fixed points", Duration::from_secs(1), c1_bryuno_fixed_points),
        ("bryuno bracket", Duration::from_secs(1), c2_bracket),
        ("counting lemmas", Duration::from_secs(300), c3_counting),
        ("tree/recursion oracle", Duration::from_secs(300), c4_tree_oracle),
        ("residual scaling", Duration::from_secs(600), c5_residual),
        ("self-energy symmetries", Duration::from_secs(60), c6_symmetry),
        ("block-bound exponents", Duration::from_secs(300), c7_block_exponents),
        ("closeness", Duration::from_secs(60), c8_closeness),
        ("measure scaling", Duration::from_secs(600), c9_measure),
        ("epsilon cantor set", Duration::from_secs(600), c10_cantor),
        ("determinism", Duration::from_secs(600), c11_determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, limit, f)) in criteria.into_iter().enumerate() {
        let (out, elapsed, in_time) = timed(limit, f);
        let pass = out.pass && in_time;
        println!(
            "{} [{:2}] {name}: {} ({:.3} s, limit {} s)",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            out.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
        if !pass {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
