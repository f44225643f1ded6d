//! Command-line front end: run configuration, dispatch and artifact output.
//!
//! Every command writes `<command>-<hash>.csv` or `.json` into the output
//! directory, where `<hash>` is the first 12 hex digits of the SHA-256 of
//! the command and its configuration, output directory excluded. Identical
//! configurations therefore overwrite the same files with identical bytes.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arithmetic::{
    bryuno_bracket, generalized_bryuno_partial, make_profile, ProfileKind, RotationVector,
};
use crate::config::Thresholds;
use crate::diophantine::{cantor_sweep, excluded_measure_omega};
use crate::error::{Error, Result};
use crate::expansion::expand_torus;
use crate::model::{bundled, FourierModel};
use crate::trees::{counting_sweep, CountingMode};
use crate::verify::{lemma_suite, residual_scan, SuiteScope};

/// Environment variable overriding the output directory.
pub const OUT_DIR_ENV: &str = "KAMTORI_OUT_DIR";

const DEFAULT_OUT_DIR: &str = "kamtori-out";

/// Options shared by every command. Any field may also come from the JSON
/// file given with `--config`; flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// JSON file with defaults for these options.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Bundled model name or path to a model JSON file.
    #[arg(long)]
    pub model: Option<String>,
    /// `golden`, `sqrt2`, or comma-separated components (`1,phi`).
    #[arg(long)]
    pub omega: Option<String>,
    #[arg(long)]
    pub c0: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub eps0: Option<f64>,
    /// Truncation order.
    #[arg(long = "K", alias = "k")]
    #[serde(rename = "K")]
    pub k: Option<usize>,
    /// Largest lattice scale for `α_n`.
    #[arg(long)]
    pub depth: Option<usize>,
    /// `start:stop:count`, logarithmically spaced.
    #[arg(long)]
    pub eps_sweep: Option<String>,
    /// Comma-separated `C0` values.
    #[arg(long)]
    pub c0_sweep: Option<String>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub nu_max: Option<u32>,
    /// ψ-grid points per angle.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Largest tree order.
    #[arg(long)]
    pub k_max: Option<usize>,
    /// `theorem1` or `theorem2`.
    #[arg(long)]
    pub mode: Option<String>,
    /// `identity`, `theorem1`, or `theorem2`.
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long)]
    pub halvings: Option<usize>,
    /// `default`, `empty`, or a comma-separated list of checks.
    #[arg(long)]
    pub scope: Option<String>,
    /// Inflate the comparison profile to exercise failure paths.
    #[arg(long)]
    pub inject_fault: Option<bool>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Worker-thread cap.
    #[arg(long)]
    #[serde(skip)]
    pub threads: Option<usize>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident, $($f:ident),*) => {
        $( if $dst.$f.is_none() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl RunConfig {
    /// Flags over the config file's values.
    pub fn resolve(mut self) -> Result<Self> {
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)?;
            let file: RunConfig = serde_json::from_str(&text)
                .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
            overlay!(
                self, file, model, omega, c0, eps, eps0, k, depth, eps_sweep, c0_sweep, samples,
                nu_max, grid, k_max, mode, profile, halvings, scope, inject_fault, seed, budget,
                out_dir
            );
        }
        Ok(self)
    }

    fn out_dir(&self) -> PathBuf {
        if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
            if !dir.is_empty() {
                return PathBuf::from(dir);
            }
        }
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    fn model(&self, default: &str) -> Result<FourierModel> {
        let name = self.model.as_deref().unwrap_or(default);
        if bundled::names().contains(&name) {
            bundled::get(name)
        } else {
            FourierModel::from_path(Path::new(name))
        }
    }

    fn omega(&self, default: &str) -> Result<RotationVector> {
        let spec = self.omega.as_deref().unwrap_or(default);
        let decimal = spec.split(',').any(|t| {
            let t = t.trim().trim_start_matches('-');
            t.parse::<f64>().map(|v| v.fract() != 0.0).unwrap_or(false)
        });
        if decimal {
            eprintln!("warning: decimal ω components carry only double precision; small divisors beyond ~1e-16 are unreliable");
        }
        RotationVector::parse(spec)
    }
}

#[derive(Debug, Parser)]
#[command(name = "kamtori", version, about = "Degenerate lower-dimensional tori: arithmetic, expansions, multiscale checks and measure scans")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Small-divisor sequence, partial Bryuno sums and the D(ω) bracket.
    Bryuno(RunConfig),
    /// Coefficients of the torus conjugation up to order K.
    Expand(RunConfig),
    /// Sup-residual of the truncated torus over an ε sweep.
    Residual(RunConfig),
    /// Exhaustive counting-inequality sweep over trees.
    Counting(RunConfig),
    /// Monte-Carlo excluded measure in ω over a C0 sweep.
    Measure(RunConfig),
    /// Excised ε set across halvings of ε0.
    Cantor(RunConfig),
    /// Aggregated lemma checks.
    Suite(RunConfig),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Bryuno(_) => "bryuno",
            Command::Expand(_) => "expand",
            Command::Residual(_) => "residual",
            Command::Counting(_) => "counting",
            Command::Measure(_) => "measure",
            Command::Cantor(_) => "cantor",
            Command::Suite(_) => "suite",
        }
    }

    fn config(&self) -> &RunConfig {
        match self {
            Command::Bryuno(c)
            | Command::Expand(c)
            | Command::Residual(c)
            | Command::Counting(c)
            | Command::Measure(c)
            | Command::Cantor(c)
            | Command::Suite(c) => c,
        }
    }
}

/// Fixed-width scientific notation with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// First 12 hex digits of the SHA-256 of `command` and the configuration.
pub fn config_hash(command: &str, cfg: &RunConfig) -> String {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update(serde_json::to_vec(cfg).unwrap_or_default());
    let digest = h.finalize();
    let mut s = String::new();
    for b in digest.iter().take(6) {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Written artifact paths and the one-line summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
    pub exit_code: i32,
}

struct Writer {
    dir: PathBuf,
    stem: String,
    files: Vec<PathBuf>,
}

impl Writer {
    fn write(&mut self, ext: &str, body: &str) -> Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        let path = self.dir.join(format!("{}.{ext}", self.stem));
        std::fs::write(&path, body)?;
        self.files.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write("json", &text)
    }
}

fn parse_eps_sweep(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Schema(format!("eps sweep `{spec}` is not start:stop:count"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if !(a > 0.0 && b > 0.0) || n < 2 {
        return Err(bad());
    }
    Ok((0..n)
        .map(|i| (a.ln() + (b.ln() - a.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect())
}

fn parse_list(spec: &str) -> Result<Vec<f64>> {
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Schema(format!("`{s}` is not a number")))
        })
        .collect()
}

fn profile_kind(name: Option<&str>, lambda0: f64) -> Result<ProfileKind> {
    Ok(match name.unwrap_or("identity") {
        "identity" => ProfileKind::Identity,
        "theorem1" => ProfileKind::Theorem1,
        "theorem2" => ProfileKind::Theorem2 { lambda0 },
        other => return Err(Error::Schema(format!("unknown profile `{other}`"))),
    })
}

/// Runs one command with a resolved configuration.
pub fn execute(command: &Command) -> Result<Outcome> {
    let name = command.name();
    let cfg = command.config().clone().resolve()?;
    let mut keyed = cfg.clone();
    keyed.out_dir = None;
    let mut w = Writer {
        dir: cfg.out_dir(),
        stem: format!("{name}-{}", config_hash(name, &keyed)),
        files: Vec::new(),
    };
    let th = Thresholds::default();
    let budget = cfg.budget.unwrap_or(th.tree_budget);
    let mut exit_code = 0;
    let summary = match command {
        Command::Bryuno(_) => {
            let omega = cfg.omega("golden")?;
            let depth = cfg.depth.unwrap_or(10);
            let c0 = cfg.c0.unwrap_or(1.0);
            let alphas = omega.alphas(depth)?;
            let bracket = if omega.dim() == 2 {
                Some(bryuno_bracket(&omega, depth.max(12))?)
            } else {
                None
            };
            let (d_col, holds_col) = match &bracket {
                Some(b) => (num(b.d), b.holds.to_string()),
                None => (String::new(), String::new()),
            };
            let mut csv = String::from("n,alpha_n,gamma_n,partial_bryuno,d_omega,bracket_holds\n");
            for n in 0..=depth {
                let partial = generalized_bryuno_partial(&alphas, n);
                let _ = writeln!(
                    csv,
                    "{n},{},{},{},{d_col},{holds_col}",
                    num(alphas[n]),
                    num(alphas[n] / c0),
                    num(partial.value)
                );
            }
            w.write("csv", &csv)?;
            match bracket {
                Some(b) => {
                    w.json(&b)?;
                    format!(
                        "B = {:.6}, D = {:.6}, bracket [{:.4}, {:.4}] {}",
                        b.bryuno,
                        b.d,
                        b.lower,
                        b.upper,
                        if b.holds { "holds" } else { "FAILS" }
                    )
                }
                None => format!("B partial = {:.6}", generalized_bryuno_partial(&alphas, depth).value),
            }
        }
        Command::Expand(_) => {
            let model = cfg.model("maximal")?;
            let omega = cfg.omega("golden")?;
            let c0 = cfg.c0.unwrap_or(0.2);
            let k = cfg.k.unwrap_or(3);
            let lambda0 = cfg.eps0.unwrap_or(1e-2) * model.hessian_eigs.iter().map(|a| a.abs()).fold(0.0, f64::max);
            let profile = make_profile(&omega, c0, &profile_kind(cfg.profile.as_deref(), lambda0)?, cfg.depth.unwrap_or(10))?;
            let exp = expand_torus(&model, &omega, &profile, k)?;
            let nu_cols: Vec<String> = (1..=model.r).map(|i| format!("nu_{i}")).collect();
            let mut csv = format!("k,{},component,re,im\n", nu_cols.join(","));
            let rows = exp.to_rows();
            for row in &rows {
                let nu: Vec<String> = row.nu.iter().map(|v| v.to_string()).collect();
                let _ = writeln!(csv, "{},{},{},{},{}", row.k, nu.join(","), row.component, num(row.re), num(row.im));
            }
            w.write("csv", &csv)?;
            format!("{} coefficient rows up to K = {k}", rows.len())
        }
        Command::Residual(_) => {
            let model = cfg.model("maximal")?;
            let omega = cfg.omega("golden")?;
            let c0 = cfg.c0.unwrap_or(0.2);
            let k = cfg.k.unwrap_or(2);
            let eps = parse_eps_sweep(cfg.eps_sweep.as_deref().unwrap_or("1e-3:1e-2:5"))?;
            let profile = make_profile(&omega, c0, &ProfileKind::Identity, cfg.depth.unwrap_or(10))?;
            let rep = residual_scan(&model, &omega, &profile, &[k], &eps, cfg.grid.unwrap_or(th.residual_grid), th.residual_slope_tol)?;
            let fit = rep.fits.first().cloned();
            let slope = fit.as_ref().map(|f| f.slope).unwrap_or(f64::NAN);
            let mut csv = String::from("K,eps,sup_residual,slope\n");
            for row in &rep.rows {
                let _ = writeln!(csv, "{},{},{},{}", row.k, num(row.eps), num(row.sup), num(slope));
            }
            w.write("csv", &csv)?;
            if !rep.pass {
                exit_code = 2;
            }
            format!("K = {k}: slope {slope:.4} (expected {}) {}", k + 1, if rep.pass { "pass" } else { "FAIL" })
        }
        Command::Counting(_) => {
            let model = cfg.model("maximal")?;
            let omega = cfg.omega("golden")?;
            let c0 = cfg.c0.unwrap_or(0.2);
            let k_max = cfg.k_max.unwrap_or(4);
            let mode = match cfg.mode.as_deref().unwrap_or("theorem1") {
                "theorem1" => CountingMode::Theorem1,
                "theorem2" => CountingMode::Theorem2,
                other => return Err(Error::Schema(format!("unknown counting mode `{other}`"))),
            };
            let kind = match mode {
                CountingMode::Theorem1 => ProfileKind::Identity,
                CountingMode::Theorem2 => ProfileKind::Theorem2 {
                    lambda0: cfg.eps0.unwrap_or(1e-2) * model.hessian_eigs.iter().map(|a| a.abs()).fold(0.0, f64::max).max(1.0),
                },
            };
            let mut profile = make_profile(&omega, c0, &kind, cfg.depth.unwrap_or(10))?;
            if cfg.inject_fault.unwrap_or(false) {
                profile = profile.scaled(16.0);
            }
            let rep = counting_sweep(&model, &omega, &profile, k_max, mode, budget)?;
            w.json(&rep)?;
            if !rep.pass() {
                exit_code = 2;
            }
            format!(
                "{} trees, {} scale assignments, {} clusters, {} failures",
                rep.trees, rep.assignments, rep.clusters, rep.failures
            )
        }
        Command::Measure(_) => {
            let model = cfg.model("maximal")?;
            let sweep = parse_list(cfg.c0_sweep.as_deref().unwrap_or("0.05,0.1,0.2"))?;
            let eps = cfg.eps.unwrap_or(1e-3);
            let r = model.r;
            let est = excluded_measure_omega(
                &vec![(1.0, 2.0); r],
                &sweep,
                eps,
                &model,
                cfg.samples.unwrap_or(th.measure_samples),
                cfg.nu_max.unwrap_or(th.measure_nu_max),
                cfg.seed.unwrap_or(0),
            )?;
            let mut csv = String::from("c0,excluded_fraction,stderr,fit_residual\n");
            for (i, c) in est.sweep.iter().enumerate() {
                let resid = est
                    .fit
                    .map(|f| est.excluded[i].ln() - (f.intercept + f.slope * c.ln()))
                    .unwrap_or(f64::NAN);
                let _ = writeln!(csv, "{},{},{},{}", num(*c), num(est.excluded[i]), num(est.stderr[i]), num(resid));
            }
            w.write("csv", &csv)?;
            match (est.fit, est.exponent_stat_err) {
                (Some(f), Some(e)) => format!("exponent {:.4} ± {:.4} (tail bound {:.3e})", f.slope, e, est.tail_bound),
                _ => "excluded fraction vanishes somewhere on the sweep; no fit".to_string(),
            }
        }
        Command::Cantor(_) => {
            let model = cfg.model("cantor")?;
            let omega = cfg.omega("golden")?;
            let eps0 = cfg.eps0.unwrap_or(1e-2);
            let sweep = cantor_sweep(&omega, &model, eps0, cfg.halvings.unwrap_or(4), cfg.nu_max.unwrap_or(128))?;
            let mut csv = String::from("eps0,n0,excluded,kept,ratio\n");
            for c in &sweep {
                let _ = writeln!(csv, "{},{},{},{},{}", num(c.eps0), c.n0, num(c.excluded), num(c.kept), num(c.ratio));
            }
            w.write("csv", &csv)?;
            w.json(&sweep)?;
            let decreasing = sweep.windows(2).all(|p| p[1].ratio < p[0].ratio);
            format!(
                "G(eps0)/eps0 = {:?}; strictly decreasing: {decreasing}",
                sweep.iter().map(|c| format!("{:.3e}", c.ratio)).collect::<Vec<_>>()
            )
        }
        Command::Suite(_) => {
            let mut scope = SuiteScope::parse(cfg.scope.as_deref().unwrap_or("default"))?;
            scope.k_max = cfg.k_max.unwrap_or(scope.k_max);
            scope.inject_fault = cfg.inject_fault.unwrap_or(false);
            scope.seed = cfg.seed.unwrap_or(0);
            let suite = lemma_suite(&scope, &th)?;
            w.json(&suite.without_timings())?;
            if !suite.pass {
                exit_code = 2;
            }
            let lines: Vec<String> = suite
                .checks
                .iter()
                .map(|c| {
                    format!(
                        "{}={} ({:.0} ms)",
                        c.name,
                        if c.pass { "pass" } else { "FAIL" },
                        c.runtime_ms.unwrap_or(0.0)
                    )
                })
                .collect();
            if lines.is_empty() {
                "empty suite".to_string()
            } else {
                lines.join(", ")
            }
        }
    };
    Ok(Outcome {
        files: w.files,
        summary,
        exit_code,
    })
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.command.config().threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: thread pool already initialised: {e}");
        }
    }
    match execute(&cli.command) {
        Ok(out) => {
            use std::io::Write as _;
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(stdout, "{}: {}", cli.command.name(), out.summary);
            for f in &out.files {
                let _ = writeln!(stdout, "  wrote {}", f.display());
            }
            out.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_has_17_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(-2.5), "-2.5000000000000000e0");
    }

    #[test]
    fn eps_sweep_is_log_spaced() {
        let v = parse_eps_sweep("1e-3:1e-2:3").unwrap();
        assert!((v[1] - 1e-3 * 10f64.sqrt()).abs() < 1e-15);
        assert!(parse_eps_sweep("1e-3:1e-2").is_err());
    }

    #[test]
    fn hash_depends_on_config() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.seed = Some(1);
        assert_ne!(config_hash("suite", &a), config_hash("suite", &b));
        assert_eq!(config_hash("suite", &a).len(), 12);
    }

    #[test]
    fn config_file_fills_missing_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"omega": "sqrt2", "depth": 7, "K": 2}"#).unwrap();
        let cfg = RunConfig {
            config: Some(path.clone()),
            depth: Some(9),
            ..Default::default()
        }
        .resolve()
        .unwrap();
        assert_eq!(cfg.omega.as_deref(), Some("sqrt2"));
        assert_eq!(cfg.depth, Some(9));
        assert_eq!(cfg.k, Some(2));
        std::fs::write(&path, r#"{"omgea": "sqrt2"}"#).unwrap();
        let bad = RunConfig {
            config: Some(path),
            ..Default::default()
        }
        .resolve();
        assert!(matches!(bad, Err(Error::Schema(_))));
    }
}
