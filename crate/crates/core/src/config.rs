//! Thresholds and default budgets shared by the verification suite, the
//! acceptance tests and the command line.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Allowed deviation of a residual slope from `K + 1`.
    pub residual_slope_tol: f64,
    /// ψ-grid points per angle in residual scans.
    pub residual_grid: usize,
    /// Allowed deviation of a planted decay rate.
    pub decay_planted_tol: f64,
    /// Relative tolerance between tree sums and the recursion.
    pub tree_rel_tol: f64,
    /// Absolute floor below which tree/recursion differences are ignored.
    pub tree_abs_floor: f64,
    /// `K` in the counting inequalities.
    pub counting_k: f64,
    /// Hermiticity and transpose-symmetry tolerance.
    pub symmetry_tol: f64,
    /// Allowed deviation of fitted block exponents.
    pub block_exponent_tol: f64,
    /// Accepted range of the excluded-measure exponent in `C0`.
    pub measure_exponent_range: (f64, f64),
    /// Monte-Carlo sample size for measure scans.
    pub measure_samples: usize,
    /// `|ν|` cutoff in measure scans.
    pub measure_nu_max: u32,
    /// Required Taylor-remainder slope in the regularity checks.
    pub taylor_slope_min: f64,
    /// Tree budget per enumeration.
    pub tree_budget: u64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            residual_slope_tol: 0.2,
            residual_grid: 32,
            decay_planted_tol: 0.05,
            tree_rel_tol: 1e-9,
            tree_abs_floor: 1e-13,
            counting_k: 2.0,
            symmetry_tol: 1e-12,
            block_exponent_tol: 0.2,
            measure_exponent_range: (0.8, 1.2),
            measure_samples: 100_000,
            measure_nu_max: 64,
            taylor_slope_min: 1.5,
            tree_budget: crate::trees::TREE_BUDGET,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_json_fills_defaults() {
        let t: Thresholds = serde_json::from_str(r#"{"counting_k": 3.0}"#).unwrap();
        assert_eq!(t.counting_k, 3.0);
        assert_eq!(t.residual_grid, 32);
        assert!(serde_json::from_str::<Thresholds>(r#"{"bogus": 1}"#).is_err());
    }
}
