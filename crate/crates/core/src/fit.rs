//! Ordinary least squares on a line, used for every exponent fit.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope (zero for two points).
    pub slope_stderr: f64,
    pub points: usize,
}

/// Fits `y = intercept + slope·x`.
pub fn ols(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(Error::Precondition("fit inputs differ in length".into()));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("{n} points for a line fit")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InsufficientData("non-finite value in fit input".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all abscissae coincide".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_stderr = if n > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LineFit {
        slope,
        intercept,
        slope_stderr,
        points: n,
    })
}

/// Fits `log y = log c + p log x`; every value must be positive.
pub fn loglog(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return Err(Error::InsufficientData("log-log fit needs positive data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    ols(&lx, &ly)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let f = ols(&[0.0, 1.0, 2.0, 3.0], &[1.0, 3.0, 5.0, 7.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14);
        assert!((f.intercept - 1.0).abs() < 1e-14);
        assert!(f.slope_stderr < 1e-12);
    }

    #[test]
    fn power_law() {
        let x = [1e-3, 3e-3, 1e-2];
        let y: Vec<f64> = x.iter().map(|v: &f64| 5.0 * v.powf(2.5)).collect();
        assert!((loglog(&x, &y).unwrap().slope - 2.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(ols(&[1.0], &[1.0]).is_err());
        assert!(ols(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(loglog(&[1.0, 2.0], &[0.0, 1.0]).is_err());
    }
}
