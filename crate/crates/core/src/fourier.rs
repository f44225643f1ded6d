//! Sparse Fourier series on the torus `T^r`, keyed by integer momentum.

use std::collections::BTreeMap;

pub use nalgebra::Complex;

pub type C64 = Complex<f64>;

/// Scalar series `Σ_ν c_ν e^{iν·ψ}`.
pub type Series = BTreeMap<Vec<i32>, C64>;

/// Vector-valued series `Σ_ν h_ν e^{iν·ψ}` with `h_ν ∈ C^d`.
pub type VecSeries = BTreeMap<Vec<i32>, Vec<C64>>;

pub fn add_vec(a: &[i32], b: &[i32]) -> Vec<i32> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub_vec(a: &[i32], b: &[i32]) -> Vec<i32> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn neg_vec(a: &[i32]) -> Vec<i32> {
    a.iter().map(|x| -x).collect()
}

/// `target += s · src`.
pub fn add_scaled(target: &mut Series, src: &Series, s: C64) {
    for (k, v) in src {
        *target.entry(k.clone()).or_insert(C64::new(0.0, 0.0)) += *v * s;
    }
}

/// Product of two series (convolution of coefficients).
pub fn convolve(a: &Series, b: &Series) -> Series {
    let mut out = Series::new();
    for (ka, va) in a {
        for (kb, vb) in b {
            *out.entry(add_vec(ka, kb)).or_insert(C64::new(0.0, 0.0)) += va * vb;
        }
    }
    out
}

/// Evaluates `Σ c_ν e^{iν·ψ}`.
pub fn evaluate(series: &Series, psi: &[f64]) -> C64 {
    series
        .iter()
        .map(|(nu, c)| c * C64::from_polar(1.0, phase(nu, psi)))
        .sum()
}

pub fn phase(nu: &[i32], psi: &[f64]) -> f64 {
    nu.iter().zip(psi).map(|(&k, p)| k as f64 * p).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convolution_matches_pointwise_product() {
        let mut a = Series::new();
        a.insert(vec![1, 0], C64::new(0.5, 0.2));
        a.insert(vec![-1, 2], C64::new(-0.3, 0.0));
        let mut b = Series::new();
        b.insert(vec![0, 1], C64::new(1.0, -1.0));
        b.insert(vec![2, -1], C64::new(0.1, 0.4));
        let ab = convolve(&a, &b);
        for psi in [[0.3, 1.1], [2.0, -0.7], [5.5, 3.3]] {
            let lhs = evaluate(&ab, &psi);
            let rhs = evaluate(&a, &psi) * evaluate(&b, &psi);
            assert!((lhs - rhs).norm() < 1e-14);
        }
    }
}
