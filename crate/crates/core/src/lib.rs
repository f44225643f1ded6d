//! Constructive machinery for degenerate lower-dimensional invariant tori of
//! the Hamiltonian `H = A·A/2 + B·B/2 + ε f(α, β)`.
//!
//! The crate is organised by subsystem:
//!
//! - [`arithmetic`]: continued fractions, the Bryuno function, the
//!   small-divisor sequence `α_n(ω)` and the comparison profiles `γ*_n`.
//! - [`model`]: the trigonometric-polynomial perturbation `f` with its
//!   stationary point `β0` and Hessian eigenvalues `a_i`.
//! - [`expansion`]: order-by-order Fourier–Taylor construction of the torus
//!   conjugation `h = (a, b)`.
//! - [`trees`]: enumeration of Lindstedt trees, scale labels, self-energy
//!   clusters and the counting inequalities.
//! - [`multiscale`]: cutoffs, propagator divisors, propagators, self-energy
//!   matrices and the self-energy recursion.
//! - [`diophantine`]: Mel'nikov conditions and excluded-measure scans in `ω`
//!   and in `ε`.
//! - [`verify`]: residual, decay and product-bound audits plus the
//!   aggregated lemma suite.
//! - [`cli`]: run configuration and the artifact writers behind the
//!   `kamtori` binary.

pub mod arithmetic;
pub mod cli;
pub mod config;
pub mod diophantine;
pub mod error;
pub mod expansion;
pub mod fit;
pub mod fourier;
pub mod model;
pub mod multiscale;
pub mod trees;
pub mod verify;

pub use arithmetic::{
    alpha_sequence, bryuno_function, continued_fraction, d_sum, generalized_bryuno_sum,
    make_profile, scale_of, BryunoProfile, ContinuedFraction, ProfileKind, ProfileMode,
    RotationVector,
};
pub use error::{Error, Result};
pub use expansion::{evaluate_torus, expand_torus, TorusExpansion};
pub use model::{FourierModel, TorusPoint};

/// Integer vector used for Fourier modes and line momenta.
pub type Momentum = Vec<i32>;

/// 1-norm of an integer vector, the norm used for `|ν|` throughout.
pub fn norm1(nu: &[i32]) -> u32 {
    nu.iter().map(|c| c.unsigned_abs()).sum()
}
