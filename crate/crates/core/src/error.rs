use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("resonance: |ω·ν| = {value:e} below tolerance for ν = {nu:?}")]
    Resonance { nu: Vec<i32>, value: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("model schema error: {0}")]
    Schema(String),

    #[error("reality violated: c(-ν,-μ) != conj c(ν,μ) for ν = {nu:?}, μ = {mu:?}")]
    Reality { nu: Vec<i32>, mu: Vec<i32> },

    #[error("β0 is not stationary: |∂β f0(β0)| = {residual:e}")]
    Stationarity { residual: f64 },

    #[error("degenerate Hessian: eigenvalue {value:e} at index {index}")]
    ZeroEigenvalue { index: usize, value: f64 },

    #[error("eigenvalues not pairwise distinct: a_{i} = {ai}, a_{j} = {aj}")]
    DegenerateSpectrum { i: usize, j: usize, ai: f64, aj: f64 },

    #[error("ω not admissible for profile: α_{n} = {alpha:e} < C0 γ*_{n} = {bound:e}")]
    Admissibility { n: usize, alpha: f64, bound: f64 },

    #[error("budget exceeded: {what} (limit {limit})")]
    Budget { what: String, limit: u64 },

    #[error("singular propagator divisor: x² = {x2:e} hits λ̲_{index} = {lambda:e}")]
    SingularDivisor { x2: f64, index: usize, lambda: f64 },

    #[error(
        "propagator lower bound violated at x = {x:e}, scale {scale}: \
         min|x²-λ(x)| = {dressed:e} < ½ min|x²-λ̲| = {half_bare:e}"
    )]
    PropagatorBound {
        x: f64,
        scale: usize,
        dressed: f64,
        half_bare: f64,
    },

    #[error("self-energy λ̲_{index} = {value:e} went negative at scale {scale}")]
    NegativeSelfEnergy { scale: usize, index: usize, value: f64 },

    #[error("Mel'nikov condition violated: ν = {nu:?}, margin {margin:e}")]
    Melnikov { nu: Vec<i32>, margin: f64 },

    #[error("compatibility condition fails at order {order}: |[∂f]_0| = {residual:e}")]
    Solvability { order: usize, residual: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 1 usage/schema, 2 math/resonance, 3 budget.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Schema(_) | Error::Precondition(_) | Error::Io(_) | Error::Json(_) => 1,
            Error::Budget { .. } => 3,
            _ => 2,
        }
    }
}
