use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("coefficient a_{index} is nonzero but index {index} is neither 1 nor prime (D_inf support)")]
    UnsupportedIndex { index: usize },

    #[error("evaluation point {point} is a pole")]
    PoleHit { point: Complex64 },

    #[error("log(sigma - 1/2) vanishes for point {index} (sigma = 3/2)")]
    LogSingular { index: usize },

    #[error("density has mass below log N = {log_n} (support starts at {support_start})")]
    SupportMismatch { log_n: f64, support_start: f64 },

    #[error("defect bound violated at {} sample(s), worst ratio {worst_ratio}", offending.len())]
    BoundViolation {
        offending: Vec<Complex64>,
        worst_ratio: f64,
    },

    #[error("gamma = {0} must lie in the open interval (1/2, 1)")]
    GammaOutOfRange(f64),

    #[error("gamma = {gamma} too large for alpha: eta = {eta} (needs > 1/2), nu = {nu} (needs > 1)")]
    GammaTooLarge { gamma: f64, eta: f64, nu: f64 },

    #[error("density support [{phi_start}, {phi_end}] is not covered by grid nodes [{grid_start}, {grid_end}]")]
    GridMismatch {
        phi_start: f64,
        phi_end: f64,
        grid_start: f64,
        grid_end: f64,
    },

    #[error("far-field bound |u(s)| <= R eps / (pi dist) violated at {point}: |u| = {value}, bound = {bound}")]
    FarFieldViolation {
        point: Complex64,
        value: f64,
        bound: f64,
    },

    #[error("inf |G| on the cutoff gradient support is {inf}, below threshold {threshold}")]
    DivisorTooSmall { inf: f64, threshold: f64 },

    #[error("zero {point} lies outside Omega(R-2, 1/2) for R = {r}")]
    SupportViolation { point: Complex64, r: f64 },

    #[error("no contraction: rho = {rho} at N = {n} (cap {n_cap})")]
    NoContraction { rho: f64, n: usize, n_cap: usize },

    #[error("nontriviality test failed at N = {n}: |F_0(3/2)| = {head} <= {tail}")]
    NontrivialityFailed { n: usize, head: f64, tail: f64 },

    #[error("coefficient index {needed} exceeds cap {cap}")]
    IndexOverflow { needed: u128, cap: usize },

    #[error("|f| = {value} < tol on the contour at {point}")]
    BoundaryTooClose { point: Complex64, value: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
