use thiserror::Error;

/// Broad failure category, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Validation,
    Numerical,
    Io,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub token: String,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}:{}: {} (near `{}`)",
            self.line, self.column, self.message, self.token
        )
    }
}

#[derive(Debug, Error)]
pub enum Error {
    // linear algebra
    #[error("matrix is not Hermitian (relative symmetry residual {residual:.3e})")]
    NotHermitian { residual: f64 },
    #[error("matrix contains NaN or infinite entries")]
    NonFinite,
    #[error("eigenvalue iteration did not converge")]
    ConvergenceFailure,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    // system validation
    #[error("alpha must be symmetric positive definite (smallest eigenvalue {min_eig:.3e})")]
    AlphaNotPositiveDefinite { min_eig: f64 },
    #[error("eta must be symmetric positive semidefinite (smallest eigenvalue {min_eig:.3e})")]
    EtaNotPsd { min_eig: f64 },
    #[error("theta must be skew-symmetric (relative residual {residual:.3e})")]
    ThetaNotSkew { residual: f64 },
    #[error("R must be symmetric positive semidefinite (smallest eigenvalue {min_eig:.3e})")]
    RNotPsd { min_eig: f64 },
    #[error("dissipation matrix R has rank zero")]
    RZero,
    #[error("dual system unavailable: eta is singular")]
    DualityUnavailable,
    #[error("dissipation has full rank; Ker R is trivial")]
    FullRankDissipation,

    // spectral problems
    #[error("eigenvalue zero has no pencil/state correspondence")]
    ZeroFrequency,
    #[error("not an eigenpair (relative residual {residual:.3e})")]
    NotAnEigenpair { residual: f64 },
    #[error("growing mode: Im zeta = {im:.3e} > 0")]
    GrowingMode { im: f64 },
    #[error("frequency operator is zero (theta = 0 and eta = 0)")]
    ZeroOmega,
    #[error("Omega_1 has no positive eigenvalue")]
    NoPositiveLimit,
    #[error("band counts {found:?} disagree with expected {expected:?} at beta = {beta}")]
    CountMismatch {
        beta: f64,
        found: (usize, usize, usize),
        expected: (usize, usize, usize),
    },
    #[error("branch tracking is ambiguous at beta = {beta}")]
    TrackingAmbiguity { beta: f64 },
    #[error("sweep reaches beta = {top}, need at least {required}")]
    InsufficientRange { top: f64, required: f64 },
    #[error("invalid beta grid: {0}")]
    InvalidGrid(String),

    // netlists
    #[error("parse error at {0}")]
    Parse(ParseError),
    #[error("duplicate element: {0}")]
    DuplicateElement(String),
    #[error("unknown loop reference: {0}")]
    UnknownLoopReference(String),
    #[error("loop {0} has no inductance")]
    MissingInductance(usize),
    #[error("netlist has no dissipative element")]
    NoDissipation,

    // time domain
    #[error("step size underflow at t = {t}")]
    StepFailure { t: f64 },
    #[error("trajectory needs at least 3 samples")]
    TooFewSamples,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    // files
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV contains no data rows")]
    EmptyCsv,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            NotHermitian { .. }
            | DimensionMismatch(_)
            | AlphaNotPositiveDefinite { .. }
            | EtaNotPsd { .. }
            | ThetaNotSkew { .. }
            | RNotPsd { .. }
            | RZero
            | DualityUnavailable
            | FullRankDissipation
            | Parse(_)
            | DuplicateElement(_)
            | UnknownLoopReference(_)
            | MissingInductance(_)
            | NoDissipation
            | InvalidArgument(_)
            | InvalidGrid(_)
            | Schema { .. } => ErrorCategory::Validation,
            NonFinite
            | ConvergenceFailure
            | ZeroFrequency
            | NotAnEigenpair { .. }
            | GrowingMode { .. }
            | ZeroOmega
            | NoPositiveLimit
            | CountMismatch { .. }
            | TrackingAmbiguity { .. }
            | InsufficientRange { .. }
            | StepFailure { .. }
            | TooFewSamples => ErrorCategory::Numerical,
            Io(_) | EmptyCsv => ErrorCategory::Io,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
