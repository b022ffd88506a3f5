use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (defect {0:.3e})")]
    NonHermitian(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{0} did not converge")]
    ConvergenceFailure(&'static str),
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("not a density matrix: {0}")]
    NotAState(String),
    #[error("{0} deterministic strategies exceed the enumeration limit")]
    TooLargeToEnumerate(f64),
    #[error("unknown builtin expression `{0}`")]
    UnknownName(String),
    #[error("rank {t} outside 1..={n}")]
    BadRank { t: usize, n: usize },
    #[error("eps1 = {eps1} is outside [0, {eps1_max})")]
    Eps1OutOfRange { eps1: f64, eps1_max: f64 },
    #[error("state does not have full Schmidt rank {expected} (found {found})")]
    NotFullSchmidtRank { expected: usize, found: usize },
    #[error("states are proportional; their combination cancels")]
    ProportionalStates,
    #[error("purity {gamma} is outside [1/{n}, 1]")]
    GammaOutOfRange { gamma: f64, n: usize },
    #[error("violation {violation} exceeds the certified quantum bound {c_q}")]
    ViolationAboveBound { violation: f64, c_q: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid simulation spec: {0}")]
    BadSpec(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Errors caused by bad input rather than numerical breakdown.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::ConvergenceFailure(_) | Error::Singular)
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
