use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not normal (commutator residual {residual:.3e})")]
    NotNormal { residual: f64 },
    #[error("iteration did not converge: {0}")]
    NoConvergence(String),
    #[error("matrix is not symmetric (residual {residual:.3e})")]
    NotSymmetric { residual: f64 },
    #[error("matrices do not commute (residual {residual:.3e})")]
    NotCommuting { residual: f64 },
    #[error("matrix is not unitary (residual {residual:.3e})")]
    NotUnitary { residual: f64 },
    #[error("matrix is not skew-Hermitian (residual {residual:.3e})")]
    NotSkewHermitian { residual: f64 },
    #[error("eigenphase {phase:.6} lies on the branch cut")]
    BranchAmbiguity { phase: f64 },
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid local choice at site {site}: {reason}")]
    BadLocalChoice { site: usize, reason: String },
    #[error("index schedule exhausted: {0}")]
    ScheduleExhausted(String),
    #[error("standardizer factorization failed: {0}")]
    FactorizationFailed(String),
    #[error("involutions {a} and {b} do not commute (residual {residual:.3e})")]
    NonCommutingInvolutions { a: usize, b: usize, residual: f64 },
    #[error("Cartan relation violated at level {level} (residual {residual:.3e})")]
    CartanRelationViolated { level: usize, residual: f64 },
    #[error("subspace is not closed under the bracket (residual {residual:.3e})")]
    NotASubalgebra { residual: f64 },
    #[error("K factor is not real (imaginary residual {residual:.3e})")]
    RealityViolated { residual: f64 },
    #[error("symplectic eigenvector pairing failed (residual {residual:.3e})")]
    PairingFailed { residual: f64 },
    #[error("cosine-sine gluing failed (residual {residual:.3e})")]
    GluingFailed { residual: f64 },
    #[error("leading block is singular (smallest singular value {sigma:.3e})")]
    BlockSingular { sigma: f64 },
    #[error("no catalogued Cartan subalgebra for {0}")]
    UnsupportedScheme(String),
    #[error("logarithm leaves the labelled subspace (residual {residual:.3e})")]
    LogOutsideSubspace { residual: f64 },
    #[error("element is not in the torus: {0}")]
    TorusLog(String),
    #[error("could not conjugate into the torus: {0}")]
    AlignmentFailed(String),
    #[error("at {path}: {source}")]
    Solver { path: String, source: Box<Error> },
    #[error("io: {0}")]
    Io(String),
    #[error("parse: {0}")]
    Parse(String),
}

impl Error {
    pub fn at(self, path: impl Into<String>) -> Error {
        match self {
            Error::Solver { .. } => self,
            other => Error::Solver { path: path.into(), source: Box::new(other) },
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
