use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max |M - M^dagger| = {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("trace is {trace} but must be 1")]
    TraceNotUnit { trace: f64 },
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },
    #[error("state vector norm is {norm}, expected 1")]
    NotNormalized { norm: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },
    #[error("subsystem index {index} out of range for {count} subsystems")]
    InvalidSubsystem { index: usize, count: usize },
    #[error("parameter {name} = {value} out of range ({allowed})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        allowed: &'static str,
    },
    #[error("dense dimension {required} exceeds the configured cap of {cap}")]
    Capacity { required: usize, cap: usize },
    #[error("operator is not unitary (max |U U^dagger - I| = {deviation:e})")]
    NotUnitary { deviation: f64 },
    #[error("trace {trace:e} is too small to normalize")]
    VanishingTrace { trace: f64 },
    #[error("structural approximation is not completely positive (min Choi eigenvalue {min_eigenvalue:e}); the map is not positive or its negativity was underestimated")]
    NotCompletelyPositive { min_eigenvalue: f64 },
    #[error("map is not declared positive")]
    UndeclaredPositivity,
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn is_capacity(&self) -> bool {
        matches!(self, Error::Capacity { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
