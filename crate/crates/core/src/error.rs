use thiserror::Error;

/// Errors surfaced by the engine.
#[derive(Debug, Error)]
pub enum Error {
    /// The period ratio does not define a usable lattice.
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    /// The translation point has an order the engine does not support.
    #[error("unsupported torsion: {0}")]
    UnsupportedTorsion(String),

    /// The requested line module has no basis formula (p - q in 2Z*tau + L).
    #[error("special line: p - q lies in 2Z*tau + lattice; no basis formula available")]
    SpecialLine,

    /// Input degenerate for the requested operation.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Embedding calibration failed; downstream results would be meaningless.
    #[error("calibration failure: {0}")]
    Calibration(String),

    /// A rank or dimension came out different from what the theory demands.
    #[error("inconsistency: {0}")]
    Inconsistency(String),

    /// A numerical tolerance was violated.
    #[error("tolerance failure: {0}")]
    Tolerance(String),

    /// Operation cost exceeds the configured budget.
    #[error("budget exceeded: {0}")]
    Budget(String),

    /// A precondition on the arguments does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Mixed line families or mismatched session data.
    #[error("family mismatch: {0}")]
    FamilyMismatch(String),

    /// An answer requires exact coordinates that the input does not carry.
    #[error("exact coordinates required: {0}")]
    ExactRequired(String),

    /// Underlying linear-algebra backend failure.
    #[error("linear algebra error: {0}")]
    Linalg(String),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}
