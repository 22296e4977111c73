use thiserror::Error;

pub type Result<T> = std::result::Result<T, QiteError>;

#[derive(Debug, Error)]
pub enum QiteError {
    #[error("dimension mismatch: expected {expected} qubits, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("amplitude count {found} is not 2^{qubits}")]
    AmplitudeCount { qubits: usize, found: usize },

    #[error("qubit count {0} is outside the supported range 1..=64")]
    QubitCount(usize),

    #[error("site {site} out of range for {qubits} qubits")]
    SiteOutOfRange { site: usize, qubits: usize },

    #[error("site {site} is not in the support of {string}")]
    SiteNotInSupport { site: usize, string: String },

    #[error("invalid Pauli character {ch:?} at position {position}")]
    InvalidPauliChar { ch: char, position: usize },

    #[error("normalization estimate {value} is not positive; reduce the step size (tau = {tau})")]
    StepSize { value: f64, tau: f64 },

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("operator on {qubits} qubits exceeds the oracle cap of {cap}")]
    OracleCap { qubits: usize, cap: usize },

    #[error("operator is not Hermitian (max deviation {0:e})")]
    NonHermitian(f64),

    #[error("invalid step: {0}")]
    InvalidStep(String),

    #[error("shot count must be at least 1")]
    ZeroShots,

    #[error("degenerate scaling fit: {0}")]
    DegenerateFit(&'static str),

    #[error("invalid domain: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("hamiltonian file, {location}: {message}")]
    HamiltonianFile { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl QiteError {
    /// Short machine-readable tag used in CLI error output.
    pub fn kind(&self) -> &'static str {
        match self {
            QiteError::Dimension { .. } | QiteError::AmplitudeCount { .. } => "dimension",
            QiteError::QubitCount(_) => "qubit_count",
            QiteError::SiteOutOfRange { .. } | QiteError::SiteNotInSupport { .. } => "site",
            QiteError::InvalidPauliChar { .. } => "pauli",
            QiteError::StepSize { .. } => "step_size",
            QiteError::NonFinite(_) => "non_finite",
            QiteError::OracleCap { .. } => "oracle_cap",
            QiteError::NonHermitian(_) => "non_hermitian",
            QiteError::InvalidStep(_) => "invalid_step",
            QiteError::ZeroShots => "zero_shots",
            QiteError::DegenerateFit(_) => "degenerate_fit",
            QiteError::Domain(_) => "domain",
            QiteError::Config(_) => "config",
            QiteError::Parse(_) => "parse",
            QiteError::HamiltonianFile { .. } => "hamiltonian_file",
            QiteError::Io(_) => "io",
            QiteError::Json(_) => "json",
        }
    }
}
