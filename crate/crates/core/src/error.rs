use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("trace is {trace}, expected 1")]
    TraceViolation { trace: f64 },

    #[error("smallest eigenvalue {min_eigenvalue:e} is below the positivity tolerance")]
    PositivityViolation { min_eigenvalue: f64 },

    #[error("parameter `{name}` = {value} outside {domain}")]
    ParameterOutOfRange {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("column matrix is rank deficient (rank {rank} of {columns})")]
    RankDeficient { rank: usize, columns: usize },

    #[error("linear system inconsistent: residual {residual:e}")]
    InconsistentSystem { residual: f64 },

    #[error("operation requires qubit subsystems, got dims {0:?}")]
    NotQubit(Vec<usize>),

    #[error("unphysical efficiency regime: eta_minus + 1/eta_plus - 1 = {denominator} <= 0")]
    Unphysical { denominator: f64 },

    #[error("POVM effect has eigenvalue {eigenvalue} outside [0, 1]")]
    InvalidEffect { eigenvalue: f64 },

    #[error(
        "per-bin loss {loss} exceeds ideal count {ideal} (setting {setting}, outcome bin {bin})"
    )]
    BinUnderflow {
        setting: usize,
        bin: usize,
        ideal: f64,
        loss: f64,
    },

    #[error("setting {setting} has zero total counts")]
    ZeroTotal { setting: usize },

    #[error("empty keep set for partial trace")]
    EmptyKeep,
}

impl Error {
    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::NotHermitian { .. } => "not_hermitian",
            Error::TraceViolation { .. } => "trace_violation",
            Error::PositivityViolation { .. } => "positivity_violation",
            Error::ParameterOutOfRange { .. } => "parameter_out_of_range",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::InconsistentSystem { .. } => "inconsistent_system",
            Error::NotQubit(_) => "not_qubit",
            Error::Unphysical { .. } => "unphysical",
            Error::InvalidEffect { .. } => "invalid_effect",
            Error::BinUnderflow { .. } => "bin_underflow",
            Error::ZeroTotal { .. } => "zero_total",
            Error::EmptyKeep => "empty_keep",
        }
    }
}
