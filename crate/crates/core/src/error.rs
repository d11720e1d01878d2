use thiserror::Error;

/// Errors raised by model construction, the samplers and the verification oracles.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max |H - H^dagger| = {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("spectral bound {e_max} exceeds the frequency interval {omega_max}")]
    SpectralBound { e_max: f64, omega_max: f64 },

    #[error("frequency grid is not matched to temperature {temperature}: shift/spacing = {ratio}")]
    GridMismatch { temperature: f64, ratio: f64 },

    #[error("resource plan infeasible: needs {p} ancilla qubits (cap {cap})")]
    Infeasible { p: u32, cap: u32 },

    #[error("branch loop exceeded n_max = {n_max}")]
    Truncated { n_max: usize, partial: Box<PartialStep> },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("enumeration guard exceeded: {terms:.3e} terms > {limit:.3e}")]
    Guard { terms: f64, limit: f64 },

    #[error("simulator cap exceeded: {entries} density-matrix entries > {cap}")]
    SimulatorCap { entries: usize, cap: usize },

    #[error("measurement probabilities vanish (total {total:.3e})")]
    ZeroProbability { total: f64 },
}

/// The record of a step that was cut off by `n_max`.
#[derive(Debug, Clone)]
pub enum PartialStep {
    Classical(crate::classical::ClassicalStepRecord),
    Quantum(crate::quantum::QuantumStepRecord),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }
}
