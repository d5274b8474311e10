use thiserror::Error;

/// Errors raised by the model, solvers, and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("phase-locking condition violated: |<I_J>| = {ij:.6e} A exceeds Ic*|J1| = {bound:.6e} A")]
    Unlocked { ij: f64, bound: f64 },

    #[error("drive amplitude {i1:.3e} A is below the numeric floor")]
    Degenerate { i1: f64 },

    #[error("no sustained oscillation at bias {ib:.6e} A: {reason}")]
    NoOscillation { ib: f64, reason: String },

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("total quality factor diverges (net series resistance {net_resistance:.3e} ohm)")]
    Diverging { net_resistance: f64 },

    #[error("step size underflow at t = {t:.6e} s")]
    StepSizeUnderflow { t: f64 },

    #[error("no spectral peak at least {threshold_db} dB above the median")]
    NoPeak { threshold_db: f64 },

    #[error("input too short: need {needed} samples, have {available}")]
    TooShort { needed: usize, available: usize },

    #[error("integration band [{lo:.6e}, {hi:.6e}] Hz contains no spectral points")]
    EmptyBand { lo: f64, hi: f64 },

    #[error("poor fit: reduced chi-square {reduced_chi2:.3}")]
    PoorFit { reduced_chi2: f64 },

    #[error("decimated rate {rate:.6e} Hz is below twice the residual detuning {detuning:.6e} Hz")]
    AliasRisk { rate: f64, detuning: f64 },

    #[error("need at least {needed} data points, got {got}")]
    Underdetermined { needed: usize, got: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("frequencies must be strictly increasing and positive (index {index})")]
    NonMonotoneFrequencies { index: usize },

    #[error("integral did not converge under grid refinement (relative change {relative_change:.3e})")]
    NonConvergent { relative_change: f64 },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
