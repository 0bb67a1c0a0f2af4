use thiserror::Error;

use crate::params::BareLabel;

/// Errors raised by the simulation and calibration routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("operator is not Hermitian (max deviation {deviation:e})")]
    NonHermitian { deviation: f64 },

    #[error("label {label} is ambiguous (best overlap {overlap:.4})")]
    AmbiguousLabel { label: BareLabel, overlap: f64 },

    #[error("no anticrossing between {a} and {b} inside [{lo}, {hi}] GHz")]
    NoResonance { a: BareLabel, b: BareLabel, lo: f64, hi: f64 },

    #[error("divergent detuning: {what} is zero")]
    DivergentDetuning { what: String },

    #[error("pulse of {duration} ns cannot hold edges of sigma {sigma} ns")]
    PulseTooShort { duration: f64, sigma: f64 },

    #[error("frequency slew {slew:.4} GHz/ns at t = {t:.3} ns exceeds limit {limit}")]
    SlewViolation { t: f64, slew: f64, limit: f64 },

    #[error("net-zero violated: control integral {integral:e} GHz*ns")]
    NetZeroViolation { integral: f64 },

    #[error("state is not normalized (norm deviation {deviation:e})")]
    NotNormalized { deviation: f64 },

    #[error("density matrix is not physical: {reason}")]
    NotPhysical { reason: String },

    #[error("integration step too coarse: halving changed fidelity by {change:e}")]
    StepTooCoarse { change: f64 },

    #[error("gate is not CPhase-like: |U[{index}]| = {magnitude:.4}")]
    NotCPhaseLike { index: usize, magnitude: f64 },

    #[error("no exchange found: best partner population {best:.4}")]
    NoExchangeFound { best: f64 },

    #[error("target phase {target:.4} rad outside swept range [{lo:.4}, {hi:.4}]")]
    TargetOutOfRange { target: f64, lo: f64, hi: f64 },

    #[error("no ZZ null in [{lo}, {hi}] GHz (smallest |zeta| {residual:e} GHz)")]
    NoNullInRange { lo: f64, hi: f64, residual: f64 },

    #[error("fit failed: {reason}")]
    FitFailed { reason: String },

    #[error("fit is degenerate: {reason}")]
    FitDegenerate { reason: String },

    #[error("golden mismatch in {file}: {detail}")]
    GoldenMismatch { file: String, detail: String },

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable kind string.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "InvalidParameter",
            Error::NonHermitian { .. } => "NonHermitian",
            Error::AmbiguousLabel { .. } => "AmbiguousLabel",
            Error::NoResonance { .. } => "NoResonance",
            Error::DivergentDetuning { .. } => "DivergentDetuning",
            Error::PulseTooShort { .. } => "PulseTooShort",
            Error::SlewViolation { .. } => "SlewViolation",
            Error::NetZeroViolation { .. } => "NetZeroViolation",
            Error::NotNormalized { .. } => "NotNormalized",
            Error::NotPhysical { .. } => "NotPhysical",
            Error::StepTooCoarse { .. } => "StepTooCoarse",
            Error::NotCPhaseLike { .. } => "NotCPhaseLike",
            Error::NoExchangeFound { .. } => "NoExchangeFound",
            Error::TargetOutOfRange { .. } => "TargetOutOfRange",
            Error::NoNullInRange { .. } => "NoNullInRange",
            Error::FitFailed { .. } => "FitFailed",
            Error::FitDegenerate { .. } => "FitDegenerate",
            Error::GoldenMismatch { .. } => "GoldenMismatch",
            Error::Scenario(_) => "Scenario",
            Error::Io(_) => "Io",
            Error::Csv(_) => "Csv",
        }
    }

    pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name: name.to_string(), reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
