//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the toolkit. Diagnostic payloads are carried as `f64`
/// regardless of the working scalar.
#[derive(Debug, Clone, Error)]
pub enum WmrError {
    #[error("parameter {name} = {value} outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("path tangent vanishes near eta = {eta}; reference heading undefined")]
    SingularPath { eta: f64 },

    #[error("degenerate zoning for linguistic variable {variable}: interval width {width} below tolerance")]
    DegenerateZoning { variable: &'static str, width: f64 },

    #[error("all rule firing strengths vanished (normalizer {normalizer})")]
    DegenerateFiring { normalizer: f64 },

    #[error("uncertainty range too wide for variable {variable}: lower envelope collapsed")]
    UncertaintyTooWide { variable: &'static str },

    #[error("LMI problem infeasible: best margin achieved {margin}")]
    Infeasible { margin: f64 },

    #[error("LMI solution ill-conditioned: cond(X) = {cond}")]
    IllConditioned { cond: f64 },

    #[error("simulation diverged at step {step} (t = {t})")]
    Divergence { step: usize, t: f64 },
}

pub type Result<T> = std::result::Result<T, WmrError>;
