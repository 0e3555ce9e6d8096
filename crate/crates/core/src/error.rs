use alloc::string::String;

/// Errors raised by the core algorithms.
///
/// Variants that concern a specific input carry the field name so that a
/// configuration front end can point at the offending entry.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("population exceeded the cap of {cap} live particles at time {time}")]
    PopulationExplosion { cap: u64, time: f64 },

    #[error("bracket search failed: {0}")]
    Bracket(String),

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: u64 },

    #[error("confidence interval half-width {half_width} exceeds the requested tolerance {tolerance}")]
    CiTooWide { half_width: f64, tolerance: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
