//! Error type shared by all modules.

use thiserror::Error;

/// Errors reported by the simulator and analysis routines.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum Error {
    /// An argument is outside its documented domain.
    #[error("invalid parameter {name}: {reason}")]
    Parameter {
        /// Offending parameter name.
        name: &'static str,
        /// What went wrong.
        reason: String,
    },

    /// A network realization cannot support the requested construction
    /// (too few base stations, sparse window, boundary contact, ...).
    #[error("geometry error: {0}")]
    Geometry(String),

    /// A channel matrix is numerically rank deficient; the realization
    /// should be discarded and resampled upstream.
    #[error("singular channel matrix: {0}")]
    SingularChannel(String),

    /// Not enough spatial degrees of freedom for the requested precoder.
    #[error("insufficient degrees of freedom: served {served} + neighbors {neighbors} > antennas {antennas}")]
    DegreesOfFreedom {
        served: usize,
        neighbors: usize,
        antennas: usize,
    },

    /// An iterative numerical routine failed to converge.
    #[error("numerical failure in {context}: {reason}")]
    Numerical {
        context: &'static str,
        reason: String,
    },

    /// An integral diverges for the given exponent.
    #[error("divergent integral: {0}")]
    DivergentIntegral(String),

    /// Inputs that must refer to the same realization are inconsistent.
    #[error("inconsistent inputs: {0}")]
    Consistency(String),
}

impl Error {
    pub(crate) fn parameter(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}
