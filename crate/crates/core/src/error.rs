//! Error type of the numerical core.

use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A configuration invariant does not hold. The message names it.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Matrix or antenna dimensions make the requested formula ill-posed.
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    /// The closed-form MRT SINR denominator vanished.
    #[error("degenerate SINR denominator")]
    DegenerateDenominator,

    /// The closed-form power update divides by (almost) zero.
    #[error("power update for user {user} is singular")]
    UpdateSingular {
        /// Index of the user whose update failed.
        user: usize,
    },

    /// The closed-form ZF power update divides by `1 - delta^2`.
    #[error("closed-form ZF power update is undefined for perfect CSI (delta = 1)")]
    PerfectCsiUnsupported,

    /// Cell division needs at least one central and one edge user.
    #[error("cell division needs users in both groups")]
    EmptyGroup,

    /// The efficiency estimate fed to the antenna rule must be positive.
    #[error("antenna selection needs a positive efficiency estimate, got {0}")]
    NonPositiveTheta(f64),
}

/// Result alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}
