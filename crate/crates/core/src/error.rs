//! Stable error codes shared by the HTTP service and the CLI.

use serde::Serialize;

use crate::astro::{PropagationError, TleError};
use crate::passes::PassError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    Validation,
    NotFound,
    Conflict,
    Unprocessable,
    Internal,
}

impl ErrorClass {
    pub fn http_status(self) -> u16 {
        match self {
            ErrorClass::Validation => 400,
            ErrorClass::NotFound => 404,
            ErrorClass::Conflict => 409,
            ErrorClass::Unprocessable => 422,
            ErrorClass::Internal => 500,
        }
    }

    /// 1 for anything the caller can fix, 2 otherwise.
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Internal => 2,
            _ => 1,
        }
    }
}

pub trait Coded {
    /// Upper snake case, never renamed once published.
    fn code(&self) -> &'static str;
    fn class(&self) -> ErrorClass;
}

impl Coded for TleError {
    fn code(&self) -> &'static str {
        match self {
            TleError::ChecksumMismatch { .. } => "TLE_CHECKSUM_MISMATCH",
            TleError::MalformedField { .. } => "TLE_MALFORMED_FIELD",
            TleError::LineCountError { .. } => "TLE_LINE_COUNT",
            TleError::OutOfRange { .. } => "TLE_OUT_OF_RANGE",
        }
    }

    fn class(&self) -> ErrorClass {
        ErrorClass::Validation
    }
}

impl Coded for PropagationError {
    fn code(&self) -> &'static str {
        match self {
            PropagationError::DecayedOrbit { .. } => "DECAYED_ORBIT",
            PropagationError::StaleElements { .. } => "STALE_ELEMENTS",
            PropagationError::InvalidElements { .. } => "INVALID_ELEMENTS",
        }
    }

    fn class(&self) -> ErrorClass {
        ErrorClass::Unprocessable
    }
}

impl Coded for PassError {
    fn code(&self) -> &'static str {
        match self {
            PassError::Propagation(e) => e.code(),
            PassError::Ephemeris(_) => "OUT_OF_EPHEMERIS_RANGE",
            PassError::EmptyWindow => "EMPTY_WINDOW",
            PassError::WindowTooLong { .. } => "WINDOW_TOO_LONG",
            PassError::InvalidThreshold(_) => "INVALID_THRESHOLD",
            PassError::NeverAboveFive(_) => "NEVER_ABOVE_FIVE",
        }
    }

    fn class(&self) -> ErrorClass {
        match self {
            PassError::Propagation(e) => e.class(),
            PassError::Ephemeris(_) => ErrorClass::Unprocessable,
            _ => ErrorClass::Validation,
        }
    }
}
