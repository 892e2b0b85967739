//! Command implementations behind the `altmin` binary. Reports are plain
//! serde types so callers (and tests) can parse what the binary prints.

pub mod args;
pub mod commands;
pub mod report;

use altmin::Error;

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_CLAIM: u8 = 2;
pub const EXIT_USAGE: u8 = 64;
pub const EXIT_DATA: u8 = 65;

pub fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Usage(_) | Error::DimensionMismatch { .. } | Error::OutOfHypothesis(_) => EXIT_USAGE,
        Error::MalformedTrace { .. } | Error::Domain(_) | Error::NonFinite(_) => EXIT_DATA,
        _ => EXIT_FAILURE,
    }
}
