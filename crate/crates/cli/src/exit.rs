//! Process exit codes.
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | other failure (I/O while writing, ...) |
//! | 2 | usage: unknown flag, bad setting, missing required setting |
//! | 3 | an input file does not exist |
//! | 4 | an input file does not match its schema |
//! | 5 | inputs are well-formed but inconsistent with each other |

use std::fmt;
use std::io::ErrorKind;

use kgctx_core::Error;

pub const OK: u8 = 0;
pub const FAILURE: u8 = 1;
pub const USAGE: u8 = 2;
pub const MISSING_FILE: u8 = 3;
pub const SCHEMA: u8 = 4;
pub const DATA: u8 = 5;

#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return USAGE;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Io { source, .. } if source.kind() == ErrorKind::NotFound => MISSING_FILE,
                Error::Io { .. } => FAILURE,
                Error::Parse { .. } | Error::Snapshot { .. } | Error::DimensionMismatch { .. } => {
                    SCHEMA
                }
                Error::NotFound { .. }
                | Error::RelationCollision { .. }
                | Error::BudgetExceeded { .. }
                | Error::Invalid(_) => DATA,
            };
        }
        if let Some(e) = cause.downcast_ref::<std::io::Error>() {
            if e.kind() == ErrorKind::NotFound {
                return MISSING_FILE;
            }
        }
    }
    FAILURE
}
