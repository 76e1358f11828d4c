//! Exit-code classification.

use std::fmt;
use std::path::Path;

use supou_lqc::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub msg: String,
}

impl Failure {
    pub fn config(msg: String) -> Self {
        Self { code: EXIT_CONFIG, msg }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self {
            code: EXIT_IO,
            msg: format!("i/o error on {}: {e}", path.display()),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::NonConvergence { .. } | Error::BlowUp { .. } | Error::Quadrature { .. } | Error::RejectionCap(_) => {
                EXIT_NONCONVERGENCE
            }
            Error::Io { .. } => EXIT_IO,
            Error::Csv(c) if c.is_io_error() => EXIT_IO,
            Error::Json(j) if j.is_io() => EXIT_IO,
            _ => EXIT_CONFIG,
        };
        Self { code, msg: e.to_string() }
    }
}
