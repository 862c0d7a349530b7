use std::fmt;

use hip::HipError;

/// Exit status classes of the `hip` binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad flags, bad config values or invalid data.
    Data,
    /// The fit finished without converging.
    Convergence,
    /// Reading or writing files failed.
    Io,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Data => 2,
            ErrorKind::Convergence => 3,
            ErrorKind::Io => 4,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn data(msg: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Data,
            message: msg.into(),
        }
    }

    pub fn io(msg: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Io,
            message: msg.into(),
        }
    }

    pub fn convergence(msg: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Convergence,
            message: msg.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<HipError> for CliError {
    fn from(e: HipError) -> Self {
        let kind = if e.is_io() { ErrorKind::Io } else { ErrorKind::Data };
        CliError {
            kind,
            message: e.to_string(),
        }
    }
}
