use std::fmt;
use std::path::Path;

use mdlood_core::Error;

/// Process exit codes.
pub mod code {
    pub const OTHER: i32 = 1;
    pub const PARSE: i32 = 2;
    pub const DEGENERATE: i32 = 3;
    pub const DIMENSION: i32 = 4;
    pub const INSUFFICIENT_ROWS: i32 = 5;
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn parse(message: impl Into<String>) -> Self {
        Self::new(code::PARSE, message)
    }

    /// Prefixes the message with what was being done.
    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse(_)
        | Error::InvalidRow { .. }
        | Error::InvalidData(_)
        | Error::Json(_)
        | Error::UnknownStrategy { .. } => code::PARSE,
        Error::Degenerate(_) => code::DEGENERATE,
        Error::DimensionMismatch { .. } => code::DIMENSION,
        Error::SourceExhausted { .. } => code::INSUFFICIENT_ROWS,
        _ => code::OTHER,
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        Self::new(exit_code(&err), err.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Attaches the file name to any error raised while handling it.
pub trait FileContext<T> {
    fn in_file(self, role: &str, path: &Path) -> CliResult<T>;
}

impl<T> FileContext<T> for mdlood_core::Result<T> {
    fn in_file(self, role: &str, path: &Path) -> CliResult<T> {
        self.map_err(|e| CliError::from(e).context(format_args!("{role} file '{}'", path.display())))
    }
}
