use std::fmt;
use std::io;
use std::path::Path;
use std::process::ExitCode;

/// Exit code 2 for input contract violations, 1 for everything else.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    pub fn input_io(path: &Path, err: io::Error) -> Self {
        CliError::input(format!("cannot read {}: {err}", path.display()))
    }

    pub fn output_io(path: &Path, err: io::Error) -> Self {
        CliError {
            code: 1,
            message: format!("cannot write {}: {err}", path.display()),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code)
    }
}

impl From<lgimap_core::Error> for CliError {
    fn from(e: lgimap_core::Error) -> Self {
        CliError {
            code: if e.is_input_error() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}
