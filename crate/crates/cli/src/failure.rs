use std::fmt;
use std::path::Path;

/// Process exit codes. These values are part of the command-line contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Usage = 1,
    MissingInput = 2,
    Parse = 3,
    Label = 4,
    Alignment = 5,
}

#[derive(Debug)]
pub struct Failure {
    pub code: ExitCode,
    pub message: String,
}

pub type CliResult<T> = Result<T, Failure>;

impl Failure {
    pub fn new(code: ExitCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(ExitCode::Usage, message)
    }

    pub fn missing(path: &Path, err: &std::io::Error) -> Self {
        Self::new(
            ExitCode::MissingInput,
            format!("cannot read {}: {err}", path.display()),
        )
    }

    /// Attaches the offending file to a library error.
    pub fn in_file(path: &Path, err: trtm_core::Error) -> Self {
        let inner = Self::from(err);
        Self::new(inner.code, format!("{}: {}", path.display(), inner.message))
    }

    pub fn write(path: &Path, err: &std::io::Error) -> Self {
        Self::new(
            ExitCode::Usage,
            format!("cannot write {}: {err}", path.display()),
        )
    }
}

impl From<trtm_core::Error> for Failure {
    fn from(err: trtm_core::Error) -> Self {
        let code = match err {
            trtm_core::Error::Parse { .. } => ExitCode::Parse,
            trtm_core::Error::UnlabeledVersion(_) => ExitCode::Label,
            trtm_core::Error::Io(_) => ExitCode::MissingInput,
            _ => ExitCode::Usage,
        };
        Self::new(code, err.to_string())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}
