use std::fmt;

use combicon::Error;

/// Process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Validation = 1,
    Resource = 2,
    Invariant = 3,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or environment.
    Usage(String),
    /// The instance file does not describe a valid instance.
    Validation(String),
    Core(Error),
    Io(std::io::Error),
    /// One or more verification checks failed.
    ChecksFailed(usize),
}

impl CliError {
    pub fn status(&self) -> ExitStatus {
        match self {
            CliError::Usage(_) | CliError::Validation(_) | CliError::Io(_) => ExitStatus::Validation,
            CliError::Core(Error::Resource(_)) => ExitStatus::Resource,
            CliError::Core(Error::Invariant(_)) | CliError::ChecksFailed(_) => ExitStatus::Invariant,
            CliError::Core(_) => ExitStatus::Validation,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Validation(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::ChecksFailed(n) => write!(f, "{n} verification check(s) failed"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let code = |e: CliError| e.status() as i32;
        assert_eq!(code(CliError::Validation("x".into())), 1);
        assert_eq!(code(Error::Parse("x".into()).into()), 1);
        assert_eq!(code(Error::Precondition("x".into()).into()), 1);
        assert_eq!(code(Error::Resource("x".into()).into()), 2);
        assert_eq!(code(Error::Invariant("x".into()).into()), 3);
        assert_eq!(code(CliError::ChecksFailed(1)), 3);
    }
}
