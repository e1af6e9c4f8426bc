use std::fmt;
use std::path::Path;
use std::process::ExitCode;

/// A failed command: bad input (exit 2) or a pipeline failure (exit 3).
#[derive(Debug)]
pub enum Failure {
    Input(String),
    Pipeline(String),
}

impl Failure {
    pub fn input(msg: impl Into<String>) -> Self {
        Failure::Input(msg.into())
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Failure::Input(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            Failure::Input(_) => ExitCode::from(2),
            Failure::Pipeline(_) => ExitCode::from(3),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) | Failure::Pipeline(m) => f.write_str(m),
        }
    }
}

impl From<lidarprior::Error> for Failure {
    fn from(e: lidarprior::Error) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Pipeline(e.to_string())
        }
    }
}
