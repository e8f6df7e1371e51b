use std::fmt;
use std::process::ExitCode;

/// `Usage` errors exit with 2, `Runtime` errors with 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn runtime(e: impl fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Runtime(_) => ExitCode::from(1),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        };
        // diagnostics stay on one line
        f.write_str(&msg.replace('\n', " "))
    }
}

impl From<hyperlap::Error> for CliError {
    fn from(e: hyperlap::Error) -> Self {
        if e.is_validation() {
            CliError::Usage(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}
