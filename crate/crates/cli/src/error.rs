use std::fmt;

/// Exit-code classes: 1 internal, 2 input/usage, 3 configuration.
#[derive(Debug)]
pub enum CliError {
    Internal(String),
    Input(String),
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Internal(_) => 1,
            CliError::Input(_) => 2,
            CliError::Config(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Internal(m) => write!(f, "internal error: {m}"),
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Config(m) => write!(f, "configuration error: {m}"),
        }
    }
}

impl From<spadsim::Error> for CliError {
    fn from(e: spadsim::Error) -> Self {
        if e.is_config_error() {
            CliError::Config(e.to_string())
        } else if e.is_input_error() {
            CliError::Input(e.to_string())
        } else {
            CliError::Internal(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl std::error::Error for CliError {}
