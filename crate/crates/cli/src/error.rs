use std::fmt;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const NUMERICAL: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const DATA: i32 = 3;
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: exit::USAGE,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: exit::DATA,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: exit::NUMERICAL,
            message: message.into(),
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        Self::usage(format!("{}: {e}", path.display()))
    }

    /// Maps a library error raised while validating configuration.
    pub fn from_config(e: qmem::Error) -> Self {
        Self {
            code: code_for(&e, exit::USAGE),
            message: e.to_string(),
        }
    }

    /// Maps a library error raised while processing input data, where
    /// invalid values are a data-quality rejection.
    pub fn from_data(e: qmem::Error) -> Self {
        Self {
            code: code_for(&e, exit::DATA),
            message: e.to_string(),
        }
    }

    pub fn context(mut self, what: &str) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

fn code_for(e: &qmem::Error, invalid_parameter: i32) -> i32 {
    use qmem::Error::*;
    match e {
        InvalidParameter { .. } => invalid_parameter,
        Window(_) | NonUniformGrid | UndefinedAdiabaticity | Csv(_) | Io(_) => exit::USAGE,
        Divergence { .. } | NoConvergence { .. } => exit::NUMERICAL,
        ZeroEnergy
        | GridMismatch
        | UnresolvableFringes { .. }
        | SupportTooSmall { .. }
        | RankDeficient(_)
        | TooFewPoints { .. } => exit::DATA,
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = std::result::Result<T, CliError>;
