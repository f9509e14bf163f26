use std::fmt;

/// Exit code 1: the invocation or its inputs are wrong.
/// Exit code 2: the inputs were fine but the work failed.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

pub fn usage(msg: impl fmt::Display) -> CliError {
    CliError::Usage(msg.to_string())
}

pub fn runtime(msg: impl fmt::Display) -> CliError {
    CliError::Runtime(msg.to_string())
}

/// Attaches a path or action to an error.
pub trait Context<T> {
    fn usage_ctx(self, what: impl fmt::Display) -> CliResult<T>;
    fn runtime_ctx(self, what: impl fmt::Display) -> CliResult<T>;
}

impl<T, E: fmt::Display> Context<T> for Result<T, E> {
    fn usage_ctx(self, what: impl fmt::Display) -> CliResult<T> {
        self.map_err(|e| usage(format!("{what}: {e}")))
    }

    fn runtime_ctx(self, what: impl fmt::Display) -> CliResult<T> {
        self.map_err(|e| runtime(format!("{what}: {e}")))
    }
}
