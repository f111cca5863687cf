use std::fmt;

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Transport(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Transport(_) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Transport(_) => "transport",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Transport(m) => m,
        }
    }
}

/// `error[<kind>]: <message>` on a single line.
impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flat = self.message().split_whitespace().collect::<Vec<_>>().join(" ");
        write!(f, "error[{}]: {}", self.kind(), flat)
    }
}

pub fn data(e: impl fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

pub fn usage(e: impl fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

pub type CliResult<T = ()> = Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_line() {
        let e = CliError::Data("bad\nthing  here".into());
        assert_eq!(e.to_string(), "error[data]: bad thing here");
        assert_eq!(e.exit_code(), 3);
        assert_eq!(CliError::Transport(String::new()).exit_code(), 4);
    }
}
