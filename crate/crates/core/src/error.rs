use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Every entry of a logit vector ended up masked.
    #[error("no admissible token: every entry is masked")]
    Exclusion,

    /// Arguments violate an operation's preconditions (shape or mask mismatch, bad range).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Invalid configuration. `path` names the offending field.
    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    /// Malformed or inconsistent input data.
    #[error("input error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Input { line: Option<usize>, msg: String },

    /// A logit provider failed while decoding.
    #[error("provider failed at step {step}: {source}")]
    Provider {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config { path: path.into(), msg: msg.into() }
    }

    pub fn input(line: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Input { line, msg: msg.into() }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }

    /// Process exit code for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            Error::Input { .. } | Error::Io { .. } => 3,
            Error::Provider { source, .. } => source.exit_code(),
            Error::Exclusion | Error::Contract(_) => 4,
        }
    }
}
