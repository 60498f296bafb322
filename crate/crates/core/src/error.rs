use std::path::PathBuf;

/// Errors raised anywhere in the crate, tagged by the kind of failure.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {what}{}", step.map(|s| format!(" at inner step {s}")).unwrap_or_default())]
    NonFinite {
        what: &'static str,
        step: Option<usize>,
    },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint format error: {0}")]
    Format(String),

    #[error("unsupported checkpoint version {found} (expected {expected})")]
    Version { found: u16, expected: u16 },

    #[error("replay buffer not ready: {0}")]
    NotReady(String),

    #[error("gradient check failed: max relative error {max_rel_error:e} >= {tolerance:e}")]
    GradCheck { max_rel_error: f64, tolerance: f64 },

    #[error("training diverged at iteration {iteration}: {source}; last good checkpoint: {}", last_checkpoint.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "none".into()))]
    Diverged {
        iteration: usize,
        last_checkpoint: Option<PathBuf>,
        #[source]
        source: Box<Error>,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("metrics: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Short module-provenance tag used when surfacing errors from the CLI.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape { .. } | Error::NonFinite { .. } | Error::GradCheck { .. } => "diffcore",
            Error::Usage(_) => "usage",
            Error::Config(_) => "harness/config",
            Error::Format(_) | Error::Version { .. } => "harness/checkpoint",
            Error::NotReady(_) => "replay",
            Error::Diverged { .. } => "orchestrate",
            Error::Io { .. } | Error::Csv(_) => "io",
        }
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape {
            what,
            expected,
            got,
        })
    }
}
