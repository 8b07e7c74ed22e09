use std::fmt;

/// What went wrong, which decides the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad flags, config values or refused overwrites.
    Usage,
    /// Missing, unreadable or malformed input data.
    Data,
    /// Training diverged or produced unusable parameters.
    Training,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Usage => 1,
            ErrorKind::Data => 2,
            ErrorKind::Training => 3,
        }
    }
}

/// An error tagged with the pipeline stage that raised it.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{stage}: {message}")]
pub struct RunError {
    pub kind: ErrorKind,
    pub stage: Stage,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Ingest,
    Prepare,
    Train,
    Evaluate,
    Report,
    Export,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Prepare => "prepare",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
            Stage::Export => "export",
        })
    }
}

impl RunError {
    pub fn new(kind: ErrorKind, stage: Stage, message: impl Into<String>) -> Self {
        Self { kind, stage, message: message.into() }
    }

    pub fn usage(stage: Stage, message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Usage, stage, message)
    }

    pub fn data(stage: Stage, message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Data, stage, message)
    }

    pub fn training(stage: Stage, message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Training, stage, message)
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }

    /// Classifies a core error raised during `stage`.
    pub fn from_core(stage: Stage, err: tprnn_core::Error) -> Self {
        use tprnn_core::Error as E;
        let kind = match (&err, stage) {
            (E::Config(_), _) => ErrorKind::Usage,
            (E::Diverged { .. } | E::NonFinite(_), Stage::Train) => ErrorKind::Training,
            _ => ErrorKind::Data,
        };
        Self::new(kind, stage, err.to_string())
    }

    /// Prefixes the message with what was being processed.
    pub fn with_context(mut self, what: &str) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }

    /// An IO failure on `path`.
    pub fn io(stage: Stage, path: &std::path::Path, err: std::io::Error) -> Self {
        Self::data(stage, format!("{}: {err}", path.display()))
    }
}

pub type RunResult<T> = Result<T, RunError>;
