use thiserror::Error;

/// Anything that stops a command before it can report a result. All of these
/// map to exit code 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] pgg_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Whether the property a command checks held.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Holds,
    Violated,
}

impl Status {
    pub fn from_bool(holds: bool) -> Self {
        if holds {
            Status::Holds
        } else {
            Status::Violated
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Status::Holds => 0,
            Status::Violated => 1,
        }
    }
}

pub const USAGE_EXIT: i32 = 2;
