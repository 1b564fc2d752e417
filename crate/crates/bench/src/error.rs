// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] mps_core::Error),
    #[error("invalid argument: {0}")]
    Usage(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<BenchError>,
    },
}

pub type Result<T> = std::result::Result<T, BenchError>;

impl BenchError {
    /// 2 bad arguments, 3 data or format problems, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        use mps_core::Error as E;
        match self {
            BenchError::Usage(_) => 2,
            BenchError::Core(E::InvalidArgument(_)) => 2,
            BenchError::Core(E::Numerical(_)) => 4,
            BenchError::Core(_) => 3,
            BenchError::Csv(_) | BenchError::Json(_) | BenchError::Io(_) => 3,
            BenchError::Iteration { source, .. } => source.exit_code(),
        }
    }
}

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(BenchError::Usage(msg.into()))
}
