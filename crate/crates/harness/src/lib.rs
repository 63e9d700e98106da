//! Configuration, experiment campaigns, CSV reports and the acceptance suite.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod config;
pub mod experiments;
pub mod slepian;
pub mod table;

use std::path::PathBuf;

pub use config::{ExperimentConfig, ExperimentKind};
pub use table::{emit_report, read_report, ResultTable};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("malformed report: {0}")]
    Report(String),

    #[error(transparent)]
    Numerical(#[from] anderson_core::Error),
}

impl HarnessError {
    /// 2 for bad configuration or parameters, 3 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use anderson_core::Error as E;
        match self {
            HarnessError::Config(_) | HarnessError::Input(_) => 2,
            HarnessError::Numerical(e) => match e {
                E::Domain(_)
                | E::Unsupported(_)
                | E::DimensionMismatch { .. }
                | E::GridTooLarge { .. }
                | E::OffsetOutOfRange { .. }
                | E::MemoryBudget { .. } => 2,
                _ => 3,
            },
            HarnessError::Io { .. } | HarnessError::Report(_) => 1,
        }
    }
}

pub const EXIT_ACCEPTANCE_FAILURE: i32 = 4;
