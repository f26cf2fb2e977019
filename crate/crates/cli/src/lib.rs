//! Experiment driver for the `tempent` binary: configuration, subcommands and CSV output.

pub mod analysis;
pub mod collapse;
pub mod commands;
pub mod config;
pub mod output;

use thiserror::Error;

pub use config::{Command, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

macro_rules! numerical_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Numerical(e.to_string())
            }
        }
    )*};
}

numerical_from!(
    tempent_core::model::ModelError,
    tempent_core::majorana::MajoranaError,
    tempent_core::gaussian::GaussianError,
    tempent_core::spin::SpinError,
    tempent_core::mps::MpsError
);
