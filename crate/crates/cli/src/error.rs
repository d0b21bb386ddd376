use std::path::PathBuf;

use telegraphnet::carleman::CarlemanError;
use telegraphnet::dynamics::DynamicsError;
use telegraphnet::inverse::InverseError;
use telegraphnet::network::NetworkError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("config: cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config: {path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
    #[error("plot: {0}")]
    Plot(String),
    #[error("network: {0}")]
    Network(#[from] NetworkError),
    #[error("dynamics: {0}")]
    Dynamics(#[from] DynamicsError),
    #[error("carleman: {0}")]
    Carleman(#[from] CarlemanError),
    #[error("inverse: {0}")]
    Inverse(#[from] InverseError),
}
