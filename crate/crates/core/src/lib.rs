//! Fixed-wing UAV guidance and control toolkit.
//!
//! * [`model`]: control-augmented aircraft dynamics and RK4 integration.
//! * [`path`]: Dubins lines, helix arcs, loiters, closest points and switching.
//! * [`guidance`]: lateral and longitudinal guidance errors.
//! * [`nmpc`]: multiple-shooting nonlinear MPC with a box-constrained QP.
//! * [`sysid`]: grey-box output-error identification on logged or synthetic data.
//! * [`sim`]: deterministic closed-loop scenarios, logging and reports.

pub mod guidance;
pub mod model;
pub mod nmpc;
pub mod path;
pub mod sim;
pub mod sysid;

use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("serialization error: {0}")]
    TomlSer(#[from] toml::ser::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("model error: {0}")]
    Model(#[from] model::ModelError),
    #[error("solver error: {0}")]
    Nmpc(#[from] nmpc::NmpcError),
    #[error("identification error: {0}")]
    Sysid(#[from] sysid::SysidError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
