//! Run manifest recorded next to every experiment output.

use serde::Serialize;
use sha2::{Digest, Sha256};
use wbc_core::{ControllerConfig, RobotModel};

use crate::{config, model_file};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Machine {
    pub os: String,
    pub arch: String,
    pub threads: usize,
}

impl Machine {
    pub fn current() -> Self {
        Machine {
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            threads: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub model: String,
    pub model_hash: String,
    pub clock: String,
    pub grid: Vec<f64>,
    pub repeats: usize,
    pub timing_repeats: usize,
    pub outputs: Vec<String>,
    pub machine: Machine,
}

pub fn model_hash(model: &RobotModel) -> String {
    hex::encode(Sha256::digest(model_file::write(model).as_bytes()))
}

impl Manifest {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        command: &str,
        cfg: &ControllerConfig,
        model: &RobotModel,
        clock: &str,
        grid: &[f64],
        repeats: usize,
        timing_repeats: usize,
        outputs: Vec<String>,
    ) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: config::config_hash(cfg),
            seed: cfg.seed,
            model: model.name().into(),
            model_hash: model_hash(model),
            clock: clock.into(),
            grid: grid.to_vec(),
            repeats,
            timing_repeats,
            outputs,
            machine: Machine::current(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }
}
