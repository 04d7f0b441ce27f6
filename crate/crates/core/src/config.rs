//! TOML experiment configuration. Angles are given in units of π; unknown
//! keys are rejected.
//!
//! ```toml
//! [crystal]
//! gamma = 0.1
//! chi_over_pi = 0.3
//! eta1 = 0.3
//! eta2 = 0.3
//!
//! [homodyne]
//! eta = 0.85
//!
//! [run]
//! samples = 1000000
//! seed = 7
//!
//! [grid]
//! start_over_pi = 0.0
//! stop_over_pi = 1.875
//! points = 16
//! ```

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::experiment::{ExperimentConfig, PhiGrid, DEFAULT_BLOCKS};
use crate::source::{CrystalParams, D2Port};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    crystal: Crystal,
    homodyne: Homodyne,
    run: Run,
    grid: Grid,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Crystal {
    gamma: f64,
    #[serde(default)]
    phi1_over_pi: f64,
    chi_over_pi: f64,
    #[serde(default)]
    phi_a_over_pi: f64,
    #[serde(default)]
    phi_b_over_pi: f64,
    eta1: f64,
    eta2: f64,
    #[serde(default)]
    d2_port: D2Port,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Homodyne {
    eta: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Run {
    samples: usize,
    #[serde(default = "default_blocks")]
    blocks: usize,
    seed: u64,
    output: Option<PathBuf>,
}

fn default_blocks() -> usize {
    DEFAULT_BLOCKS
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Grid {
    start_over_pi: f64,
    stop_over_pi: f64,
    points: usize,
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let f: File = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_owned()))?;
    let config = ExperimentConfig {
        crystal: CrystalParams {
            gamma: f.crystal.gamma,
            phi1: f.crystal.phi1_over_pi * PI,
            chi: f.crystal.chi_over_pi * PI,
            phi_a: f.crystal.phi_a_over_pi * PI,
            phi_b: f.crystal.phi_b_over_pi * PI,
            eta1: f.crystal.eta1,
            eta2: f.crystal.eta2,
        },
        d2_port: f.crystal.d2_port,
        eta: f.homodyne.eta,
        samples: f.run.samples,
        blocks: f.run.blocks,
        seed: f.run.seed,
        grid: PhiGrid {
            start: f.grid.start_over_pi * PI,
            stop: f.grid.stop_over_pi * PI,
            points: f.grid.points,
        },
        output: f.run.output,
    };
    config.validate().map_err(|e| match e {
        Error::InvalidConfig(_) => e,
        other => Error::InvalidConfig(other.to_string()),
    })?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config(&text)
}
