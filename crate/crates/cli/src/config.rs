//! The project configuration file. Every section is optional; missing fields take
//! the defaults documented in [`DEFAULT_CONFIG`].

use std::path::{Path, PathBuf};

use orthorecon::blueprint::SynthOptions;
use orthorecon::field::{NetworkConfig, TrainConfig};
use orthorecon::reconstruct::{EvalConfig, ReconstructConfig};
use orthorecon::sampling::SamplerConfig;
use orthorecon_service::ServiceConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Commented default configuration; also the reference for every field.
pub const DEFAULT_CONFIG: &str = include_str!("../orthorecon.toml");

/// File picked up from the working directory when `--config` is not given.
pub const LOCAL_CONFIG: &str = "orthorecon.toml";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Source meshes (`.obj`, `.stl`, `.ply`).
    pub meshes: PathBuf,
    /// Synthetic blueprints: `<name>.png` plus `<name>.views.json`.
    pub blueprints: PathBuf,
    /// Sample files `<name>.sdfs` and their diagnostics.
    pub samples: PathBuf,
    /// Weight files `<id>.pafw`.
    pub checkpoints: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            meshes: "data/meshes".into(),
            blueprints: "data/blueprints".into(),
            samples: "data/samples".into(),
            checkpoints: "checkpoints".into(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectConfig {
    pub paths: Paths,
    pub sampler: SamplerConfig,
    pub synth: SynthOptions,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub reconstruct: ReconstructConfig,
    pub eval: EvalConfig,
    pub service: ServiceConfig,
}

impl ProjectConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::input(format!("invalid configuration: {e}")))
    }

    /// Reads `path`, resolving relative paths inside it against the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read configuration {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| e.context(&path.display().to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.rebase(base);
        Ok(cfg)
    }

    /// Explicit file, else `orthorecon.toml` in the working directory, else defaults.
    pub fn discover(explicit: Option<&Path>) -> Result<Self, CliError> {
        match explicit {
            Some(p) => Self::load(p),
            None if Path::new(LOCAL_CONFIG).is_file() => Self::load(Path::new(LOCAL_CONFIG)),
            None => Ok(Self::default()),
        }
    }

    fn rebase(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.paths.meshes);
        join(&mut self.paths.blueprints);
        join(&mut self.paths.samples);
        join(&mut self.paths.checkpoints);
        join(&mut self.service.data_dir);
        join(&mut self.service.checkpoints_dir);
    }
}
