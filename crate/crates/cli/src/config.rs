use std::fs;
use std::path::{Path, PathBuf};

use lidarprior::{CascadeParams, MappingConfig};
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

/// Settings shared by every subcommand, read from one TOML file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides `mapping.seed` and a scene's own seed when set.
    pub seed: Option<u64>,
    pub mapping: MappingConfig,
    pub detection: CascadeParams,
    /// Frames used to measure per-stage rejection before detection. 0 keeps
    /// the map's ground, planar, volumetric order.
    pub calibration_frames: usize,
    /// Scene spec for `simgen` when none is given on the command line.
    /// Relative to the config file.
    pub scene: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Failure::input(format!("{}: {}", path.display(), e.message())))?;
        if let Some(scene) = &cfg.scene {
            if scene.is_relative() {
                cfg.scene = Some(path.parent().unwrap_or(Path::new(".")).join(scene));
            }
        }
        Ok(cfg)
    }

    /// Applies a `--seed` flag, which beats the file's seed.
    pub fn apply_seed(&mut self, flag: Option<u64>) {
        if flag.is_some() {
            self.seed = flag;
        }
        if let Some(s) = self.seed {
            self.mapping.seed = s;
        }
    }

    pub fn validate(&self) -> Result<(), Failure> {
        self.mapping.validate()?;
        self.detection.validate()?;
        Ok(())
    }
}
