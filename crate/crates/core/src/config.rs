//! Run configuration shared by all subcommands. Precedence: command-line
//! flags, then the JSON file, then the defaults below.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Backend;
use crate::halting::EvolveRulesConfig;
use crate::metrics::MetricsConfig;
use crate::pattern::EvolvePatternConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub steps: usize,
    pub side: usize,
    /// Side of the centered uniform-noise patch when no init pattern is given.
    pub patch: usize,
    /// Pattern file placed at the grid center instead of noise.
    pub init: Option<PathBuf>,
    /// Write a PGM frame for step 0 and every `frame_every`-th step.
    pub frames: bool,
    pub frame_every: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            steps: 256,
            side: 128,
            patch: 32,
            init: None,
            frames: false,
            frame_every: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderConfig {
    pub pattern: Option<PathBuf>,
    pub steps: usize,
    /// Side of the square canvas; the pattern's own size when unset.
    pub side: Option<usize>,
    pub frame_every: usize,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            pattern: None,
            steps: 64,
            side: None,
            frame_every: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    /// Overrides every per-section backend when set.
    pub backend: Option<Backend>,
    /// Worker threads; all available cores when unset.
    pub workers: Option<usize>,
    /// Preset name or rule file for `simulate`, `evolve-pattern` and `metrics`.
    pub rule: String,
    pub simulate: SimulateConfig,
    pub evolve_ca: EvolveRulesConfig,
    pub evolve_pattern: EvolvePatternConfig,
    pub metrics: MetricsConfig,
    pub render: RenderConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            backend: None,
            workers: None,
            rule: "Orbium".into(),
            simulate: SimulateConfig::default(),
            evolve_ca: EvolveRulesConfig::default(),
            evolve_pattern: EvolvePatternConfig::default(),
            metrics: MetricsConfig::default(),
            render: RenderConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Backend for simulation work, after the top-level override.
    pub fn backend_or(&self, section: Backend) -> Backend {
        self.backend.unwrap_or(section)
    }

    /// Pushes the top-level backend override into every section.
    pub fn apply_backend(&mut self) {
        if let Some(b) = self.backend {
            self.evolve_ca.halting.backend = b;
            self.evolve_pattern.pattern.backend = b;
            self.metrics.backend = b;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        if self.simulate.frame_every == 0 || self.render.frame_every == 0 {
            return Err(Error::Config("frame_every must be >= 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_all_defaults() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = RunConfig::from_json(r#"{"sede": 3}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("sede"), "{err}");
        let err = RunConfig::from_json(r#"{"metrics": {"grid": 3}}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("grid"), "{err}");
        assert!(RunConfig::from_json(r#"{"evolve_ca": {"halting": {"cuont": 3}}}"#).is_err());
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let cfg =
            RunConfig::from_json(r#"{"seed": 9, "metrics": {"grids": 4}, "backend": "direct"}"#)
                .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.metrics.grids, 4);
        assert_eq!(cfg.metrics.window, 512);
        let mut cfg = cfg;
        cfg.apply_backend();
        assert_eq!(cfg.metrics.backend, Backend::Direct);
        assert_eq!(cfg.evolve_pattern.pattern.backend, Backend::Direct);
    }

    #[test]
    fn round_trips() {
        let cfg = RunConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
    }
}
