//! CA-rule evolution driven by halting behavior.
//!
//! Two fitness regimes share the same dataset machinery: a simple balance
//! objective (half of the random soups should halt) and an unpredictability
//! objective (small CNNs trained to predict halting should fail).

mod dataset;
mod evolve;
mod fitness;
pub mod predictor;

use serde::{Deserialize, Serialize};

pub use dataset::{active_fraction, generate_dataset, HaltingDataset};
pub use evolve::{
    evolve_rules, evolve_rules_with, EvolutionMode, EvolveRulesConfig, RuleEvolution,
    RuleGenerationRecord,
};
pub use fitness::{
    accuracy, balance_fitness, predictor_fitness, predictor_fitness_on, simple_fitness,
};
pub use predictor::{predict, train_predictor, PredictorConfig, PredictorWeights, TrainReport};

use crate::error::Result;
use crate::grid::Backend;
use crate::rules::{GaussianBump, KernelSpec, RuleParams};

/// A grid counts as halted once its maximum cell is at or below this.
pub const HALT_THRESHOLD: f64 = 1e-6;

pub const SIGMA_MIN: f64 = 0.001;
pub const SIGMA_MAX: f64 = 0.3;

/// Simulation settings for building halting datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HaltingConfig {
    /// Number of random soups per evaluation.
    pub count: usize,
    pub grid_side: usize,
    /// Side of the centered noise patch; half the grid side when unset.
    pub patch_side: Option<usize>,
    /// Steps simulated before reading the label.
    pub horizon: usize,
    pub halt_threshold: f64,
    pub backend: Backend,
}

impl Default for HaltingConfig {
    fn default() -> Self {
        Self {
            count: 128,
            grid_side: 64,
            patch_side: None,
            horizon: 256,
            halt_threshold: HALT_THRESHOLD,
            backend: Backend::Auto,
        }
    }
}

impl HaltingConfig {
    pub fn patch(&self) -> usize {
        self.patch_side.unwrap_or(self.grid_side / 2)
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Glaberish rule genome in unbounded coordinates:
/// `[genesis mu, genesis sigma, persistence mu, persistence sigma]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateGenome {
    pub raw: [f64; 4],
}

impl CandidateGenome {
    pub fn new(raw: [f64; 4]) -> Self {
        Self { raw }
    }

    /// Maps to bounds: mu in (0, 1), sigma in (0.001, 0.3), monotone per coordinate.
    pub fn squash(&self) -> [f64; 4] {
        let mu = |x: f64| logistic(x);
        let sigma = |x: f64| SIGMA_MIN + (SIGMA_MAX - SIGMA_MIN) * logistic(x);
        [
            mu(self.raw[0]),
            sigma(self.raw[1]),
            mu(self.raw[2]),
            sigma(self.raw[3]),
        ]
    }

    /// Inverse of [`squash`](Self::squash); bounded values must lie strictly inside the bounds.
    pub fn from_bounded(bounded: [f64; 4]) -> Self {
        let sigma = |s: f64| logit((s - SIGMA_MIN) / (SIGMA_MAX - SIGMA_MIN));
        Self {
            raw: [
                logit(bounded[0]),
                sigma(bounded[1]),
                logit(bounded[2]),
                sigma(bounded[3]),
            ],
        }
    }

    pub fn to_rule(&self, name: &str, kernel: &KernelSpec, dt: f64) -> Result<RuleParams> {
        let [gm, gs, pm, ps] = self.squash();
        RuleParams::glaberish(
            name,
            kernel.clone(),
            GaussianBump::new(gm, gs)?,
            GaussianBump::new(pm, ps)?,
            dt,
        )
    }
}
