use rayon::prelude::*;

use super::HaltingConfig;
use crate::engine::Stepper;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::rules::RuleParams;
use crate::seed;

/// Random soups labelled by whether they are still active at the horizon.
#[derive(Debug, Clone)]
pub struct HaltingDataset {
    pub initial_grids: Vec<Grid>,
    /// `true` = still active at the horizon, `false` = halted.
    pub labels: Vec<bool>,
    pub horizon: usize,
    /// Rule that produced the labels; `None` for hand-built datasets.
    pub rule: Option<RuleParams>,
}

impl HaltingDataset {
    /// Wraps externally labelled grids (no simulation involved).
    pub fn from_parts(initial_grids: Vec<Grid>, labels: Vec<bool>) -> Result<Self> {
        if initial_grids.len() != labels.len() {
            return Err(Error::Usage(format!(
                "{} grids but {} labels",
                initial_grids.len(),
                labels.len()
            )));
        }
        if let Some(first) = initial_grids.first() {
            let shape = (first.height(), first.width());
            if initial_grids
                .iter()
                .any(|g| (g.height(), g.width()) != shape)
            {
                return Err(Error::Dimension(
                    "dataset grids must share dimensions".into(),
                ));
            }
        }
        Ok(Self {
            initial_grids,
            labels,
            horizon: 0,
            rule: None,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn active_fraction(&self) -> f64 {
        self.labels.iter().filter(|l| **l).count() as f64 / self.len().max(1) as f64
    }
}

fn initial_grid(cfg: &HaltingConfig, seed: u64, index: usize) -> Result<Grid> {
    let mut rng = seed::stream(seed, "halting-grid", &[index as u64]);
    Grid::random_patch(cfg.grid_side, cfg.grid_side, cfg.patch(), &mut rng)
}

/// Simulates `grid` to the horizon; true if any cell is above the threshold.
fn still_active(stepper: &mut Stepper, mut grid: Grid, cfg: &HaltingConfig) -> bool {
    let zero_fixed = stepper.zero_is_fixed_point();
    for _ in 0..cfg.horizon {
        stepper.step_in_place(&mut grid);
        if zero_fixed && grid.max() == 0.0 {
            return false;
        }
    }
    grid.max() > cfg.halt_threshold
}

fn check_config(cfg: &HaltingConfig) -> Result<()> {
    if cfg.count < 2 {
        return Err(Error::Config(format!(
            "dataset count must be >= 2, got {}",
            cfg.count
        )));
    }
    if cfg.horizon < 1 {
        return Err(Error::Config("horizon must be >= 1".into()));
    }
    if cfg.patch() == 0 || cfg.patch() > cfg.grid_side {
        return Err(Error::Config(format!(
            "patch side {} does not fit grid side {}",
            cfg.patch(),
            cfg.grid_side
        )));
    }
    Ok(())
}

fn labels_for(
    rule: &RuleParams,
    cfg: &HaltingConfig,
    seed: u64,
    keep_grids: bool,
) -> Result<(Vec<Grid>, Vec<bool>)> {
    check_config(cfg)?;
    // fail early on kernel/grid mismatch before spawning work
    Stepper::new(rule, cfg.grid_side, cfg.grid_side, cfg.backend)?;
    let results: Vec<Result<(Option<Grid>, bool)>> = (0..cfg.count)
        .into_par_iter()
        .map(|i| {
            let grid = initial_grid(cfg, seed, i)?;
            let mut stepper = Stepper::new(rule, cfg.grid_side, cfg.grid_side, cfg.backend)?;
            let label = still_active(&mut stepper, grid.clone(), cfg);
            Ok((keep_grids.then_some(grid), label))
        })
        .collect();
    let mut grids = Vec::new();
    let mut labels = Vec::with_capacity(cfg.count);
    for r in results {
        let (g, l) = r?;
        grids.extend(g);
        labels.push(l);
    }
    Ok((grids, labels))
}

/// Builds `cfg.count` patch-initialized soups and labels them by simulation.
pub fn generate_dataset(
    rule: &RuleParams,
    cfg: &HaltingConfig,
    seed: u64,
) -> Result<HaltingDataset> {
    let (initial_grids, labels) = labels_for(rule, cfg, seed, true)?;
    Ok(HaltingDataset {
        initial_grids,
        labels,
        horizon: cfg.horizon,
        rule: Some(rule.clone()),
    })
}

/// Fraction of soups still active at the horizon.
pub fn active_fraction(rule: &RuleParams, cfg: &HaltingConfig, seed: u64) -> Result<f64> {
    let (_, labels) = labels_for(rule, cfg, seed, false)?;
    Ok(labels.iter().filter(|l| **l).count() as f64 / labels.len() as f64)
}
