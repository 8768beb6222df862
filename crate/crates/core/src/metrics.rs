//! Fertility and mortality ratios of a rule over randomly seeded soups,
//! reported for two consecutive windows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::Stepper;
use crate::error::{Error, Result};
use crate::grid::{Backend, Grid};
use crate::halting::HALT_THRESHOLD;
use crate::rules::RuleParams;
use crate::seed;

/// Activity above this level outside the box counts as an escape.
pub const ESCAPE_THRESHOLD: f64 = 0.01;
pub const WINDOWS: usize = 2;
pub const CSV_HEADER: &str = "name,fert1,fert2,mort1,mort2,grids,side,patch,window,seed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    pub grids: usize,
    pub side: usize,
    /// Side of the centered uniform-noise patch.
    pub patch: usize,
    /// Side of the centered escape box.
    pub escape_box: usize,
    /// Steps per window.
    pub window: usize,
    pub backend: Backend,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            grids: 128,
            side: 128,
            patch: 32,
            escape_box: 64,
            window: 512,
            backend: Backend::Auto,
        }
    }
}

impl MetricsConfig {
    fn check(&self) -> Result<()> {
        if self.grids == 0 || self.window == 0 || self.patch == 0 {
            return Err(Error::Config("grids, window and patch must be >= 1".into()));
        }
        if self.escape_box >= self.side {
            return Err(Error::Config(format!(
                "escape box {} is not strictly inside grid side {}",
                self.escape_box, self.side
            )));
        }
        if self.patch > self.escape_box {
            return Err(Error::Config(format!(
                "patch {} does not fit inside escape box {}",
                self.patch, self.escape_box
            )));
        }
        Ok(())
    }
}

/// Axis-aligned rectangle of cells; `escaped` looks strictly outside it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EscapeBox {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl EscapeBox {
    /// Centered the same way as [`Grid::random_patch`].
    pub fn centered(grid_height: usize, grid_width: usize, height: usize, width: usize) -> Self {
        Self {
            top: (grid_height - height) / 2,
            left: (grid_width - width) / 2,
            height,
            width,
        }
    }

    fn contains(&self, row: usize, col: usize) -> bool {
        (self.top..self.top + self.height).contains(&row)
            && (self.left..self.left + self.width).contains(&col)
    }
}

/// True iff some cell outside `bbox` exceeds [`ESCAPE_THRESHOLD`].
pub fn escaped(grid: &Grid, bbox: &EscapeBox) -> bool {
    let w = grid.width();
    grid.cells()
        .iter()
        .enumerate()
        .any(|(i, &v)| v > ESCAPE_THRESHOLD && !bbox.contains(i / w, i % w))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rule: String,
    pub fertility: [f64; WINDOWS],
    pub mortality: [f64; WINDOWS],
    pub grids: usize,
    pub side: usize,
    pub patch: usize,
    pub escape_box: usize,
    pub window: usize,
    pub seed: u64,
}

impl MetricsReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.rule,
            self.fertility[0],
            self.fertility[1],
            self.mortality[0],
            self.mortality[1],
            self.grids,
            self.side,
            self.patch,
            self.window,
            self.seed
        )
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct GridOutcome {
    escaped: [bool; WINDOWS],
    dead: [bool; WINDOWS],
}

fn simulate_one(
    rule: &RuleParams,
    cfg: &MetricsConfig,
    bbox: &EscapeBox,
    seed: u64,
    index: usize,
) -> Result<GridOutcome> {
    let mut rng = seed::stream(seed, "metrics-grid", &[index as u64]);
    let mut grid = Grid::random_patch(cfg.side, cfg.side, cfg.patch, &mut rng)?;
    let mut stepper = Stepper::new(rule, cfg.side, cfg.side, cfg.backend)?;
    let zero_fixed = stepper.zero_is_fixed_point();
    let mut out = GridOutcome::default();
    for w in 0..WINDOWS {
        for _ in 0..cfg.window {
            stepper.step_in_place(&mut grid);
            if !out.escaped[w] && escaped(&grid, bbox) {
                out.escaped[w] = true;
            }
            if zero_fixed && grid.max() == 0.0 {
                // an all-zero grid stays zero: dead now and in every later window
                for later in w..WINDOWS {
                    out.dead[later] = true;
                }
                return Ok(out);
            }
        }
        out.dead[w] = grid.max() <= HALT_THRESHOLD;
    }
    Ok(out)
}

pub fn compute_metrics(rule: &RuleParams, cfg: &MetricsConfig, seed: u64) -> Result<MetricsReport> {
    cfg.check()?;
    Stepper::new(rule, cfg.side, cfg.side, cfg.backend)?;
    let bbox = EscapeBox::centered(cfg.side, cfg.side, cfg.escape_box, cfg.escape_box);
    let outcomes = (0..cfg.grids)
        .into_par_iter()
        .map(|i| simulate_one(rule, cfg, &bbox, seed, i))
        .collect::<Result<Vec<_>>>()?;
    let ratio = |f: &dyn Fn(&GridOutcome) -> bool| {
        outcomes.iter().filter(|o| f(o)).count() as f64 / cfg.grids as f64
    };
    Ok(MetricsReport {
        rule: rule.name.clone(),
        fertility: [ratio(&|o| o.escaped[0]), ratio(&|o| o.escaped[1])],
        mortality: [ratio(&|o| o.dead[0]), ratio(&|o| o.dead[1])],
        grids: cfg.grids,
        side: cfg.side,
        patch: cfg.patch,
        escape_box: cfg.escape_box,
        window: cfg.window,
        seed,
    })
}
