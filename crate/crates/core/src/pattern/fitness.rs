use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::cppn::{synthesize, CppnGenome, PatternTile};
use crate::engine::{Dynamics, Stepper};
use crate::error::{Error, Result};
use crate::grid::{Backend, Grid};
use crate::rules::RuleParams;

const DEGENERATE_MASS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PatternConfig {
    pub grid_side: usize,
    /// Tile side; `4 * kernel radius` when unset.
    pub tile_side: Option<usize>,
    pub steps: usize,
    pub stride: usize,
    pub homeostasis_weight: f64,
    /// Total assigned to patterns that fall below the survival threshold.
    pub vanish_penalty: f64,
    pub survival_threshold: f64,
    pub backend: Backend,
}

impl Default for PatternConfig {
    fn default() -> Self {
        Self {
            grid_side: 128,
            tile_side: None,
            steps: 256,
            stride: 8,
            homeostasis_weight: 10.0,
            vanish_penalty: -1000.0,
            survival_threshold: 0.01,
            backend: Backend::Auto,
        }
    }
}

impl PatternConfig {
    pub fn tile_for(&self, rule: &RuleParams) -> usize {
        self.tile_side.unwrap_or(4 * rule.kernel.radius)
    }

    fn check(&self, tile: usize) -> Result<()> {
        if self.stride == 0 || self.steps == 0 {
            return Err(Error::Config("steps and stride must be >= 1".into()));
        }
        if tile > self.grid_side {
            return Err(Error::Config(format!(
                "tile side {tile} exceeds grid side {}",
                self.grid_side
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternFitness {
    pub motility: f64,
    pub homeostasis_penalty: f64,
    pub survived: bool,
    pub total: f64,
}

fn circular_mean(masses: impl Iterator<Item = f64>, period: usize) -> Option<f64> {
    let (mut s, mut c, mut total) = (0.0, 0.0, 0.0);
    for (i, m) in masses.enumerate() {
        let theta = TAU * i as f64 / period as f64;
        s += m * theta.sin();
        c += m * theta.cos();
        total += m;
    }
    if total < DEGENERATE_MASS || s.hypot(c) < DEGENERATE_MASS {
        return None;
    }
    let com = period as f64 * s.atan2(c) / TAU;
    Some(if com < 0.0 { com + period as f64 } else { com })
}

/// Toroidal center of mass `(row, col)` in `[0, H) x [0, W)`; the grid center
/// for empty or rotationally balanced axes.
pub fn center_of_mass(grid: &Grid) -> (f64, f64) {
    let (h, w) = (grid.height(), grid.width());
    let cells = grid.cells();
    let rows = (0..h).map(|r| cells[r * w..(r + 1) * w].iter().sum::<f64>());
    let cols = (0..w).map(|c| (0..h).map(|r| cells[r * w + c]).sum::<f64>());
    let row = circular_mean(rows, h).unwrap_or(h as f64 / 2.0);
    let col = circular_mean(cols, w).unwrap_or(w as f64 / 2.0);
    (row, col)
}

/// `to - from` wrapped into `[-period/2, period/2)`, clamped to a quarter period.
fn wrapped_delta(from: f64, to: f64, period: usize) -> f64 {
    let p = period as f64;
    let d = (to - from + p / 2.0).rem_euclid(p) - p / 2.0;
    let limit = p / 4.0;
    if d.abs() > limit {
        log::warn!(
            "center-of-mass jump {d:.3} exceeds {limit} cells between checkpoints; clamping"
        );
        d.clamp(-limit, limit)
    } else {
        d
    }
}

/// Runs a placed tile under `dynamics` and scores motility, homeostasis and
/// survival. Stops early once the pattern has vanished.
pub fn evaluate_grid<D: Dynamics + ?Sized>(
    dynamics: &mut D,
    mut grid: Grid,
    cfg: &PatternConfig,
) -> PatternFitness {
    let mean0 = grid.mean();
    let mut survived = grid.max() > cfg.survival_threshold;
    let mut com = center_of_mass(&grid);
    let (mut dr, mut dc) = (0.0, 0.0);
    let mut t = 0;
    while survived && t < cfg.steps {
        dynamics.advance(&mut grid);
        t += 1;
        if t % cfg.stride == 0 || t == cfg.steps {
            let next = center_of_mass(&grid);
            dr += wrapped_delta(com.0, next.0, grid.height());
            dc += wrapped_delta(com.1, next.1, grid.width());
            com = next;
            survived = grid.max() > cfg.survival_threshold;
        }
    }
    let motility = dr.hypot(dc);
    let homeostasis_penalty = (grid.mean() - mean0).abs() / mean0.max(DEGENERATE_MASS);
    let total = if survived {
        motility - cfg.homeostasis_weight * homeostasis_penalty
    } else {
        cfg.vanish_penalty
    };
    PatternFitness {
        motility,
        homeostasis_penalty,
        survived,
        total,
    }
}

/// Centers `tile` in an otherwise empty square grid.
pub fn place_tile(tile: &PatternTile, grid_side: usize) -> Result<Grid> {
    let mut grid = Grid::zeros(grid_side, grid_side)?;
    grid.place_centered(&tile.values, tile.side, tile.side)?;
    Ok(grid)
}

pub fn evaluate_tile(
    tile: &PatternTile,
    rule: &RuleParams,
    cfg: &PatternConfig,
) -> Result<PatternFitness> {
    cfg.check(tile.side)?;
    let grid = place_tile(tile, cfg.grid_side)?;
    let mut stepper = Stepper::new(rule, cfg.grid_side, cfg.grid_side, cfg.backend)?;
    Ok(evaluate_grid(&mut stepper, grid, cfg))
}

pub fn evaluate_pattern(
    genome: &CppnGenome,
    rule: &RuleParams,
    cfg: &PatternConfig,
) -> Result<PatternFitness> {
    let side = cfg.tile_for(rule);
    cfg.check(side)?;
    evaluate_tile(&synthesize(genome, side)?, rule, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::{load_preset, GaussianBump, KernelSpec};
    use crate::seed;

    struct ShiftRight;

    impl Dynamics for ShiftRight {
        fn advance(&mut self, grid: &mut Grid) {
            *grid = grid.shifted(0, 1);
        }
    }

    struct Frozen;

    impl Dynamics for Frozen {
        fn advance(&mut self, _: &mut Grid) {}
    }

    fn blob(side: usize) -> Grid {
        let tile = synthesize(&CppnGenome::zeros(), 9).unwrap();
        place_tile(&tile, side).unwrap()
    }

    #[test]
    fn single_cell_center_of_mass() {
        let mut g = Grid::zeros(16, 20).unwrap();
        g.set(5, 9, 0.7);
        let (r, c) = center_of_mass(&g);
        assert!((r - 5.0).abs() < 1e-9 && (c - 9.0).abs() < 1e-9, "{r} {c}");
    }

    #[test]
    fn empty_grid_center_of_mass_is_grid_center() {
        assert_eq!(center_of_mass(&Grid::zeros(10, 14).unwrap()), (5.0, 7.0));
        // two antipodal equal masses cancel: degenerate resultant
        let mut g = Grid::zeros(8, 8).unwrap();
        g.set(0, 0, 1.0);
        g.set(4, 4, 1.0);
        assert_eq!(center_of_mass(&g), (4.0, 4.0));
    }

    #[test]
    fn mass_across_the_seam_averages_on_the_seam() {
        let w = 32;
        let mut g = Grid::zeros(8, w).unwrap();
        g.set(3, w - 1, 0.5);
        g.set(3, 0, 0.5);
        let (_, c) = center_of_mass(&g);
        // angles -pi/16 and 0 with equal weight average to -pi/32, i.e. column w - 0.5
        let expected = w as f64 - 0.5;
        assert!((c - expected).abs() < 1e-9, "{c}");
    }

    #[test]
    fn wrapped_delta_takes_short_way() {
        assert!((wrapped_delta(127.0, 1.0, 128) - 2.0).abs() < 1e-12);
        assert!((wrapped_delta(1.0, 127.0, 128) + 2.0).abs() < 1e-12);
        assert_eq!(wrapped_delta(0.0, 60.0, 128), 32.0);
    }

    #[test]
    fn injected_translation_gives_exact_motility() {
        let cfg = PatternConfig {
            steps: 64,
            ..PatternConfig::default()
        };
        let f = evaluate_grid(&mut ShiftRight, blob(32), &cfg);
        assert!(f.survived);
        assert!((f.motility - 64.0).abs() < 1e-6, "{}", f.motility);
        assert!(f.homeostasis_penalty < 1e-12);
        assert!((f.total - f.motility).abs() < 1e-9);
    }

    #[test]
    fn translation_with_partial_final_checkpoint() {
        let cfg = PatternConfig {
            steps: 61,
            stride: 8,
            ..PatternConfig::default()
        };
        let f = evaluate_grid(&mut ShiftRight, blob(40), &cfg);
        assert!((f.motility - 61.0).abs() < 1e-6, "{}", f.motility);
    }

    #[test]
    fn frozen_pattern_has_zero_motility() {
        let f = evaluate_grid(&mut Frozen, blob(32), &PatternConfig::default());
        assert_eq!(f.motility, 0.0);
        assert_eq!(f.homeostasis_penalty, 0.0);
        assert_eq!(f.total, 0.0);
    }

    #[test]
    fn dt_zero_rule_has_zero_motility() {
        let mut rule = load_preset("Orbium").unwrap();
        rule.dt = 0.0;
        let cfg = PatternConfig {
            grid_side: 64,
            steps: 16,
            ..PatternConfig::default()
        };
        let mut rng = seed::stream(3, "t", &[]);
        let g = CppnGenome::random(&mut rng, 1.0);
        let f = evaluate_pattern(&g, &rule, &cfg).unwrap();
        assert_eq!(f.motility, 0.0);
        assert!(f.survived);
    }

    #[test]
    fn vanishing_tile_gets_penalty() {
        let decay = GaussianBump::new(10.0, 0.01).unwrap();
        let rule = RuleParams::lenia("decay", KernelSpec::orbium(), decay, 0.5).unwrap();
        let cfg = PatternConfig {
            grid_side: 64,
            steps: 32,
            ..PatternConfig::default()
        };
        let f = evaluate_pattern(&CppnGenome::zeros(), &rule, &cfg).unwrap();
        assert!(!f.survived);
        assert_eq!(f.total, -1000.0);
    }

    #[test]
    fn fitness_is_deterministic() {
        let rule = load_preset("Orbium").unwrap();
        let cfg = PatternConfig {
            grid_side: 64,
            steps: 24,
            ..PatternConfig::default()
        };
        let mut rng = seed::stream(4, "t", &[]);
        let g = CppnGenome::random(&mut rng, 1.0);
        let a = evaluate_pattern(&g, &rule, &cfg).unwrap();
        let b = evaluate_pattern(&g, &rule, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn oversized_tile_is_rejected() {
        let rule = load_preset("Orbium").unwrap();
        let cfg = PatternConfig {
            grid_side: 40,
            ..PatternConfig::default()
        };
        assert!(matches!(
            evaluate_pattern(&CppnGenome::zeros(), &rule, &cfg),
            Err(Error::Config(_))
        ));
    }
}
