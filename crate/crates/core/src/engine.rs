//! Generic stepping on top of the convolution backends.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{Backend, Convolver, Grid, Kernel};
use crate::rules::{build_kernel, RuleParams, Update};

/// Anything that advances a grid by one time step in place.
pub trait Dynamics {
    fn advance(&mut self, grid: &mut Grid);
}

/// A rule bound to a grid shape, with its kernel spectrum and scratch space
/// prepared once.
pub struct Stepper {
    update: Update,
    dt: f64,
    zero_fixed: bool,
    convolver: Convolver,
    neighborhood: Vec<f64>,
}

impl Stepper {
    pub fn new(rule: &RuleParams, height: usize, width: usize, backend: Backend) -> Result<Self> {
        rule.validate()?;
        let kernel = build_kernel(&rule.kernel)?;
        Self::with_kernel(rule, &kernel, height, width, backend)
    }

    /// Uses `kernel` in place of the one described by `rule.kernel`.
    pub fn with_kernel(
        rule: &RuleParams,
        kernel: &Kernel,
        height: usize,
        width: usize,
        backend: Backend,
    ) -> Result<Self> {
        let convolver = Convolver::new(kernel, height, width, backend)?;
        Ok(Self {
            update: rule.update,
            dt: rule.dt,
            zero_fixed: rule.zero_is_fixed_point(),
            convolver,
            neighborhood: vec![0.0; height * width],
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.convolver.shape()
    }

    /// True when an all-zero grid can never become active again.
    pub fn zero_is_fixed_point(&self) -> bool {
        self.zero_fixed
    }

    pub fn step_in_place(&mut self, grid: &mut Grid) {
        self.convolver.convolve_into(grid, &mut self.neighborhood);
        self.update
            .apply(self.dt, grid.cells_mut(), &self.neighborhood);
    }
}

impl Dynamics for Stepper {
    fn advance(&mut self, grid: &mut Grid) {
        self.step_in_place(grid);
    }
}

/// One CA update with the default backend for the grid size.
pub fn step(grid: &Grid, rule: &RuleParams) -> Result<Grid> {
    let mut stepper = Stepper::new(rule, grid.height(), grid.width(), Backend::Auto)?;
    let mut out = grid.clone();
    stepper.step_in_place(&mut out);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub grid: Grid,
    pub summaries: Vec<StepSummary>,
}

pub fn run(grid: &Grid, rule: &RuleParams, steps: usize) -> Result<RunOutput> {
    run_with_backend(grid, rule, steps, Backend::Auto)
}

pub fn run_with_backend(
    grid: &Grid,
    rule: &RuleParams,
    steps: usize,
    backend: Backend,
) -> Result<RunOutput> {
    let mut stepper = Stepper::new(rule, grid.height(), grid.width(), backend)?;
    Ok(run_dynamics(&mut stepper, grid.clone(), steps, |_, _| {}))
}

/// Applies `dynamics` `steps` times, calling `observe(step_index, grid)` after
/// each step (indices start at 1).
pub fn run_dynamics<D, F>(
    dynamics: &mut D,
    mut grid: Grid,
    steps: usize,
    mut observe: F,
) -> RunOutput
where
    D: Dynamics + ?Sized,
    F: FnMut(usize, &Grid),
{
    let mut summaries = Vec::with_capacity(steps);
    for t in 1..=steps {
        dynamics.advance(&mut grid);
        summaries.push(StepSummary {
            mean: grid.mean(),
            max: grid.max(),
        });
        observe(t, &grid);
    }
    RunOutput { grid, summaries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::{load_preset, GaussianBump, KernelSpec};
    use crate::seed;

    fn decay_rule() -> RuleParams {
        let never = GaussianBump::new(10.0, 0.01).unwrap();
        RuleParams::glaberish("decay", KernelSpec::orbium(), never, never, 0.1).unwrap()
    }

    #[test]
    fn zero_grid_stays_zero_when_nothing_is_born() {
        let g = Grid::zeros(40, 40).unwrap();
        let out = run(&g, &decay_rule(), 5).unwrap();
        assert!(out.grid.cells().iter().all(|v| *v == 0.0));
        assert!(out.summaries.iter().all(|s| s.mean == 0.0 && s.max == 0.0));
    }

    #[test]
    fn zero_dt_is_identity() {
        let mut rule = load_preset("Orbium").unwrap();
        rule.dt = 0.0;
        let mut rng = seed::stream(3, "t", &[]);
        let g = Grid::random_patch(64, 64, 64, &mut rng).unwrap();
        assert_eq!(step(&g, &rule).unwrap(), g);
    }

    #[test]
    fn zero_steps_returns_input() {
        let mut rng = seed::stream(4, "t", &[]);
        let g = Grid::random_patch(32, 32, 16, &mut rng).unwrap();
        let out = run(&g, &load_preset("Orbium").unwrap(), 0).unwrap();
        assert_eq!(out.grid, g);
        assert!(out.summaries.is_empty());
    }

    #[test]
    fn repeated_steps_are_deterministic() {
        let rule = load_preset("Orbium").unwrap();
        let mut rng = seed::stream(5, "t", &[]);
        let g = Grid::random_patch(64, 64, 32, &mut rng).unwrap();
        let a = run(&g, &rule, 2).unwrap();
        let b = run(&g, &rule, 2).unwrap();
        assert_eq!(a.grid.cells(), b.grid.cells());
        assert_eq!(a.summaries.len(), 2);
    }

    #[test]
    fn decay_vanishes_within_ceil_inverse_dt_steps() {
        let rule = decay_rule();
        let g = Grid::filled(32, 32, 1.0).unwrap();
        let out = run(&g, &rule, (1.0 / rule.dt).ceil() as usize).unwrap();
        assert!(out.grid.max() <= 1e-12, "max {}", out.grid.max());
        let out = run(&out.grid, &rule, 1).unwrap();
        assert_eq!(out.grid.max(), 0.0);
    }
}
