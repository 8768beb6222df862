//! Continuous Life-like cellular automata toolkit.
//!
//! * [`grid`] / [`engine`]: toroidal grids, FFT and direct convolution, stepping.
//! * [`rules`]: Lenia and Glaberish updates, kernels, shipped presets.
//! * [`cmaes`]: ask/tell CMA-ES used as the outer optimizer.
//! * [`halting`]: rule evolution for balanced or unpredictable halting.
//! * [`pattern`]: CPPN pattern synthesis and glider search.
//! * [`metrics`]: fertility and mortality ratios over random soups.
//! * [`io`] / [`config`]: files, frames and run configuration.

pub mod cmaes;
pub mod config;
pub mod engine;
pub mod error;
pub mod grid;
pub mod halting;
pub mod io;
pub mod metrics;
pub mod pattern;
pub mod rules;
pub mod seed;

pub use engine::{run, step, Dynamics, RunOutput, StepSummary, Stepper};
pub use error::{Error, Result};
pub use grid::{convolve, Backend, Grid, Kernel, Neighborhood};
pub use metrics::{compute_metrics, escaped, MetricsConfig, MetricsReport};
pub use pattern::{
    center_of_mass, evaluate_pattern, evolve_patterns, synthesize, CppnGenome, PatternTile,
};
pub use rules::{
    build_kernel, growth_value, load_preset, preset_names, step_glaberish, step_lenia, Framework,
    GaussianBump, KernelCore, KernelSpec, RuleParams, Update,
};
