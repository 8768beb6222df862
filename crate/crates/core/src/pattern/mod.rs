//! CPPN-synthesized patterns evolved for motility under a fixed rule.

mod cppn;
mod evolve;
mod fitness;

pub use cppn::{synthesize, Activation, CppnGenome, PatternTile, HIDDEN, INPUTS, WEIGHT_COUNT};
pub use evolve::{evolve_patterns, EvolvePatternConfig, PatternEvolution, PatternGenerationRecord};
pub use fitness::{
    center_of_mass, evaluate_grid, evaluate_pattern, evaluate_tile, place_tile, PatternConfig,
    PatternFitness,
};
