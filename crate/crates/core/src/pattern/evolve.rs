use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cppn::{synthesize, CppnGenome, PatternTile};
use super::fitness::{evaluate_tile, PatternConfig, PatternFitness};
use crate::error::{Error, Result};
use crate::rules::RuleParams;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolvePatternConfig {
    pub population: usize,
    pub generations: usize,
    /// Best individuals copied unchanged into the next generation.
    pub elitism: usize,
    /// Fraction of the ranked population eligible as parents.
    pub truncation: f64,
    pub mutation_std: f64,
    pub activation_mutation: f64,
    /// Weight std of the initial random genomes.
    pub init_std: f64,
    pub pattern: PatternConfig,
}

impl Default for EvolvePatternConfig {
    fn default() -> Self {
        Self {
            population: 32,
            generations: 100,
            elitism: 1,
            truncation: 0.25,
            mutation_std: 0.1,
            activation_mutation: 0.05,
            init_std: 1.0,
            pattern: PatternConfig::default(),
        }
    }
}

impl EvolvePatternConfig {
    fn check(&self) -> Result<()> {
        if self.population == 0 || self.generations == 0 {
            return Err(Error::Config(
                "population and generations must be >= 1".into(),
            ));
        }
        if self.elitism > self.population {
            return Err(Error::Config("elitism exceeds population".into()));
        }
        if !(self.truncation > 0.0 && self.truncation <= 1.0) {
            return Err(Error::Config(format!(
                "truncation must be in (0, 1], got {}",
                self.truncation
            )));
        }
        if !(self.mutation_std >= 0.0
            && self.init_std >= 0.0
            && self.mutation_std.is_finite()
            && self.init_std.is_finite())
        {
            return Err(Error::Config(
                "mutation and init std must be finite and >= 0".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.activation_mutation) {
            return Err(Error::Config(
                "activation mutation probability must be in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    fn parent_count(&self) -> usize {
        ((self.truncation * self.population as f64).ceil() as usize).clamp(1, self.population)
    }
}

/// One line of the pattern evolution history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternGenerationRecord {
    pub generation: usize,
    /// Best total fitness seen so far.
    pub best_fitness: f64,
    /// Mean total fitness of this generation.
    pub mean_fitness: f64,
    /// Components of the best-so-far individual.
    pub best_motility: f64,
    pub best_homeostasis_penalty: f64,
    pub best_survived: bool,
    pub evaluations: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct PatternEvolution {
    pub best_genome: CppnGenome,
    pub best_tile: PatternTile,
    pub best_fitness: PatternFitness,
    pub history: Vec<PatternGenerationRecord>,
    pub evaluations: usize,
}

/// Truncation-selection GA over CPPN genomes under a fixed rule.
pub fn evolve_patterns(
    rule: &RuleParams,
    cfg: &EvolvePatternConfig,
    seed: u64,
) -> Result<PatternEvolution> {
    cfg.check()?;
    rule.validate()?;
    let side = cfg.pattern.tile_for(rule);
    let mut population: Vec<CppnGenome> = (0..cfg.population)
        .map(|slot| {
            CppnGenome::random(
                &mut seed::stream(seed, "cppn-init", &[slot as u64]),
                cfg.init_std,
            )
        })
        .collect();

    let mut best: Option<(CppnGenome, PatternTile, PatternFitness)> = None;
    let mut history = Vec::with_capacity(cfg.generations);
    let mut evaluations = 0;
    for generation in 0..cfg.generations {
        let scored = population
            .par_iter()
            .map(|g| {
                let tile = synthesize(g, side)?;
                let fitness = evaluate_tile(&tile, rule, &cfg.pattern)?;
                Ok((tile, fitness))
            })
            .collect::<Result<Vec<_>>>()?;
        evaluations += scored.len();

        let mut order: Vec<usize> = (0..scored.len()).collect();
        order.sort_by(|&a, &b| scored[b].1.total.total_cmp(&scored[a].1.total));
        let top = order[0];
        if best
            .as_ref()
            .is_none_or(|(_, _, f)| scored[top].1.total > f.total)
        {
            best = Some((
                population[top].clone(),
                scored[top].0.clone(),
                scored[top].1,
            ));
        }
        let (_, _, bf) = best.as_ref().expect("population is nonempty");
        let mean_fitness = scored.iter().map(|(_, f)| f.total).sum::<f64>() / scored.len() as f64;
        log::info!(
            "generation {generation}: best {:.4} (motility {:.3}) mean {mean_fitness:.4}",
            bf.total,
            bf.motility
        );
        history.push(PatternGenerationRecord {
            generation,
            best_fitness: bf.total,
            mean_fitness,
            best_motility: bf.motility,
            best_homeostasis_penalty: bf.homeostasis_penalty,
            best_survived: bf.survived,
            evaluations: scored.len(),
            seed,
        });

        if generation + 1 == cfg.generations {
            break;
        }
        let parents = &order[..cfg.parent_count()];
        let next: Vec<CppnGenome> = (0..cfg.population)
            .map(|slot| {
                if slot < cfg.elitism {
                    return population[order[slot]].clone();
                }
                let mut rng = seed::stream(seed, "cppn-mutate", &[generation as u64, slot as u64]);
                let parent = parents[rng.random_range(0..parents.len())];
                population[parent].mutated(&mut rng, cfg.mutation_std, cfg.activation_mutation)
            })
            .collect();
        population = next;
    }

    let (best_genome, best_tile, best_fitness) = best.expect("at least one generation ran");
    Ok(PatternEvolution {
        best_genome,
        best_tile,
        best_fitness,
        history,
        evaluations,
    })
}
