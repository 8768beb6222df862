use std::fmt;
use std::str::FromStr;

use rand::distr::Open01;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{predictor_fitness, simple_fitness, CandidateGenome, HaltingConfig, PredictorConfig};
use crate::cmaes::{default_population, EvoState};
use crate::error::{Error, Result};
use crate::rules::{KernelSpec, RuleParams, DEFAULT_DT};
use crate::seed;

/// Fitness assigned to candidates whose evaluation produced NaN or infinity.
pub const SANITIZED_FITNESS: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvolutionMode {
    /// CMA-ES on the halting-balance fitness.
    Simple,
    /// CMA-ES on predictor unpredictability.
    Predictor,
    /// Uniform sampling inside the genome bounds, best-so-far retained.
    Random,
}

impl fmt::Display for EvolutionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvolutionMode::Simple => "simple",
            EvolutionMode::Predictor => "predictor",
            EvolutionMode::Random => "random",
        })
    }
}

impl FromStr for EvolutionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simple" => Ok(EvolutionMode::Simple),
            "predictor" => Ok(EvolutionMode::Predictor),
            "random" => Ok(EvolutionMode::Random),
            other => Err(Error::Usage(format!(
                "unknown mode `{other}` (expected simple, predictor or random)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveRulesConfig {
    pub mode: EvolutionMode,
    pub generations: usize,
    /// Candidates per generation; `4 + floor(3 ln 4) = 8` when unset.
    pub population: Option<usize>,
    pub sigma0: f64,
    /// Initial CMA-ES mean in unbounded genome coordinates.
    pub x0: [f64; 4],
    /// Neighborhood held fixed during evolution.
    pub kernel: KernelSpec,
    pub dt: f64,
    pub halting: HaltingConfig,
    pub predictor: PredictorConfig,
}

impl Default for EvolveRulesConfig {
    fn default() -> Self {
        Self {
            mode: EvolutionMode::Simple,
            generations: 10,
            population: None,
            sigma0: 1.0,
            x0: [0.0; 4],
            kernel: KernelSpec::h_natans(),
            dt: DEFAULT_DT,
            halting: HaltingConfig::default(),
            predictor: PredictorConfig::default(),
        }
    }
}

/// One line of the evolution history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleGenerationRecord {
    pub generation: usize,
    /// Best fitness seen so far.
    pub best_fitness: f64,
    /// Mean fitness of this generation.
    pub mean_fitness: f64,
    /// Raw genome of the best-so-far candidate.
    pub best_genome: [f64; 4],
    pub mode: EvolutionMode,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct RuleEvolution {
    pub best_genome: CandidateGenome,
    pub best_rule: RuleParams,
    pub best_fitness: f64,
    pub history: Vec<RuleGenerationRecord>,
    pub evaluations: usize,
}

/// Evolves Glaberish rules with the fitness selected by `cfg.mode`.
/// Random mode ranks its samples with the simple balance fitness.
pub fn evolve_rules(cfg: &EvolveRulesConfig, seed: u64) -> Result<RuleEvolution> {
    let fitness = |genome: &CandidateGenome, stream: u64| -> Result<f64> {
        let rule = genome.to_rule("candidate", &cfg.kernel, cfg.dt)?;
        match cfg.mode {
            EvolutionMode::Simple | EvolutionMode::Random => {
                simple_fitness(&rule, &cfg.halting, stream)
            }
            EvolutionMode::Predictor => {
                predictor_fitness(&rule, &cfg.halting, &cfg.predictor, stream)
            }
        }
    };
    evolve_rules_with(cfg, seed, fitness)
}

/// Same loop as [`evolve_rules`] with a caller-supplied fitness. The fitness
/// receives the candidate and a seed derived from (seed, generation, index).
pub fn evolve_rules_with<F>(cfg: &EvolveRulesConfig, seed: u64, fitness: F) -> Result<RuleEvolution>
where
    F: Fn(&CandidateGenome, u64) -> Result<f64> + Sync,
{
    if cfg.generations == 0 {
        return Err(Error::Config("generations must be >= 1".into()));
    }
    let lambda = cfg.population.unwrap_or_else(|| default_population(4));
    let mut cma = match cfg.mode {
        EvolutionMode::Random => None,
        _ => Some(EvoState::new(
            4,
            &cfg.x0,
            cfg.sigma0,
            seed::derive(seed, "rule-cmaes", &[]),
            Some(lambda),
        )?),
    };

    let mut best: Option<(CandidateGenome, f64)> = None;
    let mut history = Vec::with_capacity(cfg.generations);
    let mut evaluations = 0;
    for generation in 0..cfg.generations {
        let candidates: Vec<Vec<f64>> = match cma.as_mut() {
            Some(state) => state.ask(),
            None => {
                let mut rng = seed::stream(seed, "random-genome", &[generation as u64]);
                (0..lambda)
                    .map(|_| {
                        (0..4)
                            .map(|_| {
                                let u: f64 = rng.sample(Open01);
                                (u / (1.0 - u)).ln()
                            })
                            .collect()
                    })
                    .collect()
            }
        };
        let scores = candidates
            .par_iter()
            .enumerate()
            .map(|(i, c)| {
                let genome = CandidateGenome::new([c[0], c[1], c[2], c[3]]);
                let stream = seed::derive(seed, "candidate", &[generation as u64, i as u64]);
                fitness(&genome, stream)
            })
            .collect::<Result<Vec<f64>>>()?;
        let scores: Vec<f64> = scores
            .into_iter()
            .map(|f| if f.is_finite() { f } else { SANITIZED_FITNESS })
            .collect();
        evaluations += scores.len();

        for (c, &f) in candidates.iter().zip(&scores) {
            if best.as_ref().is_none_or(|(_, b)| f > *b) {
                best = Some((CandidateGenome::new([c[0], c[1], c[2], c[3]]), f));
            }
        }
        if let Some(state) = cma.as_mut() {
            state.tell(&candidates, &scores)?;
        }

        let (genome, best_fitness) = best.expect("population is nonempty");
        let mean_fitness = scores.iter().sum::<f64>() / scores.len() as f64;
        log::info!(
            "generation {generation}: best {best_fitness:.6} mean {mean_fitness:.6} genome {:?}",
            genome.squash()
        );
        history.push(RuleGenerationRecord {
            generation,
            best_fitness,
            mean_fitness,
            best_genome: genome.raw,
            mode: cfg.mode,
            seed,
        });
    }

    let (best_genome, best_fitness) = best.expect("at least one generation ran");
    let best_rule =
        best_genome.to_rule(&format!("evolved-{}-{seed}", cfg.mode), &cfg.kernel, cfg.dt)?;
    Ok(RuleEvolution {
        best_genome,
        best_rule,
        best_fitness,
        history,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cheap_cfg(mode: EvolutionMode, generations: usize) -> EvolveRulesConfig {
        EvolveRulesConfig {
            mode,
            generations,
            kernel: KernelSpec::orbium(),
            halting: HaltingConfig {
                count: 8,
                grid_side: 32,
                horizon: 16,
                ..HaltingConfig::default()
            },
            ..EvolveRulesConfig::default()
        }
    }

    #[test]
    fn one_generation_bookkeeping() {
        let out = evolve_rules(&cheap_cfg(EvolutionMode::Simple, 1), 3).unwrap();
        assert_eq!(out.history.len(), 1);
        assert_eq!(out.evaluations, 8);
        assert_eq!(out.history[0].mode, EvolutionMode::Simple);
        assert!((-0.25..=0.0).contains(&out.best_fitness));
    }

    #[test]
    fn best_so_far_is_non_decreasing() {
        let cfg = EvolveRulesConfig {
            generations: 20,
            ..cheap_cfg(EvolutionMode::Simple, 20)
        };
        let noisy =
            |g: &CandidateGenome, s: u64| Ok(-(g.raw[0] - 1.0).powi(2) + (s % 7) as f64 * 0.01);
        let out = evolve_rules_with(&cfg, 5, noisy).unwrap();
        assert_eq!(out.history.len(), 20);
        assert!(out
            .history
            .windows(2)
            .all(|w| w[1].best_fitness >= w[0].best_fitness));
    }

    #[test]
    fn plug_in_fitness_is_optimized() {
        let cfg = EvolveRulesConfig {
            generations: 300,
            x0: [2.0, 0.0, 0.0, 0.0],
            ..cheap_cfg(EvolutionMode::Simple, 300)
        };
        let out = evolve_rules_with(&cfg, 1, |g, _| Ok(-(g.raw[0] * g.raw[0]))).unwrap();
        assert!(out.best_genome.raw[0].abs() < 1e-6, "{:?}", out.best_genome);
    }

    #[test]
    fn random_mode_samples_inside_bounds_and_is_deterministic() {
        let cfg = cheap_cfg(EvolutionMode::Random, 3);
        let seen = std::sync::Mutex::new(Vec::new());
        let f = |g: &CandidateGenome, _| {
            seen.lock().unwrap().push(g.squash());
            Ok(g.raw[1])
        };
        let a = evolve_rules_with(&cfg, 9, f).unwrap();
        let b = evolve_rules_with(&cfg, 9, |g, _| Ok(g.raw[1])).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(seen.lock().unwrap().len(), 24);
    }

    #[test]
    fn non_finite_fitness_is_sanitized() {
        let cfg = cheap_cfg(EvolutionMode::Simple, 2);
        let out = evolve_rules_with(&cfg, 2, |g, _| {
            Ok(if g.raw[0] > 0.0 { f64::NAN } else { -0.1 })
        })
        .unwrap();
        assert!(out.history.iter().all(|r| r.mean_fitness.is_finite()));
    }

    #[test]
    fn history_serializes_with_expected_keys() {
        let rec = RuleGenerationRecord {
            generation: 0,
            best_fitness: -0.01,
            mean_fitness: -0.1,
            best_genome: [0.0, 1.0, 2.0, 3.0],
            mode: EvolutionMode::Predictor,
            seed: 7,
        };
        let line = serde_json::to_string(&rec).unwrap();
        assert_eq!(
            line,
            r#"{"generation":0,"best_fitness":-0.01,"mean_fitness":-0.1,"best_genome":[0.0,1.0,2.0,3.0],"mode":"predictor","seed":7}"#
        );
    }
}
