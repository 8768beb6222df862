use super::{
    active_fraction, generate_dataset, train_predictor, HaltingConfig, HaltingDataset,
    PredictorConfig,
};
use crate::error::{Error, Result};
use crate::rules::RuleParams;
use crate::seed;

/// Fraction of predictions where `prediction >= 0.5` agrees with the label.
pub fn accuracy(predictions: &[f64], labels: &[bool]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::Usage("accuracy of an empty prediction set".into()));
    }
    if predictions.len() != labels.len() {
        return Err(Error::Usage(format!(
            "{} predictions but {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let hits = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| (**p >= 0.5) == **l)
        .count();
    Ok(hits as f64 / predictions.len() as f64)
}

/// Negated squared distance of the active fraction from one half.
pub fn balance_fitness(active_fraction: f64) -> f64 {
    -(active_fraction - 0.5).powi(2)
}

/// Balance between halting and persisting soups, in `[-0.25, 0]`.
pub fn simple_fitness(rule: &RuleParams, cfg: &HaltingConfig, seed: u64) -> Result<f64> {
    Ok(balance_fitness(active_fraction(rule, cfg, seed)?))
}

/// Negated mean validation accuracy of independently seeded predictors on
/// one dataset, in `[-1, 0]`.
pub fn predictor_fitness_on(
    dataset: &HaltingDataset,
    cfg: &PredictorConfig,
    seed: u64,
) -> Result<f64> {
    if cfg.predictors == 0 {
        return Err(Error::Config("at least one predictor is required".into()));
    }
    let accuracies = (0..cfg.predictors)
        .map(|n| {
            train_predictor(dataset, cfg, seed::derive(seed, "predictor", &[n as u64]))
                .map(|r| r.validation_accuracy)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(negated_mean(&accuracies))
}

fn negated_mean(accuracies: &[f64]) -> f64 {
    -accuracies.iter().sum::<f64>() / accuracies.len() as f64
}

/// Simulates a fresh dataset under `rule` and scores how hard it is to predict.
pub fn predictor_fitness(
    rule: &RuleParams,
    halting: &HaltingConfig,
    predictor: &PredictorConfig,
    seed: u64,
) -> Result<f64> {
    let dataset = generate_dataset(rule, halting, seed::derive(seed, "dataset", &[]))?;
    predictor_fitness_on(&dataset, predictor, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_examples() {
        assert_eq!(
            accuracy(&[0.9, 0.1, 0.5], &[true, false, true]).unwrap(),
            1.0
        );
        let a = accuracy(&[0.6, 0.4, 0.9], &[true, true, false]).unwrap();
        assert!((a - 1.0 / 3.0).abs() < 1e-15);
        let flipped = accuracy(&[0.6, 0.4, 0.9], &[false, false, true]).unwrap();
        assert!((flipped - (1.0 - a)).abs() < 1e-15);
        assert!(matches!(accuracy(&[], &[]), Err(Error::Usage(_))));
        assert!(accuracy(&[0.5], &[true, false]).is_err());
    }

    #[test]
    fn balance_examples() {
        assert_eq!(balance_fitness(0.5), 0.0);
        assert_eq!(balance_fitness(1.0), -0.25);
        assert_eq!(balance_fitness(0.0), -0.25);
        assert_eq!(balance_fitness(0.25), -0.0625);
        for i in 0..=100 {
            let q = i as f64 / 100.0;
            let f = balance_fitness(q);
            assert!((-0.25..=0.0).contains(&f));
            assert_eq!(f == 0.0, i == 50);
        }
    }

    #[test]
    fn predictor_fitness_is_negated_mean() {
        assert_eq!(negated_mean(&[1.0, 1.0, 1.0]), -1.0);
        assert_eq!(negated_mean(&[0.5, 0.5, 0.5]), -0.5);
        assert_eq!(negated_mean(&[0.75, 0.5, 1.0]), -0.75);
    }
}
