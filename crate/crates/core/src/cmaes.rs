//! Rank-based CMA-ES with an ask/tell interface. Fitness is maximized.
//!
//! Step-size control uses cumulative path length adaptation; the covariance
//! gets a rank-one update from the evolution path plus a rank-mu update from
//! the selected steps. The eigendecomposition is refreshed every generation.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::seed::{self, Rng};

const EIGENVALUE_FLOOR: f64 = 1e-20;

#[derive(Debug, Clone)]
pub struct EvoState {
    dim: usize,
    mean: DVector<f64>,
    step_size: f64,
    covariance: DMatrix<f64>,
    // columns are eigenvectors of the covariance
    eigenbasis: DMatrix<f64>,
    // square roots of the eigenvalues
    axis_lengths: DVector<f64>,
    path_sigma: DVector<f64>,
    path_c: DVector<f64>,
    generation: usize,
    lambda: usize,
    mu: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,
    rng: Rng,
}

/// Default population size `4 + floor(3 ln n)`.
pub fn default_population(dim: usize) -> usize {
    4 + (3.0 * (dim as f64).ln()).floor() as usize
}

/// Log-rank recombination weights for the best `floor(lambda / 2)` of `lambda`.
pub fn recombination_weights(lambda: usize) -> Vec<f64> {
    let mu = lambda / 2;
    let raw: Vec<f64> = (1..=mu)
        .map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - (i as f64).ln())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Standard initialization with the default population size.
pub fn init(dim: usize, x0: &[f64], sigma0: f64, seed: u64) -> Result<EvoState> {
    EvoState::new(dim, x0, sigma0, seed, None)
}

impl EvoState {
    pub fn new(
        dim: usize,
        x0: &[f64],
        sigma0: f64,
        seed: u64,
        population: Option<usize>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Parameter("CMA-ES dimension must be >= 1".into()));
        }
        if x0.len() != dim {
            return Err(Error::Parameter(format!(
                "initial mean has {} entries, expected {dim}",
                x0.len()
            )));
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("initial mean must be finite".into()));
        }
        if !(sigma0.is_finite() && sigma0 > 0.0) {
            return Err(Error::Parameter(format!(
                "sigma0 must be > 0, got {sigma0}"
            )));
        }
        let lambda = population.unwrap_or_else(|| default_population(dim));
        if lambda < 2 {
            return Err(Error::Parameter(format!(
                "population size must be >= 2, got {lambda}"
            )));
        }
        let weights = recombination_weights(lambda);
        let mu = weights.len();
        let n = dim as f64;
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
        let c_1 = 2.0 / ((n + 1.3).powi(2) + mu_eff);
        let c_mu =
            (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + mu_eff));
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

        Ok(Self {
            dim,
            mean: DVector::from_column_slice(x0),
            step_size: sigma0,
            covariance: DMatrix::identity(dim, dim),
            eigenbasis: DMatrix::identity(dim, dim),
            axis_lengths: DVector::from_element(dim, 1.0),
            path_sigma: DVector::zeros(dim),
            path_c: DVector::zeros(dim),
            generation: 0,
            lambda,
            mu,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
            rng: seed::stream(seed, "cmaes", &[]),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn population_size(&self) -> usize {
        self.lambda
    }

    pub fn parent_count(&self) -> usize {
        self.mu
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Samples `lambda` candidates `mean + sigma * B D z`, `z ~ N(0, I)`.
    pub fn ask(&mut self) -> Vec<Vec<f64>> {
        (0..self.lambda)
            .map(|_| {
                let z = DVector::from_fn(self.dim, |_, _| StandardNormal.sample(&mut self.rng));
                let y = &self.eigenbasis * z.component_mul(&self.axis_lengths);
                (&self.mean + y * self.step_size).as_slice().to_vec()
            })
            .collect()
    }

    /// Updates the distribution from evaluated candidates (higher is better).
    pub fn tell(&mut self, candidates: &[Vec<f64>], fitnesses: &[f64]) -> Result<()> {
        if candidates.len() != self.lambda || fitnesses.len() != self.lambda {
            return Err(Error::Evaluation(format!(
                "expected {} candidates and fitnesses, got {} and {}",
                self.lambda,
                candidates.len(),
                fitnesses.len()
            )));
        }
        if let Some(i) = fitnesses.iter().position(|f| !f.is_finite()) {
            return Err(Error::Evaluation(format!(
                "fitness of candidate {i} is {}",
                fitnesses[i]
            )));
        }
        if let Some(c) = candidates.iter().find(|c| c.len() != self.dim) {
            return Err(Error::Evaluation(format!(
                "candidate has {} entries, expected {}",
                c.len(),
                self.dim
            )));
        }

        let order = selection_order(fitnesses);
        let n = self.dim as f64;
        let sigma = self.step_size;
        let steps: Vec<DVector<f64>> = order[..self.mu]
            .iter()
            .map(|&i| (DVector::from_column_slice(&candidates[i]) - &self.mean) / sigma)
            .collect();

        let mut y_w = DVector::zeros(self.dim);
        for (w, y) in self.weights.iter().zip(&steps) {
            y_w += y * *w;
        }
        let mut new_mean = DVector::zeros(self.dim);
        for (w, &i) in self.weights.iter().zip(&order[..self.mu]) {
            new_mean += DVector::from_column_slice(&candidates[i]) * *w;
        }
        self.mean = new_mean;

        // C^{-1/2} y_w = B D^{-1} B^T y_w
        let whitened = &self.eigenbasis
            * (self.eigenbasis.transpose() * &y_w).component_div(&self.axis_lengths);
        self.path_sigma = &self.path_sigma * (1.0 - self.c_sigma)
            + whitened * (self.c_sigma * (2.0 - self.c_sigma) * self.mu_eff).sqrt();

        let ps_norm = self.path_sigma.norm();
        let decay = 1.0 - (1.0 - self.c_sigma).powi(2 * (self.generation as i32 + 1));
        let h_sigma = ps_norm / decay.sqrt() < (1.4 + 2.0 / (n + 1.0)) * self.chi_n;
        let h = if h_sigma { 1.0 } else { 0.0 };

        self.path_c = &self.path_c * (1.0 - self.c_c)
            + &y_w * (h * (self.c_c * (2.0 - self.c_c) * self.mu_eff).sqrt());

        let delta_h = (1.0 - h) * self.c_c * (2.0 - self.c_c);
        let mut cov = &self.covariance * (1.0 - self.c_1 - self.c_mu + self.c_1 * delta_h);
        cov += &self.path_c * self.path_c.transpose() * self.c_1;
        for (w, y) in self.weights.iter().zip(&steps) {
            cov += y * y.transpose() * (self.c_mu * w);
        }
        self.covariance = cov;

        self.step_size *= ((self.c_sigma / self.d_sigma) * (ps_norm / self.chi_n - 1.0)).exp();
        self.generation += 1;
        self.refresh_eigensystem();
        Ok(())
    }

    fn refresh_eigensystem(&mut self) {
        let sym = (&self.covariance + self.covariance.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());
        let mut repaired = false;
        let values = eig.eigenvalues.map(|v| {
            if v.is_finite() && v >= EIGENVALUE_FLOOR {
                v
            } else {
                repaired = true;
                EIGENVALUE_FLOOR
            }
        });
        self.eigenbasis = eig.eigenvectors;
        self.axis_lengths = values.map(f64::sqrt);
        self.covariance = if repaired {
            let diag = DMatrix::from_diagonal(&values);
            &self.eigenbasis * diag * self.eigenbasis.transpose()
        } else {
            sym
        };
    }
}

/// Candidate indices sorted best-first; ties keep submission order.
fn selection_order(fitnesses: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..fitnesses.len()).collect();
    order.sort_by(|&a, &b| fitnesses[b].total_cmp(&fitnesses[a]));
    order
}

/// Indices of the `mu` selected parents.
pub fn selected_parents(fitnesses: &[f64], mu: usize) -> Vec<usize> {
    selection_order(fitnesses)[..mu].to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_defaults() {
        assert_eq!(default_population(4), 8);
        assert_eq!(default_population(1), 4);
        assert_eq!(default_population(10), 10);
        let s = init(4, &[0.0; 4], 1.0, 0).unwrap();
        assert_eq!(s.population_size(), 8);
        assert_eq!(s.parent_count(), 4);
    }

    #[test]
    fn weights_are_positive_descending_and_normalized() {
        for lambda in 2..40 {
            let w = recombination_weights(lambda);
            assert_eq!(w.len(), lambda / 2);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|x| *x > 0.0));
            assert!(w.windows(2).all(|p| p[0] >= p[1]));
        }
    }

    #[test]
    fn init_rejects_bad_parameters() {
        assert!(init(3, &[0.0; 3], 0.0, 0).is_err());
        assert!(init(3, &[0.0; 3], -1.0, 0).is_err());
        assert!(init(3, &[0.0; 2], 1.0, 0).is_err());
        assert!(init(0, &[], 1.0, 0).is_err());
        assert!(EvoState::new(3, &[0.0; 3], 1.0, 0, Some(1)).is_err());
    }

    #[test]
    fn same_seed_same_population() {
        let mut a = init(5, &[0.3; 5], 0.7, 11).unwrap();
        let mut b = init(5, &[0.3; 5], 0.7, 11).unwrap();
        let mut c = init(5, &[0.3; 5], 0.7, 12).unwrap();
        let pa = a.ask();
        assert_eq!(pa, b.ask());
        assert_ne!(pa, c.ask());
        assert_eq!(pa.len(), a.population_size());
    }

    #[test]
    fn vanishing_step_size_samples_the_mean() {
        let mut s = init(3, &[0.5, -1.0, 2.0], 1e-300, 1).unwrap();
        for x in s.ask() {
            assert_eq!(x, vec![0.5, -1.0, 2.0]);
        }
    }

    #[test]
    fn identical_candidates_become_the_mean() {
        let mut s = init(3, &[0.0; 3], 1.0, 2).unwrap();
        let x = vec![1.25, -0.5, 3.0];
        let cands = vec![x.clone(); s.population_size()];
        let fit: Vec<f64> = (0..cands.len()).map(|i| i as f64).collect();
        s.tell(&cands, &fit).unwrap();
        for (m, v) in s.mean().iter().zip(&x) {
            assert!((m - v).abs() < 1e-12);
        }
        assert_eq!(s.generation(), 1);
    }

    #[test]
    fn new_mean_is_weighted_sum_of_best() {
        let mut s = init(2, &[0.0; 2], 1.0, 3).unwrap();
        let cands = s.ask();
        let fit: Vec<f64> = cands
            .iter()
            .map(|c| -(c[0] - 1.0).powi(2) - c[1].powi(2))
            .collect();
        let w = s.weights().to_vec();

        // independent ranking: repeatedly pull out the maximum
        let mut remaining: Vec<usize> = (0..cands.len()).collect();
        let mut expected = [0.0f64; 2];
        for wi in &w {
            let (pos, _) =
                remaining
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |acc, (p, &i)| {
                        if fit[i] > acc.1 {
                            (p, fit[i])
                        } else {
                            acc
                        }
                    });
            let i = remaining.remove(pos);
            expected[0] += wi * cands[i][0];
            expected[1] += wi * cands[i][1];
        }
        s.tell(&cands, &fit).unwrap();
        assert!((s.mean()[0] - expected[0]).abs() < 1e-12);
        assert!((s.mean()[1] - expected[1]).abs() < 1e-12);
    }

    #[test]
    fn nan_fitness_is_rejected() {
        let mut s = init(2, &[0.0; 2], 1.0, 4).unwrap();
        let cands = s.ask();
        let mut fit = vec![0.0; cands.len()];
        fit[1] = f64::NAN;
        assert!(matches!(s.tell(&cands, &fit), Err(Error::Evaluation(_))));
        assert!(s.tell(&cands[1..], &fit[1..]).is_err());
    }

    #[test]
    fn sphere_converges() {
        let mut s = init(10, &[1.0; 10], 0.5, 5).unwrap();
        let mut best = f64::NEG_INFINITY;
        let mut evals = 0;
        while evals < 10_000 && best <= -1e-10 {
            let cands = s.ask();
            let fit: Vec<f64> = cands
                .iter()
                .map(|c| -c.iter().map(|v| v * v).sum::<f64>())
                .collect();
            evals += cands.len();
            best = fit.iter().copied().fold(best, f64::max);
            s.tell(&cands, &fit).unwrap();
        }
        assert!(best > -1e-10, "best {best} after {evals} evaluations");
    }

    #[test]
    fn covariance_stays_symmetric_positive_definite() {
        let mut s = init(6, &[2.0; 6], 1.0, 6).unwrap();
        for _ in 0..200 {
            let cands = s.ask();
            let fit: Vec<f64> = cands
                .iter()
                .map(|c| {
                    -c.iter()
                        .enumerate()
                        .map(|(i, v)| 10f64.powi(i as i32) * v * v)
                        .sum::<f64>()
                })
                .collect();
            s.tell(&cands, &fit).unwrap();
            let c = s.covariance();
            assert_eq!(c, &c.transpose());
            let eig = SymmetricEigen::new(c.clone());
            assert!(eig.eigenvalues.iter().all(|v| *v > 0.0));
        }
    }
}
