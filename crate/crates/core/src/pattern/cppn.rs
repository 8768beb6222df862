//! Fixed-topology CPPN: inputs `(x, y, r, 1)`, two hidden layers of 12 nodes
//! with per-node activation tags, logistic output.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const INPUTS: usize = 4;
pub const HIDDEN: usize = 12;
pub const WEIGHT_COUNT: usize = HIDDEN * INPUTS + HIDDEN + HIDDEN * HIDDEN + HIDDEN + HIDDEN + 1;

const W1: usize = 0;
const B1: usize = W1 + HIDDEN * INPUTS;
const W2: usize = B1 + HIDDEN;
const B2: usize = W2 + HIDDEN * HIDDEN;
const W3: usize = B2 + HIDDEN;
const B3: usize = W3 + HIDDEN;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sine,
    Gaussian,
    Tanh,
    Identity,
}

impl Activation {
    pub const ALL: [Activation; 4] = [
        Activation::Sine,
        Activation::Gaussian,
        Activation::Tanh,
        Activation::Identity,
    ];

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sine => x.sin(),
            Activation::Gaussian => (-x * x).exp(),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::ALL[rng.random_range(0..Self::ALL.len())]
    }
}

/// Weights are stored flat: layer-1 matrix `[node][input]`, layer-1 biases,
/// layer-2 matrix `[node][prev]`, layer-2 biases, output weights, output bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CppnGenome {
    pub weights: Vec<f64>,
    /// Tags for the 12 first-layer nodes followed by the 12 second-layer nodes.
    pub activations: Vec<Activation>,
}

impl CppnGenome {
    pub fn zeros() -> Self {
        Self {
            weights: vec![0.0; WEIGHT_COUNT],
            activations: vec![Activation::Tanh; 2 * HIDDEN],
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, weight_std: f64) -> Self {
        let normal = Normal::new(0.0, weight_std).expect("finite nonnegative std");
        Self {
            weights: (0..WEIGHT_COUNT).map(|_| normal.sample(rng)).collect(),
            activations: (0..2 * HIDDEN).map(|_| Activation::random(rng)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != WEIGHT_COUNT || self.activations.len() != 2 * HIDDEN {
            return Err(Error::Parameter(format!(
                "CPPN genome needs {WEIGHT_COUNT} weights and {} activations, got {} and {}",
                2 * HIDDEN,
                self.weights.len(),
                self.activations.len()
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Parameter("CPPN weights must be finite".into()));
        }
        Ok(())
    }

    /// Gaussian noise on every weight; each tag is resampled with
    /// probability `activation_rate`.
    pub fn mutated<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        weight_std: f64,
        activation_rate: f64,
    ) -> Self {
        let normal = Normal::new(0.0, weight_std).expect("finite nonnegative std");
        Self {
            weights: self
                .weights
                .iter()
                .map(|w| w + normal.sample(rng))
                .collect(),
            activations: self
                .activations
                .iter()
                .map(|&a| {
                    if rng.random::<f64>() < activation_rate {
                        Activation::random(rng)
                    } else {
                        a
                    }
                })
                .collect(),
        }
    }

    pub fn w1(&mut self, node: usize, input: usize) -> &mut f64 {
        &mut self.weights[W1 + node * INPUTS + input]
    }

    pub fn w2(&mut self, node: usize, prev: usize) -> &mut f64 {
        &mut self.weights[W2 + node * HIDDEN + prev]
    }

    pub fn w3(&mut self, prev: usize) -> &mut f64 {
        &mut self.weights[W3 + prev]
    }

    /// Network output in `(0, 1)`.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let r = (x * x + y * y).sqrt();
        let input = [x, y, r, 1.0];
        let w = &self.weights;
        let mut h1 = [0.0; HIDDEN];
        for (k, h) in h1.iter_mut().enumerate() {
            let row = &w[W1 + k * INPUTS..W1 + (k + 1) * INPUTS];
            let z = w[B1 + k] + row.iter().zip(&input).map(|(a, b)| a * b).sum::<f64>();
            *h = self.activations[k].apply(z);
        }
        let mut out = w[B3];
        for k in 0..HIDDEN {
            let row = &w[W2 + k * HIDDEN..W2 + (k + 1) * HIDDEN];
            let z = w[B2 + k] + row.iter().zip(&h1).map(|(a, b)| a * b).sum::<f64>();
            out += w[W3 + k] * self.activations[HIDDEN + k].apply(z);
        }
        1.0 / (1.0 + (-out).exp())
    }
}

/// Square pattern with a disc mask, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternTile {
    pub side: usize,
    pub values: Vec<f64>,
}

impl PatternTile {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.side + col]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Tile coordinate of index `i` in `[-1, 1]`; mirrored indices give exactly
/// negated coordinates.
fn coord(i: usize, side: usize) -> f64 {
    (2.0 * i as f64 - (side - 1) as f64) / (side - 1) as f64
}

/// Evaluates the CPPN over a `side x side` lattice, zero outside the unit disc.
pub fn synthesize(genome: &CppnGenome, side: usize) -> Result<PatternTile> {
    if side < 3 {
        return Err(Error::Parameter(format!(
            "tile side must be >= 3, got {side}"
        )));
    }
    genome.validate()?;
    let mut values = vec![0.0; side * side];
    for row in 0..side {
        let y = coord(row, side);
        for col in 0..side {
            let x = coord(col, side);
            if (x * x + y * y).sqrt() <= 1.0 {
                values[row * side + col] = genome.eval(x, y).clamp(0.0, 1.0);
            }
        }
    }
    Ok(PatternTile { side, values })
}
