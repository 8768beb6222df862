//! Small convolutional halting classifier, trained from scratch.
//!
//! Architecture on a 32x32 block-averaged input, circular padding throughout:
//! conv 3x3 (1 -> 8) + tanh, 2x2 average pool, conv 3x3 (8 -> 8) + tanh,
//! global average pool, dense 8 -> 1, logistic. 673 parameters.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::HaltingDataset;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::seed;

pub const INPUT_SIDE: usize = 32;
pub const POOLED_SIDE: usize = INPUT_SIDE / 2;
pub const CHANNELS: usize = 8;
pub const PARAM_COUNT: usize = CONV1_W_LEN + CHANNELS + CONV2_W_LEN + CHANNELS + CHANNELS + 1;

const CONV1_W_LEN: usize = CHANNELS * 9;
const CONV2_W_LEN: usize = CHANNELS * CHANNELS * 9;

const CONV1_W: usize = 0;
const CONV1_B: usize = CONV1_W + CONV1_W_LEN;
const CONV2_W: usize = CONV1_B + CHANNELS;
const CONV2_B: usize = CONV2_W + CONV2_W_LEN;
const DENSE_W: usize = CONV2_B + CHANNELS;
const DENSE_B: usize = DENSE_W + CHANNELS;

const IN_AREA: usize = INPUT_SIDE * INPUT_SIDE;
const POOLED_AREA: usize = POOLED_SIDE * POOLED_SIDE;

/// Flat parameter vector. Layout: conv1 weights `[out][ky][kx]`, conv1
/// biases, conv2 weights `[out][in][ky][kx]`, conv2 biases, dense weights,
/// dense bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorWeights {
    params: Vec<f64>,
}

/// Parameter-block names, for diagnostics and gradient checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Conv1,
    Conv2,
    Dense,
}

impl PredictorWeights {
    pub fn zeros() -> Self {
        Self {
            params: vec![0.0; PARAM_COUNT],
        }
    }

    pub fn from_params(params: Vec<f64>) -> Result<Self> {
        if params.len() != PARAM_COUNT {
            return Err(Error::Parameter(format!(
                "predictor needs {PARAM_COUNT} parameters, got {}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Parameter(
                "predictor parameters must be finite".into(),
            ));
        }
        Ok(Self { params })
    }

    /// Gaussian weights with standard deviation `std`, zero biases.
    pub fn random(seed: u64, std: f64) -> Self {
        let mut rng = seed::stream(seed, "predictor-init", &[]);
        let normal = Normal::new(0.0, std).expect("std is finite and nonnegative");
        let mut params = vec![0.0; PARAM_COUNT];
        for range in [CONV1_W..CONV1_B, CONV2_W..CONV2_B, DENSE_W..DENSE_B] {
            for p in &mut params[range] {
                *p = normal.sample(&mut rng);
            }
        }
        Self { params }
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn dense_bias(&self) -> f64 {
        self.params[DENSE_B]
    }

    pub fn set_dense_bias(&mut self, b: f64) {
        self.params[DENSE_B] = b;
    }

    pub fn layer_of(index: usize) -> Layer {
        match index {
            i if i < CONV2_W => Layer::Conv1,
            i if i < DENSE_W => Layer::Conv2,
            _ => Layer::Dense,
        }
    }
}

/// Block-average pooling of an arbitrary grid down to 32x32.
pub fn downsample(grid: &Grid) -> Vec<f64> {
    let (h, w) = (grid.height(), grid.width());
    let bounds = |i: usize, n: usize| {
        let start = i * n / INPUT_SIDE;
        let end = ((i + 1) * n / INPUT_SIDE).max(start + 1).min(n);
        (start.min(n - 1), end)
    };
    let mut out = vec![0.0; IN_AREA];
    for r in 0..INPUT_SIDE {
        let (r0, r1) = bounds(r, h);
        for c in 0..INPUT_SIDE {
            let (c0, c1) = bounds(c, w);
            let mut s = 0.0;
            for rr in r0..r1 {
                for cc in c0..c1 {
                    s += grid.get(rr, cc);
                }
            }
            out[r * INPUT_SIDE + c] = s / ((r1 - r0) * (c1 - c0)) as f64;
        }
    }
    out
}

#[inline]
fn wrap(i: usize, d: usize, n: usize) -> usize {
    // i + d - 1 mod n, for d in 0..3
    (i + d + n - 1) % n
}

struct Activations {
    h1: Vec<f64>,
    pooled: Vec<f64>,
    h2: Vec<f64>,
    features: [f64; CHANNELS],
    logit: f64,
}

fn forward(p: &[f64], x: &[f64]) -> Activations {
    let s = INPUT_SIDE;
    let mut h1 = vec![0.0; CHANNELS * IN_AREA];
    for o in 0..CHANNELS {
        let w = &p[CONV1_W + o * 9..CONV1_W + o * 9 + 9];
        let b = p[CONV1_B + o];
        for r in 0..s {
            for c in 0..s {
                let mut z = b;
                for dr in 0..3 {
                    let row = wrap(r, dr, s) * s;
                    for dc in 0..3 {
                        z += w[dr * 3 + dc] * x[row + wrap(c, dc, s)];
                    }
                }
                h1[o * IN_AREA + r * s + c] = z.tanh();
            }
        }
    }

    let ps = POOLED_SIDE;
    let mut pooled = vec![0.0; CHANNELS * POOLED_AREA];
    for o in 0..CHANNELS {
        let src = &h1[o * IN_AREA..(o + 1) * IN_AREA];
        for r in 0..ps {
            for c in 0..ps {
                let (r2, c2) = (2 * r, 2 * c);
                pooled[o * POOLED_AREA + r * ps + c] = 0.25
                    * (src[r2 * s + c2]
                        + src[r2 * s + c2 + 1]
                        + src[(r2 + 1) * s + c2]
                        + src[(r2 + 1) * s + c2 + 1]);
            }
        }
    }

    let mut h2 = vec![0.0; CHANNELS * POOLED_AREA];
    for o in 0..CHANNELS {
        let b = p[CONV2_B + o];
        let dst = &mut h2[o * POOLED_AREA..(o + 1) * POOLED_AREA];
        dst.fill(b);
        for i in 0..CHANNELS {
            let w = &p[CONV2_W + (o * CHANNELS + i) * 9..CONV2_W + (o * CHANNELS + i) * 9 + 9];
            let src = &pooled[i * POOLED_AREA..(i + 1) * POOLED_AREA];
            for r in 0..ps {
                for c in 0..ps {
                    let mut z = 0.0;
                    for dr in 0..3 {
                        let row = wrap(r, dr, ps) * ps;
                        for dc in 0..3 {
                            z += w[dr * 3 + dc] * src[row + wrap(c, dc, ps)];
                        }
                    }
                    dst[r * ps + c] += z;
                }
            }
        }
        for v in dst.iter_mut() {
            *v = v.tanh();
        }
    }

    let mut features = [0.0; CHANNELS];
    for (o, f) in features.iter_mut().enumerate() {
        *f = h2[o * POOLED_AREA..(o + 1) * POOLED_AREA]
            .iter()
            .sum::<f64>()
            / POOLED_AREA as f64;
    }
    let logit = p[DENSE_B]
        + features
            .iter()
            .zip(&p[DENSE_W..DENSE_W + CHANNELS])
            .map(|(f, w)| f * w)
            .sum::<f64>();

    Activations {
        h1,
        pooled,
        h2,
        features,
        logit,
    }
}

/// Accumulates `d loss / d params` into `grad` given `d loss / d logit`.
fn backward(p: &[f64], x: &[f64], act: &Activations, dlogit: f64, grad: &mut [f64]) {
    let (s, ps) = (INPUT_SIDE, POOLED_SIDE);

    grad[DENSE_B] += dlogit;
    let mut dfeat = [0.0; CHANNELS];
    for o in 0..CHANNELS {
        grad[DENSE_W + o] += dlogit * act.features[o];
        dfeat[o] = dlogit * p[DENSE_W + o];
    }

    // through global average pool and tanh
    let mut dz2 = vec![0.0; CHANNELS * POOLED_AREA];
    for o in 0..CHANNELS {
        let g = dfeat[o] / POOLED_AREA as f64;
        for k in 0..POOLED_AREA {
            let h = act.h2[o * POOLED_AREA + k];
            dz2[o * POOLED_AREA + k] = g * (1.0 - h * h);
        }
        grad[CONV2_B + o] += dz2[o * POOLED_AREA..(o + 1) * POOLED_AREA]
            .iter()
            .sum::<f64>();
    }

    let mut dpooled = vec![0.0; CHANNELS * POOLED_AREA];
    for o in 0..CHANNELS {
        let dz = &dz2[o * POOLED_AREA..(o + 1) * POOLED_AREA];
        for i in 0..CHANNELS {
            let base = CONV2_W + (o * CHANNELS + i) * 9;
            let src = &act.pooled[i * POOLED_AREA..(i + 1) * POOLED_AREA];
            let dsrc = &mut dpooled[i * POOLED_AREA..(i + 1) * POOLED_AREA];
            for dr in 0..3 {
                for dc in 0..3 {
                    let w = p[base + dr * 3 + dc];
                    let mut gw = 0.0;
                    for r in 0..ps {
                        let row = wrap(r, dr, ps) * ps;
                        for c in 0..ps {
                            let g = dz[r * ps + c];
                            let idx = row + wrap(c, dc, ps);
                            gw += g * src[idx];
                            dsrc[idx] += g * w;
                        }
                    }
                    grad[base + dr * 3 + dc] += gw;
                }
            }
        }
    }

    // through 2x2 average pool and tanh
    for o in 0..CHANNELS {
        let mut gb = 0.0;
        let mut gw = [0.0; 9];
        for r in 0..s {
            for c in 0..s {
                let h = act.h1[o * IN_AREA + r * s + c];
                let dz = 0.25 * dpooled[o * POOLED_AREA + (r / 2) * ps + c / 2] * (1.0 - h * h);
                gb += dz;
                for dr in 0..3 {
                    let row = wrap(r, dr, s) * s;
                    for dc in 0..3 {
                        gw[dr * 3 + dc] += dz * x[row + wrap(c, dc, s)];
                    }
                }
            }
        }
        grad[CONV1_B + o] += gb;
        for (k, g) in gw.iter().enumerate() {
            grad[CONV1_W + o * 9 + k] += g;
        }
    }
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Binary cross-entropy from a logit, stable for large |z|.
fn bce_with_logit(z: f64, label: bool) -> f64 {
    let y = if label { 1.0 } else { 0.0 };
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

/// Pre-logistic output on an already-downsampled input.
pub fn logit_on_input(w: &PredictorWeights, input: &[f64]) -> f64 {
    assert_eq!(input.len(), IN_AREA, "predictor input must be 32x32");
    forward(&w.params, input).logit
}

/// Probability that `grid` is still active at the horizon.
pub fn predict(w: &PredictorWeights, grid: &Grid) -> f64 {
    logistic(logit_on_input(w, &downsample(grid)))
}

/// Mean binary cross-entropy over a batch of downsampled inputs.
pub fn loss(w: &PredictorWeights, inputs: &[&[f64]], labels: &[bool]) -> f64 {
    inputs
        .iter()
        .zip(labels)
        .map(|(x, &y)| bce_with_logit(logit_on_input(w, x), y))
        .sum::<f64>()
        / inputs.len() as f64
}

/// Mean binary cross-entropy and its gradient by backpropagation.
pub fn loss_and_gradient(
    w: &PredictorWeights,
    inputs: &[&[f64]],
    labels: &[bool],
) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; PARAM_COUNT];
    let mut total = 0.0;
    let scale = 1.0 / inputs.len() as f64;
    for (x, &y) in inputs.iter().zip(labels) {
        let act = forward(&w.params, x);
        total += bce_with_logit(act.logit, y);
        let target = if y { 1.0 } else { 0.0 };
        backward(
            &w.params,
            x,
            &act,
            (logistic(act.logit) - target) * scale,
            &mut grad,
        );
    }
    (total * scale, grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictorConfig {
    /// Fraction of the dataset used for training; the rest is held out.
    pub split: f64,
    pub epochs: usize,
    /// Independently seeded predictors averaged by the fitness.
    pub predictors: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub init_std: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            split: 0.75,
            epochs: 20,
            predictors: 3,
            batch_size: 16,
            learning_rate: 0.05,
            momentum: 0.9,
            init_std: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub weights: PredictorWeights,
    pub validation_accuracy: f64,
    /// The training split held only one label.
    pub single_class_training: bool,
    pub train_size: usize,
    pub validation_size: usize,
}

/// Trains one predictor with momentum SGD on binary cross-entropy and scores
/// it on the held-out tail of the dataset.
pub fn train_predictor(
    dataset: &HaltingDataset,
    cfg: &PredictorConfig,
    seed: u64,
) -> Result<TrainReport> {
    let m = dataset.len();
    if m < 4 {
        return Err(Error::Usage(format!(
            "predictor training needs >= 4 examples, got {m}"
        )));
    }
    if !(cfg.split > 0.0 && cfg.split < 1.0) {
        return Err(Error::Config(format!(
            "split must lie in (0, 1), got {}",
            cfg.split
        )));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch size must be >= 1".into()));
    }
    let n_train = ((cfg.split * m as f64).floor() as usize).clamp(1, m - 1);
    let inputs: Vec<Vec<f64>> = dataset.initial_grids.iter().map(downsample).collect();
    let (train_x, val_x) = inputs.split_at(n_train);
    let (train_y, val_y) = dataset.labels.split_at(n_train);
    let single_class_training = train_y.iter().all(|l| *l) || train_y.iter().all(|l| !*l);

    let mut weights = PredictorWeights::random(seed, cfg.init_std);
    let mut velocity = vec![0.0; PARAM_COUNT];
    let mut order: Vec<usize> = (0..n_train).collect();
    for epoch in 0..cfg.epochs {
        let mut rng = seed::stream(seed, "predictor-shuffle", &[epoch as u64]);
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let xs: Vec<&[f64]> = batch.iter().map(|&i| train_x[i].as_slice()).collect();
            let ys: Vec<bool> = batch.iter().map(|&i| train_y[i]).collect();
            let (_, grad) = loss_and_gradient(&weights, &xs, &ys);
            for ((p, v), g) in weights.params.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = cfg.momentum * *v + g;
                *p -= cfg.learning_rate * *v;
            }
        }
    }

    let predictions: Vec<f64> = val_x
        .iter()
        .map(|x| logistic(logit_on_input(&weights, x)))
        .collect();
    let validation_accuracy = super::accuracy(&predictions, val_y)?;
    if single_class_training {
        log::debug!("predictor trained on a single-class split ({n_train} examples)");
    }
    Ok(TrainReport {
        weights,
        validation_accuracy,
        single_class_training,
        train_size: n_train,
        validation_size: m - n_train,
    })
}
