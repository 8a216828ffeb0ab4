//! Multinomial logistic regression trained by mini-batch gradient descent.
//!
//! Objective: mean cross-entropy over the batch plus `l2 * ||W||^2` (the
//! bias is not penalized).

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{LearnerError, SparseVec};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    #[default]
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { batch_size: 64, learning_rate: 0.001, epochs: 10, l2: 1e-4, seed: 42, optimizer: Optimizer::Adam }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LearnerError> {
        if self.batch_size == 0 {
            return Err(LearnerError::InvalidConfig("batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(LearnerError::InvalidConfig("learning_rate must be positive".into()));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(LearnerError::InvalidConfig("l2 must be non-negative".into()));
        }
        Ok(())
    }
}

/// Weights are stored row-major, one row of `num_features` per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub class_names: Vec<String>,
    pub num_features: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LinearModel {
    pub fn zeros(class_names: Vec<String>, num_features: usize) -> Self {
        let k = class_names.len();
        Self { class_names, num_features, weights: vec![0.0; k * num_features], bias: vec![0.0; k] }
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn weight(&self, class: usize, feature: usize) -> f64 {
        self.weights[class * self.num_features + feature]
    }

    fn check_dim(&self, x: &SparseVec) -> Result<(), LearnerError> {
        if x.dim != self.num_features {
            return Err(LearnerError::DimensionMismatch { expected: self.num_features, found: x.dim });
        }
        Ok(())
    }

    fn logits(&self, x: &SparseVec) -> Vec<f64> {
        let f = self.num_features;
        (0..self.num_classes())
            .map(|c| {
                let row = &self.weights[c * f..(c + 1) * f];
                self.bias[c] + x.iter().map(|(i, v)| row[i] * v).sum::<f64>()
            })
            .collect()
    }

    pub fn predict_proba(&self, x: &SparseVec) -> Result<Vec<f64>, LearnerError> {
        self.check_dim(x)?;
        Ok(softmax(&self.logits(x)))
    }

    /// The `k` most probable classes, descending; ties go to the lower class
    /// index.
    pub fn predict_proba_topk(&self, x: &SparseVec, k: usize) -> Result<Vec<(String, f64)>, LearnerError> {
        if k == 0 {
            return Err(LearnerError::InvalidK);
        }
        let p = self.predict_proba(x)?;
        Ok(rank(&p, k).into_iter().map(|i| (self.class_names[i].clone(), p[i])).collect())
    }

    /// Mean cross-entropy plus the L2 penalty.
    pub fn loss(&self, xs: &[SparseVec], ys: &[usize], l2: f64) -> f64 {
        let ce: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, &y)| {
                let z = self.logits(x);
                log_sum_exp(&z) - z[y]
            })
            .sum();
        let ce = if xs.is_empty() { 0.0 } else { ce / xs.len() as f64 };
        ce + l2 * self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Analytic gradient of [`LinearModel::loss`] as (weights, bias).
    pub fn gradient(&self, xs: &[SparseVec], ys: &[usize], l2: f64) -> (Vec<f64>, Vec<f64>) {
        let f = self.num_features;
        let mut gw: Vec<f64> = self.weights.iter().map(|w| 2.0 * l2 * w).collect();
        let mut gb = vec![0.0; self.num_classes()];
        if xs.is_empty() {
            return (gw, gb);
        }
        let scale = 1.0 / xs.len() as f64;
        for (x, &y) in xs.iter().zip(ys) {
            let mut p = softmax(&self.logits(x));
            p[y] -= 1.0;
            for (c, &g) in p.iter().enumerate() {
                let g = g * scale;
                gb[c] += g;
                let row = &mut gw[c * f..(c + 1) * f];
                for (i, v) in x.iter() {
                    row[i] += g * v;
                }
            }
        }
        (gw, gb)
    }
}

/// Indices of the `k` largest entries, descending, ties by ascending index.
pub fn rank(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: LinearModel,
    /// Full training objective after each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Trains a softmax classifier on sparse rows `xs` with class indices `ys`
/// into `class_names`. Deterministic for a fixed `config.seed`.
pub fn fit_linear_softmax(
    xs: &[SparseVec],
    ys: &[usize],
    class_names: Vec<String>,
    num_features: usize,
    config: &TrainConfig,
) -> Result<FitOutcome, LearnerError> {
    config.validate()?;
    if class_names.len() < 2 {
        return Err(LearnerError::SingleClass);
    }
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(LearnerError::EmptyTrainingSet);
    }
    if let Some(x) = xs.iter().find(|x| x.dim != num_features) {
        return Err(LearnerError::DimensionMismatch { expected: num_features, found: x.dim });
    }
    if let Some(&y) = ys.iter().find(|&&y| y >= class_names.len()) {
        return Err(LearnerError::InvalidConfig(format!("label index {y} out of range")));
    }

    let mut model = LinearModel::zeros(class_names, num_features);
    let n_params = model.weights.len();
    let k = model.num_classes();
    let mut adam = AdamState::new(n_params, k);
    let mut rng = rng::stream(config.seed, "fit-linear-softmax");
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut batch_x = Vec::with_capacity(config.batch_size);
    let mut batch_y = Vec::with_capacity(config.batch_size);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            batch_x.clear();
            batch_y.clear();
            for &i in chunk {
                batch_x.push(xs[i].clone());
                batch_y.push(ys[i]);
            }
            let (gw, gb) = model.gradient(&batch_x, &batch_y, config.l2);
            match config.optimizer {
                Optimizer::Sgd => {
                    for (w, g) in model.weights.iter_mut().zip(&gw) {
                        *w -= config.learning_rate * g;
                    }
                    for (b, g) in model.bias.iter_mut().zip(&gb) {
                        *b -= config.learning_rate * g;
                    }
                }
                Optimizer::Adam => adam.step(&mut model, &gw, &gb, config.learning_rate),
            }
        }
        let loss = model.loss(xs, ys, config.l2);
        if !loss.is_finite() {
            return Err(LearnerError::Diverged { epoch: epoch + 1 });
        }
        epoch_losses.push(loss);
    }
    Ok(FitOutcome { model, epoch_losses })
}

struct AdamState {
    m_w: Vec<f64>,
    v_w: Vec<f64>,
    m_b: Vec<f64>,
    v_b: Vec<f64>,
    t: i32,
}

impl AdamState {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n_weights: usize, n_bias: usize) -> Self {
        Self {
            m_w: vec![0.0; n_weights],
            v_w: vec![0.0; n_weights],
            m_b: vec![0.0; n_bias],
            v_b: vec![0.0; n_bias],
            t: 0,
        }
    }

    fn step(&mut self, model: &mut LinearModel, gw: &[f64], gb: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        let update = |p: &mut [f64], m: &mut [f64], v: &mut [f64], g: &[f64]| {
            for i in 0..p.len() {
                m[i] = Self::BETA1 * m[i] + (1.0 - Self::BETA1) * g[i];
                v[i] = Self::BETA2 * v[i] + (1.0 - Self::BETA2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + Self::EPS);
            }
        };
        update(&mut model.weights, &mut self.m_w, &mut self.v_w, gw);
        update(&mut model.bias, &mut self.m_b, &mut self.v_b, gb);
    }
}

/// Largest relative discrepancy between the analytic gradient and central
/// finite differences, over at most `MAX_CHECKED` coordinates spread evenly
/// across weights and biases. Relative error is
/// `|a - n| / max(|a|, |n|, 1e-7)`.
pub fn gradient_check(
    model: &LinearModel,
    xs: &[SparseVec],
    ys: &[usize],
    l2: f64,
    epsilon: f64,
) -> Result<f64, LearnerError> {
    const MAX_CHECKED: usize = 2000;
    if !(epsilon > 0.0 && epsilon <= 1e-2) {
        return Err(LearnerError::InvalidEpsilon(epsilon));
    }
    let (gw, gb) = model.gradient(xs, ys, l2);
    let total = gw.len() + gb.len();
    let stride = total.div_ceil(MAX_CHECKED).max(1);
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for coord in (0..total).step_by(stride) {
        let analytic = if coord < gw.len() { gw[coord] } else { gb[coord - gw.len()] };
        let orig = *param_mut(&mut probe, coord);
        *param_mut(&mut probe, coord) = orig + epsilon;
        let plus = probe.loss(xs, ys, l2);
        *param_mut(&mut probe, coord) = orig - epsilon;
        let minus = probe.loss(xs, ys, l2);
        *param_mut(&mut probe, coord) = orig;
        let numeric = (plus - minus) / (2.0 * epsilon);
        let denom = analytic.abs().max(numeric.abs()).max(1e-7);
        worst = worst.max((analytic - numeric).abs() / denom);
    }
    Ok(worst)
}

fn param_mut(model: &mut LinearModel, coord: usize) -> &mut f64 {
    let nw = model.weights.len();
    if coord < nw {
        &mut model.weights[coord]
    } else {
        &mut model.bias[coord - nw]
    }
}
