//! Multiclass logistic regression over sparse features, trained by seeded SGD.
//!
//! The objective is the mean negative log-likelihood of the softmax plus
//! `l2 / 2 * ||W||^2` (biases are not penalized). SGD applies the L2 shrinkage
//! through a global scale factor so each step only touches active features.

use std::collections::HashMap;

use rand::seq::SliceRandom;

use super::features::FeatureVector;
use crate::error::{Error, Result};
use crate::seed::rng_for;

pub const NO_RELATION: &str = "NO_RELATION";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocabulary {
    index: HashMap<String, usize>,
    names: Vec<String>,
}

impl Vocabulary {
    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get_or_insert(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), self.names.len() - 1);
        self.names.len() - 1
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

impl FromIterator<String> for Vocabulary {
    fn from_iter<I: IntoIterator<Item = String>>(iter: I) -> Self {
        let mut v = Vocabulary::default();
        for n in iter {
            v.get_or_insert(&n);
        }
        v
    }
}

/// Per-class weights over a shared vocabulary, stored feature-major:
/// `weights[f * n_classes + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub classes: Vec<String>,
    pub vocab: Vocabulary,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(classes: Vec<String>) -> Self {
        let n = classes.len();
        ModelParams {
            classes,
            vocab: Vocabulary::default(),
            weights: Vec::new(),
            bias: vec![0.0; n],
        }
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }

    pub fn weight(&self, feature: usize, class: usize) -> f64 {
        self.weights[feature * self.n_classes() + class]
    }

    /// Adds features unseen so far with zero weights.
    pub fn extend_vocab<'a, I: IntoIterator<Item = &'a str>>(&mut self, names: I) {
        for n in names {
            if self.vocab.get(n).is_none() {
                self.vocab.get_or_insert(n);
                self.weights.extend(std::iter::repeat_n(0.0, self.n_classes()));
            }
        }
    }

    /// Maps a feature vector onto known feature ids; unknown features are dropped.
    pub fn encode(&self, fv: &FeatureVector) -> Vec<(usize, f64)> {
        fv.features
            .iter()
            .filter_map(|(name, &v)| self.vocab.get(name).map(|i| (i, v)))
            .collect()
    }

    pub fn logits(&self, x: &[(usize, f64)]) -> Vec<f64> {
        let k = self.n_classes();
        let mut z = self.bias.clone();
        for &(f, v) in x {
            let row = &self.weights[f * k..(f + 1) * k];
            for c in 0..k {
                z[c] += v * row[c];
            }
        }
        z
    }

    pub fn probabilities(&self, fv: &FeatureVector) -> Vec<f64> {
        softmax(&self.logits(&self.encode(fv)))
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|w| w.is_finite())
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `p - onehot(label)`: gradient of the example NLL with respect to the logits.
fn logit_gradient(p: &[f64], label: usize) -> Vec<f64> {
    let mut g = p.to_vec();
    g[label] -= 1.0;
    g
}

/// Highest-probability class, ties going to the lower class index, with its probability.
pub fn argmax(p: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    (best, p[best])
}

pub fn predict(params: &ModelParams, fv: &FeatureVector) -> (String, f64) {
    let (c, s) = argmax(&params.probabilities(fv));
    (params.classes[c].clone(), s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Step `t` uses `learning_rate / (1 + lr_decay * t)`; `t` restarts every call.
    pub lr_decay: f64,
    pub l2: f64,
    pub seed: u64,
    pub warm_start: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            learning_rate: 0.1,
            lr_decay: 1e-4,
            l2: 1e-3,
            seed: 0,
            warm_start: false,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter {
                name: "learning_rate",
                msg: format!("{} must be positive", self.learning_rate),
            });
        }
        if !(self.l2 >= 0.0) || !(self.lr_decay >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "l2",
                msg: "l2 and lr_decay must be non-negative".into(),
            });
        }
        Ok(())
    }
}

/// A featurized training example with its class index.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: FeatureVector,
    pub label: usize,
}

/// Runs `cfg.epochs` SGD passes over `examples`, starting from `init` when
/// warm starting. Deterministic given the seed and example order.
pub fn fit(examples: &[Example], classes: &[String], cfg: &TrainConfig, init: Option<&ModelParams>) -> Result<ModelParams> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(Error::EmptyManifest);
    }
    let mut params = if cfg.warm_start {
        let init = init.ok_or(Error::MissingInit)?;
        if init.classes != classes {
            return Err(Error::InvalidParameter {
                name: "classes",
                msg: "warm-start parameters use a different class list".into(),
            });
        }
        init.clone()
    } else {
        ModelParams::zeros(classes.to_vec())
    };
    if cfg.epochs == 0 {
        return Ok(params);
    }
    for ex in examples {
        params.extend_vocab(ex.features.features.keys().map(String::as_str));
    }
    let encoded: Vec<(Vec<(usize, f64)>, usize)> = examples
        .iter()
        .map(|e| (params.encode(&e.features), e.label))
        .collect();

    let k = params.n_classes();
    let mut scale = 1.0f64;
    let mut step = 0u64;
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    for epoch in 0..cfg.epochs {
        let tag = epoch.to_string();
        order.shuffle(&mut rng_for(cfg.seed, &["epoch", tag.as_str()]));
        for &i in &order {
            let (x, label) = &encoded[i];
            let lr = cfg.learning_rate / (1.0 + cfg.lr_decay * step as f64);
            let mut z = params.bias.clone();
            for &(f, v) in x {
                for c in 0..k {
                    z[c] += scale * v * params.weights[f * k + c];
                }
            }
            let g = logit_gradient(&softmax(&z), *label);
            scale *= 1.0 - lr * cfg.l2;
            for &(f, v) in x {
                for c in 0..k {
                    params.weights[f * k + c] -= lr * g[c] * v / scale;
                }
            }
            for c in 0..k {
                params.bias[c] -= lr * g[c];
            }
            step += 1;
            if scale < 1e-9 {
                params.weights.iter_mut().for_each(|w| *w *= scale);
                scale = 1.0;
            }
        }
    }
    params.weights.iter_mut().for_each(|w| *w *= scale);
    Ok(params)
}

/// Full-batch objective: mean NLL plus `l2 / 2 * ||W||^2`.
pub fn objective(params: &ModelParams, examples: &[(Vec<(usize, f64)>, usize)], l2: f64) -> f64 {
    let nll: f64 = examples
        .iter()
        .map(|(x, y)| -softmax(&params.logits(x))[*y].ln())
        .sum::<f64>()
        / examples.len() as f64;
    nll + 0.5 * l2 * params.weights.iter().map(|w| w * w).sum::<f64>()
}

/// Analytic gradient of [`objective`] as `(d weights, d bias)`.
pub fn gradient(params: &ModelParams, examples: &[(Vec<(usize, f64)>, usize)], l2: f64) -> (Vec<f64>, Vec<f64>) {
    let k = params.n_classes();
    let n = examples.len() as f64;
    let mut gw: Vec<f64> = params.weights.iter().map(|w| l2 * w).collect();
    let mut gb = vec![0.0; k];
    for (x, y) in examples {
        let g = logit_gradient(&softmax(&params.logits(x)), *y);
        for c in 0..k {
            gb[c] += g[c] / n;
            for &(f, v) in x {
                gw[f * k + c] += g[c] * v / n;
            }
        }
    }
    (gw, gb)
}
