use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::scale::Standardizer;
use crate::error::{Error, Result};
use crate::posture::{N_CLASSES, N_SENSORS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    /// Input, hidden..., output widths.
    pub layers: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            layers: vec![N_SENSORS, 16, N_CLASSES],
            epochs: 150,
            learning_rate: 0.05,
            momentum: 0.9,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl MlpParams {
    pub fn validate(&self) -> Result<()> {
        if self.layers.len() < 2 || self.layers[0] != N_SENSORS || *self.layers.last().unwrap() != N_CLASSES {
            return Err(Error::InvalidConfig(format!(
                "MLP layers {:?} must start at {N_SENSORS} and end at {N_CLASSES}",
                self.layers
            )));
        }
        if self.layers.contains(&0) || self.batch_size == 0 || !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("MLP widths, batch size and learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        Ok(())
    }
}

/// Dense layer with row-major `out x in` weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

/// ReLU hidden layers, softmax output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub scaler: Standardizer,
    pub layers: Vec<Dense>,
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

impl Mlp {
    pub fn zeros(widths: &[usize]) -> Self {
        let layers = widths
            .windows(2)
            .map(|w| Dense { inputs: w[0], outputs: w[1], w: vec![0.0; w[0] * w[1]], b: vec![0.0; w[1]] })
            .collect();
        Self { scaler: Standardizer::identity(), layers }
    }

    /// He-normal weights, zero biases.
    pub fn random(widths: &[usize], rng: &mut ChaCha8Rng) -> Self {
        let mut m = Self::zeros(widths);
        for l in &mut m.layers {
            let normal = Normal::new(0.0, (2.0 / l.inputs as f64).sqrt()).expect("valid sd");
            l.w.iter_mut().for_each(|v| *v = normal.sample(rng));
        }
        m
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Weights then biases, layer by layer.
    pub fn params_flat(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.w.iter().chain(&l.b).copied()).collect()
    }

    pub fn set_params_flat(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.n_params(), "parameter count");
        let mut at = 0;
        for l in &mut self.layers {
            let (nw, nb) = (l.w.len(), l.b.len());
            l.w.copy_from_slice(&p[at..at + nw]);
            l.b.copy_from_slice(&p[at + nw..at + nw + nb]);
            at += nw + nb;
        }
    }

    /// Activations of every layer for an already standardized input; the
    /// last entry holds the logits.
    fn forward(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        for (k, l) in self.layers.iter().enumerate() {
            let a = acts.last().unwrap();
            let mut z: Vec<f64> =
                (0..l.outputs).map(|o| l.b[o] + (0..l.inputs).map(|i| l.w[o * l.inputs + i] * a[i]).sum::<f64>()).collect();
            if k + 1 < self.layers.len() {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }

    pub fn logits(&self, x: &[f64; N_SENSORS]) -> Vec<f64> {
        self.forward(&self.scaler.apply(x)).pop().unwrap()
    }

    pub fn probabilities(&self, x: &[f64; N_SENSORS]) -> Vec<f64> {
        softmax(&self.logits(x))
    }

    /// Mean cross-entropy over a batch of standardized inputs and its
    /// gradient in [`Mlp::params_flat`] order.
    pub fn loss_and_grad(&self, xs: &[[f64; N_SENSORS]], ys: &[usize]) -> (f64, Vec<f64>) {
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> =
            self.layers.iter().map(|l| (vec![0.0; l.w.len()], vec![0.0; l.b.len()])).collect();
        let mut loss = 0.0;
        let inv = 1.0 / xs.len() as f64;
        for (x, &y) in xs.iter().zip(ys) {
            let acts = self.forward(x);
            let p = softmax(acts.last().unwrap());
            loss -= p[y].max(f64::MIN_POSITIVE).ln() * inv;
            let mut delta: Vec<f64> = p.iter().enumerate().map(|(k, &pk)| (pk - (k == y) as u8 as f64) * inv).collect();
            for k in (0..self.layers.len()).rev() {
                let l = &self.layers[k];
                let a = &acts[k];
                let (gw, gb) = &mut grads[k];
                for o in 0..l.outputs {
                    gb[o] += delta[o];
                    for i in 0..l.inputs {
                        gw[o * l.inputs + i] += delta[o] * a[i];
                    }
                }
                if k > 0 {
                    delta = (0..l.inputs)
                        .map(|i| {
                            if a[i] > 0.0 {
                                (0..l.outputs).map(|o| l.w[o * l.inputs + i] * delta[o]).sum()
                            } else {
                                0.0
                            }
                        })
                        .collect();
                }
            }
        }
        (loss, grads.into_iter().flat_map(|(w, b)| w.into_iter().chain(b)).collect())
    }

    pub fn loss(&self, xs: &[[f64; N_SENSORS]], ys: &[usize]) -> f64 {
        xs.iter()
            .zip(ys)
            .map(|(x, &y)| -softmax(&self.forward(x).pop().unwrap())[y].max(f64::MIN_POSITIVE).ln())
            .sum::<f64>()
            / xs.len() as f64
    }

    /// Mini-batch gradient descent with momentum on standardized inputs.
    pub fn fit(x: &[[f64; N_SENSORS]], y: &[usize], p: &MlpParams) -> Result<Self> {
        p.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        let mut model = Self::random(&p.layers, &mut rng);
        model.scaler = Standardizer::fit(x);
        let xs: Vec<[f64; N_SENSORS]> = x.iter().map(|r| model.scaler.apply(r)).collect();
        let mut params = model.params_flat();
        let mut velocity = vec![0.0; params.len()];
        let mut order: Vec<usize> = (0..xs.len()).collect();
        let (mut bx, mut by) = (Vec::with_capacity(p.batch_size), Vec::with_capacity(p.batch_size));
        for _ in 0..p.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(p.batch_size) {
                bx.clear();
                by.clear();
                bx.extend(batch.iter().map(|&i| xs[i]));
                by.extend(batch.iter().map(|&i| y[i]));
                let (_, g) = model.loss_and_grad(&bx, &by);
                for ((v, w), gi) in velocity.iter_mut().zip(params.iter_mut()).zip(&g) {
                    *v = p.momentum * *v - p.learning_rate * gi;
                    *w += *v;
                }
                model.set_params_flat(&params);
            }
        }
        Ok(model)
    }
}
