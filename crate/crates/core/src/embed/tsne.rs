use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_dims, Diagnostics, Embedding, Method};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneParams {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    pub seed: u64,
}

impl Default for TsneParams {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            exaggeration: 12.0,
            exaggeration_iters: 250,
            seed: 0,
        }
    }
}

const ENTROPY_TOL: f64 = 1e-5;
const SEARCH_STEPS: usize = 50;

fn sq_dists<R: AsRef<[f64]> + Sync>(x: &[R]) -> Vec<f64> {
    let n = x.len();
    let mut d = vec![0.0; n * n];
    d.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let xi = x[i].as_ref();
        for (j, out) in row.iter_mut().enumerate() {
            *out = xi.iter().zip(x[j].as_ref()).map(|(a, b)| (a - b).powi(2)).sum();
        }
    });
    d
}

/// Row-stochastic conditional affinities `p(j|i)`, row-major `n x n`, each
/// row calibrated to `perplexity` by bisection on the Gaussian precision.
pub fn conditional_affinities<R: AsRef<[f64]> + Sync>(x: &[R], perplexity: f64) -> Result<Vec<f64>> {
    let n = x.len();
    if !(perplexity > 0.0) || (n as f64) < 3.0 * perplexity + 1.0 {
        return Err(Error::InvalidConfig(format!(
            "perplexity {perplexity} needs at least {} rows, have {n}",
            (3.0 * perplexity + 1.0).ceil()
        )));
    }
    let d = sq_dists(x);
    let target = perplexity.ln();
    let mut p = vec![0.0; n * n];
    p.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let di = &d[i * n..(i + 1) * n];
        // Shifting by the nearest distance keeps exp() in range.
        let dmin = di.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v).fold(f64::INFINITY, f64::min);
        let (mut beta, mut lo, mut hi) = (1.0, 0.0, f64::INFINITY);
        for _ in 0..SEARCH_STEPS {
            let mut sum = 0.0;
            let mut weighted = 0.0;
            for j in 0..n {
                let w = if j == i { 0.0 } else { (-(di[j] - dmin) * beta).exp() };
                row[j] = w;
                sum += w;
                weighted += w * (di[j] - dmin);
            }
            let entropy = sum.ln() + beta * weighted / sum;
            row.iter_mut().for_each(|v| *v /= sum);
            let diff = entropy - target;
            if diff.abs() < ENTROPY_TOL {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
        }
    });
    Ok(p)
}

/// Shannon perplexity `exp(H)` of one distribution.
pub fn perplexity_of(row: &[f64]) -> f64 {
    (-row.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()).exp()
}

fn joint(cond: &[f64], n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i * n + j] = ((cond[i * n + j] + cond[j * n + i]) / (2.0 * n as f64)).max(1e-12);
            }
        }
    }
    p
}

/// Student-t kernel rows and their total, summed in a fixed order.
fn kernel(y: &[f64], n: usize, dim: usize) -> (Vec<f64>, f64) {
    let mut num = vec![0.0; n * n];
    num.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let yi = &y[i * dim..(i + 1) * dim];
        for (j, out) in row.iter_mut().enumerate() {
            if j != i {
                let yj = &y[j * dim..(j + 1) * dim];
                let d2: f64 = yi.iter().zip(yj).map(|(a, b)| (a - b).powi(2)).sum();
                *out = 1.0 / (1.0 + d2);
            }
        }
    });
    let row_sums: Vec<f64> = num.par_chunks(n).map(|r| r.iter().sum()).collect();
    let z = row_sums.iter().sum();
    (num, z)
}

fn kl(p: &[f64], num: &[f64], z: f64, n: usize) -> f64 {
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let pij = p[i * n + j];
                    let qij = (num[i * n + j] / z).max(1e-12);
                    pij * (pij / qij).ln()
                })
                .sum()
        })
        .collect();
    rows.iter().sum()
}

/// Exact-gradient t-SNE.
pub fn tsne<R: AsRef<[f64]> + Sync>(x: &[R], dim: usize, params: &TsneParams) -> Result<Embedding> {
    check_dims(dim)?;
    if params.iterations == 0 || !(params.learning_rate > 0.0) || !(params.exaggeration >= 1.0) {
        return Err(Error::InvalidConfig("iterations, learning rate and exaggeration must be positive".into()));
    }
    let n = x.len();
    let cond = conditional_affinities(x, params.perplexity)?;
    let p = joint(&cond, n);

    // Identical inputs share a starting point so they move together.
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let normal = Normal::new(0.0, 1e-4).expect("valid sd");
    let mut first_seen: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut y = vec![0.0; n * dim];
    for i in 0..n {
        let key: Vec<u64> = x[i].as_ref().iter().map(|v| v.to_bits()).collect();
        let init: Vec<f64> = (0..dim).map(|_| normal.sample(&mut rng)).collect();
        let src = *first_seen.entry(key).or_insert(i);
        if src == i {
            y[i * dim..(i + 1) * dim].copy_from_slice(&init);
        } else {
            let (a, b) = y.split_at_mut(i * dim);
            b[..dim].copy_from_slice(&a[src * dim..(src + 1) * dim]);
        }
    }

    let mut update = vec![0.0; n * dim];
    let mut gains = vec![1.0f64; n * dim];
    let mut kl_after_exaggeration = None;
    let mut kl_history = Vec::new();
    for it in 0..params.iterations {
        let exag = if it < params.exaggeration_iters { params.exaggeration } else { 1.0 };
        let momentum = if it < params.exaggeration_iters { 0.5 } else { 0.8 };
        let (num, z) = kernel(&y, n, dim);
        let mut grad = vec![0.0; n * dim];
        grad.par_chunks_mut(dim).enumerate().for_each(|(i, g)| {
            let yi = &y[i * dim..(i + 1) * dim];
            for j in 0..n {
                if j == i {
                    continue;
                }
                let w = num[i * n + j];
                let mult = 4.0 * (exag * p[i * n + j] - w / z) * w;
                for k in 0..dim {
                    g[k] += mult * (yi[k] - y[j * dim + k]);
                }
            }
        });
        for k in 0..n * dim {
            let same_sign = (grad[k] > 0.0) == (update[k] > 0.0);
            gains[k] = if same_sign { gains[k] * 0.8 } else { gains[k] + 0.2 };
            gains[k] = gains[k].max(0.01);
            update[k] = momentum * update[k] - params.learning_rate * gains[k] * grad[k];
            y[k] += update[k];
        }
        for k in 0..dim {
            let mean = (0..n).map(|i| y[i * dim + k]).sum::<f64>() / n as f64;
            (0..n).for_each(|i| y[i * dim + k] -= mean);
        }
        let done = it + 1;
        if done == params.exaggeration_iters || done % 50 == 0 || done == params.iterations {
            let (num, z) = kernel(&y, n, dim);
            let cost = kl(&p, &num, z, n);
            if done == params.exaggeration_iters {
                kl_after_exaggeration = Some(cost);
            }
            kl_history.push((done, cost));
        }
    }
    let final_kl = kl_history.last().map(|h| h.1).expect("at least one iteration");
    Ok(Embedding {
        coords: y.chunks(dim).map(<[f64]>::to_vec).collect(),
        labels: Vec::new(),
        method: Method::Tsne,
        diagnostics: Diagnostics::Tsne { final_kl, kl_after_exaggeration, kl_history, params: *params },
    })
}
