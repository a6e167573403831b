//! Multinomial logistic regression on standardized features, trained
//! full-batch with the adaptive-moment optimizer. Shared by the BetaVAE-score
//! classifier and the LR informativeness probe.

use crate::nn::{cross_entropy, AdamParams, AdamState, Mlp};
use crate::rng::SeededRng;
use ndarray::Array2;

pub(crate) struct LogisticModel {
    net: Mlp,
    mean: Vec<f64>,
    std: Vec<f64>,
}

const TRAIN_ITERS: usize = 400;
const LEARNING_RATE: f64 = 0.05;

fn standardize(x: &[Vec<f64>], mean: &[f64], std: &[f64]) -> Array2<f64> {
    let d = mean.len();
    Array2::from_shape_fn((x.len(), d), |(i, j)| (x[i][j] - mean[j]) / std[j])
}

pub(crate) fn fit_logistic(
    x: &[Vec<f64>],
    y: &[usize],
    classes: usize,
    seed: u64,
) -> LogisticModel {
    let n = x.len();
    let d = x[0].len();
    let mut mean = vec![0.0; d];
    for row in x {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut std = vec![0.0; d];
    for row in x {
        for (s, (&v, &m)) in std.iter_mut().zip(row.iter().zip(&mean)) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut std {
        *s = (*s / n as f64).sqrt().max(1e-9);
    }

    let features = standardize(x, &mean, &std);
    let mut rng = SeededRng::new(seed);
    let mut net = Mlp::new(&[d, classes], &mut rng);
    let mut adam = AdamState::new(AdamParams::with_lr(LEARNING_RATE), &[("lr", &net)]);
    for _ in 0..TRAIN_ITERS {
        let (logits, cache) = net.forward_batch(&features, 0.0, None, true).unwrap();
        let (_, dlogits) = cross_entropy(&logits, y);
        let (grads, _) = net.backprop_batch(&cache, &dlogits).unwrap();
        adam.step(&mut [&mut net], &[&grads]).unwrap();
    }
    LogisticModel { net, mean, std }
}

impl LogisticModel {
    pub(crate) fn accuracy(&self, x: &[Vec<f64>], y: &[usize]) -> f64 {
        let features = standardize(x, &self.mean, &self.std);
        let (logits, _) = self.net.forward_batch(&features, 0.0, None, false).unwrap();
        let mut correct = 0usize;
        for (row, &target) in logits.rows().into_iter().zip(y) {
            let mut best = 0;
            for j in 1..row.len() {
                if row[j] > row[best] {
                    best = j;
                }
            }
            if best == target {
                correct += 1;
            }
        }
        correct as f64 / y.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn separates_trivial_clusters() {
        let mut rng = SeededRng::new(1);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for c in 0..3usize {
            for _ in 0..200 {
                x.push(vec![
                    c as f64 * 3.0 + 0.2 * rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ]);
                y.push(c);
            }
        }
        let model = fit_logistic(&x, &y, 3, 42);
        assert!(model.accuracy(&x, &y) >= 0.99);
    }
}
