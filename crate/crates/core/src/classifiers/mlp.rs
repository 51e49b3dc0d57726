//! One-hidden-layer perceptron with logistic units, trained by mini-batch
//! backpropagation on squared error.
//!
//! Parameters are stored flat: hidden weights row-major (`hidden × inputs`),
//! hidden biases, output weights, output bias.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::logreg::sigmoid;
use super::MlpConfig;
use crate::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub inputs: usize,
    pub hidden: usize,
}

impl Shape {
    pub fn param_count(&self) -> usize {
        self.hidden * self.inputs + 2 * self.hidden + 1
    }

    fn w1(&self, params: &[f64], h: usize, j: usize) -> f64 {
        params[h * self.inputs + j]
    }

    fn b1_offset(&self) -> usize {
        self.hidden * self.inputs
    }

    fn w2_offset(&self) -> usize {
        self.b1_offset() + self.hidden
    }

    fn b2_offset(&self) -> usize {
        self.w2_offset() + self.hidden
    }
}

fn forward(shape: &Shape, params: &[f64], row: &[f64], hidden: &mut [f64]) -> f64 {
    for (h, out) in hidden.iter_mut().enumerate() {
        let z = params[shape.b1_offset() + h]
            + (0..shape.inputs).map(|j| shape.w1(params, h, j) * row[j]).sum::<f64>();
        *out = sigmoid(z);
    }
    let z = params[shape.b2_offset()]
        + hidden
            .iter()
            .enumerate()
            .map(|(h, a)| params[shape.w2_offset() + h] * a)
            .sum::<f64>();
    sigmoid(z)
}

/// Squared-error objective `1/(2m) Σ (o - y)²` over a batch and its gradient.
pub fn objective(shape: &Shape, params: &[f64], x: &[&[f64]], y: &[f64]) -> (f64, Vec<f64>) {
    let m = x.len() as f64;
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    let mut hidden = vec![0.0; shape.hidden];
    for (row, &t) in x.iter().zip(y) {
        let o = forward(shape, params, row, &mut hidden);
        loss += 0.5 * (o - t).powi(2);
        let delta_out = (o - t) * o * (1.0 - o);
        grad[shape.b2_offset()] += delta_out;
        for h in 0..shape.hidden {
            let a = hidden[h];
            grad[shape.w2_offset() + h] += delta_out * a;
            let delta_h = delta_out * params[shape.w2_offset() + h] * a * (1.0 - a);
            grad[shape.b1_offset() + h] += delta_h;
            for j in 0..shape.inputs {
                grad[h * shape.inputs + j] += delta_h * row[j];
            }
        }
    }
    for g in &mut grad {
        *g /= m;
    }
    (loss / m, grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub shape: Shape,
    pub params: Vec<f64>,
}

impl Mlp {
    pub(crate) fn fit(x: &[Vec<f64>], y: &[f64], cfg: &MlpConfig, seed: u64) -> Self {
        let shape = Shape {
            inputs: x.first().map_or(0, Vec::len),
            hidden: cfg.hidden,
        };
        let mut rng = seeded_rng(seed);
        let mut params: Vec<f64> = (0..shape.param_count())
            .map(|_| rng.random_range(-0.5..0.5))
            .collect();
        let mut order: Vec<usize> = (0..x.len()).collect();
        let batch = cfg.batch_size.max(1);
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(batch) {
                let bx: Vec<&[f64]> = chunk.iter().map(|&i| x[i].as_slice()).collect();
                let by: Vec<f64> = chunk.iter().map(|&i| y[i]).collect();
                let (_, grad) = objective(&shape, &params, &bx, &by);
                for (w, g) in params.iter_mut().zip(&grad) {
                    *w -= cfg.learning_rate * g;
                }
            }
        }
        Mlp { shape, params }
    }

    pub fn proba(&self, values: &[f64]) -> f64 {
        let mut hidden = vec![0.0; self.shape.hidden];
        forward(&self.shape, &self.params, values, &mut hidden)
    }

    /// Per-input `Σ_h |w_out,h · w_in,h,j|`.
    pub fn importance(&self) -> Vec<f64> {
        let s = &self.shape;
        (0..s.inputs)
            .map(|j| {
                (0..s.hidden)
                    .map(|h| (self.params[s.w2_offset() + h] * s.w1(&self.params, h, j)).abs())
                    .sum()
            })
            .collect()
    }
}
