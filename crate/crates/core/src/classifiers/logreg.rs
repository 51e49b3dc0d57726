//! L2-regularized logistic regression fit by batch gradient descent.

use serde::{Deserialize, Serialize};

use super::LogRegConfig;

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Logistic {
    pub bias: f64,
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Objective and gradient for `params = [bias, w...]`:
/// mean negative log-likelihood of `y ∈ {0,1}` plus `l2/2 · ‖w‖²` (bias
/// unpenalized).
pub fn objective(params: &[f64], x: &[Vec<f64>], y: &[f64], l2: f64) -> (f64, Vec<f64>) {
    let n = x.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; params.len()];
    for (row, &t) in x.iter().zip(y) {
        let z = params[0] + row.iter().zip(&params[1..]).map(|(a, w)| a * w).sum::<f64>();
        // -[t ln σ(z) + (1-t) ln(1-σ(z))] = softplus(z) - t z
        loss += softplus(z) - t * z;
        let r = sigmoid(z) - t;
        grad[0] += r;
        for (g, a) in grad[1..].iter_mut().zip(row) {
            *g += r * a;
        }
    }
    loss /= n;
    for g in &mut grad {
        *g /= n;
    }
    for (g, w) in grad[1..].iter_mut().zip(&params[1..]) {
        *g += l2 * w;
    }
    loss += 0.5 * l2 * params[1..].iter().map(|w| w * w).sum::<f64>();
    (loss, grad)
}

impl Logistic {
    pub(crate) fn fit(x: &[Vec<f64>], y: &[f64], cfg: &LogRegConfig) -> Self {
        let p = x.first().map_or(0, Vec::len);
        let mut params = vec![0.0; p + 1];
        let mut iterations = 0;
        let mut converged = false;
        while iterations < cfg.iterations {
            let (_, grad) = objective(&params, x, y, cfg.l2);
            if grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) < cfg.gradient_tolerance {
                converged = true;
                break;
            }
            for (w, g) in params.iter_mut().zip(&grad) {
                *w -= cfg.learning_rate * g;
            }
            iterations += 1;
        }
        Logistic {
            bias: params[0],
            weights: params[1..].to_vec(),
            iterations,
            converged,
        }
    }

    pub fn proba(&self, values: &[f64]) -> f64 {
        sigmoid(self.bias + values.iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_half() {
        let m = Logistic {
            bias: 0.0,
            weights: vec![0.0; 3],
            iterations: 0,
            converged: true,
        };
        assert_eq!(m.proba(&[1.0, -4.0, 7.0]), 0.5);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert!((softplus(800.0) - 800.0).abs() < 1e-9);
    }
}
