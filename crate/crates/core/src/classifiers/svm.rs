//! Soft-margin SVM trained by sequential minimal optimization on the dual,
//! with a logistic link fitted to the decision values for probabilities.
//!
//! The solver minimizes `½ αᵀQα - Σα` subject to `yᵀα = 0`, `0 ≤ α ≤ C`
//! with `Q_ij = y_i y_j K(x_i, x_j)`. Each step picks the maximal violating
//! pair with second-order working-set selection and solves the two-variable
//! subproblem in closed form; it stops when the KKT gap
//! `max_{I_up} -y G - min_{I_low} -y G` drops below the tolerance.

use serde::{Deserialize, Serialize};

use super::{Kernel, SvmConfig};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelFn {
    Linear,
    Rbf { gamma: f64 },
}

impl KernelFn {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            KernelFn::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            KernelFn::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    /// Gradient `Qα - 1` at the solution.
    pub gradient: Vec<f64>,
    /// Offset: decision value is `Σ α_i y_i K(x_i, x) - rho`.
    pub rho: f64,
    pub iterations: usize,
    /// KKT gap at termination.
    pub gap: f64,
    /// Dual objective `Σα - ½αᵀQα` after each iteration, when recorded.
    pub dual_history: Vec<f64>,
}

/// Dual objective value.
pub fn dual_objective(alpha: &[f64], gradient: &[f64]) -> f64 {
    // ½αᵀQα - Σα = ½ Σ α_i (G_i - 1)
    -0.5 * alpha.iter().zip(gradient).map(|(a, g)| a * (g - 1.0)).sum::<f64>()
}

/// Solves the dual for a precomputed kernel matrix (row-major, `n × n`).
pub fn smo_solve(
    kernel: &[f64],
    y: &[f64],
    c: f64,
    tolerance: f64,
    max_iterations: usize,
    record_history: bool,
) -> SmoSolution {
    let n = y.len();
    let k = |i: usize, j: usize| kernel[i * n + j];
    let q = |i: usize, j: usize| y[i] * y[j] * kernel[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut history = Vec::new();
    let in_up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let in_low = |a: f64, yi: f64| (yi < 0.0 && a < c) || (yi > 0.0 && a > 0.0);

    let mut iterations = 0;
    let mut gap;
    loop {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            if in_up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = Some(t);
                }
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j_sel = None;
        let mut best_obj = f64::INFINITY;
        if let Some(i) = i_sel {
            for t in 0..n {
                if !in_low(alpha[t], y[t]) {
                    continue;
                }
                let v = -y[t] * grad[t];
                gmin = gmin.min(v);
                let b = gmax - v;
                if b > 0.0 {
                    let mut a = k(i, i) + k(t, t) - 2.0 * k(i, t);
                    if a <= 0.0 {
                        a = TAU;
                    }
                    let obj = -(b * b) / a;
                    if obj < best_obj {
                        best_obj = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        gap = gmax - gmin;
        let (Some(i), Some(j)) = (i_sel, j_sel) else { break };
        if gap < tolerance || iterations >= max_iterations {
            break;
        }

        let (ai_old, aj_old) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - ai_old, alpha[j] - aj_old);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
        iterations += 1;
        if record_history {
            history.push(dual_objective(&alpha, &grad));
        }
    }

    // Offset from free multipliers, or the middle of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        0.5 * (ub + lb)
    };

    SmoSolution {
        alpha,
        gradient: grad,
        rho,
        iterations,
        gap: gap.max(0.0),
        dual_history: history,
    }
}

/// Largest violation of the per-multiplier KKT conditions, with margins
/// `m_i = y_i f(x_i)`: `α = 0 ⇒ m ≥ 1`, `0 < α < C ⇒ m = 1`, `α = C ⇒ m ≤ 1`.
pub fn kkt_violation(alpha: &[f64], margins: &[f64], c: f64) -> f64 {
    alpha
        .iter()
        .zip(margins)
        .map(|(&a, &m)| {
            if a <= 0.0 {
                (1.0 - m).max(0.0)
            } else if a >= c {
                (m - 1.0).max(0.0)
            } else {
                (m - 1.0).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Logistic link `P(normal | f) = 1 / (1 + exp(A f + B))`, fit by Newton's
/// method with backtracking on the regularized targets of Platt scaling.
pub fn fit_link(decision: &[f64], positive: &[bool]) -> (f64, f64) {
    let prior1 = positive.iter().filter(|&&p| p).count() as f64;
    let prior0 = positive.len() as f64 - prior1;
    let hi = (prior1 + 1.0) / (prior1 + 2.0);
    let lo = 1.0 / (prior0 + 2.0);
    let t: Vec<f64> = positive.iter().map(|&p| if p { hi } else { lo }).collect();
    let objective = |a: f64, b: f64| -> f64 {
        decision
            .iter()
            .zip(&t)
            .map(|(f, ti)| {
                let z = f * a + b;
                if z >= 0.0 {
                    ti * z + (-z).exp().ln_1p()
                } else {
                    (ti - 1.0) * z + z.exp().ln_1p()
                }
            })
            .sum()
    };
    let (mut a, mut b) = (0.0, ((prior0 + 1.0) / (prior1 + 1.0)).ln());
    let mut fval = objective(a, b);
    for _ in 0..100 {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (1e-12, 1e-12, 0.0, 0.0, 0.0);
        for (f, ti) in decision.iter().zip(&t) {
            let z = f * a + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = ti - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < 1e-10 {
            break;
        }
    }
    (a, b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Svm {
    pub kernel: KernelFn,
    pub support_vectors: Vec<Vec<f64>>,
    /// `α_i y_i` per support vector.
    pub coefficients: Vec<f64>,
    pub rho: f64,
    pub link: (f64, f64),
    pub iterations: usize,
    pub gap: f64,
    /// Mean absolute sensitivity `|∂f/∂x_j|` over the training rows.
    pub importance: Vec<f64>,
}

impl Svm {
    pub(crate) fn fit(x: &[Vec<f64>], labels: &[bool], cfg: &SvmConfig) -> Self {
        let n = x.len();
        let p = x.first().map_or(0, Vec::len);
        let kernel = match cfg.kernel {
            Kernel::Linear => KernelFn::Linear,
            Kernel::Rbf => KernelFn::Rbf {
                gamma: cfg.gamma.unwrap_or(1.0 / p.max(1) as f64),
            },
        };
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = kernel.eval(&x[i], &x[j]);
                gram[i * n + j] = v;
                gram[j * n + i] = v;
            }
        }
        let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
        let sol = smo_solve(&gram, &y, cfg.c, cfg.tolerance, cfg.max_iterations, false);
        let decision: Vec<f64> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| sol.alpha[j] * y[j] * gram[i * n + j])
                    .sum::<f64>()
                    - sol.rho
            })
            .collect();
        let link = fit_link(&decision, labels);
        let sv: Vec<usize> = (0..n).filter(|&i| sol.alpha[i] > 0.0).collect();
        let mut model = Svm {
            kernel,
            support_vectors: sv.iter().map(|&i| x[i].clone()).collect(),
            coefficients: sv.iter().map(|&i| sol.alpha[i] * y[i]).collect(),
            rho: sol.rho,
            link,
            iterations: sol.iterations,
            gap: sol.gap,
            importance: Vec::new(),
        };
        model.importance = model.sensitivity(x, p);
        model
    }

    fn sensitivity(&self, x: &[Vec<f64>], p: usize) -> Vec<f64> {
        match self.kernel {
            KernelFn::Linear => (0..p)
                .map(|j| {
                    self.support_vectors
                        .iter()
                        .zip(&self.coefficients)
                        .map(|(s, c)| c * s[j])
                        .sum::<f64>()
                        .abs()
                })
                .collect(),
            KernelFn::Rbf { gamma } => {
                let mut acc = vec![0.0; p];
                for row in x {
                    let mut g = vec![0.0; p];
                    for (s, c) in self.support_vectors.iter().zip(&self.coefficients) {
                        let kv = self.kernel.eval(s, row);
                        for j in 0..p {
                            g[j] += c * kv * -2.0 * gamma * (row[j] - s[j]);
                        }
                    }
                    for j in 0..p {
                        acc[j] += g[j].abs();
                    }
                }
                acc.iter().map(|v| v / x.len().max(1) as f64).collect()
            }
        }
    }

    pub fn decision(&self, values: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.coefficients)
            .map(|(s, c)| c * self.kernel.eval(s, values))
            .sum::<f64>()
            - self.rho
    }

    pub fn proba(&self, values: &[f64]) -> f64 {
        let z = self.link.0 * self.decision(values) + self.link.1;
        if z >= 0.0 {
            let e = (-z).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + z.exp())
        }
    }
}
