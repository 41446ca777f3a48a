//! Unregularized weighted logistic regression by damped Newton iterations.

use super::{sigmoid, Coefficients, RiskError, RiskModel, TrainingSet};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

pub const MAX_NEWTON_ITERATIONS: usize = 500;
/// Stop when the gradient of the weight-normalized log-likelihood falls below this.
const GRADIENT_TOLERANCE: f64 = 1e-6;
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticReport {
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Weighted log-likelihood divided by total weight.
    pub mean_log_likelihood: f64,
    pub converged: bool,
    /// Set when the classes look perfectly separable and the coefficients diverge.
    pub separated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub model: RiskModel,
    pub report: LogisticReport,
}

/// `log sigmoid(z)` without overflow.
fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// Weighted Bernoulli log-likelihood of `beta` over rows `(x1, x2)`.
pub fn log_likelihood(beta: [f64; 3], xs: &[[f64; 2]], labels: &[bool], weights: &[f64]) -> f64 {
    xs.iter()
        .zip(labels)
        .zip(weights)
        .map(|((x, &y), w)| {
            let z = beta[0] + beta[1] * x[0] + beta[2] * x[1];
            w * if y { log_sigmoid(z) } else { log_sigmoid(-z) }
        })
        .sum()
}

pub fn log_likelihood_gradient(beta: [f64; 3], xs: &[[f64; 2]], labels: &[bool], weights: &[f64]) -> [f64; 3] {
    let mut g = [0.0; 3];
    for ((x, &y), w) in xs.iter().zip(labels).zip(weights) {
        let p = sigmoid(beta[0] + beta[1] * x[0] + beta[2] * x[1]);
        let r = w * (if y { 1.0 } else { 0.0 } - p);
        g[0] += r;
        g[1] += r * x[0];
        g[2] += r * x[1];
    }
    g
}

fn hessian(beta: [f64; 3], xs: &[[f64; 2]], weights: &[f64]) -> Matrix3<f64> {
    let mut h = Matrix3::zeros();
    for (x, w) in xs.iter().zip(weights) {
        let p = sigmoid(beta[0] + beta[1] * x[0] + beta[2] * x[1]);
        let s = w * p * (1.0 - p);
        let v = Vector3::new(1.0, x[0], x[1]);
        h += v * v.transpose() * s;
    }
    h
}

/// Maximum likelihood fit on standard-scaled features.
pub fn fit_logistic(ts: &TrainingSet) -> Result<LogisticFit, RiskError> {
    if !ts.has_both_labels() {
        return Err(RiskError::SingleClass);
    }
    let xs: Vec<[f64; 2]> = ts.samples.iter().map(|s| ts.scaler.apply(s.gamma, s.delta)).collect();
    let labels: Vec<bool> = ts.samples.iter().map(|s| s.label).collect();
    let weights: Vec<f64> = ts.samples.iter().map(|s| s.weight).collect();
    let total: f64 = weights.iter().sum();

    // Start from the intercept-only optimum.
    let share = ts.positive_weight() / total;
    let mut beta = [(share / (1.0 - share)).ln(), 0.0, 0.0];
    let mut ll = log_likelihood(beta, &xs, &labels, &weights);
    let mut grad = log_likelihood_gradient(beta, &xs, &labels, &weights);
    let norm = |g: [f64; 3]| (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt() / total;

    let mut iterations = 0;
    let mut stalled = false;
    while norm(grad) >= GRADIENT_TOLERANCE && iterations < MAX_NEWTON_ITERATIONS {
        iterations += 1;
        let h = hessian(beta, &xs, &weights);
        let g = Vector3::new(grad[0], grad[1], grad[2]);
        let step = match h.cholesky() {
            Some(c) => c.solve(&g),
            // Flat curvature: fall back to a gradient step.
            None => g / total,
        };
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand = [beta[0] + t * step[0], beta[1] + t * step[1], beta[2] + t * step[2]];
            let cand_ll = log_likelihood(cand, &xs, &labels, &weights);
            if cand_ll >= ll {
                accepted = Some((cand, cand_ll));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((b, l)) => {
                let gain = l - ll;
                beta = b;
                ll = l;
                grad = log_likelihood_gradient(beta, &xs, &labels, &weights);
                if gain == 0.0 && norm(grad) >= GRADIENT_TOLERANCE {
                    stalled = true;
                    break;
                }
            }
            None => {
                stalled = true;
                break;
            }
        }
    }
    let gradient_norm = norm(grad);
    let converged = gradient_norm < GRADIENT_TOLERANCE;
    let mean_ll = ll / total;
    let separated = (!converged || stalled) && mean_ll > -1e-2 || beta.iter().any(|b| b.abs() > 1e2);
    Ok(LogisticFit {
        model: RiskModel::frequentist(Coefficients::scaled(beta[0], beta[1], beta[2]), ts.scaler),
        report: LogisticReport { iterations, gradient_norm, mean_log_likelihood: mean_ll, converged, separated },
    })
}
