//! Truncated-normal coefficient priors derived from expert distance estimates.
//!
//! An expert gives, for risk levels 90%, 75% and 50%, the largest progress
//! (at zero distance) and the largest distance (at zero progress) with that
//! risk. Each pair of levels pins down one line `logit(p) = b0 + b1 * x`, so
//! each family of three estimates yields three (intercept, slope) solutions.

use super::RiskError;
use serde::{Deserialize, Serialize};

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Risk levels of the three estimates, in the order 90%, 75%, 50%.
pub const RISK_LEVELS: [f64; 3] = [0.9, 0.75, 0.5];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpertEstimates {
    pub gamma90: f64,
    pub gamma75: f64,
    pub gamma50: f64,
    pub delta90: f64,
    pub delta75: f64,
    pub delta50: f64,
}

impl Default for ExpertEstimates {
    /// The estimates used for the reference Bayesian deminer.
    fn default() -> Self {
        ExpertEstimates {
            gamma90: 100.0,
            gamma75: 200.0,
            gamma50: 500.0,
            delta90: 50.0,
            delta75: 100.0,
            delta50: 250.0,
        }
    }
}

impl ExpertEstimates {
    fn validate(&self) -> Result<(), RiskError> {
        let ok = |a: f64, b: f64, c: f64| a.is_finite() && c.is_finite() && a > 0.0 && a < b && b < c;
        if ok(self.gamma90, self.gamma75, self.gamma50) && ok(self.delta90, self.delta75, self.delta50) {
            Ok(())
        } else {
            Err(RiskError::NonMonotoneEstimates)
        }
    }
}

/// Normal distribution restricted to `[lower, upper]`; `None` means unbounded.
/// An upper bound of zero is exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedNormal {
    pub mu: f64,
    pub sigma: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl TruncatedNormal {
    pub fn contains(&self, x: f64) -> bool {
        x.is_finite() && self.lower.is_none_or(|l| x >= l) && self.upper.is_none_or(|u| x < u)
    }

    /// Log density up to the truncation normalizer.
    pub fn log_density(&self, x: f64) -> f64 {
        if self.contains(x) {
            let z = (x - self.mu) / self.sigma;
            -0.5 * z * z
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn validate(&self) -> Result<(), RiskError> {
        if !(self.sigma.is_finite() && self.sigma > 0.0 && self.mu.is_finite()) {
            return Err(RiskError::InvalidPrior(format!("mu={}, sigma={}", self.mu, self.sigma)));
        }
        if let (Some(l), Some(u)) = (self.lower, self.upper) {
            if l >= u {
                return Err(RiskError::InvalidPrior(format!("empty support [{l}, {u})")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub beta0: TruncatedNormal,
    pub beta1: TruncatedNormal,
    pub beta2: TruncatedNormal,
}

impl PriorSpec {
    pub fn components(&self) -> [TruncatedNormal; 3] {
        [self.beta0, self.beta1, self.beta2]
    }

    pub fn validate(&self) -> Result<(), RiskError> {
        self.components().iter().try_for_each(|c| c.validate())
    }

    pub fn log_density(&self, beta: [f64; 3]) -> f64 {
        self.components().iter().zip(beta).map(|(c, b)| c.log_density(b)).sum()
    }
}

/// One solution of a two-level linear system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSolution {
    pub levels: (f64, f64),
    pub intercept: f64,
    pub slope: f64,
}

/// Intermediate solutions, kept for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorDerivation {
    pub gamma_solutions: Vec<PairSolution>,
    pub delta_solutions: Vec<PairSolution>,
    pub priors: PriorSpec,
}

fn pair_solutions(estimates: [f64; 3]) -> Vec<PairSolution> {
    let l = RISK_LEVELS.map(logit);
    [(0, 1), (0, 2), (1, 2)]
        .iter()
        .map(|&(i, j)| {
            let slope = (l[j] - l[i]) / (estimates[j] - estimates[i]);
            PairSolution { levels: (RISK_LEVELS[i], RISK_LEVELS[j]), intercept: l[i] - slope * estimates[i], slope }
        })
        .collect()
}

fn population_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt()
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// The solution of a family whose intercept is the family median.
fn median_solution(sols: &[PairSolution]) -> PairSolution {
    let m = median(&sols.iter().map(|s| s.intercept).collect::<Vec<_>>());
    *sols.iter().min_by(|a, b| (a.intercept - m).abs().total_cmp(&(b.intercept - m).abs())).unwrap()
}

pub fn derive_priors(est: &ExpertEstimates) -> Result<PriorDerivation, RiskError> {
    est.validate()?;
    let gamma_solutions = pair_solutions([est.gamma90, est.gamma75, est.gamma50]);
    let delta_solutions = pair_solutions([est.delta90, est.delta75, est.delta50]);

    let intercepts: Vec<f64> = gamma_solutions.iter().chain(&delta_solutions).map(|s| s.intercept).collect();
    let gamma_slopes: Vec<f64> = gamma_solutions.iter().map(|s| s.slope).collect();
    let delta_slopes: Vec<f64> = delta_solutions.iter().map(|s| s.slope).collect();

    let priors = PriorSpec {
        beta0: TruncatedNormal {
            mu: median(&intercepts),
            sigma: population_std(&intercepts),
            lower: Some(0.0),
            upper: None,
        },
        beta1: TruncatedNormal {
            mu: median_solution(&gamma_solutions).slope,
            sigma: population_std(&gamma_slopes),
            lower: None,
            upper: Some(0.0),
        },
        beta2: TruncatedNormal {
            mu: median_solution(&delta_solutions).slope,
            sigma: population_std(&delta_slopes),
            lower: None,
            upper: Some(0.0),
        },
    };
    priors.validate()?;
    Ok(PriorDerivation { gamma_solutions, delta_solutions, priors })
}
