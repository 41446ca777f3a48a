//! Per-pattern mine risk: logistic models over (progress, distance).

mod bayes;
mod logistic;
mod priors;

pub use bayes::{fit_bayesian, sample_posterior, PosteriorSamples, SamplerConfig};
pub use logistic::{
    fit_logistic, log_likelihood, log_likelihood_gradient, LogisticFit, LogisticReport, MAX_NEWTON_ITERATIONS,
};
pub use priors::{derive_priors, logit, ExpertEstimates, PairSolution, PriorDerivation, PriorSpec, TruncatedNormal};

use crate::patterns::PatternCoordinates;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RiskError {
    #[error("training set needs both mine and mine-free samples")]
    SingleClass,
    #[error("sample {0} has a non-positive or non-finite weight")]
    InvalidWeight(usize),
    #[error("expert estimates must be positive and strictly increasing from 90% to 50% risk")]
    NonMonotoneEstimates,
    #[error("invalid sampler configuration: {0}")]
    InvalidSampler(String),
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error("chain {0} rejected every proposal")]
    ChainStuck(usize),
    #[error("no clusters with a fitted pattern in the training regions")]
    NoClusters,
}

/// Which feature space a coefficient vector lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSpace {
    Scaled,
    Unscaled,
}

/// Intercept and slopes for progress (`beta1`) and distance (`beta2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub space: FeatureSpace,
}

impl Coefficients {
    pub fn scaled(beta0: f64, beta1: f64, beta2: f64) -> Self {
        Coefficients { beta0, beta1, beta2, space: FeatureSpace::Scaled }
    }

    pub fn unscaled(beta0: f64, beta1: f64, beta2: f64) -> Self {
        Coefficients { beta0, beta1, beta2, space: FeatureSpace::Unscaled }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.beta0, self.beta1, self.beta2]
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|b| b.is_finite())
    }

    /// Express scaled-space coefficients in meters.
    pub fn to_unscaled(&self, scaler: &Scaler) -> Coefficients {
        match self.space {
            FeatureSpace::Unscaled => *self,
            FeatureSpace::Scaled => {
                let b1 = self.beta1 / scaler.std[0];
                let b2 = self.beta2 / scaler.std[1];
                Coefficients::unscaled(self.beta0 - b1 * scaler.mean[0] - b2 * scaler.mean[1], b1, b2)
            }
        }
    }

    pub fn linear_predictor(&self, gamma: f64, delta: f64) -> f64 {
        self.beta0 + self.beta1 * gamma + self.beta2 * delta
    }
}

/// Standard scaler for the two features (population standard deviation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: [f64; 2],
    pub std: [f64; 2],
}

impl Scaler {
    pub fn identity() -> Self {
        Scaler { mean: [0.0; 2], std: [1.0; 2] }
    }

    pub fn fit(samples: &[Sample]) -> Self {
        if samples.is_empty() {
            return Scaler::identity();
        }
        let n = samples.len() as f64;
        let feats = |s: &Sample| [s.gamma, s.delta];
        let mut mean = [0.0; 2];
        for s in samples {
            let f = feats(s);
            mean[0] += f[0] / n;
            mean[1] += f[1] / n;
        }
        let mut var = [0.0; 2];
        for s in samples {
            let f = feats(s);
            var[0] += (f[0] - mean[0]).powi(2) / n;
            var[1] += (f[1] - mean[1]).powi(2) / n;
        }
        // Constant features keep unit scale.
        let std = var.map(|v| if v > 0.0 { v.sqrt() } else { 1.0 });
        Scaler { mean, std }
    }

    pub fn apply(&self, gamma: f64, delta: f64) -> [f64; 2] {
        [(gamma - self.mean[0]) / self.std[0], (delta - self.mean[1]) / self.std[1]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub gamma: f64,
    pub delta: f64,
    pub label: bool,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub samples: Vec<Sample>,
    pub scaler: Scaler,
}

impl TrainingSet {
    pub fn new(samples: Vec<Sample>) -> Result<Self, RiskError> {
        if let Some(i) = samples.iter().position(|s| !(s.weight.is_finite() && s.weight > 0.0)) {
            return Err(RiskError::InvalidWeight(i));
        }
        let scaler = Scaler::fit(&samples);
        Ok(TrainingSet { samples, scaler })
    }

    pub fn empty() -> Self {
        TrainingSet { samples: Vec::new(), scaler: Scaler::identity() }
    }

    pub fn positive_weight(&self) -> f64 {
        self.samples.iter().filter(|s| s.label).map(|s| s.weight).sum()
    }

    pub fn has_both_labels(&self) -> bool {
        self.samples.iter().any(|s| s.label) && self.samples.iter().any(|s| !s.label)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// A trained per-pattern risk model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RiskModel {
    Frequentist {
        coefficients: Coefficients,
        scaler: Scaler,
    },
    /// Posterior draws are always in meters; the scaler is kept for reference only.
    Bayesian {
        posterior: PosteriorSamples,
        scaler: Scaler,
    },
}

impl RiskModel {
    pub fn frequentist(coefficients: Coefficients, scaler: Scaler) -> Self {
        RiskModel::Frequentist { coefficients, scaler }
    }

    /// Mine probability at the given pattern coordinates. The Bayesian model
    /// returns the posterior predictive mean.
    pub fn predict(&self, pc: PatternCoordinates) -> f64 {
        match self {
            RiskModel::Frequentist { coefficients, scaler } => {
                let (g, d) = match coefficients.space {
                    FeatureSpace::Scaled => {
                        let f = scaler.apply(pc.gamma, pc.delta);
                        (f[0], f[1])
                    }
                    FeatureSpace::Unscaled => (pc.gamma, pc.delta),
                };
                sigmoid(coefficients.linear_predictor(g, d))
            }
            RiskModel::Bayesian { posterior, .. } => bayes::predictive_mean(&posterior.draws, pc.gamma, pc.delta),
        }
    }

    pub fn is_bayesian(&self) -> bool {
        matches!(self, RiskModel::Bayesian { .. })
    }

    /// Point summary of the coefficients in meters (posterior mean for Bayesian models).
    pub fn unscaled_summary(&self) -> Coefficients {
        match self {
            RiskModel::Frequentist { coefficients, scaler } => coefficients.to_unscaled(scaler),
            RiskModel::Bayesian { posterior, .. } => posterior.mean(),
        }
    }
}

/// Total risk from independent per-cluster risks: `1 - prod(1 - p_i)`.
pub fn combine(per_cluster: &[f64]) -> f64 {
    1.0 - per_cluster.iter().map(|p| 1.0 - p.clamp(0.0, 1.0)).product::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn combine_examples() {
        assert_eq!(combine(&[]), 0.0);
        assert!((combine(&[0.3]) - 0.3).abs() < 1e-15);
        assert_eq!(combine(&[0.5, 0.5]), 0.75);
        assert!((combine(&[0.2, 0.3, 0.4]) - 0.664).abs() < 1e-12);
    }

    #[test]
    fn predict_examples() {
        let pc = PatternCoordinates { gamma: 120.0, delta: 33.0 };
        let zero =
            RiskModel::frequentist(Coefficients::scaled(0.0, 0.0, 0.0), Scaler { mean: [5.0, 5.0], std: [2.0, 3.0] });
        assert_eq!(zero.predict(pc), 0.5);
        let m = RiskModel::frequentist(Coefficients::unscaled(2.7465, -0.0054931, -0.010986), Scaler::identity());
        let p = m.predict(PatternCoordinates { gamma: 0.0, delta: 0.0 });
        assert!((p - 1.0 / (1.0 + (-2.7465f64).exp())).abs() < 1e-15);
        assert!((p - 0.9397).abs() < 5e-5);
    }

    #[test]
    fn scaled_and_unscaled_agree() {
        let scaler = Scaler { mean: [300.0, 90.0], std: [150.0, 40.0] };
        let c = Coefficients::scaled(-1.5, -0.8, -1.2);
        let a = RiskModel::frequentist(c, scaler);
        let b = RiskModel::frequentist(c.to_unscaled(&scaler), Scaler::identity());
        for (g, d) in [(0.0, 0.0), (100.0, 20.0), (700.0, 300.0)] {
            let pc = PatternCoordinates { gamma: g, delta: d };
            assert!((a.predict(pc) - b.predict(pc)).abs() < 1e-12);
        }
    }

    #[test]
    fn scaler_matches_population_moments() {
        let samples: Vec<Sample> = [(0.0, 1.0), (2.0, 1.0), (4.0, 1.0)]
            .iter()
            .map(|&(g, d)| Sample { gamma: g, delta: d, label: false, weight: 1.0 })
            .collect();
        let s = Scaler::fit(&samples);
        assert_eq!(s.mean, [2.0, 1.0]);
        assert!((s.std[0] - (8.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(s.std[1], 1.0);
    }

    #[test]
    fn training_set_rejects_bad_weights() {
        let s = Sample { gamma: 0.0, delta: 0.0, label: true, weight: 0.0 };
        assert_eq!(TrainingSet::new(vec![s]).unwrap_err(), RiskError::InvalidWeight(0));
    }

    proptest! {
        #[test]
        fn combine_properties(ps in prop::collection::vec(0.0f64..=1.0, 0..12), i in 0usize..12, bump in 0.0f64..1.0) {
            let c = combine(&ps);
            prop_assert!((0.0..=1.0).contains(&c));
            if let Some(max) = ps.iter().copied().reduce(f64::max) {
                prop_assert!(c >= max - 1e-15);
            }
            let mut rev = ps.clone();
            rev.reverse();
            prop_assert!((combine(&rev) - c).abs() < 1e-12);
            if !ps.is_empty() {
                let k = i % ps.len();
                let mut up = ps.clone();
                up[k] = (up[k] + bump).min(1.0);
                prop_assert!(combine(&up) >= c - 1e-15);
            }
        }

        #[test]
        fn predict_is_monotone_for_negative_slopes(b0 in -3.0f64..3.0, b1 in -0.05f64..-1e-4, b2 in -0.05f64..-1e-4,
                                                   g in 0.0f64..800.0, d in 0.0f64..400.0, step in 0.1f64..50.0) {
            let m = RiskModel::frequentist(Coefficients::unscaled(b0, b1, b2), Scaler::identity());
            let base = m.predict(PatternCoordinates { gamma: g, delta: d });
            let further = PatternCoordinates { gamma: g + step, delta: d };
            let wider = PatternCoordinates { gamma: g, delta: d + step };
            prop_assert!(m.predict(further) <= base);
            prop_assert!(m.predict(wider) <= base);
        }
    }
}
