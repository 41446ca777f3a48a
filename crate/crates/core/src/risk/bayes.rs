//! Bayesian logistic regression sampled with adaptive random-walk Metropolis.
//!
//! Warmup runs in four windows. After each of the first three the proposal
//! covariance is replaced by the empirical covariance of that window, and a
//! global proposal scale is tuned towards 30% acceptance throughout warmup.
//! The proposal is frozen for the retained draws.

use super::priors::PriorSpec;
use super::{sigmoid, Coefficients, RiskError, RiskModel, TrainingSet};
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub const MIN_RETAINED_DRAWS: usize = 1000;
const TARGET_ACCEPTANCE: f64 = 0.3;
const ACCEPTANCE_WARN_BAND: (f64, f64) = (0.05, 0.95);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub chains: usize,
    /// Retained draws per chain.
    pub draws: usize,
    pub warmup: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { chains: 4, draws: 2000, warmup: 1000, seed: 0 }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), RiskError> {
        if self.chains == 0 || self.draws == 0 {
            return Err(RiskError::InvalidSampler("chains and draws must be positive".into()));
        }
        if self.chains * self.draws < MIN_RETAINED_DRAWS {
            return Err(RiskError::InvalidSampler(format!(
                "{} retained draws requested, at least {MIN_RETAINED_DRAWS} required",
                self.chains * self.draws
            )));
        }
        if self.warmup < 40 {
            return Err(RiskError::InvalidSampler("warmup must be at least 40 iterations".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSamples {
    /// Chain-major: all draws of chain 0, then chain 1, ...
    pub draws: Vec<Coefficients>,
    pub acceptance_rates: Vec<f64>,
    pub chains: usize,
    pub draws_per_chain: usize,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl PosteriorSamples {
    /// A single-draw posterior, i.e. a plug-in estimate.
    pub fn point_mass(c: Coefficients) -> Self {
        PosteriorSamples {
            draws: vec![Coefficients { space: super::FeatureSpace::Unscaled, ..c }],
            acceptance_rates: Vec::new(),
            chains: 1,
            draws_per_chain: 1,
            warnings: Vec::new(),
        }
    }

    pub fn mean(&self) -> Coefficients {
        let n = self.draws.len() as f64;
        let mut m = [0.0; 3];
        for d in &self.draws {
            for (acc, b) in m.iter_mut().zip(d.as_array()) {
                *acc += b / n;
            }
        }
        Coefficients::unscaled(m[0], m[1], m[2])
    }

    pub fn chain(&self, index: usize) -> &[Coefficients] {
        &self.draws[index * self.draws_per_chain..(index + 1) * self.draws_per_chain]
    }
}

/// Unscaled design, labels and weights with the log posterior.
struct Target<'a> {
    rows: Vec<(f64, f64, bool, f64)>,
    priors: &'a PriorSpec,
}

impl Target<'_> {
    fn log_posterior(&self, beta: [f64; 3]) -> f64 {
        let prior = self.priors.log_density(beta);
        if prior == f64::NEG_INFINITY {
            return prior;
        }
        let ll: f64 = self
            .rows
            .iter()
            .map(|&(g, d, y, w)| {
                let z = beta[0] + beta[1] * g + beta[2] * d;
                // log sigmoid(+-z)
                let s = if y { z } else { -z };
                w * if s >= 0.0 { -(-s).exp().ln_1p() } else { s - s.exp().ln_1p() }
            })
            .sum();
        prior + ll
    }
}

#[derive(Default)]
struct Welford {
    n: f64,
    mean: Vector3<f64>,
    m2: Matrix3<f64>,
}

impl Welford {
    fn push(&mut self, x: Vector3<f64>) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean).transpose();
    }

    fn covariance(&self) -> Option<Matrix3<f64>> {
        (self.n >= 10.0).then(|| self.m2 / (self.n - 1.0))
    }
}

struct ChainOutput {
    draws: Vec<Coefficients>,
    acceptance: f64,
}

/// Starting point: the maximum likelihood estimate when it lies inside the
/// prior support, otherwise the prior means pulled inside their bounds.
fn starting_point(ts: &TrainingSet, priors: &PriorSpec) -> [f64; 3] {
    let comps = priors.components();
    let mut start = comps.map(|c| {
        if c.contains(c.mu) {
            c.mu
        } else {
            match (c.lower, c.upper) {
                (Some(l), _) if c.mu < l => l + 0.1 * c.sigma,
                (_, Some(u)) => u - 0.1 * c.sigma,
                _ => c.mu,
            }
        }
    });
    if ts.has_both_labels() {
        if let Ok(fit) = super::fit_logistic(ts) {
            let mle = fit.model.unscaled_summary().as_array();
            if !fit.report.separated && comps.iter().zip(mle).all(|(c, b)| c.contains(b)) {
                start = mle;
            }
        }
    }
    start
}

/// Inverse of the negative log-posterior Hessian at `beta` (Laplace covariance).
fn laplace_covariance(target: &Target<'_>, beta: [f64; 3]) -> Matrix3<f64> {
    let sigmas = target.priors.components().map(|c| c.sigma);
    let mut h = Matrix3::from_diagonal(&Vector3::new(sigmas[0].powi(-2), sigmas[1].powi(-2), sigmas[2].powi(-2)));
    for &(g, d, _, w) in &target.rows {
        let p = sigmoid(beta[0] + beta[1] * g + beta[2] * d);
        let v = Vector3::new(1.0, g, d);
        h += v * v.transpose() * (w * p * (1.0 - p));
    }
    h.try_inverse().unwrap_or_else(|| {
        Matrix3::from_diagonal(&Vector3::new(sigmas[0].powi(2), sigmas[1].powi(2), sigmas[2].powi(2)))
    })
}

fn jittered_start(priors: &PriorSpec, start: [f64; 3], chol: &Matrix3<f64>, rng: &mut ChaCha8Rng) -> [f64; 3] {
    for _ in 0..100 {
        let z = Vector3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
        let step = chol * z;
        let cand = [start[0] + step[0], start[1] + step[1], start[2] + step[2]];
        if priors.log_density(cand) > f64::NEG_INFINITY {
            return cand;
        }
    }
    start
}

fn run_chain(
    target: &Target<'_>,
    cfg: &SamplerConfig,
    chain: usize,
    start: [f64; 3],
    initial: &Matrix3<f64>,
) -> ChainOutput {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(chain as u64);
    let sigmas = target.priors.components().map(|c| c.sigma);

    let mut chol = initial
        .cholesky()
        .map(|c| c.l())
        .unwrap_or_else(|| Matrix3::from_diagonal(&Vector3::new(sigmas[0], sigmas[1], sigmas[2])));
    let mut beta = jittered_start(target.priors, start, &chol, &mut rng);
    let mut lp = target.log_posterior(beta);
    let mut log_scale = (2.38f64 / 3f64.sqrt()).ln();
    let window = cfg.warmup / 4;
    let mut stats = Welford::default();

    let total = cfg.warmup + cfg.draws;
    let mut accepted = 0usize;
    let mut draws = Vec::with_capacity(cfg.draws);
    for it in 0..total {
        let z = Vector3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
        let step = chol * z * log_scale.exp();
        let cand = [beta[0] + step[0], beta[1] + step[1], beta[2] + step[2]];
        let cand_lp = target.log_posterior(cand);
        let log_u: f64 = rng.random::<f64>().ln();
        let accept = cand_lp > f64::NEG_INFINITY && log_u < cand_lp - lp;
        if accept {
            beta = cand;
            lp = cand_lp;
        }

        if it < cfg.warmup {
            let rate = 1.0 / ((it + 1) as f64).powf(0.6);
            log_scale += rate * (if accept { 1.0 } else { 0.0 } - TARGET_ACCEPTANCE);
            stats.push(Vector3::new(beta[0], beta[1], beta[2]));
            if window > 0 && (it + 1) % window == 0 && (it + 1) < 4 * window {
                if let Some(c) = stats.covariance() {
                    // keep a floor so a stuck window cannot collapse the proposal
                    let floor = Matrix3::from_diagonal(&Vector3::new(
                        (1e-6 * sigmas[0]).powi(2),
                        (1e-6 * sigmas[1]).powi(2),
                        (1e-6 * sigmas[2]).powi(2),
                    ));
                    let adapted = c * (2.38f64.powi(2) / 3.0) + floor;
                    if let Some(l) = adapted.cholesky() {
                        chol = l.l();
                        log_scale = 0.0;
                    }
                }
                stats = Welford::default();
            }
        } else {
            if accept {
                accepted += 1;
            }
            draws.push(Coefficients::unscaled(beta[0], beta[1], beta[2]));
        }
    }
    ChainOutput { draws, acceptance: accepted as f64 / cfg.draws as f64 }
}

/// Draw from the posterior over unscaled coefficients.
pub fn sample_posterior(
    ts: &TrainingSet,
    priors: &PriorSpec,
    cfg: &SamplerConfig,
) -> Result<PosteriorSamples, RiskError> {
    cfg.validate()?;
    priors.validate()?;
    let target = Target { rows: ts.samples.iter().map(|s| (s.gamma, s.delta, s.label, s.weight)).collect(), priors };
    let start = starting_point(ts, priors);
    let initial = laplace_covariance(&target, start);

    #[cfg(feature = "parallel")]
    let outputs: Vec<ChainOutput> = {
        use rayon::prelude::*;
        (0..cfg.chains).into_par_iter().map(|c| run_chain(&target, cfg, c, start, &initial)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outputs: Vec<ChainOutput> = (0..cfg.chains).map(|c| run_chain(&target, cfg, c, start, &initial)).collect();

    let mut warnings = Vec::new();
    for (i, o) in outputs.iter().enumerate() {
        if o.acceptance == 0.0 {
            return Err(RiskError::ChainStuck(i));
        }
        if o.acceptance < ACCEPTANCE_WARN_BAND.0 || o.acceptance > ACCEPTANCE_WARN_BAND.1 {
            warnings.push(format!("chain {i}: acceptance rate {:.3} outside [0.05, 0.95]", o.acceptance));
        }
    }
    Ok(PosteriorSamples {
        acceptance_rates: outputs.iter().map(|o| o.acceptance).collect(),
        draws: outputs.into_iter().flat_map(|o| o.draws).collect(),
        chains: cfg.chains,
        draws_per_chain: cfg.draws,
        warnings,
    })
}

pub fn fit_bayesian(ts: &TrainingSet, priors: &PriorSpec, cfg: &SamplerConfig) -> Result<RiskModel, RiskError> {
    let posterior = sample_posterior(ts, priors, cfg)?;
    Ok(RiskModel::Bayesian { posterior, scaler: ts.scaler })
}

/// Posterior predictive mean computed draw by draw.
pub fn predictive_mean(draws: &[Coefficients], gamma: f64, delta: f64) -> f64 {
    draws.iter().map(|c| sigmoid(c.linear_predictor(gamma, delta))).sum::<f64>() / draws.len() as f64
}
