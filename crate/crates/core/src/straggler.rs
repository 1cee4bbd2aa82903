//! Monte Carlo latency under the shifted-exponential straggler model.
//!
//! A full task on one server takes `T0 + Exp(lambda)`. Splitting it into `K`
//! subtasks gives each subtask `T0/K + Exp(lambda K)`. `N` workers each run
//! subtasks back to back; the job finishes at the `R_th`-th completion
//! across all workers. Communication and decoding time are not modelled.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use ordered_float::OrderedFloat;
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid straggler model: {0}")]
    InvalidModel(String),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

/// Shifted-exponential subtask time for a task split into `level` pieces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StragglerModel {
    /// Deterministic part of the full task.
    pub t0: f64,
    /// Rate of the exponential part of the full task.
    pub lambda: f64,
    /// Partition level `K`.
    pub level: u64,
}

impl StragglerModel {
    pub fn new(t0: f64, lambda: f64, level: u64) -> Result<Self, SimError> {
        if !(t0.is_finite() && t0 >= 0.0) {
            return Err(SimError::InvalidModel(format!("t0 must be >= 0, got {t0}")));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(SimError::InvalidModel(format!(
                "lambda must be > 0, got {lambda}"
            )));
        }
        if level == 0 {
            return Err(SimError::InvalidModel(
                "partition level must be >= 1".into(),
            ));
        }
        Ok(Self { t0, lambda, level })
    }

    /// Same as [`StragglerModel::new`] but parameterized by the mean `1/lambda`.
    pub fn with_mean_exponential(t0: f64, lambda_inv: f64, level: u64) -> Result<Self, SimError> {
        if !(lambda_inv.is_finite() && lambda_inv > 0.0) {
            return Err(SimError::InvalidModel(format!(
                "1/lambda must be > 0, got {lambda_inv}"
            )));
        }
        Self::new(t0, 1.0 / lambda_inv, level)
    }

    pub fn at_level(self, level: u64) -> Result<Self, SimError> {
        Self::new(self.t0, self.lambda, level)
    }

    /// Lower bound `T0/K` of every subtask time.
    pub fn shift(&self) -> f64 {
        self.t0 / self.level as f64
    }

    /// Rate `lambda K` of the exponential part of a subtask.
    pub fn rate(&self) -> f64 {
        self.lambda * self.level as f64
    }

    /// `T0/K + 1/(lambda K)`.
    pub fn mean_subtask_time(&self) -> f64 {
        self.shift() + 1.0 / self.rate()
    }
}

/// Draws one subtask time by inversion: `T0/K - ln(U)/(lambda K)`, `U` in `(0, 1]`.
pub fn sample_subtask_time<R: Rng + ?Sized>(model: &StragglerModel, rng: &mut R) -> f64 {
    let u = 1.0 - rng.random::<f64>();
    model.shift() - u.ln() / model.rate()
}

/// One job: the instant of the `recovery_threshold`-th subtask completion.
pub fn simulate_once<R: Rng + ?Sized>(
    workers: usize,
    recovery_threshold: usize,
    model: &StragglerModel,
    rng: &mut R,
) -> f64 {
    // Workers are interchangeable, so the heap only tracks each worker's
    // next completion instant.
    let mut next: BinaryHeap<Reverse<OrderedFloat<f64>>> = (0..workers)
        .map(|_| Reverse(OrderedFloat(sample_subtask_time(model, rng))))
        .collect();
    let mut done = 0;
    loop {
        let Reverse(OrderedFloat(t)) = next.pop().expect("at least one worker");
        done += 1;
        if done == recovery_threshold {
            return t;
        }
        next.push(Reverse(OrderedFloat(t + sample_subtask_time(model, rng))));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub workers: usize,
    pub recovery_threshold: usize,
    pub model: StragglerModel,
    pub trials: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.workers == 0 {
            return Err(SimError::InvalidConfig("need at least one worker".into()));
        }
        if self.recovery_threshold == 0 {
            return Err(SimError::InvalidConfig(
                "recovery threshold must be >= 1".into(),
            ));
        }
        if self.trials == 0 {
            return Err(SimError::InvalidConfig("need at least one trial".into()));
        }
        StragglerModel::new(self.model.t0, self.model.lambda, self.model.level)?;
        Ok(())
    }
}

/// RNG for trial `trial` of a run seeded with `seed`: ChaCha8 keyed by the
/// seed, one independent stream per trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Raw latency samples, one per trial, in trial order.
pub fn simulate_trials(cfg: &SimConfig) -> Result<Vec<f64>, SimError> {
    cfg.validate()?;
    Ok((0..cfg.trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(cfg.seed, i);
            simulate_once(cfg.workers, cfg.recovery_threshold, &cfg.model, &mut rng)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencyEstimate {
    pub mean: f64,
    /// Standard error of the mean; 0 for a single trial.
    pub stderr: f64,
    pub trials: usize,
}

impl LatencyEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            stderr,
            trials: n,
        }
    }
}

pub fn estimate_mean_latency(cfg: &SimConfig) -> Result<LatencyEstimate, SimError> {
    Ok(LatencyEstimate::from_samples(&simulate_trials(cfg)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(t0: f64, lambda: f64, k: u64) -> StragglerModel {
        StragglerModel::new(t0, lambda, k).unwrap()
    }

    #[test]
    fn invalid_models() {
        assert!(StragglerModel::new(-1.0, 1.0, 1).is_err());
        assert!(StragglerModel::new(0.0, 0.0, 1).is_err());
        assert!(StragglerModel::new(0.0, 1.0, 0).is_err());
        assert!(StragglerModel::with_mean_exponential(1.0, 0.0, 1).is_err());
        let m = StragglerModel::with_mean_exponential(1.0, 10.0, 4).unwrap();
        assert!((m.rate() - 0.4).abs() < 1e-15);
        assert_eq!(m.shift(), 0.25);
    }

    #[test]
    fn samples_respect_shift() {
        let m = model(3.0, 0.5, 6);
        let mut rng = trial_rng(1, 0);
        for _ in 0..10_000 {
            assert!(sample_subtask_time(&m, &mut rng) >= 0.5);
        }
    }

    #[test]
    fn sample_mean_matches_analytic_mean() {
        let m = model(2.0, 0.25, 4);
        let mut rng = trial_rng(2, 0);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_subtask_time(&m, &mut rng))
            .collect();
        let est = LatencyEstimate::from_samples(&xs);
        let expected = 0.5 + 1.0;
        assert!((est.mean - expected).abs() < 3.0 * est.stderr, "{est:?}");
    }

    #[test]
    fn empirical_cdf_at_one() {
        let m = model(0.0, 1.0, 1);
        let mut rng = trial_rng(3, 0);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| sample_subtask_time(&m, &mut rng) <= 1.0)
            .count();
        let p = 1.0 - (-1.0f64).exp();
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - p).abs() < 3.0 * sigma);
    }

    #[test]
    fn single_trial_has_zero_stderr() {
        let cfg = SimConfig {
            workers: 3,
            recovery_threshold: 4,
            model: model(1.0, 1.0, 2),
            trials: 1,
            seed: 9,
        };
        let est = estimate_mean_latency(&cfg).unwrap();
        assert_eq!(est.stderr, 0.0);
        assert_eq!(est.mean, simulate_trials(&cfg).unwrap()[0]);
    }

    #[test]
    fn trial_streams_are_prefix_stable() {
        let mut cfg = SimConfig {
            workers: 7,
            recovery_threshold: 20,
            model: model(1.0, 0.1, 5),
            trials: 50,
            seed: 1234,
        };
        let short = simulate_trials(&cfg).unwrap();
        cfg.trials = 100;
        let long = simulate_trials(&cfg).unwrap();
        assert_eq!(&long[..50], &short[..]);
        assert_eq!(
            estimate_mean_latency(&cfg).unwrap(),
            estimate_mean_latency(&cfg).unwrap()
        );
    }

    #[test]
    fn invalid_configs() {
        let base = SimConfig {
            workers: 1,
            recovery_threshold: 1,
            model: model(0.0, 1.0, 1),
            trials: 1,
            seed: 0,
        };
        for cfg in [
            SimConfig { workers: 0, ..base },
            SimConfig {
                recovery_threshold: 0,
                ..base
            },
            SimConfig { trials: 0, ..base },
        ] {
            assert!(matches!(
                estimate_mean_latency(&cfg),
                Err(SimError::InvalidConfig(_))
            ));
        }
    }
}
