//! Bi-level Thompson sampling over (strategy, neighborhood size) arms with
//! Gaussian rewards and Normal-Gamma posteriors.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use super::BaseStrategy;

pub const NEIGHBORHOOD_SIZES: [usize; 5] = [2, 4, 8, 16, 32];

/// Normal-Gamma prior `NG(mu0, kappa0, alpha0, beta0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BanditParams {
    pub mu0: f64,
    pub kappa0: f64,
    pub alpha0: f64,
    pub beta0: f64,
}

impl Default for BanditParams {
    fn default() -> Self {
        Self {
            mu0: 0.0,
            kappa0: 1.0,
            alpha0: 1.0,
            beta0: 1.0,
        }
    }
}

/// Sufficient statistics of one arm (Welford running mean and M2).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ArmStats {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl ArmStats {
    pub fn observe(&mut self, reward: f64) {
        self.count += 1;
        let delta = reward - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (reward - self.mean);
    }

    /// Posterior parameters `(mu, kappa, alpha, beta)`.
    pub fn posterior(&self, prior: &BanditParams) -> (f64, f64, f64, f64) {
        let n = self.count as f64;
        let kappa = prior.kappa0 + n;
        let mu = (prior.kappa0 * prior.mu0 + n * self.mean) / kappa;
        let alpha = prior.alpha0 + n / 2.0;
        let shift = self.mean - prior.mu0;
        let beta = prior.beta0 + 0.5 * self.m2 + prior.kappa0 * n * shift * shift / (2.0 * kappa);
        (mu, kappa, alpha, beta)
    }

    /// Draws a plausible mean reward from the posterior.
    pub fn sample_mean(&self, prior: &BanditParams, rng: &mut ChaCha8Rng) -> f64 {
        let (mu, kappa, alpha, beta) = self.posterior(prior);
        let precision = Gamma::new(alpha, 1.0 / beta)
            .expect("alpha, beta > 0")
            .sample(rng)
            .max(f64::MIN_POSITIVE);
        let sd = (1.0 / (kappa * precision)).sqrt();
        Normal::new(mu, sd).map(|d| d.sample(rng)).unwrap_or(mu)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BanditState {
    pub prior: BanditParams,
    pub strategy_arms: [ArmStats; 3],
    pub size_arms: [[ArmStats; 5]; 3],
}

impl BanditState {
    pub fn new(prior: BanditParams) -> Self {
        Self {
            prior,
            strategy_arms: [ArmStats::default(); 3],
            size_arms: [[ArmStats::default(); 5]; 3],
        }
    }

    fn argmax_sample(arms: &[ArmStats], prior: &BanditParams, rng: &mut ChaCha8Rng) -> usize {
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, arm) in arms.iter().enumerate() {
            let s = arm.sample_mean(prior, rng);
            if s > best.0 {
                best = (s, i);
            }
        }
        best.1
    }

    /// Top-level arm only.
    pub fn sample_strategy(&self, rng: &mut ChaCha8Rng) -> BaseStrategy {
        BaseStrategy::ALL[Self::argmax_sample(&self.strategy_arms, &self.prior, rng)]
    }
}

/// Samples a strategy arm, then a size arm within it. Returns the strategy
/// and the index into [`NEIGHBORHOOD_SIZES`].
pub fn bandit_select(state: &mut BanditState, rng: &mut ChaCha8Rng) -> (BaseStrategy, usize) {
    let strategy = state.sample_strategy(rng);
    let size = BanditState::argmax_sample(&state.size_arms[strategy.index()], &state.prior, rng);
    (strategy, size)
}

/// Records `reward` on the strategy arm and, when given, its size arm.
pub fn bandit_update(
    state: &mut BanditState,
    strategy: BaseStrategy,
    size_arm: Option<usize>,
    reward: f64,
) {
    state.strategy_arms[strategy.index()].observe(reward);
    if let Some(i) = size_arm {
        state.size_arms[strategy.index()][i].observe(reward);
    }
}

/// Uni-Bandit's second level: a uniformly random size.
pub fn unibandit_size(rng: &mut ChaCha8Rng) -> usize {
    NEIGHBORHOOD_SIZES[rng.random_range(0..NEIGHBORHOOD_SIZES.len())]
}
