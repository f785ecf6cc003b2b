//! Adaptive mixing of the three rule-based selectors by relative success.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BaseStrategy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveParams {
    /// Reaction factor of the exponential update.
    pub gamma: f64,
    /// Lower bound for every weight.
    pub floor: f64,
    pub initial: f64,
}

impl Default for AdaptiveParams {
    fn default() -> Self {
        Self {
            gamma: 0.01,
            floor: 0.01,
            initial: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveWeights {
    pub weights: [f64; 3],
    pub params: AdaptiveParams,
}

impl AdaptiveWeights {
    pub fn new(params: AdaptiveParams) -> Self {
        Self {
            weights: [params.initial.max(params.floor); 3],
            params,
        }
    }

    pub fn probabilities(&self) -> [f64; 3] {
        let total: f64 = self.weights.iter().sum();
        self.weights.map(|w| w / total)
    }
}

/// Samples a base strategy with probability `w_i / Σ w`.
pub fn adaptive_select(state: &mut AdaptiveWeights, rng: &mut ChaCha8Rng) -> BaseStrategy {
    let total: f64 = state.weights.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (i, &w) in state.weights.iter().enumerate() {
        if x < w {
            return BaseStrategy::ALL[i];
        }
        x -= w;
    }
    BaseStrategy::ALL[2]
}

/// `w ← (1 − γ)·w + γ·max(improvement, 0)` for the chosen strategy, floored.
pub fn adaptive_update(state: &mut AdaptiveWeights, chosen: BaseStrategy, improvement: f64) {
    let AdaptiveParams { gamma, floor, .. } = state.params;
    let w = &mut state.weights[chosen.index()];
    *w = ((1.0 - gamma) * *w + gamma * improvement.max(0.0)).max(floor);
}
