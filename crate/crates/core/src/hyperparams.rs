use serde::{Deserialize, Serialize};

use crate::error::{DeepError, Result};

/// Knobs shared by relaxation, learning and pruning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Nudge strength of the second phase.
    pub beta: f64,
    /// Explicit Euler step.
    pub step_size: f64,
    /// Steps of the free phase.
    pub m0: usize,
    /// Steps of the nudged phase.
    pub m_beta: usize,
    pub learning_rate: f64,
    pub l1_coeff: f64,
    /// Pruning threshold: only parameters with `|w| < lambda_prune` are candidates.
    pub lambda_prune: f64,
    /// Boltzmann temperature of the pruning lottery.
    pub temperature: f64,
    pub init_scale: f64,
    pub seed: u64,
    /// Initial activity of non-input neurons before each free phase.
    pub state_init: f64,
    /// Early-stop tolerance on the max-norm of a relaxation update; 0 disables.
    pub convergence_tol: f64,
}

impl Default for Hyperparams {
    /// Defaults tuned on the logic-gate experiments: a strong nudge, a large
    /// learning rate, a light l1 term shared by plain and pruned runs, and
    /// neurons starting from rest.
    fn default() -> Self {
        Hyperparams {
            beta: 1.0,
            step_size: 0.1,
            m0: 200,
            m_beta: 20,
            learning_rate: 4.0,
            l1_coeff: 3e-5,
            lambda_prune: 5e-4,
            temperature: 0.1,
            init_scale: 0.5,
            seed: 0,
            state_init: 0.0,
            convergence_tol: 0.0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(DeepError::Hyperparam(msg));
        if !self.beta.is_finite() {
            return bad(format!("beta must be finite, got {}", self.beta));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return bad(format!("step_size must be > 0, got {}", self.step_size));
        }
        if self.m0 < 1 {
            return bad("m0 must be >= 1".into());
        }
        if self.m_beta < 1 {
            return bad("m_beta must be >= 1".into());
        }
        // A zero learning rate is accepted: it freezes the network.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate must be >= 0, got {}",
                self.learning_rate
            ));
        }
        if !(self.l1_coeff >= 0.0 && self.l1_coeff.is_finite()) {
            return bad(format!("l1_coeff must be >= 0, got {}", self.l1_coeff));
        }
        if !(self.lambda_prune > 0.0 && self.lambda_prune.is_finite()) {
            return bad(format!(
                "lambda_prune must be > 0, got {}",
                self.lambda_prune
            ));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad(format!("temperature must be > 0, got {}", self.temperature));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return bad(format!("init_scale must be > 0, got {}", self.init_scale));
        }
        if !(0.0..=1.0).contains(&self.state_init) {
            return bad(format!(
                "state_init must lie in [0, 1], got {}",
                self.state_init
            ));
        }
        if self.convergence_tol.is_nan() || self.convergence_tol < 0.0 {
            return bad(format!(
                "convergence_tol must be >= 0, got {}",
                self.convergence_tol
            ));
        }
        Ok(())
    }
}
