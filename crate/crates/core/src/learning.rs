//! Parameter updates computed from second-phase trajectories.
//!
//! The DEEP rule integrates `dW_ij ~ s_i * ds_j/dt` along the nudged
//! trajectory, approximating the derivative with backward differences:
//!
//! ```text
//! dW_ij = 1/M * sum_{m=1..M} s_i(m) * (s_j(m) - s_j(m-1))
//! ```
//!
//! Biases use the same expression with `s_i` replaced by the constant one.
//! The asymmetric-EP baseline is the single forward-difference term
//! `s_i^0 * (s_j^beta - s_j^0)`.

use ndarray::{Array1, Array2};

use crate::dynamics::{PhaseTrajectory, StateVector};
use crate::error::{DeepError, Result};
use crate::hyperparams::Hyperparams;
use crate::network::Network;

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterUpdate {
    pub d_weights: Array2<f64>,
    pub d_bias: Array1<f64>,
}

impl ParameterUpdate {
    pub fn zeros(n: usize) -> Self {
        ParameterUpdate {
            d_weights: Array2::zeros((n, n)),
            d_bias: Array1::zeros(n),
        }
    }
}

/// Which state multiplies each increment `s_j(m) - s_j(m-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DifferenceScheme {
    /// Presynaptic activity taken at the end of the increment, `s_i(m)`.
    Backward,
    /// Presynaptic activity taken at the start of the increment, `s_i(m-1)`.
    Forward,
}

/// Learning rule selector used by the trainer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    Deep,
    Asym,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::Deep => "deep",
            Rule::Asym => "asym",
        }
    }
}

impl std::str::FromStr for Rule {
    type Err = DeepError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "deep" => Ok(Rule::Deep),
            "asym" => Ok(Rule::Asym),
            _ => Err(DeepError::UnknownRule(s.to_string())),
        }
    }
}

impl std::fmt::Display for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// DEEP update from the second-phase trajectory, whose first state is `s0`.
pub fn deep_update(second_phase: &PhaseTrajectory, net: &Network) -> Result<ParameterUpdate> {
    trajectory_update(second_phase, net, DifferenceScheme::Backward)
}

/// Trajectory-averaged update with the chosen difference scheme.
pub fn trajectory_update(
    traj: &PhaseTrajectory,
    net: &Network,
    scheme: DifferenceScheme,
) -> Result<ParameterUpdate> {
    let states = &traj.states;
    if states.len() < 2 {
        return Err(DeepError::InsufficientData {
            needed: 2,
            got: states.len(),
        });
    }
    let n = net.n_total();
    for st in states {
        if st.len() != n {
            return Err(DeepError::Dimension {
                what: "trajectory state vs neurons",
                expected: n,
                got: st.len(),
            });
        }
    }
    let steps = states.len() - 1;
    let mut upd = ParameterUpdate::zeros(n);
    for m in 1..=steps {
        let prev = &states[m - 1];
        let cur = &states[m];
        let pre = match scheme {
            DifferenceScheme::Backward => cur,
            DifferenceScheme::Forward => prev,
        };
        for j in net.free_indices() {
            let delta = cur[j] - prev[j];
            if delta == 0.0 {
                continue;
            }
            for i in 0..n {
                if net.mask[[i, j]] {
                    upd.d_weights[[i, j]] += pre[i] * delta;
                }
            }
            if net.bias_mask[j] {
                upd.d_bias[j] += delta;
            }
        }
    }
    let scale = 1.0 / steps as f64;
    upd.d_weights.mapv_inplace(|v| v * scale);
    upd.d_bias.mapv_inplace(|v| v * scale);
    Ok(upd)
}

/// Asymmetric-EP update `s_i^0 * (s_j^beta - s_j^0)`.
pub fn asym_ep_update(
    s0: &StateVector,
    s_beta: &StateVector,
    net: &Network,
) -> Result<ParameterUpdate> {
    let n = net.n_total();
    for got in [s0.len(), s_beta.len()] {
        if got != n {
            return Err(DeepError::Dimension {
                what: "state vector vs neurons",
                expected: n,
                got,
            });
        }
    }
    let mut upd = ParameterUpdate::zeros(n);
    for j in net.free_indices() {
        let delta = s_beta[j] - s0[j];
        for i in 0..n {
            if net.mask[[i, j]] {
                upd.d_weights[[i, j]] = s0[i] * delta;
            }
        }
        if net.bias_mask[j] {
            upd.d_bias[j] = delta;
        }
    }
    Ok(upd)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Applies `w += lr * dw - lr * l1 * sign(w)` to every present parameter.
/// Absent parameters stay exactly zero.
pub fn apply_update(net: &mut Network, upd: &ParameterUpdate, hp: &Hyperparams) -> Result<()> {
    let n = net.n_total();
    if upd.d_weights.dim() != (n, n) || upd.d_bias.len() != n {
        return Err(DeepError::Dimension {
            what: "update vs network size",
            expected: n,
            got: upd.d_bias.len(),
        });
    }
    let lr = hp.learning_rate;
    let shrink = lr * hp.l1_coeff;
    for ((w, present), d) in net
        .weights
        .iter_mut()
        .zip(net.mask.iter())
        .zip(upd.d_weights.iter())
    {
        if *present {
            *w += lr * d - shrink * sign(*w);
        }
    }
    for ((b, present), d) in net
        .bias
        .iter_mut()
        .zip(net.bias_mask.iter())
        .zip(upd.d_bias.iter())
    {
        if *present {
            *b += lr * d - shrink * sign(*b);
        }
    }
    Ok(())
}
