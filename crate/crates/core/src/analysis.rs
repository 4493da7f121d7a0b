//! Stability and conservation analysis of the free dynamics.
//!
//! With `beta = 0` and no clamping the dynamics is affine in `s`, so its
//! Jacobian over the free coordinates is constant: entry `(j, i)` is `W[i][j]`
//! off the diagonal and `W[j][j] - sum_i W[j][i]` on it. A free equilibrium is
//! locally asymptotically stable when every Gershgorin disc of that Jacobian
//! lies in the open left half-plane, which for this system reads
//!
//! ```text
//! sum_i W[j][i] > 0   and   sum_{i free} |W[i][j]| < |sum_i W[j][i]|
//! ```
//!
//! for every free neuron `j`. The conditions are sufficient only.

use ndarray::Array2;
use rand::Rng;

use crate::dynamics::{initial_state, settle, vector_field, StateVector};
use crate::error::{DeepError, Result};
use crate::hyperparams::Hyperparams;
use crate::network::Network;

/// Distance (max-norm) within which a perturbed state counts as returned.
pub const RETURN_TOLERANCE: f64 = 1e-6;
/// Update size below which the probe considers the dynamics settled.
pub const SETTLE_TOLERANCE: f64 = 1e-13;
pub const SETTLE_MAX_STEPS: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub struct NeuronCertificate {
    pub neuron: usize,
    /// `sum_i W[j][i]`, the leak coefficient.
    pub outgoing_sum: f64,
    /// `sum_{i free} |W[i][j]|`, the Gershgorin radius.
    pub incoming_abs_sum: f64,
    pub condition_met: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub neurons: Vec<NeuronCertificate>,
    pub overall_certified: bool,
}

/// `sum_j V_j(s)` of the unnudged field. Zero for bias-free networks
/// without inputs; otherwise equal to the sum of the biases.
pub fn conservation_residual(net: &Network, s: &StateVector) -> Result<f64> {
    Ok(vector_field(net, s, &[], 0.0)?.sum())
}

/// Jacobian of the unclamped free dynamics over the non-input coordinates.
pub fn free_jacobian(net: &Network) -> Array2<f64> {
    let p = net.n_input();
    let m = net.n_total() - p;
    let w = net.weights();
    Array2::from_shape_fn((m, m), |(a, b)| {
        let (j, i) = (a + p, b + p);
        if a == b {
            w[[j, j]] - net.outgoing_sum(j)
        } else {
            w[[i, j]]
        }
    })
}

pub fn stability_certificate(net: &Network) -> StabilityReport {
    let neurons: Vec<NeuronCertificate> = net
        .free_indices()
        .map(|j| {
            let outgoing_sum = net.outgoing_sum(j);
            let incoming_abs_sum: f64 = net
                .free_indices()
                .filter(|&i| i != j)
                .map(|i| net.weight(i, j).abs())
                .sum();
            NeuronCertificate {
                neuron: j,
                outgoing_sum,
                incoming_abs_sum,
                condition_met: outgoing_sum > 0.0 && incoming_abs_sum < outgoing_sum.abs(),
            }
        })
        .collect();
    let overall_certified = neurons.iter().all(|c| c.condition_met);
    StabilityReport {
        neurons,
        overall_certified,
    }
}

/// Row-wise Gershgorin test: every diagonal entry negative and strictly
/// larger in magnitude than the off-diagonal absolute row sum.
pub fn gershgorin_check(jac: &Array2<f64>) -> Result<bool> {
    let (rows, cols) = jac.dim();
    if rows != cols {
        return Err(DeepError::Dimension {
            what: "Gershgorin check needs a square matrix",
            expected: rows,
            got: cols,
        });
    }
    Ok((0..rows).all(|r| {
        let d = jac[[r, r]];
        let radius: f64 = (0..cols)
            .filter(|&c| c != r)
            .map(|c| jac[[r, c]].abs())
            .sum();
        d < 0.0 && radius < d.abs()
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub trials: usize,
    pub returned: usize,
    pub fraction: f64,
    /// The settled equilibrium the perturbations are measured against.
    pub equilibrium: StateVector,
    /// Set when the equilibrium touches the clamp boundary (or lies within
    /// `noise` of it), where the linearized argument does not apply.
    pub boundary_warning: bool,
    /// False when the unperturbed free phase did not settle.
    pub equilibrium_settled: bool,
}

/// Relaxes to the free equilibrium for `x`, then perturbs its free
/// coordinates `n_trials` times by uniform noise in `[-noise, noise]` and
/// counts how many perturbed states relax back to within
/// [`RETURN_TOLERANCE`].
pub fn empirical_stability_probe<R: Rng + ?Sized>(
    net: &Network,
    x: &[f64],
    hp: &Hyperparams,
    n_trials: usize,
    noise: f64,
    rng: &mut R,
) -> Result<ProbeResult> {
    if n_trials == 0 {
        return Err(DeepError::UndefinedRatio("probe fraction with zero trials"));
    }
    let start = initial_state(net, x, hp)?;
    let (eq, settled) = settle(
        net,
        &start,
        x,
        hp.step_size,
        SETTLE_TOLERANCE,
        SETTLE_MAX_STEPS,
    )?;
    let boundary_warning = net
        .free_indices()
        .any(|j| eq[j] <= noise || eq[j] >= 1.0 - noise);

    let mut returned = 0;
    for _ in 0..n_trials {
        let mut s = eq.clone();
        for j in net.free_indices() {
            let v = &mut s.as_mut_array()[j];
            *v = (*v + rng.random_range(-noise..=noise)).clamp(0.0, 1.0);
        }
        let (end, _) = settle(net, &s, x, hp.step_size, SETTLE_TOLERANCE, SETTLE_MAX_STEPS)?;
        if end.max_abs_diff(&eq) <= RETURN_TOLERANCE {
            returned += 1;
        }
    }
    Ok(ProbeResult {
        trials: n_trials,
        returned,
        fraction: returned as f64 / n_trials as f64,
        equilibrium: eq,
        boundary_warning,
        equilibrium_settled: settled.is_some(),
    })
}

/// Random network that satisfies the stability certificate with the given
/// margin and whose free equilibrium for input `x` is an interior point.
///
/// Incoming weights are drawn from `[-weight_scale, weight_scale]`. Each free
/// neuron then gets leak edges into the input neurons sized so that its
/// outgoing sum exceeds its Gershgorin radius by `margin` plus a uniform
/// slack in `[0, 0.5]`. Biases place the equilibrium at a random point of
/// `[0.2, 0.8]^free`. Requires at least one input neuron.
pub fn random_certified_network<R: Rng + ?Sized>(
    n_total: usize,
    n_input: usize,
    n_output: usize,
    weight_scale: f64,
    margin: f64,
    x: &[f64],
    rng: &mut R,
) -> Result<Network> {
    if n_input == 0 {
        return Err(DeepError::Construction(
            "certified networks need an input neuron to carry leak edges".into(),
        ));
    }
    if x.len() != n_input {
        return Err(DeepError::Dimension {
            what: "input pattern vs input neurons",
            expected: n_input,
            got: x.len(),
        });
    }
    let mut net = Network::unconnected(n_total, n_input, n_output)?;
    for j in net.free_indices() {
        for i in 0..n_total {
            if i != j {
                net.set_weight(i, j, rng.random_range(-weight_scale..=weight_scale))?;
            }
        }
    }
    for j in net.free_indices() {
        let radius: f64 = net
            .free_indices()
            .filter(|&i| i != j)
            .map(|i| net.weight(i, j).abs())
            .sum();
        let free_out: f64 = net.free_indices().map(|i| net.weight(j, i)).sum();
        let wanted = radius + margin + rng.random_range(0.0..=0.5);
        let per_input = (wanted - free_out) / n_input as f64;
        for i in 0..n_input {
            net.set_weight(j, i, per_input)?;
        }
    }
    let mut target = vec![0.0; n_total];
    target[..n_input].copy_from_slice(x);
    for t in target.iter_mut().skip(n_input) {
        *t = rng.random_range(0.2..=0.8);
    }
    for j in net.free_indices() {
        let drive: f64 = (0..n_total).map(|i| net.weight(i, j) * target[i]).sum();
        net.set_bias(j, target[j] * net.outgoing_sum(j) - drive)?;
    }
    Ok(net)
}
