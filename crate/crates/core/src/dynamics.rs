//! Neuronal dynamics on the directed graph and its clamped relaxation.
//!
//! The vector field for neuron `j` is
//!
//! ```text
//! V_j(s) = sum_i W[i][j] s_i + b_j - s_j sum_i W[j][i] - beta * dC/ds_j * [j is output]
//! ```
//!
//! and relaxation integrates it with explicit Euler steps, clamping every
//! non-input coordinate back into `[0, 1]` after each step.

use std::ops::Deref;

use ndarray::{Array1, Array2};

use crate::error::{DeepError, Result};
use crate::hyperparams::Hyperparams;
use crate::network::Network;

/// Instantaneous firing rates of all neurons.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(Array1<f64>);

impl StateVector {
    pub fn new(values: Array1<f64>) -> Self {
        StateVector(values)
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        StateVector(Array1::from(values))
    }

    pub fn filled(n: usize, value: f64) -> Self {
        StateVector(Array1::from_elem(n, value))
    }

    pub fn into_inner(self) -> Array1<f64> {
        self.0
    }

    pub fn as_mut_array(&mut self) -> &mut Array1<f64> {
        &mut self.0
    }

    /// Largest absolute coordinate difference.
    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Deref for StateVector {
    type Target = Array1<f64>;

    fn deref(&self) -> &Array1<f64> {
        &self.0
    }
}

/// States recorded during one relaxation phase, initial state included.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrajectory {
    pub states: Vec<StateVector>,
    pub phase_beta: f64,
    /// Step at which the early-stop tolerance was met. Later entries of
    /// `states` repeat the state reached there.
    pub converged_at: Option<usize>,
}

impl PhaseTrajectory {
    pub fn steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn first(&self) -> &StateVector {
        &self.states[0]
    }

    pub fn last(&self) -> &StateVector {
        self.states
            .last()
            .expect("trajectory always holds the initial state")
    }
}

#[inline]
pub fn hard_sigmoid(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// `C = 1/2 * sum_k (y_hat_k - y_k)^2`.
pub fn mse_cost(y_hat: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths("prediction and target", y_hat.len(), y.len())?;
    if y.is_empty() {
        return Err(DeepError::Dimension {
            what: "cost needs at least one output",
            expected: 1,
            got: 0,
        });
    }
    Ok(0.5
        * y_hat
            .iter()
            .zip(y)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>())
}

/// Gradient of [`mse_cost`] with respect to the prediction: `y_hat - y`.
pub fn cost_gradient(y_hat: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    check_lengths("prediction and target", y_hat.len(), y.len())?;
    Ok(y_hat.iter().zip(y).map(|(a, b)| a - b).collect())
}

fn check_lengths(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(DeepError::Dimension {
            what,
            expected,
            got,
        });
    }
    Ok(())
}

/// Per-neuron target, `Some` only for output neurons.
fn neuron_targets(net: &Network, y: &[f64], beta: f64) -> Result<Vec<Option<f64>>> {
    let mut targets = vec![None; net.n_total()];
    if beta == 0.0 {
        return Ok(targets);
    }
    check_lengths("target vector vs output neurons", net.n_output(), y.len())?;
    for (k, j) in net.output_indices().enumerate() {
        targets[j] = Some(y[k]);
    }
    Ok(targets)
}

/// Evaluates the vector field at `s`. Input components are reported as
/// computed; callers that integrate hold them fixed.
pub fn vector_field(net: &Network, s: &StateVector, y: &[f64], beta: f64) -> Result<Array1<f64>> {
    check_lengths("state vector vs neurons", net.n_total(), s.len())?;
    let targets = neuron_targets(net, y, beta)?;
    let w = net.weights();
    let b = net.bias();
    let field = (0..net.n_total())
        .map(|j| {
            let mut v = w.column(j).dot(&s.0) + b[j] - s[j] * net.outgoing_sum(j);
            if let Some(t) = targets[j] {
                v -= beta * (s[j] - t);
            }
            v
        })
        .collect();
    Ok(field)
}

/// Initial state of a free phase: inputs pinned to `x`, every other neuron at
/// `state_init`.
pub fn initial_state(net: &Network, x: &[f64], hp: &Hyperparams) -> Result<StateVector> {
    check_lengths("input pattern vs input neurons", net.n_input(), x.len())?;
    let mut s = Array1::from_elem(net.n_total(), hp.state_init);
    for (k, v) in x.iter().enumerate() {
        s[k] = *v;
    }
    Ok(StateVector(s))
}

/// Precomputed pieces of one clamped Euler step.
struct Stepper<'a> {
    incoming: Array2<f64>,
    leak: Vec<f64>,
    bias: &'a Array1<f64>,
    targets: Vec<Option<f64>>,
    free: std::ops::Range<usize>,
    beta: f64,
    step_size: f64,
}

impl<'a> Stepper<'a> {
    fn new(net: &'a Network, y: &[f64], beta: f64, step_size: f64) -> Result<Self> {
        Ok(Stepper {
            // Row j of `incoming` is column j of W, contiguous for the inner product.
            incoming: net.weights().t().to_owned(),
            leak: (0..net.n_total()).map(|j| net.outgoing_sum(j)).collect(),
            bias: net.bias(),
            targets: neuron_targets(net, y, beta)?,
            free: net.free_indices(),
            beta,
            step_size,
        })
    }

    /// Writes the next state into `next` and returns the max-norm of the
    /// update over free coordinates.
    fn step(&self, s: &Array1<f64>, next: &mut Array1<f64>, step: usize) -> Result<f64> {
        let mut max_update = 0.0_f64;
        for j in self.free.clone() {
            let mut v = self.incoming.row(j).dot(s) + self.bias[j] - s[j] * self.leak[j];
            if let Some(t) = self.targets[j] {
                v -= self.beta * (s[j] - t);
            }
            if !v.is_finite() {
                return Err(DeepError::Divergence { step, neuron: j });
            }
            let updated = hard_sigmoid(s[j] + self.step_size * v);
            max_update = max_update.max((updated - s[j]).abs());
            next[j] = updated;
        }
        Ok(max_update)
    }
}

fn pinned(s_init: &StateVector, x: &[f64]) -> Array1<f64> {
    let mut s = s_init.0.clone();
    for (k, v) in x.iter().enumerate() {
        s[k] = *v;
    }
    s
}

fn check_relax_args(net: &Network, s_init: &StateVector, x: &[f64], steps: usize) -> Result<()> {
    check_lengths("state vector vs neurons", net.n_total(), s_init.len())?;
    check_lengths("input pattern vs input neurons", net.n_input(), x.len())?;
    if steps < 1 {
        return Err(DeepError::Hyperparam(
            "relaxation needs at least one step".into(),
        ));
    }
    Ok(())
}

/// Integrates the clamped dynamics for `steps` Euler steps starting at
/// `s_init`. Input coordinates are pinned to `x` in every recorded state.
#[allow(clippy::too_many_arguments)]
pub fn relax(
    net: &Network,
    s_init: &StateVector,
    x: &[f64],
    y: &[f64],
    beta: f64,
    steps: usize,
    hp: &Hyperparams,
) -> Result<PhaseTrajectory> {
    check_relax_args(net, s_init, x, steps)?;
    let stepper = Stepper::new(net, y, beta, hp.step_size)?;
    let mut s = pinned(s_init, x);
    let mut next = s.clone();
    let mut states = Vec::with_capacity(steps + 1);
    states.push(StateVector(s.clone()));
    let mut converged_at = None;

    for step in 1..=steps {
        let max_update = stepper.step(&s, &mut next, step)?;
        std::mem::swap(&mut s, &mut next);
        states.push(StateVector(s.clone()));
        if hp.convergence_tol > 0.0 && max_update < hp.convergence_tol {
            converged_at = Some(step);
            let last = states[step].clone();
            states.resize(steps + 1, last);
            break;
        }
    }

    Ok(PhaseTrajectory {
        states,
        phase_beta: beta,
        converged_at,
    })
}

/// Runs the free dynamics from `s_init` until the update max-norm drops
/// below `tol` or `max_steps` is reached, without recording the path.
/// Returns the final state and the step at which `tol` was met.
pub fn settle(
    net: &Network,
    s_init: &StateVector,
    x: &[f64],
    step_size: f64,
    tol: f64,
    max_steps: usize,
) -> Result<(StateVector, Option<usize>)> {
    check_relax_args(net, s_init, x, max_steps)?;
    let stepper = Stepper::new(net, &[], 0.0, step_size)?;
    let mut s = pinned(s_init, x);
    let mut next = s.clone();
    for step in 1..=max_steps {
        let max_update = stepper.step(&s, &mut next, step)?;
        std::mem::swap(&mut s, &mut next);
        if max_update < tol {
            return Ok((StateVector(s), Some(step)));
        }
    }
    Ok((StateVector(s), None))
}

/// Free-phase trajectory from the standard initial state.
pub fn free_phase(net: &Network, x: &[f64], hp: &Hyperparams) -> Result<PhaseTrajectory> {
    let s0 = initial_state(net, x, hp)?;
    relax(net, &s0, x, &[], 0.0, hp.m0, hp)
}

/// The free equilibrium `s0` reached after `m0` steps; its output
/// coordinates are the network's prediction for `x`.
pub fn free_equilibrium(net: &Network, x: &[f64], hp: &Hyperparams) -> Result<StateVector> {
    Ok(free_phase(net, x, hp)?.last().clone())
}

/// Output coordinates of a state, in output-neuron order.
pub fn read_outputs(net: &Network, s: &StateVector) -> Vec<f64> {
    net.output_indices().map(|j| s[j]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_free_neurons() -> Network {
        let mut net = Network::unconnected(2, 0, 1).unwrap();
        net.set_weight(0, 1, 1.0).unwrap();
        net.set_weight(1, 0, 0.0).unwrap();
        net
    }

    #[test]
    fn hard_sigmoid_clamps() {
        assert_eq!(hard_sigmoid(-0.5), 0.0);
        assert_eq!(hard_sigmoid(0.3), 0.3);
        assert_eq!(hard_sigmoid(1.7), 1.0);
    }

    #[test]
    fn mse_cost_values() {
        assert_eq!(mse_cost(&[0.2, 0.4], &[0.2, 0.4]).unwrap(), 0.0);
        assert_eq!(mse_cost(&[1.0], &[0.0]).unwrap(), 0.5);
        assert_eq!(mse_cost(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!(matches!(
            mse_cost(&[1.0], &[0.0, 1.0]),
            Err(DeepError::Dimension { .. })
        ));
    }

    #[test]
    fn cost_gradient_values() {
        assert_eq!(
            cost_gradient(&[0.3, 0.7], &[0.3, 0.7]).unwrap(),
            vec![0.0, 0.0]
        );
        let g = cost_gradient(&[0.8], &[1.0]).unwrap();
        assert!((g[0] + 0.2).abs() < 1e-15);
        assert!(cost_gradient(&[0.8], &[]).is_err());
    }

    #[test]
    fn vector_field_hand_example() {
        let net = two_free_neurons();
        let s = StateVector::from_vec(vec![1.0, 0.0]);
        let v = vector_field(&net, &s, &[], 0.0).unwrap();
        assert_eq!(v.to_vec(), vec![-1.0, 1.0]);
    }

    #[test]
    fn vector_field_of_zero_network_vanishes() {
        let net = Network::unconnected(5, 2, 1).unwrap();
        let s = StateVector::from_vec(vec![0.1, 0.9, 0.3, 0.2, 0.7]);
        let v = vector_field(&net, &s, &[1.0], 0.0).unwrap();
        assert!(v.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn nudge_pulls_output_toward_target() {
        let net = Network::unconnected(3, 1, 1).unwrap();
        let s = StateVector::from_vec(vec![1.0, 0.5, 0.2]);
        let v = vector_field(&net, &s, &[1.0], 0.5).unwrap();
        assert_eq!(v[1], 0.0);
        assert!((v[2] - 0.4).abs() < 1e-15);
        assert!(vector_field(&net, &s, &[1.0, 0.0], 0.5).is_err());
    }

    #[test]
    fn relax_of_zero_network_is_constant() {
        let net = Network::unconnected(4, 1, 1).unwrap();
        let hp = Hyperparams::default();
        let s = StateVector::from_vec(vec![1.0, 0.3, 0.6, 0.9]);
        let traj = relax(&net, &s, &[1.0], &[], 0.0, 10, &hp).unwrap();
        assert_eq!(traj.states.len(), 11);
        assert!(traj.states.iter().all(|st| *st == s));
    }

    #[test]
    fn relax_pads_after_early_stop() {
        let net = Network::unconnected(4, 1, 1).unwrap();
        let hp = Hyperparams {
            convergence_tol: 1e-9,
            ..Hyperparams::default()
        };
        let s = StateVector::from_vec(vec![1.0, 0.3, 0.6, 0.9]);
        let traj = relax(&net, &s, &[1.0], &[], 0.0, 10, &hp).unwrap();
        assert_eq!(traj.converged_at, Some(1));
        assert_eq!(traj.states.len(), 11);
    }

    #[test]
    fn relax_reports_divergence() {
        let mut net = Network::unconnected(2, 1, 1).unwrap();
        net.set_weight(0, 1, f64::INFINITY).unwrap();
        let hp = Hyperparams::default();
        let s = StateVector::from_vec(vec![1.0, 0.5]);
        let err = relax(&net, &s, &[1.0], &[], 0.0, 5, &hp).unwrap_err();
        assert!(matches!(err, DeepError::Divergence { step: 1, neuron: 1 }));
    }

    #[test]
    fn free_equilibrium_of_zero_network_keeps_state_init() {
        let net = Network::unconnected(8, 2, 1).unwrap();
        let hp = Hyperparams {
            state_init: 0.5,
            ..Hyperparams::default()
        };
        let s = free_equilibrium(&net, &[1.0, 0.0], &hp).unwrap();
        assert_eq!(s.to_vec(), vec![1.0, 0.0, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5]);
    }

    fn arb_net_and_state() -> impl Strategy<Value = (Network, StateVector, Vec<f64>)> {
        (any::<u64>(), 0.05f64..3.0).prop_flat_map(|(seed, scale)| {
            let net = Network::new_complete(8, 2, 1, scale, seed).unwrap();
            (
                Just(net),
                proptest::collection::vec(0.0f64..=1.0, 8).prop_map(StateVector::from_vec),
                proptest::collection::vec(prop_oneof![Just(0.0), Just(1.0)], 2),
            )
        })
    }

    proptest! {
        #[test]
        fn relax_keeps_states_clamped_and_inputs_pinned(
            (net, s, x) in arb_net_and_state(),
            y in 0.0f64..=1.0,
            beta in 0.0f64..2.0,
        ) {
            let hp = Hyperparams::default();
            let traj = relax(&net, &s, &x, &[y], beta, 25, &hp).unwrap();
            prop_assert_eq!(traj.states.len(), 26);
            for st in &traj.states {
                prop_assert!(st.iter().all(|v| (0.0..=1.0).contains(v)));
                prop_assert_eq!(st[0], x[0]);
                prop_assert_eq!(st[1], x[1]);
            }
            let again = relax(&net, &s, &x, &[y], beta, 25, &hp).unwrap();
            prop_assert_eq!(traj, again);
        }

        #[test]
        fn cost_gradient_matches_central_differences(
            pairs in proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..6)
        ) {
            let (y_hat, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let g = cost_gradient(&y_hat, &y).unwrap();
            let eps = 1e-6;
            for k in 0..y.len() {
                let mut up = y_hat.clone();
                let mut down = y_hat.clone();
                up[k] += eps;
                down[k] -= eps;
                let fd = (mse_cost(&up, &y).unwrap() - mse_cost(&down, &y).unwrap()) / (2.0 * eps);
                prop_assert!((fd - g[k]).abs() <= 1e-6 * g[k].abs().max(1.0));
            }
        }
    }
}
