//! Network structure: roles, weights, biases and the structural masks.
//!
//! Neurons are laid out with the `P` inputs first, then hidden neurons, then
//! outputs. `weights[[i, j]]` is the directed connection `i -> j`. Biases are
//! modelled as outgoing weights of a virtual neuron whose activity is fixed to
//! one, so they are trained and pruned exactly like weights.
//!
//! Connections from a free neuron into an input neuron ("leak edges") are
//! allowed but never built by [`Network::new_complete`]. The input stays
//! pinned, so such an edge only adds to the source neuron's leak rate.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{DeepError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NeuronRole {
    Input,
    Hidden,
    Output,
}

impl NeuronRole {
    pub fn code(self) -> char {
        match self {
            NeuronRole::Input => 'I',
            NeuronRole::Hidden => 'H',
            NeuronRole::Output => 'O',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        match c {
            'I' => Some(NeuronRole::Input),
            'H' => Some(NeuronRole::Hidden),
            'O' => Some(NeuronRole::Output),
            _ => None,
        }
    }
}

/// Source of an incoming parameter: another neuron, or the virtual
/// always-one bias neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Neuron(usize),
    Bias,
}

impl std::fmt::Display for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Source::Neuron(i) => write!(f, "{i}"),
            Source::Bias => f.write_str("bias"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    roles: Vec<NeuronRole>,
    n_input: usize,
    pub(crate) weights: Array2<f64>,
    pub(crate) bias: Array1<f64>,
    pub(crate) mask: Array2<bool>,
    pub(crate) bias_mask: Array1<bool>,
}

impl Network {
    /// Builds the complete directed graph: every ordered pair `(i, j)` with
    /// `i != j` and `j` not an input carries a weight, and every non-input
    /// neuron carries a bias. Parameters are drawn uniformly from
    /// `[-init_scale, init_scale]` using a generator seeded with `seed`.
    pub fn new_complete(
        n_total: usize,
        n_input: usize,
        n_output: usize,
        init_scale: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut net = Self::unconnected(n_total, n_input, n_output)?;
        if !(init_scale > 0.0 && init_scale.is_finite()) {
            return Err(DeepError::Construction(format!(
                "init_scale must be positive and finite, got {init_scale}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..n_total {
            for j in n_input..n_total {
                if i != j {
                    net.mask[[i, j]] = true;
                    net.weights[[i, j]] = rng.random_range(-init_scale..=init_scale);
                }
            }
        }
        for j in n_input..n_total {
            net.bias_mask[j] = true;
            net.bias[j] = rng.random_range(-init_scale..=init_scale);
        }
        Ok(net)
    }

    /// A network with the requested role layout and no parameters at all.
    pub fn unconnected(n_total: usize, n_input: usize, n_output: usize) -> Result<Self> {
        if n_output < 1 {
            return Err(DeepError::Construction(
                "n_output >= 1 violated: at least one output neuron is required".into(),
            ));
        }
        if n_input + n_output > n_total {
            return Err(DeepError::Construction(format!(
                "n_input + n_output <= n_total violated: {n_input} + {n_output} > {n_total}"
            )));
        }
        let roles = (0..n_total)
            .map(|k| {
                if k < n_input {
                    NeuronRole::Input
                } else if k >= n_total - n_output {
                    NeuronRole::Output
                } else {
                    NeuronRole::Hidden
                }
            })
            .collect();
        Self::from_roles(roles)
    }

    /// A parameter-free network with an explicit role vector. Inputs must
    /// form a prefix of the neuron list.
    pub fn from_roles(roles: Vec<NeuronRole>) -> Result<Self> {
        let n = roles.len();
        let n_input = roles
            .iter()
            .take_while(|r| **r == NeuronRole::Input)
            .count();
        if roles[n_input..].contains(&NeuronRole::Input) {
            return Err(DeepError::Construction(
                "input neurons must occupy the leading indices".into(),
            ));
        }
        if !roles.contains(&NeuronRole::Output) {
            return Err(DeepError::Construction(
                "n_output >= 1 violated: at least one output neuron is required".into(),
            ));
        }
        Ok(Network {
            roles,
            n_input,
            weights: Array2::zeros((n, n)),
            bias: Array1::zeros(n),
            mask: Array2::from_elem((n, n), false),
            bias_mask: Array1::from_elem(n, false),
        })
    }

    pub fn n_total(&self) -> usize {
        self.roles.len()
    }

    pub fn n_input(&self) -> usize {
        self.n_input
    }

    pub fn n_output(&self) -> usize {
        self.output_indices().count()
    }

    pub fn roles(&self) -> &[NeuronRole] {
        &self.roles
    }

    pub fn role(&self, j: usize) -> NeuronRole {
        self.roles[j]
    }

    pub fn is_input(&self, j: usize) -> bool {
        j < self.n_input
    }

    /// Indices of the non-input ("free") neurons, in order.
    pub fn free_indices(&self) -> std::ops::Range<usize> {
        self.n_input..self.n_total()
    }

    pub fn output_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, r)| **r == NeuronRole::Output)
            .map(|(k, _)| k)
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn bias(&self) -> &Array1<f64> {
        &self.bias
    }

    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }

    pub fn bias_mask(&self) -> &Array1<bool> {
        &self.bias_mask
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[[i, j]]
    }

    pub fn has_connection(&self, i: usize, j: usize) -> bool {
        self.mask[[i, j]]
    }

    /// Sets the weight of `i -> j`, creating the connection if it is
    /// structurally allowed. Self-loops and input-to-input connections are
    /// rejected.
    pub fn set_weight(&mut self, i: usize, j: usize, value: f64) -> Result<()> {
        let n = self.n_total();
        if i >= n || j >= n {
            return Err(DeepError::Construction(format!(
                "connection {i} -> {j} out of range for {n} neurons"
            )));
        }
        if i == j {
            return Err(DeepError::Construction(format!(
                "self-connection {i} -> {i} is not allowed"
            )));
        }
        if self.is_input(i) && self.is_input(j) {
            return Err(DeepError::Construction(format!(
                "connection {i} -> {j} joins two input neurons"
            )));
        }
        self.mask[[i, j]] = true;
        self.weights[[i, j]] = value;
        Ok(())
    }

    pub fn set_bias(&mut self, j: usize, value: f64) -> Result<()> {
        if j >= self.n_total() {
            return Err(DeepError::Construction(format!(
                "bias index {j} out of range"
            )));
        }
        if self.is_input(j) {
            return Err(DeepError::Construction(format!(
                "input neuron {j} cannot carry a bias"
            )));
        }
        self.bias_mask[j] = true;
        self.bias[j] = value;
        Ok(())
    }

    /// Value of an incoming parameter of neuron `j`.
    pub fn parameter(&self, source: Source, j: usize) -> f64 {
        match source {
            Source::Neuron(i) => self.weights[[i, j]],
            Source::Bias => self.bias[j],
        }
    }

    pub fn has_parameter(&self, source: Source, j: usize) -> bool {
        match source {
            Source::Neuron(i) => self.mask[[i, j]],
            Source::Bias => self.bias_mask[j],
        }
    }

    /// Permanently removes a parameter: its mask entry becomes false and its
    /// value zero.
    pub fn remove_parameter(&mut self, source: Source, j: usize) {
        match source {
            Source::Neuron(i) => {
                self.mask[[i, j]] = false;
                self.weights[[i, j]] = 0.0;
            }
            Source::Bias => {
                self.bias_mask[j] = false;
                self.bias[j] = 0.0;
            }
        }
    }

    /// Present incoming parameters of neuron `j`: weights in source order,
    /// then the bias.
    pub fn incoming(&self, j: usize) -> Vec<Source> {
        let mut out: Vec<Source> = (0..self.n_total())
            .filter(|&i| self.mask[[i, j]])
            .map(Source::Neuron)
            .collect();
        if self.bias_mask[j] {
            out.push(Source::Bias);
        }
        out
    }

    /// Sum of the outgoing weights `sum_i W[j][i]` of neuron `j`, the
    /// coefficient of its leak term.
    pub fn outgoing_sum(&self, j: usize) -> f64 {
        self.weights.row(j).sum()
    }

    /// Number of trainable parameters still present.
    pub fn trainable_parameter_count(&self) -> usize {
        let weights = self.mask.iter().filter(|m| **m).count();
        let biases = self.free_indices().filter(|&j| self.bias_mask[j]).count();
        weights + biases
    }

    /// Parameter count of the complete graph with this role layout, i.e.
    /// the count a fresh [`Network::new_complete`] would have.
    pub fn complete_parameter_count(&self) -> usize {
        let free = self.n_total() - self.n_input;
        (self.n_total() - 1) * free + free
    }

    /// Fraction of parameters removed relative to the complete graph.
    pub fn sparsity(&self) -> Result<f64> {
        sparsity_fraction(self, self.complete_parameter_count())
    }

    /// Checks the structural invariants. Used by loaders and tests.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_total();
        for i in 0..n {
            for j in 0..n {
                if self.mask[[i, j]] && (i == j || (self.is_input(i) && self.is_input(j))) {
                    return Err(DeepError::Construction(format!(
                        "forbidden connection {i} -> {j} is present"
                    )));
                }
                if !self.mask[[i, j]] && self.weights[[i, j]] != 0.0 {
                    return Err(DeepError::Construction(format!(
                        "absent connection {i} -> {j} has nonzero weight"
                    )));
                }
            }
            if self.is_input(i) && self.bias_mask[i] {
                return Err(DeepError::Construction(format!(
                    "input neuron {i} carries a bias"
                )));
            }
            if !self.bias_mask[i] && self.bias[i] != 0.0 {
                return Err(DeepError::Construction(format!(
                    "absent bias of neuron {i} is nonzero"
                )));
            }
        }
        Ok(())
    }
}

/// Removed parameters divided by `original` trainable parameters.
pub fn sparsity_fraction(net: &Network, original: usize) -> Result<f64> {
    if original == 0 {
        return Err(DeepError::UndefinedRatio(
            "sparsity of a network with zero original parameters",
        ));
    }
    let remaining = net.trainable_parameter_count();
    Ok(original.saturating_sub(remaining) as f64 / original as f64)
}
