//! Directed equilibrium propagation on complete directed graphs.
//!
//! A network of firing-rate neurons relaxes under clamped continuous-time
//! dynamics, first freely and then nudged toward the targets; the weights
//! are updated from the nudged trajectory, optionally pruned by a Boltzmann
//! lottery, and the free dynamics can be certified stable with a Gershgorin
//! test on its Jacobian.

pub mod analysis;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod hyperparams;
pub mod io;
pub mod learning;
pub mod network;
pub mod sparsity;
pub mod training;

pub use dynamics::{PhaseTrajectory, StateVector};
pub use error::{DeepError, Result};
pub use hyperparams::Hyperparams;
pub use learning::{ParameterUpdate, Rule};
pub use network::{Network, NeuronRole, Source};
pub use training::{Architecture, Dataset, LogicOp, RunRecord, TrainOptions};
