//! Exact density-matrix simulation, variational state diagonalization and a
//! double deep Q-network that grows diagonalizing circuits gate by gate.

pub mod agent;
pub mod circuit;
pub mod encoding;
pub mod environment;
pub mod error;
pub mod optimizer;
pub mod qsim;
pub mod states;
pub mod vqsd;

pub use circuit::{build_lhea, Circuit, Gate, GateCounts, LheaVariant};
pub use encoding::{action_one_hot, action_to_gate, encode_state, gate_to_action, ActionSpace, RlStateTensor};
pub use environment::{EnvConfig, Environment, StepOutcome};
pub use error::{Error, Result};
pub use optimizer::{minimize, Minimum, OptimizerBudget};
pub use qsim::{Axis, DensityMatrix, C64};
pub use vqsd::{cost, eigenvalue_error, eigenvalue_readout, eigenvector_prepare, DiagonalizationResult};
