use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use vqsd_core::agent::AgentConfig;
use vqsd_core::circuit::LheaVariant;
use vqsd_core::environment::{EnvConfig, DEFAULT_SUCCESS_REWARD};
use vqsd_core::optimizer::OptimizerBudget;
use vqsd_core::qsim::DensityMatrix;
use vqsd_core::states::{ginibre_density_matrix, reduced_ground_state, HeisenbergSpec};

use crate::error::HarnessError;

/// Qubit count from which training-style recipes need `--allow-long-run`.
pub const LONG_RUN_QUBITS: usize = 4;

/// Seed-derivation tags, one per independent random stream.
pub mod stream {
    pub const STATE: u64 = 1;
    pub const AGENT: u64 = 2;
    pub const RANDOM_AGENT: u64 = 3;
    pub const RESTARTS: u64 = 4;
    pub const TRANSFER: u64 = 5;
}

/// Independent seed for `tag`, mixed from the experiment seed.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finaliser over the pair.
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Defaults for `(n_steps, max_evals, zeta)` at a given qubit count.
pub fn size_defaults(n_qubits: usize) -> (usize, usize, f64) {
    match n_qubits {
        0..=2 => (20, 400, 1e-5),
        3 => (40, 500, 1e-4),
        _ => (60, 1000, 1e-3),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Problem {
    Ginibre { n_qubits: usize },
    /// Ground state of a `total_spins` ring reduced to its first half.
    Heisenberg { total_spins: usize },
    File { path: PathBuf },
}

impl Default for Problem {
    fn default() -> Self {
        Problem::Ginibre { n_qubits: 2 }
    }
}

impl Problem {
    /// Qubit count of the target, without reading files.
    pub fn n_qubits_hint(&self) -> Option<usize> {
        match self {
            Problem::Ginibre { n_qubits } => Some(*n_qubits),
            Problem::Heisenberg { total_spins } => Some(total_spins / 2),
            Problem::File { .. } => None,
        }
    }

    /// The target state; Ginibre states draw from the `STATE` stream of `seed`.
    pub fn build(&self, seed: u64) -> Result<DensityMatrix, HarnessError> {
        match self {
            Problem::Ginibre { n_qubits } => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stream::STATE));
                Ok(ginibre_density_matrix(*n_qubits, &mut rng).map_err(HarnessError::config)?)
            }
            Problem::Heisenberg { total_spins } => {
                let spec = HeisenbergSpec::new(*total_spins).map_err(HarnessError::config)?;
                Ok(reduced_ground_state(&spec).map_err(HarnessError::config)?)
            }
            Problem::File { path } => load_state(path),
        }
    }
}

pub fn load_state(path: &Path) -> Result<DensityMatrix, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("cannot read state {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("bad state file {}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSettings {
    /// Falls back to the per-size default when absent.
    pub max_evals: Option<usize>,
    pub initial_step: f64,
    pub final_tolerance: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        let d = OptimizerBudget::default();
        OptimizerSettings { max_evals: None, initial_step: d.initial_step, final_tolerance: d.final_tolerance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LheaSettings {
    pub layers: usize,
    pub variant: LheaVariant,
    pub trials: usize,
    /// Optimizer runs per trial: the first from zero angles, the rest from
    /// uniformly random angles.
    pub restarts: usize,
}

impl Default for LheaSettings {
    fn default() -> Self {
        LheaSettings { layers: 6, variant: LheaVariant::ThreeParam, trials: 50, restarts: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub zeta: Option<f64>,
    pub n_steps: Option<usize>,
    pub d_max: Option<usize>,
    pub episodes: usize,
    pub optimizer: OptimizerSettings,
    pub success_reward: f64,
    /// `agent.seed` is replaced by a seed derived from `seed`.
    pub agent: AgentConfig,
    pub seed: u64,
    pub out: PathBuf,
    pub allow_long_run: bool,
    pub lhea: LheaSettings,
    pub zetas: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: Problem::default(),
            zeta: None,
            n_steps: None,
            d_max: None,
            episodes: 10_000,
            optimizer: OptimizerSettings::default(),
            success_reward: DEFAULT_SUCCESS_REWARD,
            agent: AgentConfig::default(),
            seed: 0,
            out: PathBuf::from("rlvqsd-out"),
            allow_long_run: false,
            lhea: LheaSettings::default(),
            zetas: vec![1e-3, 1e-5, 1e-7, 1e-9],
        }
    }
}

/// A config with the target built and every per-size default filled in.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub cfg: ExperimentConfig,
    pub target: DensityMatrix,
    pub n_qubits: usize,
    pub zeta: f64,
    pub n_steps: usize,
    pub d_max: usize,
    pub budget: OptimizerBudget,
    pub agent: AgentConfig,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("bad config {}: {e}", path.display())))
    }

    pub fn resolve(&self) -> Result<Resolved, HarnessError> {
        let target = self.problem.build(self.seed)?;
        let n_qubits = target.n_qubits();
        let (n_steps_d, evals_d, zeta_d) = size_defaults(n_qubits);
        let n_steps = self.n_steps.unwrap_or(n_steps_d);
        let budget = OptimizerBudget {
            max_evals: self.optimizer.max_evals.unwrap_or(evals_d),
            initial_step: self.optimizer.initial_step,
            final_tolerance: self.optimizer.final_tolerance,
        };
        budget.validate().map_err(HarnessError::config)?;
        let agent = AgentConfig { seed: derive_seed(self.seed, stream::AGENT), ..self.agent.clone() };
        agent.validate().map_err(HarnessError::config)?;
        let r = Resolved {
            target,
            n_qubits,
            zeta: self.zeta.unwrap_or(zeta_d),
            n_steps,
            d_max: self.d_max.unwrap_or(n_steps),
            budget,
            agent,
            cfg: self.clone(),
        };
        r.env_config(r.zeta).validate().map_err(HarnessError::config)?;
        Ok(r)
    }
}

impl Resolved {
    pub fn env_config(&self, zeta: f64) -> EnvConfig {
        EnvConfig {
            target_state: self.target.clone(),
            zeta,
            n_steps: self.n_steps,
            d_max: self.d_max,
            optimizer_budget: self.budget,
            success_reward: self.cfg.success_reward,
        }
    }

    pub fn require_long_run_permission(&self) -> Result<(), HarnessError> {
        if self.n_qubits >= LONG_RUN_QUBITS && !self.cfg.allow_long_run {
            return Err(HarnessError::Config(format!(
                "{} qubits is a long run; pass --allow-long-run to proceed",
                self.n_qubits
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn per_size_defaults() {
        assert_eq!(size_defaults(2), (20, 400, 1e-5));
        assert_eq!(size_defaults(3), (40, 500, 1e-4));
        assert_eq!(size_defaults(4), (60, 1000, 1e-3));
        let r = ExperimentConfig::default().resolve().unwrap();
        assert_eq!((r.n_steps, r.d_max, r.budget.max_evals, r.zeta), (20, 20, 400, 1e-5));
        assert_eq!(r.cfg.episodes, 10_000);
        assert_eq!(r.agent.gamma, 0.88);
        let h = ExperimentConfig { problem: Problem::Heisenberg { total_spins: 6 }, ..Default::default() };
        let r = h.resolve().unwrap();
        assert_eq!((r.n_qubits, r.n_steps, r.budget.max_evals, r.zeta), (3, 40, 500, 1e-4));
    }

    #[test]
    fn json_overrides_and_rejects_unknown_keys() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"problem": {"kind": "heisenberg", "total_spins": 6}, "zeta": 0.01, "optimizer": {"max_evals": 50}}"#,
        )
        .unwrap();
        let r = cfg.resolve().unwrap();
        assert_eq!((r.zeta, r.budget.max_evals, r.n_steps), (0.01, 50, 40));
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"zeta": 0.1, "typo": 1}"#).is_err());
    }

    #[test]
    fn long_runs_are_gated() {
        let cfg = ExperimentConfig { problem: Problem::Ginibre { n_qubits: 4 }, ..Default::default() };
        assert!(cfg.resolve().unwrap().require_long_run_permission().is_err());
        let cfg = ExperimentConfig { allow_long_run: true, ..cfg };
        assert!(cfg.resolve().unwrap().require_long_run_permission().is_ok());
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for cfg in [
            ExperimentConfig { zeta: Some(-1.0), ..Default::default() },
            ExperimentConfig { n_steps: Some(0), ..Default::default() },
            ExperimentConfig { problem: Problem::Heisenberg { total_spins: 5 }, ..Default::default() },
            ExperimentConfig { problem: Problem::File { path: "/nonexistent.json".into() }, ..Default::default() },
        ] {
            assert!(matches!(cfg.resolve(), Err(HarnessError::Config(_))));
        }
    }

    #[test]
    fn derived_seeds_differ_by_tag_and_seed() {
        let a = derive_seed(7, stream::STATE);
        assert_ne!(a, derive_seed(7, stream::AGENT));
        assert_ne!(a, derive_seed(8, stream::STATE));
        assert_eq!(a, derive_seed(7, stream::STATE));
    }
}
