//! Episodic ansatz-construction environment: one gate per step, followed by
//! re-optimization of every angle.

use crate::circuit::Circuit;
use crate::encoding::{encode_state, ActionSpace, RlStateTensor};
use crate::error::{Error, Result};
use crate::optimizer::{minimize, OptimizerBudget};
use crate::qsim::DensityMatrix;
use crate::vqsd::dephased_purity_gap;

/// Margin added to ζ in the success test.
pub const SUCCESS_MARGIN: f64 = 1e-5;
/// Floor on `C − ζ` inside the logarithm.
pub const LOG_FLOOR: f64 = 1e-300;
pub const DEFAULT_SUCCESS_REWARD: f64 = 5.0;

#[derive(Debug, Clone)]
pub struct EnvConfig {
    pub target_state: DensityMatrix,
    pub zeta: f64,
    pub n_steps: usize,
    pub d_max: usize,
    pub optimizer_budget: OptimizerBudget,
    pub success_reward: f64,
}

impl EnvConfig {
    /// `d_max = n_steps` and the default success reward.
    pub fn new(target_state: DensityMatrix, zeta: f64, n_steps: usize, optimizer_budget: OptimizerBudget) -> Self {
        EnvConfig {
            target_state,
            zeta,
            n_steps,
            d_max: n_steps,
            optimizer_budget,
            success_reward: DEFAULT_SUCCESS_REWARD,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.zeta > 0.0 && self.zeta.is_finite()) {
            return Err(Error::InvalidArgument(format!("zeta must be positive, got {}", self.zeta)));
        }
        if self.n_steps == 0 || self.d_max == 0 {
            return Err(Error::InvalidArgument("n_steps and d_max must be at least 1".into()));
        }
        if !(self.success_reward > 0.0 && self.success_reward.is_finite()) {
            return Err(Error::InvalidArgument(format!("success_reward must be positive, got {}", self.success_reward)));
        }
        if self.target_state.n_qubits() < 2 {
            return Err(Error::InvalidArgument("the CNOT alphabet needs at least 2 qubits".into()));
        }
        self.optimizer_budget.validate()
    }
}

/// `(reward, success)` for a post-optimization cost.
pub fn reward(cost: f64, zeta: f64, success_reward: f64) -> (f64, bool) {
    if cost < zeta + SUCCESS_MARGIN {
        (success_reward, true)
    } else {
        (-(cost - zeta).max(LOG_FLOOR).ln(), false)
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: RlStateTensor,
    pub reward: f64,
    pub done: bool,
    pub cost: f64,
    pub circuit_snapshot: Circuit,
    pub success: bool,
    /// The gate was rejected because it would not fit in `d_max` slabs.
    pub overflow: bool,
    pub evals: usize,
}

#[derive(Debug, Clone)]
pub struct Environment {
    cfg: EnvConfig,
    space: ActionSpace,
    purity: f64,
    circuit: Circuit,
    state: RlStateTensor,
    cost: f64,
    steps: usize,
    done: bool,
    success: bool,
}

impl Environment {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.target_state.n_qubits();
        let circuit = Circuit::new(n)?;
        let purity = cfg.target_state.purity();
        let cost = dephased_purity_gap(purity, &cfg.target_state);
        Ok(Environment {
            space: ActionSpace::new(n)?,
            state: RlStateTensor::zeros(cfg.d_max, n)?,
            purity,
            circuit,
            cost,
            steps: 0,
            done: false,
            success: false,
            cfg,
        })
    }

    pub fn reset(&mut self) -> RlStateTensor {
        self.circuit = Circuit::new(self.circuit.n_qubits()).expect("qubit count validated");
        self.state = RlStateTensor::zeros(self.cfg.d_max, self.circuit.n_qubits()).expect("shape validated");
        self.cost = dephased_purity_gap(self.purity, &self.cfg.target_state);
        self.steps = 0;
        self.done = false;
        self.success = false;
        self.state.clone()
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn action_space(&self) -> ActionSpace {
        self.space
    }

    pub fn observation(&self) -> &RlStateTensor {
        &self.state
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn succeeded(&self) -> bool {
        self.success
    }

    /// Cost of `circuit` at `params` against the target.
    pub fn evaluate(&self, circuit: &Circuit, params: &[f64]) -> Result<f64> {
        let out = circuit.apply_with_params(&self.cfg.target_state, params)?;
        Ok(dephased_purity_gap(self.purity, &out))
    }

    pub fn step(&mut self, action: usize) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        let gate = self.space.gate(action)?;
        let candidate = self.circuit.append_gate(gate, 0.0)?;
        self.steps += 1;

        let state = match encode_state(&candidate, self.cfg.d_max) {
            Ok(t) => t,
            Err(Error::DepthOverflow { .. }) => {
                self.done = true;
                let (r, _) = reward(self.cost, self.cfg.zeta, self.cfg.success_reward);
                return Ok(self.outcome(r, true, 0));
            }
            Err(e) => return Err(e),
        };

        let target = &self.cfg.target_state;
        let purity = self.purity;
        let objective = |th: &[f64]| {
            candidate
                .apply_with_params(target, th)
                .map(|out| dephased_purity_gap(purity, &out))
                .unwrap_or(f64::NAN)
        };
        let best = minimize(objective, candidate.params(), &self.cfg.optimizer_budget)?;
        self.circuit = candidate.with_params(&best.theta)?;
        self.state = state;
        self.cost = best.value;

        let (r, success) = reward(self.cost, self.cfg.zeta, self.cfg.success_reward);
        self.success = success;
        self.done = success || self.steps >= self.cfg.n_steps;
        Ok(self.outcome(r, false, best.evals))
    }

    fn outcome(&self, reward: f64, overflow: bool, evals: usize) -> StepOutcome {
        StepOutcome {
            state: self.state.clone(),
            reward,
            done: self.done,
            cost: self.cost,
            circuit_snapshot: self.circuit.clone(),
            success: self.success,
            overflow,
            evals,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::action_to_gate;
    use crate::qsim::C64;
    use crate::states::ginibre_density_matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn env(seed: u64, zeta: f64, n_steps: usize) -> Environment {
        let rho = ginibre_density_matrix(2, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        Environment::new(EnvConfig::new(rho, zeta, n_steps, OptimizerBudget::new(100))).unwrap()
    }

    #[test]
    fn reward_branches() {
        // Dyadic values keep C − ζ exact.
        assert_eq!(reward(1.25, 0.25, 5.0), (0.0, false));
        let (r, s) = reward(0.0 + (-2.0f64).exp(), 1e-300, 5.0);
        assert!(r == 2.0 && !s, "{r}");
        let zeta = 1e-3;
        assert_eq!(reward(zeta, zeta, 5.0), (5.0, true));
        assert_eq!(reward(zeta + 5e-6, zeta, 5.0), (5.0, true));
        assert_eq!(reward(zeta + 1e-5, zeta, 5.0).1, false);
        assert_eq!(reward(0.0, zeta, 7.5), (7.5, true));
    }

    #[test]
    fn reset_gives_zero_tensor_and_empty_circuit_cost() {
        let mut e = env(1, 1e-5, 20);
        let a = e.reset();
        assert_eq!(a.shape(), [20, 5, 2]);
        assert!(a.as_slice().iter().all(|&b| b == 0));
        let rho = &e.config().target_state;
        let want = rho.purity() - rho.diagonal().iter().map(|p| p * p).sum::<f64>();
        assert_eq!(e.cost(), want);
        e.step(0).unwrap();
        assert_eq!(e.reset(), a);
        assert_eq!(e.reset(), a);
        assert_eq!(e.cost(), want);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let rho = ginibre_density_matrix(2, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let good = EnvConfig::new(rho.clone(), 1e-5, 20, OptimizerBudget::new(100));
        for bad in [
            EnvConfig { zeta: 0.0, ..good.clone() },
            EnvConfig { n_steps: 0, ..good.clone() },
            EnvConfig { success_reward: -1.0, ..good.clone() },
            EnvConfig { target_state: DensityMatrix::maximally_mixed(1).unwrap(), ..good.clone() },
        ] {
            assert!(Environment::new(bad).is_err());
        }
    }

    #[test]
    fn step_after_done_and_bad_action_fail() {
        let mut e = env(3, 1e-5, 1);
        assert!(matches!(e.step(8), Err(Error::InvalidAction { .. })));
        let out = e.step(6).unwrap();
        assert!(out.done && !out.success);
        assert!(matches!(e.step(0), Err(Error::EpisodeDone)));
    }

    #[test]
    fn pure_diagonalizable_state_succeeds_in_one_step() {
        // |+⟩ ⊗ |0⟩ is diagonalized by a single RY on qubit 0.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let z = C64::default();
        let rho = DensityMatrix::from_pure(&[C64::new(s, 0.0), z, C64::new(s, 0.0), z]).unwrap();
        let mut e = Environment::new(EnvConfig::new(rho, 1e-5, 5, OptimizerBudget::new(200))).unwrap();
        assert!((e.cost() - 0.5).abs() < 1e-12);
        let out = e.step(1).unwrap();
        assert!(out.success && out.done);
        assert_eq!(out.reward, 5.0);
        assert!(out.cost < 1e-5 + 1e-5);
    }

    #[test]
    fn depth_overflow_terminates_with_previous_cost_reward() {
        let rho = ginibre_density_matrix(2, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let cfg = EnvConfig { d_max: 2, ..EnvConfig::new(rho, 1e-5, 10, OptimizerBudget::new(60)) };
        let mut e = Environment::new(cfg).unwrap();
        e.step(1).unwrap();
        let before = e.step(2).unwrap();
        let out = e.step(0).unwrap();
        assert!(out.overflow && out.done && !out.success);
        assert_eq!(out.cost, before.cost);
        assert_eq!(out.reward, reward(before.cost, 1e-5, 5.0).0);
        assert_eq!(out.circuit_snapshot, before.circuit_snapshot);
        assert_eq!(out.state, before.state);
    }

    #[test]
    fn rotation_steps_never_raise_cost_and_runs_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..5 {
            let actions: Vec<usize> = (0..8).map(|_| rng.random_range(0..8)).collect();
            let run = |actions: &[usize]| {
                let mut e = env(100 + trial, 1e-5, 8);
                let mut log = Vec::new();
                for &a in actions {
                    let prev = e.cost();
                    let out = e.step(a).unwrap();
                    if action_to_gate(a, 2).unwrap().is_rotation() {
                        assert!(out.cost <= prev + 1e-9);
                    }
                    log.push((out.cost.to_bits(), out.reward.to_bits(), out.done));
                    if out.done {
                        break;
                    }
                }
                log
            };
            assert_eq!(run(&actions), run(&actions));
        }
    }

    #[test]
    fn episode_length_is_bounded() {
        let mut e = env(6, 1e-12, 4);
        let mut n = 0;
        loop {
            n += 1;
            let out = e.step(6 + n % 2).unwrap();
            assert!(out.state.occupied_slabs() <= 4);
            if out.done {
                break;
            }
        }
        assert!(n <= 4);
    }
}
