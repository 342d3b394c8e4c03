//! Experiment recipes: agent training, the random-action baseline, LHEA
//! baselines, threshold sweeps and fixed-circuit diagonalization.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use vqsd_core::agent::{random_action, AgentCheckpoint, AgentConfig, DdqnAgent, Transition};
use vqsd_core::circuit::{build_lhea, Circuit, GateCounts};
use vqsd_core::environment::Environment;
use vqsd_core::optimizer::{minimize, Minimum, OptimizerBudget};
use vqsd_core::qsim::DensityMatrix;
use vqsd_core::states::ginibre_density_matrix;
use vqsd_core::vqsd::{cost_with_params, eigenvalue_error, eigenvalue_readout, DiagonalizationResult};

use crate::config::{derive_seed, stream, Resolved};
use crate::error::HarnessError;
use crate::records::{write_episodes, write_table, EpisodeRecord, Phase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Learner {
    Ddqn,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestSummary {
    pub episode: usize,
    pub phase: Phase,
    pub one_qubit: usize,
    pub two_qubit: usize,
    pub depth: usize,
    pub total_gates: usize,
    pub delta: f64,
    pub final_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub learner: Learner,
    pub n_qubits: usize,
    pub zeta: f64,
    pub n_steps: usize,
    pub d_max: usize,
    pub episodes: usize,
    pub max_evals: usize,
    pub seed: u64,
    pub train_successes: usize,
    pub test_successes: usize,
    pub true_eigenvalues: Vec<f64>,
    pub best: Option<BestSummary>,
    pub agent: Option<AgentConfig>,
    pub final_epsilon: Option<f64>,
}

impl RunSummary {
    pub fn successes(&self) -> usize {
        self.train_successes + self.test_successes
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<EpisodeRecord>,
    pub best_circuit: Option<Circuit>,
    pub checkpoint: Option<AgentCheckpoint>,
    pub summary: RunSummary,
}

/// Chooses actions for one phase of one episode.
enum Actor<'a> {
    Agent { agent: &'a mut DdqnAgent, learn: bool },
    Random(&'a mut ChaCha8Rng),
}

struct Played {
    actions: Vec<usize>,
    success: bool,
    final_cost: f64,
    circuit: Circuit,
    steps: usize,
}

fn play(env: &mut Environment, actor: &mut Actor<'_>) -> Result<Played, HarnessError> {
    let mut state = env.reset().flatten();
    let n = env.circuit().n_qubits();
    let mut actions = Vec::new();
    loop {
        let a = match actor {
            Actor::Agent { agent, learn } => agent.act(&state, *learn)?,
            Actor::Random(rng) => random_action(n, *rng),
        };
        let out = env.step(a)?;
        actions.push(a);
        let next = out.state.flatten();
        if let Actor::Agent { agent, learn: true } = actor {
            agent.observe(Transition {
                state: std::mem::take(&mut state),
                action: a,
                reward: out.reward,
                next_state: next.clone(),
                done: out.done,
            })?;
        }
        state = next;
        if out.done {
            return Ok(Played {
                actions,
                success: out.success,
                final_cost: out.cost,
                circuit: out.circuit_snapshot,
                steps: env.steps(),
            });
        }
    }
}

fn record(
    episode: usize,
    phase: Phase,
    played: &Played,
    target: &DensityMatrix,
    truth: &[f64],
    started: Instant,
) -> Result<EpisodeRecord, HarnessError> {
    let readout = eigenvalue_readout(target, &played.circuit)?;
    let delta = eigenvalue_error(truth, &readout.values(), truth.len())?;
    let GateCounts { one_qubit, two_qubit, depth } = played.circuit.gate_counts();
    Ok(EpisodeRecord {
        episode,
        phase,
        success: played.success,
        final_cost: played.final_cost,
        delta,
        one_qubit,
        two_qubit,
        depth,
        steps: played.steps,
        wall_seconds: started.elapsed().as_secs_f64(),
        actions: played.actions.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" "),
    })
}

fn best_key(r: &EpisodeRecord) -> (usize, usize, f64) {
    (r.total_gates(), r.depth, r.delta)
}

/// Alternates a training episode with a greedy test episode, `episodes`
/// times. The random learner uses uniform actions in both phases and never
/// learns.
pub fn run_episodes(r: &Resolved, zeta: f64, learner: Learner) -> Result<RunOutput, HarnessError> {
    let mut env = Environment::new(r.env_config(zeta))?;
    let space = env.action_space();
    let input = env.observation().len();
    let mut agent = match learner {
        Learner::Ddqn => Some(DdqnAgent::new(r.agent.clone(), input, space.size())?),
        Learner::Random => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(r.cfg.seed, stream::RANDOM_AGENT));
    let truth = r.target.eigenvalues();

    let mut records = Vec::with_capacity(2 * r.cfg.episodes);
    let mut best: Option<(usize, Circuit)> = None;
    for episode in 0..r.cfg.episodes {
        for phase in [Phase::Train, Phase::Test] {
            let started = Instant::now();
            let mut actor = match agent.as_mut() {
                Some(agent) => Actor::Agent { agent, learn: phase == Phase::Train },
                None => Actor::Random(&mut rng),
            };
            let played = play(&mut env, &mut actor)?;
            let rec = record(episode, phase, &played, &r.target, &truth, started)?;
            if rec.success && best.as_ref().is_none_or(|(i, _)| best_key(&rec) < best_key(&records[*i])) {
                best = Some((records.len(), played.circuit));
            }
            records.push(rec);
        }
    }

    let count = |p: Phase| records.iter().filter(|x| x.phase == p && x.success).count();
    let summary = RunSummary {
        learner,
        n_qubits: r.n_qubits,
        zeta,
        n_steps: r.n_steps,
        d_max: r.d_max,
        episodes: r.cfg.episodes,
        max_evals: r.budget.max_evals,
        seed: r.cfg.seed,
        train_successes: count(Phase::Train),
        test_successes: count(Phase::Test),
        true_eigenvalues: truth,
        best: best.as_ref().map(|(i, _)| {
            let b = &records[*i];
            BestSummary {
                episode: b.episode,
                phase: b.phase,
                one_qubit: b.one_qubit,
                two_qubit: b.two_qubit,
                depth: b.depth,
                total_gates: b.total_gates(),
                delta: b.delta,
                final_cost: b.final_cost,
            }
        }),
        agent: agent.as_ref().map(|a| a.config().clone()),
        final_epsilon: agent.as_ref().map(|a| a.epsilon()),
    };
    let checkpoint = match (&agent, r.cfg.episodes) {
        (Some(a), n) if n > 0 => Some(a.checkpoint()),
        _ => None,
    };
    Ok(RunOutput { records, best_circuit: best.map(|(_, c)| c), checkpoint, summary })
}

pub fn run_training(r: &Resolved) -> Result<RunOutput, HarnessError> {
    r.require_long_run_permission()?;
    run_episodes(r, r.zeta, Learner::Ddqn)
}

pub fn run_random_agent(r: &Resolved) -> Result<RunOutput, HarnessError> {
    r.require_long_run_permission()?;
    run_episodes(r, r.zeta, Learner::Random)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// `episodes.csv`, `summary.json`, and when present `best_circuit.json` and
/// `checkpoint.json`.
pub fn persist_run(dir: &Path, run: &RunOutput) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| HarnessError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    write_episodes(&dir.join("episodes.csv"), &run.records)?;
    write_json(&dir.join("summary.json"), &run.summary)?;
    if let Some(c) = &run.best_circuit {
        write_json(&dir.join("best_circuit.json"), c)?;
    }
    if let Some(ck) = &run.checkpoint {
        write_json(&dir.join("checkpoint.json"), ck)?;
    }
    Ok(())
}

/// Best of `restarts` optimizer runs: the first starts from the circuit's
/// own angles, later ones from angles uniform in `[−π, π)`.
pub fn optimize_with_restarts<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    circuit: &Circuit,
    budget: &OptimizerBudget,
    restarts: usize,
    rng: &mut R,
) -> Result<(Minimum, usize), HarnessError> {
    let mut best: Option<Minimum> = None;
    let mut evals = 0;
    for k in 0..restarts.max(1) {
        let theta0: Vec<f64> = if k == 0 {
            circuit.params().to_vec()
        } else {
            (0..circuit.n_rotations()).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect()
        };
        let m = minimize(|th| cost_with_params(rho, circuit, th).unwrap_or(f64::NAN), &theta0, budget)?;
        evals += m.evals;
        if best.as_ref().is_none_or(|b| m.value < b.value) {
            best = Some(m);
        }
    }
    Ok((best.expect("at least one run"), evals))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LheaRow {
    pub layer: usize,
    pub trials: usize,
    pub avg_delta: f64,
    pub min_delta: f64,
    pub avg_cost: f64,
    pub one_qubit: usize,
    pub two_qubit: usize,
    pub depth: usize,
    pub total_gates: usize,
}

/// Target of LHEA trial `trial`: a fresh Ginibre state per trial for random
/// problems, otherwise the configured state.
fn trial_state(r: &Resolved, trial: usize) -> Result<DensityMatrix, HarnessError> {
    match r.cfg.problem {
        crate::config::Problem::Ginibre { n_qubits } => {
            let seed = derive_seed(derive_seed(r.cfg.seed, stream::STATE), trial as u64);
            Ok(ginibre_density_matrix(n_qubits, &mut ChaCha8Rng::seed_from_u64(seed))?)
        }
        _ => Ok(r.target.clone()),
    }
}

/// One row per layer count `1..=layers`, each averaged over the trials.
pub fn run_lhea_baseline(r: &Resolved) -> Result<Vec<LheaRow>, HarnessError> {
    let s = &r.cfg.lhea;
    if s.layers == 0 || s.trials == 0 || s.restarts == 0 {
        return Err(HarnessError::Config("LHEA layers, trials and restarts must be positive".into()));
    }
    if r.n_qubits < 2 {
        return Err(HarnessError::Config("LHEA needs at least 2 qubits".into()));
    }
    r.require_long_run_permission()?;
    let states: Vec<DensityMatrix> = (0..s.trials).map(|t| trial_state(r, t)).collect::<Result<_, _>>()?;
    let mut rows = Vec::with_capacity(s.layers);
    for layer in 1..=s.layers {
        let circuit = build_lhea(r.n_qubits, layer, s.variant)?;
        let counts = circuit.gate_counts();
        let (mut deltas, mut costs) = (Vec::new(), Vec::new());
        for (t, rho) in states.iter().enumerate() {
            let seed = derive_seed(derive_seed(r.cfg.seed, stream::RESTARTS), (layer * s.trials + t) as u64);
            let (delta, cost) = lhea_trial(rho, &circuit, &r.budget, s.restarts, seed)?;
            deltas.push(delta);
            costs.push(cost);
        }
        let n = deltas.len() as f64;
        rows.push(LheaRow {
            layer,
            trials: s.trials,
            avg_delta: deltas.iter().sum::<f64>() / n,
            min_delta: deltas.iter().cloned().fold(f64::INFINITY, f64::min),
            avg_cost: costs.iter().sum::<f64>() / n,
            one_qubit: counts.one_qubit,
            two_qubit: counts.two_qubit,
            depth: counts.depth,
            total_gates: counts.total(),
        });
    }
    Ok(rows)
}

/// `(Δ, cost)` of the best restart of one LHEA trial.
pub fn lhea_trial(
    rho: &DensityMatrix,
    circuit: &Circuit,
    budget: &OptimizerBudget,
    restarts: usize,
    seed: u64,
) -> Result<(f64, f64), HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m, _) = optimize_with_restarts(rho, circuit, budget, restarts, &mut rng)?;
    let tuned = circuit.with_params(&m.theta)?;
    let truth = rho.eigenvalues();
    let values = eigenvalue_readout(rho, &tuned)?.values();
    Ok((eigenvalue_error(&truth, &values, truth.len())?, m.value))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub zeta: f64,
    pub successes: usize,
    pub avg_one_qubit: f64,
    pub avg_two_qubit: f64,
    pub avg_depth: f64,
    pub avg_total_gates: f64,
    /// Average total gates did not drop relative to the previous, larger ζ.
    pub non_decreasing: bool,
}

/// One training run per ζ; averages are over successful episodes of both
/// phases.
pub fn run_threshold_sweep(r: &Resolved) -> Result<(Vec<SweepRow>, Vec<RunOutput>), HarnessError> {
    let zetas = &r.cfg.zetas;
    if zetas.is_empty() {
        return Err(HarnessError::Config("threshold sweep needs at least one zeta".into()));
    }
    if zetas.windows(2).any(|w| w[1] >= w[0]) || zetas.iter().any(|z| !(*z > 0.0)) {
        return Err(HarnessError::Config("zetas must be positive and strictly descending".into()));
    }
    r.require_long_run_permission()?;
    let mut rows: Vec<SweepRow> = Vec::new();
    let mut runs = Vec::new();
    for &zeta in zetas {
        let run = run_episodes(r, zeta, Learner::Ddqn)?;
        let ok: Vec<&EpisodeRecord> = run.records.iter().filter(|x| x.success).collect();
        let avg = |f: &dyn Fn(&EpisodeRecord) -> usize| {
            if ok.is_empty() {
                f64::NAN
            } else {
                ok.iter().map(|x| f(x) as f64).sum::<f64>() / ok.len() as f64
            }
        };
        let avg_total = avg(&|x| x.total_gates());
        let non_decreasing = rows.last().is_none_or(|p| !(avg_total < p.avg_total_gates));
        rows.push(SweepRow {
            zeta,
            successes: ok.len(),
            avg_one_qubit: avg(&|x| x.one_qubit),
            avg_two_qubit: avg(&|x| x.two_qubit),
            avg_depth: avg(&|x| x.depth),
            avg_total_gates: avg_total,
            non_decreasing,
        });
        runs.push(run);
    }
    Ok((rows, runs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalizeReport {
    #[serde(flatten)]
    pub result: DiagonalizationResult,
    pub delta: f64,
    pub true_eigenvalues: Vec<f64>,
    pub evals: usize,
}

/// Re-optimizes `circuit` on `rho` from zero angles, then reads out.
pub fn diagonalize(
    rho: &DensityMatrix,
    circuit: &Circuit,
    budget: &OptimizerBudget,
    restarts: usize,
    seed: u64,
) -> Result<DiagonalizeReport, HarnessError> {
    if rho.n_qubits() != circuit.n_qubits() {
        return Err(HarnessError::Config(format!(
            "state has {} qubits but the circuit has {}",
            rho.n_qubits(),
            circuit.n_qubits()
        )));
    }
    let fresh = circuit.with_params(&vec![0.0; circuit.n_rotations()])?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stream::RESTARTS));
    let (m, evals) = optimize_with_restarts(rho, &fresh, budget, restarts, &mut rng)?;
    let result = eigenvalue_readout(rho, &fresh.with_params(&m.theta)?)?;
    let truth = rho.eigenvalues();
    let delta = eigenvalue_error(&truth, &result.values(), truth.len())?;
    Ok(DiagonalizeReport { result, delta, true_eigenvalues: truth, evals })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferRow {
    pub state: usize,
    pub final_cost: f64,
    pub delta: f64,
}

/// Applies one fixed circuit structure to `count` fresh Ginibre states.
pub fn transfer(
    circuit: &Circuit,
    count: usize,
    budget: &OptimizerBudget,
    restarts: usize,
    seed: u64,
) -> Result<Vec<TransferRow>, HarnessError> {
    (0..count)
        .map(|i| {
            let s = derive_seed(derive_seed(seed, stream::TRANSFER), i as u64);
            let rho = ginibre_density_matrix(circuit.n_qubits(), &mut ChaCha8Rng::seed_from_u64(s))?;
            let rep = diagonalize(&rho, circuit, budget, restarts, s)?;
            Ok(TransferRow { state: i, final_cost: rep.result.final_cost, delta: rep.delta })
        })
        .collect()
}

pub fn write_summary<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join(name), value)
}

pub fn write_rows<T: Serialize>(dir: &Path, name: &str, comment: &str, rows: &[T]) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    write_table(&dir.join(name), comment, rows)
}
