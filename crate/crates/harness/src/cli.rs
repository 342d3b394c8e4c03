use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use vqsd_core::circuit::{Circuit, LheaVariant};

use crate::config::{load_state, ExperimentConfig, Problem};
use crate::error::HarnessError;
use crate::recipes::{
    diagonalize, persist_run, run_lhea_baseline, run_random_agent, run_threshold_sweep, run_training, transfer,
    write_rows, write_summary, TransferRow,
};

#[derive(Debug, Parser)]
#[command(name = "rlvqsd", version, about = "Reinforcement-learned circuits for variational state diagonalization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON experiment config; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub episodes: Option<usize>,
    #[arg(long, global = true)]
    pub zeta: Option<f64>,
    /// Permit 4-qubit training and baselines.
    #[arg(long, global = true)]
    pub allow_long_run: bool,
    /// Random Ginibre target with this many qubits.
    #[arg(long, global = true, conflicts_with_all = ["heisenberg", "state_file"])]
    pub qubits: Option<usize>,
    /// Reduced Heisenberg ground state of a ring with this many spins.
    #[arg(long, global = true, conflicts_with = "state_file")]
    pub heisenberg: Option<usize>,
    /// Target density matrix JSON.
    #[arg(long, global = true)]
    pub state_file: Option<PathBuf>,
    /// Optimizer evaluations per step or per run.
    #[arg(long, global = true)]
    pub max_evals: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the DDQN agent with alternating test episodes.
    Train,
    /// Same loop with uniformly random actions and no learning.
    RandomAgent,
    /// Fixed layered ansatz, one row per layer count.
    LheaBaseline {
        #[arg(long)]
        layers: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        variant: Option<LheaVariant>,
    },
    /// One training run per success threshold.
    ThresholdSweep {
        /// Comma-separated, strictly descending.
        #[arg(long, value_delimiter = ',')]
        zetas: Option<Vec<f64>>,
    },
    /// Re-optimize a circuit's angles on a state and read out the spectrum.
    Diagonalize {
        #[arg(long)]
        circuit: PathBuf,
        /// Target state; defaults to the configured problem.
        #[arg(long)]
        state: Option<PathBuf>,
        /// Instead, apply the circuit structure to this many fresh random states.
        #[arg(long)]
        transfer: Option<usize>,
        #[arg(long, default_value_t = 1)]
        restarts: usize,
    },
    /// Write the configured target state as JSON.
    GenState,
}

impl Common {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(e) = self.episodes {
            cfg.episodes = e;
        }
        if self.zeta.is_some() {
            cfg.zeta = self.zeta;
        }
        if self.allow_long_run {
            cfg.allow_long_run = true;
        }
        if let Some(n) = self.qubits {
            cfg.problem = Problem::Ginibre { n_qubits: n };
        }
        if let Some(s) = self.heisenberg {
            cfg.problem = Problem::Heisenberg { total_spins: s };
        }
        if let Some(p) = &self.state_file {
            cfg.problem = Problem::File { path: p.clone() };
        }
        if self.max_evals.is_some() {
            cfg.optimizer.max_evals = self.max_evals;
        }
    }
}

#[derive(Serialize)]
struct TransferSummary {
    states: usize,
    in_band: usize,
    band: [f64; 2],
    median_delta: f64,
}

pub fn run(cli: Cli) -> Result<(), HarnessError> {
    let mut cfg = match &cli.common.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    cli.common.apply(&mut cfg);
    let out = cfg.out.clone();
    match cli.command {
        Command::Train => {
            let run = run_training(&cfg.resolve()?)?;
            persist_run(&out, &run)?;
            println!("{} successes; logs in {}", run.summary.successes(), out.display());
        }
        Command::RandomAgent => {
            let run = run_random_agent(&cfg.resolve()?)?;
            persist_run(&out, &run)?;
            println!("{} successes; logs in {}", run.summary.successes(), out.display());
        }
        Command::LheaBaseline { layers, trials, restarts, variant } => {
            let l = &mut cfg.lhea;
            l.layers = layers.unwrap_or(l.layers);
            l.trials = trials.unwrap_or(l.trials);
            l.restarts = restarts.unwrap_or(l.restarts);
            l.variant = variant.unwrap_or(l.variant);
            let rows = run_lhea_baseline(&cfg.resolve()?)?;
            write_rows(&out, "lhea.csv", "rlvqsd lhea v1", &rows)?;
            write_summary(&out, "summary.json", &rows)?;
            println!("{} layer rows in {}", rows.len(), out.display());
        }
        Command::ThresholdSweep { zetas } => {
            if let Some(z) = zetas {
                cfg.zetas = z;
            }
            let (rows, runs) = run_threshold_sweep(&cfg.resolve()?)?;
            for (i, run) in runs.iter().enumerate() {
                persist_run(&out.join(format!("zeta_{i}")), run)?;
            }
            write_rows(&out, "sweep.csv", "rlvqsd sweep v1", &rows)?;
            write_summary(&out, "summary.json", &rows)?;
            println!("{} thresholds in {}", rows.len(), out.display());
        }
        Command::Diagonalize { circuit, state, transfer: count, restarts } => {
            let text = std::fs::read_to_string(&circuit)
                .map_err(|e| HarnessError::Config(format!("cannot read circuit {}: {e}", circuit.display())))?;
            let circuit: Circuit = serde_json::from_str(&text)
                .map_err(|e| HarnessError::Config(format!("bad circuit file: {e}")))?;
            let resolved_budget = |cfg: &ExperimentConfig, n: usize| {
                let (_, evals, _) = crate::config::size_defaults(n);
                vqsd_core::OptimizerBudget {
                    max_evals: cfg.optimizer.max_evals.unwrap_or(evals),
                    initial_step: cfg.optimizer.initial_step,
                    final_tolerance: cfg.optimizer.final_tolerance,
                }
            };
            let budget = resolved_budget(&cfg, circuit.n_qubits());
            budget.validate().map_err(HarnessError::config)?;
            match count {
                Some(k) => {
                    let rows = transfer(&circuit, k, &budget, restarts, cfg.seed)?;
                    write_rows(&out, "transfer.csv", "rlvqsd transfer v1", &rows)?;
                    let summary = transfer_summary(&rows);
                    write_summary(&out, "result.json", &summary)?;
                    println!("{} of {} states within the band", summary.in_band, summary.states);
                }
                None => {
                    let rho = match state {
                        Some(p) => load_state(&p)?,
                        None => cfg.problem.build(cfg.seed)?,
                    };
                    let report = diagonalize(&rho, &circuit, &budget, restarts, cfg.seed)?;
                    write_summary(&out, "result.json", &report)?;
                    println!("cost {:.3e}, delta {:.3e}", report.result.final_cost, report.delta);
                }
            }
        }
        Command::GenState => {
            let rho = cfg.problem.build(cfg.seed)?;
            write_summary(&out, "state.json", &rho)?;
            println!("{}", out.join("state.json").display());
        }
    }
    Ok(())
}

fn transfer_summary(rows: &[TransferRow]) -> TransferSummary {
    let band = [1e-4, 1e-3];
    let mut deltas: Vec<f64> = rows.iter().map(|r| r.delta).collect();
    deltas.sort_by(f64::total_cmp);
    TransferSummary {
        states: rows.len(),
        in_band: deltas.iter().filter(|d| (band[0]..=band[1]).contains(*d)).count(),
        band,
        median_delta: deltas.get(deltas.len() / 2).copied().unwrap_or(f64::NAN),
    }
}
