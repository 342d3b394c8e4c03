//! Browser bindings: three small operations that return JSON for `www/index.html`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use vqsd_core::circuit::{build_lhea, Circuit, Gate, LheaVariant};
use vqsd_core::encoding::{encode_state, ActionSpace};
use vqsd_core::optimizer::{minimize, OptimizerBudget};
use vqsd_core::states::{ginibre_density_matrix, reduced_ground_state, HeisenbergSpec};
use vqsd_core::vqsd::{cost_with_params, eigenvalue_error, eigenvalue_readout};
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct Spectrum {
    pub total_spins: usize,
    pub n_qubits: usize,
    /// Descending.
    pub eigenvalues: Vec<f64>,
}

pub fn spectrum(total_spins: usize) -> Result<Spectrum, String> {
    let spec = HeisenbergSpec::new(total_spins).map_err(|e| e.to_string())?;
    let rho = reduced_ground_state(&spec).map_err(|e| e.to_string())?;
    Ok(Spectrum { total_spins, n_qubits: rho.n_qubits(), eigenvalues: rho.eigenvalues() })
}

#[derive(Debug, Serialize)]
pub struct Trace {
    pub gates: usize,
    pub depth: usize,
    pub parameters: usize,
    /// Best cost after each objective evaluation.
    pub best_cost: Vec<f64>,
    pub final_cost: f64,
    pub delta: f64,
    pub inferred: Vec<f64>,
    pub true_eigenvalues: Vec<f64>,
}

/// `ansatz` is `lhea3`, `lhea1` or `fixed` (two qubits, ten rotations, two CNOTs).
pub fn ansatz_for(ansatz: &str, n_qubits: usize, layers: usize) -> Result<Circuit, String> {
    let c = match ansatz {
        "lhea3" => build_lhea(n_qubits, layers, LheaVariant::ThreeParam),
        "lhea1" => build_lhea(n_qubits, layers, LheaVariant::OneParam),
        "fixed" if n_qubits == 2 => Circuit::from_gates(
            2,
            [
                Gate::rx(0),
                Gate::ry(0),
                Gate::rx(1),
                Gate::ry(1),
                Gate::cnot(0, 1),
                Gate::rx(0),
                Gate::ry(0),
                Gate::rx(1),
                Gate::ry(1),
                Gate::cnot(1, 0),
                Gate::ry(0),
                Gate::ry(1),
            ],
        ),
        "fixed" => return Err("the fixed ansatz has two qubits".into()),
        other => return Err(format!("unknown ansatz {other:?}")),
    };
    c.map_err(|e| e.to_string())
}

pub fn trace(ansatz: &str, n_qubits: usize, layers: usize, max_evals: usize, seed: u64) -> Result<Trace, String> {
    let circuit = ansatz_for(ansatz, n_qubits, layers)?;
    let rho = ginibre_density_matrix(n_qubits, &mut ChaCha8Rng::seed_from_u64(seed)).map_err(|e| e.to_string())?;
    let budget = OptimizerBudget { max_evals, ..OptimizerBudget::default() };
    let mut best_cost = Vec::new();
    let m = minimize(
        |th| {
            let c = cost_with_params(&rho, &circuit, th).unwrap_or(f64::NAN);
            let prev = best_cost.last().copied().unwrap_or(f64::INFINITY);
            best_cost.push(if c < prev { c } else { prev });
            c
        },
        circuit.params(),
        &budget,
    )
    .map_err(|e| e.to_string())?;
    let tuned = circuit.with_params(&m.theta).map_err(|e| e.to_string())?;
    let inferred = eigenvalue_readout(&rho, &tuned).map_err(|e| e.to_string())?.values();
    let truth = rho.eigenvalues();
    let delta = eigenvalue_error(&truth, &inferred, truth.len()).map_err(|e| e.to_string())?;
    let counts = circuit.gate_counts();
    Ok(Trace {
        gates: counts.total(),
        depth: counts.depth,
        parameters: circuit.n_rotations(),
        best_cost,
        final_cost: m.value,
        delta,
        inferred,
        true_eigenvalues: truth,
    })
}

#[derive(Debug, Serialize)]
pub struct TensorView {
    pub n_qubits: usize,
    pub action_space: usize,
    pub gates: Vec<String>,
    pub depth: usize,
    /// `[slab][row][qubit]`; rows `0..n` are CNOT controls, then X, Y, Z.
    pub tensor: vqsd_core::encoding::RlStateTensor,
}

/// `actions` is a whitespace or comma separated list of action indices.
pub fn tensor_view(n_qubits: usize, actions: &str, d_max: usize) -> Result<TensorView, String> {
    let space = ActionSpace::new(n_qubits).map_err(|e| e.to_string())?;
    let mut circuit = Circuit::new(n_qubits).map_err(|e| e.to_string())?;
    for tok in actions.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
        let a: usize = tok.parse().map_err(|_| format!("not an action index: {tok:?}"))?;
        let g = space.gate(a).map_err(|e| e.to_string())?;
        circuit.push(g, 0.0).map_err(|e| e.to_string())?;
    }
    let tensor = encode_state(&circuit, d_max).map_err(|e| e.to_string())?;
    Ok(TensorView {
        n_qubits,
        action_space: space.size(),
        gates: circuit.gates().iter().map(|g| g.to_string()).collect(),
        depth: circuit.depth(),
        tensor,
    })
}

fn json<T: Serialize>(v: Result<T, String>) -> Result<String, String> {
    v.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
}

#[wasm_bindgen]
pub fn heisenberg_spectrum(total_spins: usize) -> Result<String, String> {
    json(spectrum(total_spins))
}

#[wasm_bindgen]
pub fn optimize_trace(ansatz: &str, n_qubits: usize, layers: usize, max_evals: usize, seed: u32) -> Result<String, String> {
    json(trace(ansatz, n_qubits, layers, max_evals, seed as u64))
}

#[wasm_bindgen]
pub fn encode_actions(n_qubits: usize, actions: &str, d_max: usize) -> Result<String, String> {
    json(tensor_view(n_qubits, actions, d_max))
}
