//! Training cost, eigenvalue readout, eigenvector preparation and the
//! eigenvalue error metric.

use serde::{Deserialize, Serialize};

use crate::circuit::{basis_vector, Circuit};
use crate::error::{Error, Result};
use crate::qsim::{DensityMatrix, C64};

/// Roundoff allowance below zero for reported probabilities.
const NEGATIVE_CLAMP: f64 = 1e-10;

/// `Tr(ρ²) − Tr(D(UρU†)²)`: the purity lost to dephasing after the circuit.
pub fn cost(rho: &DensityMatrix, circuit: &Circuit) -> Result<f64> {
    cost_with_params(rho, circuit, circuit.params())
}

pub fn cost_with_params(rho: &DensityMatrix, circuit: &Circuit, params: &[f64]) -> Result<f64> {
    let out = circuit.apply_with_params(rho, params)?;
    Ok(dephased_purity_gap(rho.purity(), &out))
}

/// Cost given a precomputed input purity and the rotated state.
pub fn dephased_purity_gap(input_purity: f64, rotated: &DensityMatrix) -> f64 {
    let diag: f64 = rotated.diagonal().iter().map(|p| p * p).sum();
    input_purity - diag
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferredEigenvalue {
    /// Basis label, qubit 0 first.
    pub bitstring: String,
    pub value: f64,
}

/// Output of the readout subroutine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalizationResult {
    /// Sorted descending; ties go to the smaller bitstring.
    pub eigenvalues: Vec<InferredEigenvalue>,
    pub final_cost: f64,
    pub circuit: Circuit,
}

impl DiagonalizationResult {
    pub fn values(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|e| e.value).collect()
    }
}

pub fn bitstring(index: usize, n_qubits: usize) -> String {
    (0..n_qubits).map(|q| if index >> (n_qubits - 1 - q) & 1 == 1 { '1' } else { '0' }).collect()
}

pub fn parse_bitstring(bits: &str) -> Result<usize> {
    bits.chars().try_fold(0usize, |acc, ch| match ch {
        '0' => Ok(acc << 1),
        '1' => Ok(acc << 1 | 1),
        other => Err(Error::InvalidArgument(format!("bitstring contains {other:?}"))),
    })
}

/// Reads `⟨b|UρU†|b⟩` for every basis string `b`.
pub fn eigenvalue_readout(rho: &DensityMatrix, circuit: &Circuit) -> Result<DiagonalizationResult> {
    let out = circuit.apply(rho)?;
    let final_cost = dephased_purity_gap(rho.purity(), &out);
    let n = rho.n_qubits();
    let mut pairs: Vec<(usize, f64)> = out
        .diagonal()
        .into_iter()
        .map(|p| if (-NEGATIVE_CLAMP..0.0).contains(&p) { 0.0 } else { p })
        .enumerate()
        .collect();
    pairs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let eigenvalues = pairs
        .into_iter()
        .map(|(i, value)| InferredEigenvalue { bitstring: bitstring(i, n), value })
        .collect();
    Ok(DiagonalizationResult { eigenvalues, final_cost, circuit: circuit.clone() })
}

/// `U(θ)† X^{b_1} ⊗ … ⊗ X^{b_n} |0…0⟩`.
pub fn eigenvector_prepare(circuit: &Circuit, bits: &str) -> Result<Vec<C64>> {
    let n = circuit.n_qubits();
    if bits.chars().count() != n {
        return Err(Error::InvalidArgument(format!("bitstring {bits:?} has length != {n}")));
    }
    let mut psi = basis_vector(n, parse_bitstring(bits)?);
    circuit.apply_inverse_to_vector(&mut psi)?;
    Ok(psi)
}

/// `Σ_{i<m} (λ_i − λ'_i)²` over the `m` largest of two descending sequences.
pub fn eigenvalue_error(true_vals: &[f64], inferred: &[f64], m: usize) -> Result<f64> {
    if true_vals.len() < m || inferred.len() < m {
        return Err(Error::InvalidArgument(format!(
            "need {m} eigenvalues, have {} true and {} inferred",
            true_vals.len(),
            inferred.len()
        )));
    }
    Ok(true_vals[..m].iter().zip(&inferred[..m]).map(|(a, b)| (a - b).powi(2)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Gate;
    use crate::optimizer::{minimize, OptimizerBudget};
    use crate::qsim::Axis;
    use crate::states::ginibre_density_matrix;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn plus() -> DensityMatrix {
        DensityMatrix::from_pure(&[C64::new(1.0, 0.0), C64::new(1.0, 0.0)]).unwrap()
    }

    fn random_circuit(n: usize, len: usize, rng: &mut impl Rng) -> Circuit {
        let mut c = Circuit::new(n).unwrap();
        for _ in 0..len {
            let g = if n > 1 && rng.random_bool(0.3) {
                let a = rng.random_range(0..n);
                Gate::cnot(a, (a + rng.random_range(1..n)) % n)
            } else {
                Gate::Rotation { axis: Axis::from_index(rng.random_range(0..3)).unwrap(), qubit: rng.random_range(0..n) }
            };
            c.push(g, rng.random_range(-PI..PI)).unwrap();
        }
        c
    }

    #[test]
    fn cost_examples() {
        let diag = DensityMatrix::from_diagonal(&[0.6, 0.1, 0.2, 0.1]).unwrap();
        assert_eq!(cost(&diag, &Circuit::new(2).unwrap()).unwrap(), 0.0);
        assert!((cost(&plus(), &Circuit::new(1).unwrap()).unwrap() - 0.5).abs() < 1e-15);
        let mut c = Circuit::new(1).unwrap();
        c.push(Gate::ry(0), -FRAC_PI_2).unwrap();
        assert!(cost(&plus(), &c).unwrap().abs() < 1e-12);
        assert!(cost(&DensityMatrix::maximally_mixed(3).unwrap(), &c).is_err());
    }

    #[test]
    fn cost_lies_between_zero_and_purity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(1..=3);
            let rho = ginibre_density_matrix(n, &mut rng).unwrap();
            let c = random_circuit(n, 8, &mut rng);
            let v = cost(&rho, &c).unwrap();
            assert!(v >= -1e-10 && v <= rho.purity() + 1e-10);
        }
    }

    #[test]
    fn readout_examples() {
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let r = eigenvalue_readout(&mixed, &random_circuit(2, 10, &mut rng)).unwrap();
        assert!(r.values().iter().all(|v| (v - 0.25).abs() < 1e-14));
        // Exact ties keep ascending bitstring order.
        let labels: Vec<&str> = r.eigenvalues.iter().map(|e| e.bitstring.as_str()).collect();
        assert_eq!(labels, ["00", "01", "10", "11"]);

        let diag = DensityMatrix::from_diagonal(&[0.3, 0.7]).unwrap();
        let r = eigenvalue_readout(&diag, &Circuit::new(1).unwrap()).unwrap();
        assert_eq!(r.values(), vec![0.7, 0.3]);
        assert_eq!(r.eigenvalues[0].bitstring, "1");
        let diag = DensityMatrix::from_diagonal(&[0.7, 0.3]).unwrap();
        let r = eigenvalue_readout(&diag, &Circuit::new(1).unwrap()).unwrap();
        assert_eq!(r.eigenvalues[0].bitstring, "0");
        assert_eq!(r.eigenvalues[1].bitstring, "1");
    }

    #[test]
    fn readout_sums_to_one_and_is_majorised() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let n = rng.random_range(1..=3);
            let rho = ginibre_density_matrix(n, &mut rng).unwrap();
            let r = eigenvalue_readout(&rho, &random_circuit(n, 6, &mut rng)).unwrap();
            let vals = r.values();
            assert!((vals.iter().sum::<f64>() - 1.0).abs() < 1e-8);
            assert!(vals.iter().all(|&v| (-1e-10..=1.0).contains(&v)));
            assert!(vals[0] <= rho.eigenvalues()[0] + 1e-8);
        }
    }

    #[test]
    fn converged_readout_recovers_spectrum_and_eigenvectors() {
        // One qubit: a single RY + RZ pair reaches any basis.
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let rho = ginibre_density_matrix(1, &mut rng).unwrap();
        let c = Circuit::from_gates(1, [Gate::rz(0), Gate::ry(0)]).unwrap();
        let m = minimize(|th| cost_with_params(&rho, &c, th).unwrap(), &[0.0, 0.0], &OptimizerBudget::new(400)).unwrap();
        assert!(m.value < 1e-10, "cost {}", m.value);
        let c = c.with_params(&m.theta).unwrap();
        let r = eigenvalue_readout(&rho, &c).unwrap();
        let truth = rho.eigenvalues();
        for (a, b) in r.values().iter().zip(&truth) {
            assert!((a - b).abs() < 1e-5);
        }
        for e in &r.eigenvalues {
            let v = eigenvector_prepare(&c, &e.bitstring).unwrap();
            let vm = DMatrix::from_column_slice(2, 1, &v);
            let rayleigh = (vm.adjoint() * rho.matrix() * &vm)[(0, 0)];
            assert!((rayleigh.re - e.value).abs() < 1e-6);
        }
    }

    #[test]
    fn eigenvector_prepare_examples() {
        let empty = Circuit::new(2).unwrap();
        let v = eigenvector_prepare(&empty, "00").unwrap();
        assert_eq!(v, basis_vector(2, 0));
        let v = eigenvector_prepare(&empty, "10").unwrap();
        assert_eq!(v, basis_vector(2, 2));
        assert!(eigenvector_prepare(&empty, "1").is_err());
        assert!(eigenvector_prepare(&empty, "1x").is_err());
    }

    #[test]
    fn prepared_eigenvectors_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let c = random_circuit(3, 20, &mut rng);
        let vs: Vec<Vec<C64>> = (0..8).map(|i| eigenvector_prepare(&c, &bitstring(i, 3)).unwrap()).collect();
        for i in 0..8 {
            for j in 0..8 {
                let ip: C64 = vs[i].iter().zip(&vs[j]).map(|(a, b)| a.conj() * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((ip - want).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn eigenvalue_error_examples() {
        assert_eq!(eigenvalue_error(&[0.4, 0.3, 0.2, 0.1], &[0.4, 0.3, 0.2, 0.1], 4).unwrap(), 0.0);
        assert!((eigenvalue_error(&[0.5, 0.5], &[0.6, 0.4], 2).unwrap() - 0.02).abs() < 1e-15);
        assert!((eigenvalue_error(&[1.0, 0.0, 0.0, 0.0], &[0.9, 0.1, 0.0, 0.0], 2).unwrap() - 0.02).abs() < 1e-15);
        assert!(eigenvalue_error(&[1.0], &[1.0, 0.0], 2).is_err());
    }

    #[test]
    fn bitstrings_round_trip() {
        for i in 0..16 {
            assert_eq!(parse_bitstring(&bitstring(i, 4)).unwrap(), i);
        }
        assert_eq!(bitstring(2, 2), "10");
    }
}
