//! Target states: Hilbert–Schmidt random mixed states and reduced ground
//! states of the periodic Heisenberg ring.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::qsim::{eig_hermitian, DensityMatrix, C64};

/// Largest ring handled by the dense eigensolver (2^8 = 256 dimensional).
pub const MAX_HEISENBERG_SPINS: usize = 8;

/// `ρ = G G† / Tr(G G†)` with `G` a square matrix of i.i.d. standard complex
/// Gaussians.
pub fn ginibre_density_matrix<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Result<DensityMatrix> {
    if n_qubits == 0 || n_qubits > 10 {
        return Err(Error::InvalidArgument(format!("unsupported qubit count {n_qubits}")));
    }
    let dim = 1usize << n_qubits;
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    });
    let mut gg = &g * g.adjoint();
    // Exact Hermiticity; the product is only Hermitian up to roundoff.
    for i in 0..dim {
        gg[(i, i)].im = 0.0;
        for j in 0..i {
            gg[(i, j)] = gg[(j, i)].conj();
        }
    }
    let tr = gg.trace().re;
    DensityMatrix::new(gg / C64::new(tr, 0.0))
}

/// A periodic ring of `total_spins` spin-1/2 sites whose first half is kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeisenbergSpec {
    total_spins: usize,
}

impl HeisenbergSpec {
    pub fn new(total_spins: usize) -> Result<Self> {
        if total_spins < 2 || !total_spins.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "total spin count must be even and at least 2, got {total_spins}"
            )));
        }
        Ok(HeisenbergSpec { total_spins })
    }

    pub fn total_spins(&self) -> usize {
        self.total_spins
    }

    /// Qubit count of the reduced state.
    pub fn kept(&self) -> usize {
        self.total_spins / 2
    }
}

/// `H = Σ_j S_j·S_{j+1}` over the ring with `S = (X, Y, Z)/√3`.
///
/// Each bond contributes `(XX + YY + ZZ)/3`, which maps `|aa⟩ → |aa⟩` and
/// `|ab⟩ → −|ab⟩ + 2|ba⟩` for `a ≠ b`; the matrix is assembled from those
/// rules directly. For a two-site ring the single bond is counted twice.
pub fn heisenberg_hamiltonian(spec: &HeisenbergSpec) -> DMatrix<C64> {
    let n = spec.total_spins;
    let dim = 1usize << n;
    let mut h = DMatrix::<C64>::zeros(dim, dim);
    let third = 1.0 / 3.0;
    for j in 0..n {
        let k = (j + 1) % n;
        let (mj, mk) = (1usize << (n - 1 - j), 1usize << (n - 1 - k));
        for s in 0..dim {
            let aligned = (s & mj != 0) == (s & mk != 0);
            if aligned {
                h[(s, s)] += third;
            } else {
                h[(s, s)] -= third;
                h[(s ^ mj ^ mk, s)] += 2.0 * third;
            }
        }
    }
    h
}

/// Ground state of the ring with the last half of the spins traced out.
pub fn reduced_ground_state(spec: &HeisenbergSpec) -> Result<DensityMatrix> {
    reduced_ground_state_keeping(spec, &(0..spec.kept()).collect::<Vec<_>>())
}

/// Like [`reduced_ground_state`] but with an arbitrary kept subsystem.
pub fn reduced_ground_state_keeping(spec: &HeisenbergSpec, keep: &[usize]) -> Result<DensityMatrix> {
    if spec.total_spins > MAX_HEISENBERG_SPINS {
        return Err(Error::InvalidArgument(format!(
            "{} spins exceed the dense limit of {MAX_HEISENBERG_SPINS}",
            spec.total_spins
        )));
    }
    let h = heisenberg_hamiltonian(spec);
    let eig = eig_hermitian(&h)?;
    // Values are sorted descending: the ground state is the last column. Among
    // exactly tied minima the solver's first one is taken.
    let min = *eig.values.last().unwrap();
    let col = eig.values.iter().position(|&v| v == min).unwrap();
    let psi: Vec<C64> = eig.vectors.column(col).iter().copied().collect();
    DensityMatrix::from_pure(&psi)?.partial_trace(keep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pauli(i: usize) -> DMatrix<C64> {
        let z = C64::default();
        let o = C64::new(1.0, 0.0);
        let im = C64::new(0.0, 1.0);
        match i {
            0 => DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
            1 => DMatrix::from_row_slice(2, 2, &[z, -im, im, z]),
            _ => DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
        }
    }

    /// Oracle: Kronecker products of Pauli strings.
    fn hamiltonian_by_kron(n: usize) -> DMatrix<C64> {
        let dim = 1 << n;
        let mut h = DMatrix::<C64>::zeros(dim, dim);
        for j in 0..n {
            let k = (j + 1) % n;
            for p in 0..3 {
                let mut term = DMatrix::<C64>::identity(1, 1);
                for site in 0..n {
                    let f = if site == j || site == k { pauli(p) } else { DMatrix::identity(2, 2) };
                    term = term.kronecker(&f);
                }
                // A two-site ring has j == k only if n == 1, which is excluded.
                h += term / C64::new(3.0, 0.0);
            }
        }
        h
    }

    #[test]
    fn ginibre_states_are_valid_full_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..1000 {
            let rho = ginibre_density_matrix(2, &mut rng).unwrap();
            assert!((rho.trace() - 1.0).norm() < 1e-12);
            let eigs = rho.eigenvalues();
            assert!(*eigs.last().unwrap() > 0.0);
            let mean = eigs.iter().sum::<f64>() / eigs.len() as f64;
            assert!((mean - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn ginibre_seeds_differ() {
        let a = ginibre_density_matrix(2, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = ginibre_density_matrix(2, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let c = ginibre_density_matrix(2, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let dist = (a.matrix() - b.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(dist > 1e-6);
        assert_eq!(a, c);
    }

    #[test]
    fn hamiltonian_matches_pauli_kronecker_oracle() {
        for n in [2, 4, 6] {
            let spec = HeisenbergSpec::new(n).unwrap();
            let diff = heisenberg_hamiltonian(&spec) - hamiltonian_by_kron(n);
            assert!(diff.iter().all(|z| z.norm() < 1e-12), "n = {n}");
        }
    }

    #[test]
    fn two_site_ring_spectrum() {
        let spec = HeisenbergSpec::new(2).unwrap();
        let e = eig_hermitian(&heisenberg_hamiltonian(&spec)).unwrap();
        let want = [2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, -2.0];
        for (got, want) in e.values.iter().zip(want) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn hamiltonian_is_hermitian_traceless_and_conserves_sz() {
        let spec = HeisenbergSpec::new(6).unwrap();
        let h = heisenberg_hamiltonian(&spec);
        assert!(crate::qsim::hermitian_deviation(&h) < 1e-12);
        assert!(h.trace().norm() < 1e-10);
        let dim = h.nrows();
        let sz = DMatrix::from_fn(dim, dim, |r, c| {
            if r == c {
                C64::new((0..6).map(|q| if r >> q & 1 == 0 { 1.0 } else { -1.0 }).sum(), 0.0)
            } else {
                C64::default()
            }
        });
        let comm = &h * &sz - &sz * &h;
        assert!(comm.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn odd_and_oversized_rings_are_rejected() {
        assert!(HeisenbergSpec::new(5).is_err());
        assert!(HeisenbergSpec::new(0).is_err());
        let big = HeisenbergSpec::new(10).unwrap();
        assert!(reduced_ground_state(&big).is_err());
    }

    #[test]
    fn six_spin_reduced_state() {
        let spec = HeisenbergSpec::new(6).unwrap();
        let rho = reduced_ground_state(&spec).unwrap();
        assert_eq!(rho.n_qubits(), 3);
        let first = rho.eigenvalues();
        assert!((first.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        let last = reduced_ground_state_keeping(&spec, &[3, 4, 5]).unwrap().eigenvalues();
        for (a, b) in first.iter().zip(&last) {
            assert!((a - b).abs() < 1e-10);
        }
        // Deterministic.
        assert_eq!(reduced_ground_state(&spec).unwrap(), rho);
    }
}
