//! Dense density-matrix simulation.
//!
//! Basis-state indices are big-endian in the qubit label: qubit 0 is the most
//! significant bit. Gates are applied by index arithmetic over the basis, so a
//! k-qubit gate on an N-qubit state costs O(4^N · 2^k) rather than the
//! O(8^N) of a materialised Kronecker product.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;
const EIG_HERMITIAN_TOL: f64 = 1e-8;

#[inline]
fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Rotation axis of a single-qubit rotation gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Axis> {
        Axis::ALL.get(i).copied()
    }
}

/// A unitary acting on one or two qubits, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GateMatrix {
    dim: usize,
    data: [C64; 16],
}

impl GateMatrix {
    /// Builds a gate from row-major entries. `dim` must be 2 or 4.
    pub fn from_row_major(dim: usize, data: Vec<C64>) -> Result<Self> {
        if dim != 2 && dim != 4 {
            return Err(Error::InvalidArgument(format!("gate dimension {dim} is not 2 or 4")));
        }
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, actual: data.len() });
        }
        let mut buf = [C64::default(); 16];
        buf[..dim * dim].copy_from_slice(&data);
        let g = GateMatrix { dim, data: buf };
        let dev = g.unitarity_error();
        if dev > 1e-12 {
            return Err(Error::InvalidArgument(format!("matrix is not unitary (deviation {dev:e})")));
        }
        Ok(g)
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = [C64::default(); 16];
        for i in 0..dim {
            data[i * dim + i] = c(1.0, 0.0);
        }
        GateMatrix { dim, data }
    }

    /// CNOT with the first of its two qubits as control.
    pub fn cnot() -> Self {
        let mut g = GateMatrix::identity(4);
        g.data[2 * 4 + 2] = C64::default();
        g.data[3 * 4 + 3] = C64::default();
        g.data[2 * 4 + 3] = c(1.0, 0.0);
        g.data[3 * 4 + 2] = c(1.0, 0.0);
        g
    }

    pub fn cz() -> Self {
        let mut g = GateMatrix::identity(4);
        g.data[15] = c(-1.0, 0.0);
        g
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_qubits(&self) -> usize {
        if self.dim == 2 {
            1
        } else {
            2
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> C64 {
        debug_assert!(row < self.dim && col < self.dim);
        self.data[row * self.dim + col]
    }

    pub fn to_dmatrix(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.dim, self.dim, |r, c| self.get(r, c))
    }

    pub fn adjoint(&self) -> GateMatrix {
        let d = self.dim;
        let mut data = [C64::default(); 16];
        for (i, slot) in data.iter_mut().take(d * d).enumerate() {
            *slot = self.get(i % d, i / d).conj();
        }
        GateMatrix { dim: d, data }
    }

    /// max |(G G†)_{ij} - δ_{ij}|
    pub fn unitarity_error(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let mut s = C64::default();
                for k in 0..d {
                    s += self.get(i, k) * self.get(j, k).conj();
                }
                if i == j {
                    s -= 1.0;
                }
                worst = worst.max(s.norm());
            }
        }
        worst
    }
}

/// `exp(-i·angle·P/2)` for the Pauli matrix `P` selected by `axis`.
pub fn rotation_matrix(axis: Axis, angle: f64) -> Result<GateMatrix> {
    if !angle.is_finite() {
        return Err(Error::InvalidArgument(format!("rotation angle {angle} is not finite")));
    }
    Ok(rotation_unchecked(axis, angle))
}

#[inline]
pub(crate) fn rotation_unchecked(axis: Axis, angle: f64) -> GateMatrix {
    let (s, co) = (angle / 2.0).sin_cos();
    let entries = match axis {
        Axis::X => [c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0)],
        Axis::Y => [c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)],
        Axis::Z => [c(co, -s), C64::default(), C64::default(), c(co, s)],
    };
    let mut data = [C64::default(); 16];
    data[..4].copy_from_slice(&entries);
    GateMatrix { dim: 2, data }
}

/// Applies `gate` on `qubits` to a state vector of `n_qubits` qubits in place.
pub fn apply_gate_to_vector(psi: &mut [C64], n_qubits: usize, gate: &GateMatrix, qubits: &[usize]) -> Result<()> {
    let dim = 1usize << n_qubits;
    if psi.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, actual: psi.len() });
    }
    for (i, &q) in qubits.iter().enumerate() {
        if q >= n_qubits {
            return Err(Error::QubitOutOfRange { index: q, n_qubits });
        }
        if qubits[..i].contains(&q) {
            return Err(Error::InvalidArgument(format!("qubit {q} repeated")));
        }
    }
    let k = qubits.len();
    if gate.dim() != 1 << k {
        return Err(Error::DimensionMismatch { expected: 1 << k, actual: gate.dim() });
    }
    let masks: Vec<usize> = qubits.iter().map(|&q| 1usize << (n_qubits - 1 - q)).collect();
    let all: usize = masks.iter().sum();
    let offsets: Vec<usize> = (0..gate.dim())
        .map(|s| (0..k).filter(|&j| s & (1 << (k - 1 - j)) != 0).map(|j| masks[j]).sum())
        .collect();
    let mut buf = vec![C64::default(); gate.dim()];
    for b in (0..dim).filter(|i| i & all == 0) {
        for (s, slot) in buf.iter_mut().enumerate() {
            *slot = psi[b + offsets[s]];
        }
        for (s, &off) in offsets.iter().enumerate() {
            psi[b + off] = buf.iter().enumerate().map(|(t, &v)| gate.get(s, t) * v).sum();
        }
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Column `i` is the unit eigenvector for `values[i]`.
    pub vectors: DMatrix<C64>,
}

pub fn hermitian_deviation(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn eig_hermitian(m: &DMatrix<C64>) -> Result<HermitianEigen> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), actual: m.ncols() });
    }
    let dev = hermitian_deviation(m);
    if dev > EIG_HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    // Stable sort keeps the solver's order among exact ties.
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), m.ncols(), |r, col| eig.eigenvectors[(r, order[col])]);
    Ok(HermitianEigen { values, vectors })
}

/// A Hermitian, positive semidefinite, unit-trace matrix on `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    data: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validates `data` against every density-matrix invariant.
    pub fn new(data: DMatrix<C64>) -> Result<Self> {
        let dim = data.nrows();
        if dim != data.ncols() || dim < 2 || !dim.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "density matrix must be square with power-of-two dimension >= 2, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        let rho = DensityMatrix { n_qubits: dim.trailing_zeros() as usize, data };
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_raw(n_qubits: usize, data: DMatrix<C64>) -> Self {
        let rho = DensityMatrix { n_qubits, data };
        #[cfg(debug_assertions)]
        {
            let trace = rho.trace();
            debug_assert!((trace.re - 1.0).abs() < 1e-8 && trace.im.abs() < 1e-8, "trace {trace}");
            debug_assert!(hermitian_deviation(&rho.data) < 1e-8);
        }
        rho
    }

    pub fn validate(&self) -> Result<()> {
        let dev = hermitian_deviation(&self.data);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = self.trace();
        if (tr - 1.0).norm() > TRACE_TOL {
            return Err(Error::InvalidArgument(format!("trace {tr} is not 1")));
        }
        let min = self.eigenvalues().last().copied().unwrap_or(0.0);
        if min < -PSD_TOL {
            return Err(Error::InvalidArgument(format!("smallest eigenvalue {min:e} is negative")));
        }
        Ok(())
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalised) state vector.
    pub fn from_pure(psi: &[C64]) -> Result<Self> {
        let dim = psi.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("state vector length {dim} is not a power of two")));
        }
        let norm2: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
        if norm2 <= 0.0 || !norm2.is_finite() {
            return Err(Error::InvalidArgument("state vector has zero norm".into()));
        }
        let data = DMatrix::from_fn(dim, dim, |r, col| psi[r] * psi[col].conj() / norm2);
        Ok(DensityMatrix::from_raw(dim.trailing_zeros() as usize, data))
    }

    pub fn basis_state(n_qubits: usize, index: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if n_qubits == 0 || index >= dim {
            return Err(Error::InvalidArgument(format!("basis index {index} invalid for {n_qubits} qubits")));
        }
        let mut data = DMatrix::zeros(dim, dim);
        data[(index, index)] = c(1.0, 0.0);
        Ok(DensityMatrix::from_raw(n_qubits, data))
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidArgument("need at least one qubit".into()));
        }
        let dim = 1usize << n_qubits;
        let data = DMatrix::from_diagonal_element(dim, dim, c(1.0 / dim as f64, 0.0));
        Ok(DensityMatrix::from_raw(n_qubits, data))
    }

    /// Diagonal state with the given probabilities, which must sum to one.
    pub fn from_diagonal(probs: &[f64]) -> Result<Self> {
        let data = DMatrix::from_fn(probs.len(), probs.len(), |r, col| {
            if r == col {
                c(probs[r], 0.0)
            } else {
                C64::default()
            }
        });
        DensityMatrix::new(data)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.data
    }

    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    /// Real parts of the diagonal, `⟨b|ρ|b⟩` for each basis index `b`.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.data[(i, i)].re).collect()
    }

    /// `Tr(ρ²)`, computed as the squared Frobenius norm of a Hermitian matrix.
    pub fn purity(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// The dephasing channel: zero every off-diagonal entry.
    pub fn dephase(&self) -> DensityMatrix {
        let dim = self.dim();
        let data = DMatrix::from_fn(dim, dim, |r, col| if r == col { self.data[(r, r)] } else { C64::default() });
        DensityMatrix::from_raw(self.n_qubits, data)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        // The type invariant guarantees Hermiticity.
        eig_hermitian(&self.data).map(|e| e.values).unwrap_or_default()
    }

    fn check_qubits(&self, qubits: &[usize]) -> Result<()> {
        for (i, &q) in qubits.iter().enumerate() {
            if q >= self.n_qubits {
                return Err(Error::QubitOutOfRange { index: q, n_qubits: self.n_qubits });
            }
            if qubits[..i].contains(&q) {
                return Err(Error::InvalidArgument(format!("qubit {q} repeated")));
            }
        }
        Ok(())
    }

    /// Returns `G ρ G†` with `G` acting on `qubits` (first listed qubit is the
    /// most significant bit of the gate's own index).
    pub fn apply_gate(&self, gate: &GateMatrix, qubits: &[usize]) -> Result<DensityMatrix> {
        let mut out = self.clone();
        out.apply_gate_mut(gate, qubits)?;
        Ok(out)
    }

    pub fn apply_gate_mut(&mut self, gate: &GateMatrix, qubits: &[usize]) -> Result<()> {
        self.check_qubits(qubits)?;
        if gate.dim() != 1 << qubits.len() {
            return Err(Error::DimensionMismatch { expected: 1 << qubits.len(), actual: gate.dim() });
        }
        match qubits {
            [q] => self.apply_1q(gate, *q),
            _ => self.apply_kq(gate, qubits),
        }
        Ok(())
    }

    fn apply_1q(&mut self, g: &GateMatrix, q: usize) {
        let dim = self.dim();
        let mask = 1usize << (self.n_qubits - 1 - q);
        let (g00, g01, g10, g11) = (g.get(0, 0), g.get(0, 1), g.get(1, 0), g.get(1, 1));
        let (h00, h01, h10, h11) = (g00.conj(), g01.conj(), g10.conj(), g11.conj());
        // Column-major storage: entry (r, c) lives at c * dim + r.
        let a = self.data.as_mut_slice();
        // ρ ← G ρ
        for col in 0..dim {
            let base = col * dim;
            for r0 in (0..dim).filter(|r| r & mask == 0) {
                let r1 = r0 | mask;
                let (x, y) = (a[base + r0], a[base + r1]);
                a[base + r0] = g00 * x + g01 * y;
                a[base + r1] = g10 * x + g11 * y;
            }
        }
        // ρ ← ρ G†
        for c0 in (0..dim).filter(|col| col & mask == 0) {
            let c1 = c0 | mask;
            for r in 0..dim {
                let (x, y) = (a[c0 * dim + r], a[c1 * dim + r]);
                a[c0 * dim + r] = x * h00 + y * h01;
                a[c1 * dim + r] = x * h10 + y * h11;
            }
        }
    }

    fn apply_kq(&mut self, g: &GateMatrix, qubits: &[usize]) {
        let n = self.n_qubits;
        let dim = self.dim();
        let k = qubits.len();
        let gd = 1usize << k;
        let masks: Vec<usize> = qubits.iter().map(|&q| 1usize << (n - 1 - q)).collect();
        let all: usize = masks.iter().sum();
        // offsets[s] is the full-index contribution of gate sub-index s.
        let offsets: Vec<usize> = (0..gd)
            .map(|s| {
                (0..k).filter(|&j| s & (1 << (k - 1 - j)) != 0).map(|j| masks[j]).sum()
            })
            .collect();
        let bases: Vec<usize> = (0..dim).filter(|i| i & all == 0).collect();
        let a = self.data.as_mut_slice();
        let mut buf = vec![C64::default(); gd];
        for col in 0..dim {
            for &b in &bases {
                for (s, slot) in buf.iter_mut().enumerate() {
                    *slot = a[col * dim + b + offsets[s]];
                }
                for (s, &off) in offsets.iter().enumerate() {
                    let mut acc = C64::default();
                    for (t, &v) in buf.iter().enumerate() {
                        acc += g.get(s, t) * v;
                    }
                    a[col * dim + b + off] = acc;
                }
            }
        }
        for r in 0..dim {
            for &b in &bases {
                for (s, slot) in buf.iter_mut().enumerate() {
                    *slot = a[(b + offsets[s]) * dim + r];
                }
                for (s, &off) in offsets.iter().enumerate() {
                    let mut acc = C64::default();
                    for (t, &v) in buf.iter().enumerate() {
                        acc += v * g.get(s, t).conj();
                    }
                    a[(b + off) * dim + r] = acc;
                }
            }
        }
    }

    /// Traces out every qubit not in `keep`. Kept qubits retain their
    /// relative order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        self.check_qubits(keep)?;
        if keep.is_empty() || keep.len() >= self.n_qubits {
            return Err(Error::InvalidArgument(format!(
                "keep set must be a nonempty strict subset of {} qubits",
                self.n_qubits
            )));
        }
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        let n = self.n_qubits;
        let env: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
        let spread = |bits: usize, qs: &[usize]| -> usize {
            let m = qs.len();
            qs.iter()
                .enumerate()
                .filter(|(j, _)| bits & (1 << (m - 1 - j)) != 0)
                .map(|(_, &q)| 1usize << (n - 1 - q))
                .sum()
        };
        let kd = 1usize << keep.len();
        let ed = 1usize << env.len();
        let kidx: Vec<usize> = (0..kd).map(|b| spread(b, &keep)).collect();
        let eidx: Vec<usize> = (0..ed).map(|b| spread(b, &env)).collect();
        let data = DMatrix::from_fn(kd, kd, |i, j| {
            eidx.iter().map(|&e| self.data[(kidx[i] + e, kidx[j] + e)]).sum()
        });
        Ok(DensityMatrix::from_raw(keep.len(), data))
    }
}

#[derive(Serialize, Deserialize)]
struct DensityMatrixJson {
    n_qubits: usize,
    rows: RowsJson,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RowsJson {
    /// Row-major list of `[re, im]` pairs.
    Flat(Vec<[f64; 2]>),
    /// One inner list of `[re, im]` pairs per row.
    Nested(Vec<Vec<[f64; 2]>>),
}

impl Serialize for DensityMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let dim = self.dim();
        let mut rows = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for col in 0..dim {
                let z = self.data[(r, col)];
                rows.push([z.re, z.im]);
            }
        }
        DensityMatrixJson { n_qubits: self.n_qubits, rows: RowsJson::Flat(rows) }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = DensityMatrixJson::deserialize(d)?;
        if raw.n_qubits == 0 || raw.n_qubits > 12 {
            return Err(D::Error::custom(format!("unsupported n_qubits {}", raw.n_qubits)));
        }
        let dim = 1usize << raw.n_qubits;
        let flat: Vec<[f64; 2]> = match raw.rows {
            RowsJson::Flat(v) => v,
            RowsJson::Nested(rows) => {
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(D::Error::custom("nested rows do not form a square matrix"));
                }
                rows.into_iter().flatten().collect()
            }
        };
        if flat.len() != dim * dim {
            return Err(D::Error::custom(format!("expected {} entries, found {}", dim * dim, flat.len())));
        }
        let data = DMatrix::from_fn(dim, dim, |r, col| {
            let [re, im] = flat[r * dim + col];
            c(re, im)
        });
        DensityMatrix::new(data).map_err(D::Error::custom)
    }
}
