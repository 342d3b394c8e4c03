//! Parameterised gate sequences, moment scheduling and the layered
//! hardware-efficient ansatz.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::{apply_gate_to_vector, rotation_unchecked, Axis, DensityMatrix, GateMatrix, C64};

/// One gate of an ansatz. Rotations own one entry of the circuit's parameter
/// vector, assigned in order of appearance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gate {
    Rotation { axis: Axis, qubit: usize },
    Cnot { control: usize, target: usize },
    /// Controlled-Z; only used by the one-parameter LHEA block.
    Cz { a: usize, b: usize },
}

impl Gate {
    pub fn rx(qubit: usize) -> Gate {
        Gate::Rotation { axis: Axis::X, qubit }
    }

    pub fn ry(qubit: usize) -> Gate {
        Gate::Rotation { axis: Axis::Y, qubit }
    }

    pub fn rz(qubit: usize) -> Gate {
        Gate::Rotation { axis: Axis::Z, qubit }
    }

    pub fn cnot(control: usize, target: usize) -> Gate {
        Gate::Cnot { control, target }
    }

    pub fn is_rotation(&self) -> bool {
        matches!(self, Gate::Rotation { .. })
    }

    pub fn qubits(&self) -> Vec<usize> {
        let (arr, len) = self.qubit_array();
        arr[..len].to_vec()
    }

    #[inline]
    pub(crate) fn qubit_array(&self) -> ([usize; 2], usize) {
        match *self {
            Gate::Rotation { qubit, .. } => ([qubit, 0], 1),
            Gate::Cnot { control, target } => ([control, target], 2),
            Gate::Cz { a, b } => ([a, b], 2),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Gate::Rotation { axis: Axis::X, .. } => "RX",
            Gate::Rotation { axis: Axis::Y, .. } => "RY",
            Gate::Rotation { axis: Axis::Z, .. } => "RZ",
            Gate::Cnot { .. } => "CNOT",
            Gate::Cz { .. } => "CZ",
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        let qs = self.qubits();
        for &q in &qs {
            if q >= n_qubits {
                return Err(Error::QubitOutOfRange { index: q, n_qubits });
            }
        }
        if qs.len() == 2 && qs[0] == qs[1] {
            return Err(Error::InvalidArgument(format!("{self} acts twice on qubit {}", qs[0])));
        }
        Ok(())
    }

    fn matrix(&self, angle: f64) -> GateMatrix {
        match *self {
            Gate::Rotation { axis, .. } => rotation_unchecked(axis, angle),
            Gate::Cnot { .. } => GateMatrix::cnot(),
            Gate::Cz { .. } => GateMatrix::cz(),
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gate::Rotation { qubit, .. } => write!(f, "{}({qubit})", self.kind()),
            Gate::Cnot { control, target } => write!(f, "CNOT({control},{target})"),
            Gate::Cz { a, b } => write!(f, "CZ({a},{b})"),
        }
    }
}

/// Gate tallies of a circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GateCounts {
    pub one_qubit: usize,
    pub two_qubit: usize,
    pub depth: usize,
}

impl GateCounts {
    pub fn total(&self) -> usize {
        self.one_qubit + self.two_qubit
    }
}

/// Entangling block used by [`build_lhea`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LheaVariant {
    /// RY on both qubits, CZ, RY on both qubits.
    OneParam,
    /// RZ·RY·RZ on both qubits, CNOT, RZ·RY·RZ on both qubits.
    ThreeParam,
}

impl std::str::FromStr for LheaVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one-param" | "one" | "1" => Ok(LheaVariant::OneParam),
            "three-param" | "three" | "3" => Ok(LheaVariant::ThreeParam),
            other => Err(Error::InvalidArgument(format!("unknown LHEA variant {other:?}"))),
        }
    }
}

/// An ansatz `U(θ)`: ordered gates plus one angle per rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    params: Vec<f64>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Result<Circuit> {
        if n_qubits == 0 {
            return Err(Error::InvalidArgument("a circuit needs at least one qubit".into()));
        }
        Ok(Circuit { n_qubits, gates: Vec::new(), params: Vec::new() })
    }

    /// Builds a circuit from gates with every rotation angle set to zero.
    pub fn from_gates(n_qubits: usize, gates: impl IntoIterator<Item = Gate>) -> Result<Circuit> {
        let mut c = Circuit::new(n_qubits)?;
        for g in gates {
            c.push(g, 0.0)?;
        }
        Ok(c)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn n_rotations(&self) -> usize {
        self.params.len()
    }

    pub fn push(&mut self, gate: Gate, init_angle: f64) -> Result<()> {
        gate.validate(self.n_qubits)?;
        if gate.is_rotation() {
            if !init_angle.is_finite() {
                return Err(Error::InvalidArgument(format!("initial angle {init_angle} is not finite")));
            }
            self.params.push(init_angle);
        }
        self.gates.push(gate);
        Ok(())
    }

    /// Returns a copy with `gate` appended; a rotation gets a new parameter
    /// slot holding `init_angle`.
    pub fn append_gate(&self, gate: Gate, init_angle: f64) -> Result<Circuit> {
        let mut c = self.clone();
        c.push(gate, init_angle)?;
        Ok(c)
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::DimensionMismatch { expected: self.params.len(), actual: params.len() });
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    pub fn with_params(&self, params: &[f64]) -> Result<Circuit> {
        let mut c = self.clone();
        c.set_params(params)?;
        Ok(c)
    }

    /// ASAP moment assignment: every gate sits one slot after the latest
    /// earlier gate sharing a qubit with it.
    pub fn schedule_moments(&self) -> Vec<usize> {
        let mut frontier = vec![0usize; self.n_qubits];
        self.gates
            .iter()
            .map(|g| {
                let (arr, len) = g.qubit_array();
                let qs = &arr[..len];
                let slot = qs.iter().map(|&q| frontier[q]).max().unwrap_or(0);
                for &q in qs {
                    frontier[q] = slot + 1;
                }
                slot
            })
            .collect()
    }

    pub fn depth(&self) -> usize {
        self.schedule_moments().iter().map(|d| d + 1).max().unwrap_or(0)
    }

    pub fn gate_counts(&self) -> GateCounts {
        let one_qubit = self.params.len();
        GateCounts { one_qubit, two_qubit: self.gates.len() - one_qubit, depth: self.depth() }
    }

    /// `U ρ U†` with the circuit's own angles.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        self.apply_with_params(rho, &self.params)
    }

    /// `U(θ) ρ U(θ)†` for an explicit parameter vector.
    pub fn apply_with_params(&self, rho: &DensityMatrix, params: &[f64]) -> Result<DensityMatrix> {
        if rho.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch { expected: self.n_qubits, actual: rho.n_qubits() });
        }
        if params.len() != self.params.len() {
            return Err(Error::DimensionMismatch { expected: self.params.len(), actual: params.len() });
        }
        let mut out = rho.clone();
        let mut slot = 0;
        for g in &self.gates {
            let angle = if g.is_rotation() {
                slot += 1;
                params[slot - 1]
            } else {
                0.0
            };
            let (qs, len) = g.qubit_array();
            out.apply_gate_mut(&g.matrix(angle), &qs[..len])?;
        }
        Ok(out)
    }

    /// `U(θ)† |ψ⟩` for a state vector.
    pub fn apply_inverse_to_vector(&self, psi: &mut [C64]) -> Result<()> {
        let mut slot = self.params.len();
        for g in self.gates.iter().rev() {
            let angle = if g.is_rotation() {
                slot -= 1;
                self.params[slot]
            } else {
                0.0
            };
            apply_gate_to_vector(psi, self.n_qubits, &g.matrix(angle).adjoint(), &g.qubits())?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> CircuitJson {
        let mut slot = 0;
        let gates = self
            .gates
            .iter()
            .map(|g| {
                let angle = g.is_rotation().then(|| {
                    slot += 1;
                    self.params[slot - 1]
                });
                GateJson { kind: g.kind().to_string(), qubits: g.qubits(), angle }
            })
            .collect();
        CircuitJson { n_qubits: self.n_qubits, gates }
    }

    pub fn from_json(json: &CircuitJson) -> Result<Circuit> {
        let mut c = Circuit::new(json.n_qubits)?;
        for (i, g) in json.gates.iter().enumerate() {
            let arity = |k: usize| {
                if g.qubits.len() == k {
                    Ok(())
                } else {
                    Err(Error::Parse(format!("gate {i} ({}) expects {k} qubits, found {}", g.kind, g.qubits.len())))
                }
            };
            let gate = match g.kind.to_ascii_uppercase().as_str() {
                "RX" | "RY" | "RZ" => {
                    arity(1)?;
                    let axis = match g.kind.to_ascii_uppercase().as_str() {
                        "RX" => Axis::X,
                        "RY" => Axis::Y,
                        _ => Axis::Z,
                    };
                    Gate::Rotation { axis, qubit: g.qubits[0] }
                }
                "CNOT" | "CX" => {
                    arity(2)?;
                    Gate::cnot(g.qubits[0], g.qubits[1])
                }
                "CZ" => {
                    arity(2)?;
                    Gate::Cz { a: g.qubits[0], b: g.qubits[1] }
                }
                other => return Err(Error::Parse(format!("gate {i}: unknown kind {other:?}"))),
            };
            c.push(gate, g.angle.unwrap_or(0.0))?;
        }
        Ok(c)
    }
}

impl Serialize for Circuit {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Circuit {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let json = CircuitJson::deserialize(d)?;
        Circuit::from_json(&json).map_err(serde::de::Error::custom)
    }
}

/// File form of a circuit with angles inlined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitJson {
    pub n_qubits: usize,
    pub gates: Vec<GateJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateJson {
    pub kind: String,
    pub qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
}

/// Neighbouring pairs of the LHEA ring; two qubits form a single pair.
fn lhea_pairs(n_qubits: usize) -> Vec<(usize, usize)> {
    if n_qubits == 2 {
        vec![(0, 1)]
    } else {
        (0..n_qubits).map(|q| (q, (q + 1) % n_qubits)).collect()
    }
}

/// Layered hardware-efficient ansatz with `layers` sweeps of two-qubit blocks
/// over the periodic ring. Every rotation has an independent parameter,
/// initialised to zero.
pub fn build_lhea(n_qubits: usize, layers: usize, variant: LheaVariant) -> Result<Circuit> {
    if n_qubits < 2 {
        return Err(Error::InvalidArgument(format!("LHEA needs at least 2 qubits, got {n_qubits}")));
    }
    if layers == 0 {
        return Err(Error::InvalidArgument("LHEA needs at least one layer".into()));
    }
    let mut c = Circuit::new(n_qubits)?;
    for _ in 0..layers {
        for (a, b) in lhea_pairs(n_qubits) {
            match variant {
                LheaVariant::OneParam => {
                    for q in [a, b] {
                        c.push(Gate::ry(q), 0.0)?;
                    }
                    c.push(Gate::Cz { a, b }, 0.0)?;
                    for q in [a, b] {
                        c.push(Gate::ry(q), 0.0)?;
                    }
                }
                LheaVariant::ThreeParam => {
                    let euler = |c: &mut Circuit, q: usize| -> Result<()> {
                        c.push(Gate::rz(q), 0.0)?;
                        c.push(Gate::ry(q), 0.0)?;
                        c.push(Gate::rz(q), 0.0)
                    };
                    euler(&mut c, a)?;
                    euler(&mut c, b)?;
                    c.push(Gate::cnot(a, b), 0.0)?;
                    euler(&mut c, a)?;
                    euler(&mut c, b)?;
                }
            }
        }
    }
    Ok(c)
}

/// Computational-basis vector `|index⟩` of `n_qubits` qubits.
pub(crate) fn basis_vector(n_qubits: usize, index: usize) -> Vec<C64> {
    let mut v = vec![C64::default(); 1 << n_qubits];
    v[index] = Complex64::new(1.0, 0.0);
    v
}
