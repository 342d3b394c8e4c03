//! Depth-slab binary encoding of circuits and the integer action alphabet.

use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::qsim::Axis;

/// Binary tensor of shape `d_max × (n+3) × n`.
///
/// In slab `s`, rows `0..n` hold CNOT connectivity (row = control, column =
/// target) and rows `n, n+1, n+2` mark X, Y and Z rotations on the column's
/// qubit.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RlStateTensor {
    d_max: usize,
    n: usize,
    bits: Vec<u8>,
}

impl RlStateTensor {
    pub fn zeros(d_max: usize, n: usize) -> Result<Self> {
        if d_max == 0 || n == 0 {
            return Err(Error::InvalidArgument(format!("tensor shape {d_max}x{}x{n} is empty", n + 3)));
        }
        Ok(RlStateTensor { d_max, n, bits: vec![0; d_max * (n + 3) * n] })
    }

    pub fn d_max(&self) -> usize {
        self.d_max
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.d_max, self.n + 3, self.n]
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    fn offset(&self, slab: usize, row: usize, col: usize) -> usize {
        debug_assert!(slab < self.d_max && row < self.n + 3 && col < self.n);
        (slab * (self.n + 3) + row) * self.n + col
    }

    pub fn get(&self, slab: usize, row: usize, col: usize) -> u8 {
        self.bits[self.offset(slab, row, col)]
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.bits
    }

    /// Number of slabs holding at least one set bit.
    pub fn occupied_slabs(&self) -> usize {
        self.bits.chunks((self.n + 3) * self.n).filter(|s| s.iter().any(|&b| b != 0)).count()
    }

    fn set(&mut self, slab: usize, row: usize, col: usize) {
        let i = self.offset(slab, row, col);
        self.bits[i] = 1;
    }

    fn mark(&mut self, gate: &Gate, slab: usize) -> Result<()> {
        match *gate {
            Gate::Cnot { control, target } => self.set(slab, control, target),
            Gate::Rotation { axis, qubit } => self.set(slab, self.n + axis.index(), qubit),
            Gate::Cz { .. } => return Err(Error::Unencodable(format!("{gate} has no row in the state tensor"))),
        }
        Ok(())
    }

    /// Slab-major, row-major copy as network input.
    pub fn flatten(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| f64::from(b)).collect()
    }

    /// Reads every set bit back as a `(gate, slab)` pair, sorted.
    pub fn decode(&self) -> Vec<(Gate, usize)> {
        let n = self.n;
        let mut out = Vec::new();
        for s in 0..self.d_max {
            for r in 0..n + 3 {
                for c in 0..n {
                    if self.get(s, r, c) == 1 {
                        let g = if r < n {
                            Gate::cnot(r, c)
                        } else {
                            Gate::Rotation { axis: Axis::from_index(r - n).expect("row < n+3"), qubit: c }
                        };
                        out.push((g, s));
                    }
                }
            }
        }
        out.sort();
        out
    }
}

impl Serialize for RlStateTensor {
    /// Nested `[slab][row][col]` arrays.
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.d_max))?;
        for slab in self.bits.chunks((self.n + 3) * self.n) {
            let rows: Vec<&[u8]> = slab.chunks(self.n).collect();
            seq.serialize_element(&rows)?;
        }
        seq.end()
    }
}

/// Encodes `circuit` on its ASAP schedule.
pub fn encode_state(circuit: &Circuit, d_max: usize) -> Result<RlStateTensor> {
    let mut t = RlStateTensor::zeros(d_max, circuit.n_qubits())?;
    for (g, s) in circuit.gates().iter().zip(circuit.schedule_moments()) {
        if s >= d_max {
            return Err(Error::DepthOverflow { depth: s + 1, d_max });
        }
        t.mark(g, s)?;
    }
    Ok(t)
}

/// Rotations first (qubit-major, axis-minor), then ordered CNOT pairs in
/// lexicographic order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionSpace {
    n: usize,
}

impl ActionSpace {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidArgument("action space needs at least one qubit".into()));
        }
        Ok(ActionSpace { n: n_qubits })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn size(&self) -> usize {
        3 * self.n + self.n * (self.n - 1)
    }

    pub fn gate(&self, action: usize) -> Result<Gate> {
        let n = self.n;
        if action >= self.size() {
            return Err(Error::InvalidAction { action, size: self.size() });
        }
        if action < 3 * n {
            let axis = Axis::from_index(action % 3).expect("mod 3");
            return Ok(Gate::Rotation { axis, qubit: action / 3 });
        }
        // Each control owns n−1 consecutive targets, skipping itself.
        let k = action - 3 * n;
        let control = k / (n - 1);
        let mut target = k % (n - 1);
        if target >= control {
            target += 1;
        }
        Ok(Gate::cnot(control, target))
    }

    pub fn action(&self, gate: &Gate) -> Result<usize> {
        let n = self.n;
        gate.validate(n)?;
        match *gate {
            Gate::Rotation { axis, qubit } => Ok(3 * qubit + axis.index()),
            Gate::Cnot { control, target } => {
                let t = if target > control { target - 1 } else { target };
                Ok(3 * n + control * (n - 1) + t)
            }
            Gate::Cz { .. } => Err(Error::Unencodable(format!("{gate} is not in the action alphabet"))),
        }
    }
}

pub fn action_to_gate(action: usize, n_qubits: usize) -> Result<Gate> {
    ActionSpace::new(n_qubits)?.gate(action)
}

pub fn gate_to_action(gate: &Gate, n_qubits: usize) -> Result<usize> {
    ActionSpace::new(n_qubits)?.action(gate)
}

pub fn action_one_hot(action: usize, n_qubits: usize) -> Result<Vec<u8>> {
    let space = ActionSpace::new(n_qubits)?;
    if action >= space.size() {
        return Err(Error::InvalidAction { action, size: space.size() });
    }
    let mut v = vec![0; space.size()];
    v[action] = 1;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn circuit_from_actions(n: usize, actions: &[usize]) -> Circuit {
        let mut c = Circuit::new(n).unwrap();
        for &a in actions {
            c.push(action_to_gate(a, n).unwrap(), 0.0).unwrap();
        }
        c
    }

    #[test]
    fn empty_circuit_is_all_zero() {
        let t = encode_state(&Circuit::new(3).unwrap(), 5).unwrap();
        assert_eq!(t.shape(), [5, 6, 3]);
        assert!(t.as_slice().iter().all(|&b| b == 0));
        assert!(t.flatten().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn cnot_then_rx() {
        let c = Circuit::from_gates(2, [Gate::cnot(0, 1), Gate::rx(0)]).unwrap();
        let t = encode_state(&c, 3).unwrap();
        let set: Vec<(usize, usize, usize)> = (0..3)
            .flat_map(|s| (0..5).flat_map(move |r| (0..2).map(move |q| (s, r, q))))
            .filter(|&(s, r, q)| t.get(s, r, q) == 1)
            .collect();
        assert_eq!(set, vec![(0, 0, 1), (1, 2, 0)]);
    }

    #[test]
    fn parallel_rotations_share_a_slab() {
        let c = Circuit::from_gates(2, [Gate::rx(0), Gate::ry(1)]).unwrap();
        let t = encode_state(&c, 2).unwrap();
        assert_eq!(t.get(0, 2, 0), 1);
        assert_eq!(t.get(0, 3, 1), 1);
        assert_eq!(t.as_slice().iter().map(|&b| b as usize).sum::<usize>(), 2);
    }

    #[test]
    fn flatten_layout() {
        let c = Circuit::from_gates(2, [Gate::cnot(0, 1)]).unwrap();
        let v = encode_state(&c, 1).unwrap().flatten();
        assert_eq!(v.len(), 10);
        assert_eq!(v[1], 1.0);
        assert_eq!(v.iter().sum::<f64>(), 1.0);
        assert_eq!(RlStateTensor::zeros(40, 3).unwrap().flatten().len(), 720);
    }

    #[test]
    fn depth_overflow_and_cz_are_errors() {
        let c = Circuit::from_gates(1, [Gate::rx(0), Gate::ry(0), Gate::rz(0)]).unwrap();
        assert!(matches!(encode_state(&c, 2), Err(Error::DepthOverflow { depth: 3, d_max: 2 })));
        assert!(encode_state(&c, 3).is_ok());
        let cz = Circuit::from_gates(2, [Gate::Cz { a: 0, b: 1 }]).unwrap();
        assert!(matches!(encode_state(&cz, 2), Err(Error::Unencodable(_))));
    }

    #[test]
    fn action_examples() {
        assert_eq!(action_to_gate(0, 2).unwrap(), Gate::rx(0));
        assert_eq!(action_to_gate(5, 2).unwrap(), Gate::rz(1));
        assert_eq!(action_to_gate(6, 2).unwrap(), Gate::cnot(0, 1));
        assert_eq!(action_to_gate(7, 2).unwrap(), Gate::cnot(1, 0));
        assert!(matches!(action_to_gate(8, 2), Err(Error::InvalidAction { action: 8, size: 8 })));
        assert_eq!(ActionSpace::new(3).unwrap().size(), 15);
        assert_eq!(action_to_gate(9, 3).unwrap(), Gate::cnot(0, 1));
        assert_eq!(action_to_gate(14, 3).unwrap(), Gate::cnot(2, 1));
    }

    #[test]
    fn one_hot_examples() {
        assert_eq!(action_one_hot(0, 2).unwrap(), vec![1, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(action_one_hot(7, 2).unwrap(), vec![0, 0, 0, 0, 0, 0, 0, 1]);
        for a in 0..15 {
            assert_eq!(action_one_hot(a, 3).unwrap().iter().map(|&x| x as u32).sum::<u32>(), 1);
        }
        assert!(action_one_hot(15, 3).is_err());
    }

    #[test]
    fn action_bijection_is_exhaustive() {
        for n in 1..=5 {
            let space = ActionSpace::new(n).unwrap();
            let mut seen = HashSet::new();
            for a in 0..space.size() {
                let g = space.gate(a).unwrap();
                g.validate(n).unwrap();
                assert_eq!(space.action(&g).unwrap(), a);
                assert!(seen.insert(g));
            }
            // Every rotation and ordered pair appears.
            let expected = 3 * n + (0..n).flat_map(|c| (0..n).filter(move |&t| t != c)).count();
            assert_eq!(seen.len(), expected);
        }
    }

    #[test]
    fn serializes_as_nested_arrays() {
        let c = Circuit::from_gates(2, [Gate::cnot(1, 0)]).unwrap();
        let json = serde_json::to_string(&encode_state(&c, 1).unwrap()).unwrap();
        assert_eq!(json, "[[[0,0],[1,0],[0,0],[0,0],[0,0]]]");
    }

    proptest! {
        #[test]
        fn round_trip_reconstructs_gate_depth_multiset(
            n in 2usize..=4,
            raw in proptest::collection::vec(0usize..1000, 0..30),
        ) {
            let size = ActionSpace::new(n).unwrap().size();
            let actions: Vec<usize> = raw.iter().map(|a| a % size).collect();
            let c = circuit_from_actions(n, &actions);
            let t = encode_state(&c, 30).unwrap();
            let mut want: Vec<(Gate, usize)> = c.gates().iter().copied().zip(c.schedule_moments()).collect();
            want.sort();
            prop_assert_eq!(t.decode(), want);

            // Per-slab exclusivity: each qubit is touched at most once.
            for s in 0..30 {
                for q in 0..n {
                    let as_control: usize = (0..n).map(|t2| t.get(s, q, t2) as usize).sum();
                    let as_target: usize = (0..n).map(|r| t.get(s, r, q) as usize).sum();
                    let rot: usize = (n..n + 3).map(|r| t.get(s, r, q) as usize).sum();
                    prop_assert!(as_control + as_target + rot <= 1);
                }
                if s >= c.depth() {
                    prop_assert!((0..n + 3).all(|r| (0..n).all(|q| t.get(s, r, q) == 0)));
                }
            }
        }

        #[test]
        fn appending_keeps_lower_slabs(
            n in 2usize..=4,
            raw in proptest::collection::vec(0usize..1000, 0..20),
            extra in 0usize..1000,
        ) {
            let size = ActionSpace::new(n).unwrap().size();
            let actions: Vec<usize> = raw.iter().map(|a| a % size).collect();
            let c = circuit_from_actions(n, &actions);
            let g = action_to_gate(extra % size, n).unwrap();
            let c2 = c.append_gate(g, 0.0).unwrap();
            let slot = *c2.schedule_moments().last().unwrap();
            let (a, b) = (encode_state(&c, 25).unwrap(), encode_state(&c2, 25).unwrap());
            let slab = (n + 3) * n;
            prop_assert_eq!(&a.as_slice()[..slot * slab], &b.as_slice()[..slot * slab]);
        }
    }
}
