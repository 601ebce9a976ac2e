//! Phase-free Pauli algebra over GF(2).
//!
//! A [`PauliFrame`] records which X and Z errors currently sit on each qubit.
//! Phases are dropped everywhere, so composition is a plain XOR of the two
//! bit vectors. [`coset_classify`] sorts a single-block error into one of the
//! four cosets of the [[4,1,2]] gauge group for a given basis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Error basis. `X` means X-type errors (seen by Z-type gauge measurements),
/// `Z` means Z-type errors (seen by X-type gauge measurements).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    X,
    Z,
}

impl Basis {
    pub const BOTH: [Basis; 2] = [Basis::X, Basis::Z];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Basis::X => 0,
            Basis::Z => 1,
        }
    }

    pub fn other(self) -> Basis {
        match self {
            Basis::X => Basis::Z,
            Basis::Z => Basis::X,
        }
    }
}

/// Single-qubit Pauli without phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const NONTRIVIAL: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    #[inline]
    pub fn has_x(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    #[inline]
    pub fn has_z(self) -> bool {
        matches!(self, Pauli::Z | Pauli::Y)
    }

    #[inline]
    pub fn has(self, basis: Basis) -> bool {
        match basis {
            Basis::X => self.has_x(),
            Basis::Z => self.has_z(),
        }
    }

    pub fn from_bits(x: bool, z: bool) -> Pauli {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    /// The 15 nontrivial two-qubit Paulis, control operand first.
    pub fn two_qubit_nontrivial() -> impl Iterator<Item = (Pauli, Pauli)> {
        const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
        ALL.into_iter()
            .flat_map(|a| ALL.into_iter().map(move |b| (a, b)))
            .filter(|&(a, b)| !(a == Pauli::I && b == Pauli::I))
    }
}

/// X/Z error bits for a fixed set of qubits.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliFrame {
    len: usize,
    x: Vec<u64>,
    z: Vec<u64>,
}

impl PauliFrame {
    pub fn new(len: usize) -> Self {
        let words = len.div_ceil(64);
        PauliFrame {
            len,
            x: vec![0; words],
            z: vec![0; words],
        }
    }

    /// Frame with a single Pauli on `qubit`.
    pub fn single(len: usize, qubit: usize, pauli: Pauli) -> Result<Self> {
        let mut f = PauliFrame::new(len);
        f.apply(qubit, pauli)?;
        Ok(f)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_identity(&self) -> bool {
        self.x.iter().chain(&self.z).all(|&w| w == 0)
    }

    fn check(&self, qubit: usize) -> Result<()> {
        if qubit >= self.len {
            return Err(Error::QubitOutOfRange {
                qubit,
                len: self.len,
            });
        }
        Ok(())
    }

    pub fn x(&self, qubit: usize) -> bool {
        self.x[qubit / 64] >> (qubit % 64) & 1 == 1
    }

    pub fn z(&self, qubit: usize) -> bool {
        self.z[qubit / 64] >> (qubit % 64) & 1 == 1
    }

    pub fn bit(&self, qubit: usize, basis: Basis) -> bool {
        match basis {
            Basis::X => self.x(qubit),
            Basis::Z => self.z(qubit),
        }
    }

    pub fn get(&self, qubit: usize) -> Pauli {
        Pauli::from_bits(self.x(qubit), self.z(qubit))
    }

    pub fn flip(&mut self, qubit: usize, basis: Basis) -> Result<()> {
        self.check(qubit)?;
        let words = match basis {
            Basis::X => &mut self.x,
            Basis::Z => &mut self.z,
        };
        words[qubit / 64] ^= 1 << (qubit % 64);
        Ok(())
    }

    /// Multiply a single-qubit Pauli into the frame.
    pub fn apply(&mut self, qubit: usize, pauli: Pauli) -> Result<()> {
        self.check(qubit)?;
        if pauli.has_x() {
            self.flip(qubit, Basis::X)?;
        }
        if pauli.has_z() {
            self.flip(qubit, Basis::Z)?;
        }
        Ok(())
    }

    fn clear(&mut self, qubit: usize) {
        let mask = !(1u64 << (qubit % 64));
        self.x[qubit / 64] &= mask;
        self.z[qubit / 64] &= mask;
    }
}

/// Composition of two frames (phases discarded).
pub fn compose(a: &PauliFrame, b: &PauliFrame) -> Result<PauliFrame> {
    if a.len != b.len {
        return Err(Error::SizeMismatch {
            left: a.len,
            right: b.len,
        });
    }
    let mut out = a.clone();
    for (o, w) in out.x.iter_mut().zip(&b.x) {
        *o ^= w;
    }
    for (o, w) in out.z.iter_mut().zip(&b.z) {
        *o ^= w;
    }
    Ok(out)
}

/// The circuit elements errors can be pushed through.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate {
    Cnot { control: usize, target: usize },
    /// Preparation; discards whatever error sat on the qubit before.
    Init { qubit: usize },
    /// Destructive measurement; the qubit's error bits are consumed.
    Measure { qubit: usize },
    Wait { qubit: usize },
}

/// Conjugate the frame through one gate.
pub fn propagate(frame: &PauliFrame, gate: &Gate) -> Result<PauliFrame> {
    let mut out = frame.clone();
    propagate_in_place(&mut out, gate)?;
    Ok(out)
}

pub fn propagate_in_place(frame: &mut PauliFrame, gate: &Gate) -> Result<()> {
    match *gate {
        Gate::Cnot { control, target } => {
            frame.check(control)?;
            frame.check(target)?;
            if control == target {
                return Err(Error::Structural(format!(
                    "cnot with control == target ({control})"
                )));
            }
            if frame.x(control) {
                frame.flip(target, Basis::X)?;
            }
            if frame.z(target) {
                frame.flip(control, Basis::Z)?;
            }
        }
        Gate::Init { qubit } | Gate::Measure { qubit } => {
            frame.check(qubit)?;
            frame.clear(qubit);
        }
        Gate::Wait { qubit } => frame.check(qubit)?,
    }
    Ok(())
}

/// Coset of a single-block error modulo the gauge group of one basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CosetClass {
    Trivial,
    Gauge1Side,
    Gauge2Side,
    Logical,
}

/// Data-qubit mask (bit `j` = qubit `j+1`) of the first gauge in `basis`:
/// {1,2} for X errors, {1,3} for Z errors.
pub const fn gauge1_support(basis: Basis) -> u8 {
    match basis {
        Basis::X => 0b0011,
        Basis::Z => 0b0101,
    }
}

pub const fn gauge2_support(basis: Basis) -> u8 {
    match basis {
        Basis::X => 0b1100,
        Basis::Z => 0b1010,
    }
}

/// Which gauge (0 = first, 1 = second) data qubit `j` (0-based) belongs to.
#[inline]
pub const fn gauge_of(basis: Basis, qubit: usize) -> usize {
    if gauge1_support(basis) >> qubit & 1 == 1 {
        0
    } else {
        1
    }
}

/// Representative data qubit (0-based) of gauge `g` in `basis`; a single
/// error here is the canonical correction for that gauge.
#[inline]
pub const fn gauge_representative(basis: Basis, g: usize) -> usize {
    match (basis, g) {
        (_, 0) => 0,
        (Basis::X, _) => 2,
        (Basis::Z, _) => 1,
    }
}

/// Support of the bare logical that reads out a block measured against
/// `basis` errors: Z1Z2 for X errors, X1X3 for Z errors.
pub const fn bare_logical_readout(basis: Basis) -> u8 {
    gauge1_support(basis)
}

/// Classify a 4-bit data error (bit `j` = qubit `j+1`).
///
/// The parity of the vector tells whether the stabilizer notices it; the
/// overlap with the first-gauge pair tells whether it anticommutes with the
/// bare logical of the other basis.
pub fn coset_classify(block_error: u8, basis: Basis) -> CosetClass {
    let e = block_error & 0xf;
    let odd = e.count_ones() & 1 == 1;
    let flips_logical = (e & bare_logical_readout(basis)).count_ones() & 1 == 1;
    match (odd, flips_logical) {
        (false, false) => CosetClass::Trivial,
        (false, true) => CosetClass::Logical,
        (true, true) => CosetClass::Gauge1Side,
        (true, false) => CosetClass::Gauge2Side,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span(gens: &[u8]) -> Vec<u8> {
        let mut out = vec![0u8];
        for &g in gens {
            let extra: Vec<u8> = out.iter().map(|v| v ^ g).collect();
            out.extend(extra);
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Brute-force oracle: build the four cosets from the generator sets
    /// directly and name them by their representative.
    fn oracle(e: u8, basis: Basis) -> CosetClass {
        let (gauge, logical, g2rep) = match basis {
            Basis::X => (span(&[0b0011, 0b1100]), 0b1001u8, 0b0100u8),
            Basis::Z => (span(&[0b0101, 0b1010]), 0b1001u8, 0b0010u8),
        };
        let in_coset = |rep: u8| gauge.iter().any(|g| g ^ rep == e);
        if in_coset(0) {
            CosetClass::Trivial
        } else if in_coset(logical) {
            CosetClass::Logical
        } else if in_coset(0b0001) {
            CosetClass::Gauge1Side
        } else {
            assert!(in_coset(g2rep));
            CosetClass::Gauge2Side
        }
    }

    #[test]
    fn classify_matches_generator_enumeration() {
        for basis in Basis::BOTH {
            for e in 0..16u8 {
                assert_eq!(coset_classify(e, basis), oracle(e, basis), "{e:04b} {basis:?}");
            }
        }
    }

    #[test]
    fn named_examples() {
        assert_eq!(coset_classify(0b0000, Basis::X), CosetClass::Trivial);
        // X1X2 is a gauge operator
        assert_eq!(coset_classify(0b0011, Basis::X), CosetClass::Trivial);
        assert_eq!(coset_classify(0b0001, Basis::X), CosetClass::Gauge1Side);
        // X1X4 is the dressed logical
        assert_eq!(coset_classify(0b1001, Basis::X), CosetClass::Logical);
        assert_eq!(coset_classify(0b1001, Basis::Z), CosetClass::Logical);
        // Z error on qubit 2 or 4 is on the second Z gauge
        assert_eq!(coset_classify(0b0010, Basis::Z), CosetClass::Gauge2Side);
        assert_eq!(coset_classify(0b1000, Basis::Z), CosetClass::Gauge2Side);
    }

    #[test]
    fn four_classes_of_four() {
        for basis in Basis::BOTH {
            let mut counts = std::collections::HashMap::new();
            for e in 0..16u8 {
                *counts.entry(coset_classify(e, basis)).or_insert(0) += 1;
            }
            assert_eq!(counts.len(), 4);
            assert!(counts.values().all(|&c| c == 4));
        }
    }

    #[test]
    fn compose_examples() {
        let x1 = PauliFrame::single(4, 0, Pauli::X).unwrap();
        let z1 = PauliFrame::single(4, 0, Pauli::Z).unwrap();
        let x2 = PauliFrame::single(4, 1, Pauli::X).unwrap();
        assert!(compose(&x1, &x1).unwrap().is_identity());
        assert_eq!(compose(&x1, &z1).unwrap().get(0), Pauli::Y);
        let x1x2 = compose(&x1, &x2).unwrap();
        assert_eq!((x1x2.get(0), x1x2.get(1)), (Pauli::X, Pauli::X));
        assert!(matches!(
            compose(&x1, &PauliFrame::new(5)),
            Err(Error::SizeMismatch { .. })
        ));
    }

    #[test]
    fn cnot_rules() {
        let cnot = Gate::Cnot {
            control: 0,
            target: 1,
        };
        let f = propagate(&PauliFrame::single(2, 0, Pauli::X).unwrap(), &cnot).unwrap();
        assert_eq!((f.get(0), f.get(1)), (Pauli::X, Pauli::X));
        let f = propagate(&PauliFrame::single(2, 1, Pauli::Z).unwrap(), &cnot).unwrap();
        assert_eq!((f.get(0), f.get(1)), (Pauli::Z, Pauli::Z));
        let f = propagate(&PauliFrame::single(2, 1, Pauli::X).unwrap(), &cnot).unwrap();
        assert_eq!((f.get(0), f.get(1)), (Pauli::I, Pauli::X));
        let bad = Gate::Cnot {
            control: 0,
            target: 7,
        };
        assert!(matches!(
            propagate(&PauliFrame::new(2), &bad),
            Err(Error::QubitOutOfRange { qubit: 7, .. })
        ));
    }

    #[test]
    fn init_and_measure_discard() {
        let f = PauliFrame::single(3, 2, Pauli::Y).unwrap();
        assert!(propagate(&f, &Gate::Init { qubit: 2 }).unwrap().is_identity());
        assert!(propagate(&f, &Gate::Measure { qubit: 2 }).unwrap().is_identity());
        assert_eq!(propagate(&f, &Gate::Wait { qubit: 2 }).unwrap(), f);
    }

    #[test]
    fn fifteen_two_qubit_paulis() {
        assert_eq!(Pauli::two_qubit_nontrivial().count(), 15);
    }
}
