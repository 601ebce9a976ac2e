//! Flag-based message-passing decoder for one [[4,1,2]] block.
//!
//! Every block keeps five flag weights per basis. A weight `w` stands for an
//! event of probability O(p^w); [`Weight::INF`] means the event cannot have
//! happened yet. Locations lower flags with their confidence, the syndrome is
//! matched against the cheapest consistent flag set, and the gaps between
//! the chosen match and its alternatives become the confidences reported to
//! the level above.

use std::fmt;
use std::ops::Add;

use rand::Rng;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::pauli::Basis;

/// Integer exponent of p, saturating at infinity.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Weight(u16);

impl Weight {
    pub const INF: Weight = Weight(u16::MAX);
    pub const ZERO: Weight = Weight(0);
    pub const ONE: Weight = Weight(1);

    /// Finite weight. Values at or above the sentinel saturate to INF.
    pub const fn new(v: u16) -> Weight {
        Weight(v)
    }

    pub fn is_inf(self) -> bool {
        self == Weight::INF
    }

    pub fn value(self) -> Option<u16> {
        (!self.is_inf()).then_some(self.0)
    }

    /// `self - x` where `x` is the weight of the chosen (minimal) match, so
    /// the result is never negative. INF stays INF.
    pub fn minus(self, x: Weight) -> Weight {
        debug_assert!(!x.is_inf());
        if self.is_inf() {
            return Weight::INF;
        }
        debug_assert!(self.0 >= x.0, "confidence gap below zero");
        Weight(self.0.saturating_sub(x.0))
    }
}

impl Add for Weight {
    type Output = Weight;

    fn add(self, rhs: Weight) -> Weight {
        if self.is_inf() || rhs.is_inf() {
            return Weight::INF;
        }
        Weight(self.0.saturating_add(rhs.0).min(u16::MAX - 1))
    }
}

impl fmt::Debug for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value() {
            Some(v) => write!(f, "{v}"),
            None => f.write_str("inf"),
        }
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl std::str::FromStr for Weight {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") {
            return Ok(Weight::INF);
        }
        let v: u16 = s.parse().map_err(|_| format!("bad weight '{s}'"))?;
        if v == u16::MAX {
            return Ok(Weight::INF);
        }
        Ok(Weight(v))
    }
}

impl Serialize for Weight {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.value() {
            Some(v) => s.serialize_u16(v),
            None => s.serialize_str("inf"),
        }
    }
}

/// The five flags of one basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Flag {
    AG1,
    AG2,
    A,
    G1,
    G2,
}

impl Flag {
    pub const ALL: [Flag; 5] = [Flag::AG1, Flag::AG2, Flag::A, Flag::G1, Flag::G2];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    /// (gauge hit, ancilla parity flipped) for a flag.
    pub fn from_effect(gauge: Option<usize>, parity_flip: bool) -> Option<Flag> {
        match (gauge, parity_flip) {
            (Some(0), true) => Some(Flag::AG1),
            (Some(_), true) => Some(Flag::AG2),
            (None, true) => Some(Flag::A),
            (Some(0), false) => Some(Flag::G1),
            (Some(_), false) => Some(Flag::G2),
            (None, false) => None,
        }
    }
}

/// Flag region of a location: which flag a single error there raises.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Region {
    N,
    AG1,
    AG2,
    A,
    G1,
    G2,
}

impl Region {
    pub fn flag(self) -> Option<Flag> {
        match self {
            Region::N => None,
            Region::AG1 => Some(Flag::AG1),
            Region::AG2 => Some(Flag::AG2),
            Region::A => Some(Flag::A),
            Region::G1 => Some(Flag::G1),
            Region::G2 => Some(Flag::G2),
        }
    }

    pub fn from_flag(flag: Option<Flag>) -> Region {
        match flag {
            None => Region::N,
            Some(Flag::AG1) => Region::AG1,
            Some(Flag::AG2) => Region::AG2,
            Some(Flag::A) => Region::A,
            Some(Flag::G1) => Region::G1,
            Some(Flag::G2) => Region::G2,
        }
    }
}

/// Flag weights of one block, both bases.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct FlagSet {
    w: [[Weight; 5]; 2],
}

impl Default for FlagSet {
    fn default() -> Self {
        FlagSet::fresh()
    }
}

impl FlagSet {
    /// Nothing has happened yet: every flag infinite.
    pub const fn fresh() -> FlagSet {
        FlagSet {
            w: [[Weight::INF; 5]; 2],
        }
    }

    pub fn get(&self, basis: Basis, flag: Flag) -> Weight {
        self.w[basis.index()][flag.index()]
    }

    pub fn set(&mut self, basis: Basis, flag: Flag, w: Weight) {
        self.w[basis.index()][flag.index()] = w;
    }

    /// Builder-style helper for tests and the CLI.
    pub fn with(mut self, basis: Basis, flag: Flag, w: Weight) -> FlagSet {
        self.set(basis, flag, w);
        self
    }

    #[inline]
    pub fn lower(&mut self, basis: Basis, flag: Flag, w: Weight) {
        let slot = &mut self.w[basis.index()][flag.index()];
        if w < *slot {
            *slot = w;
        }
    }
}

impl fmt::Debug for FlagSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for basis in Basis::BOTH {
            write!(f, "{basis:?}[")?;
            for flag in Flag::ALL {
                write!(f, " {flag:?}={}", self.get(basis, flag))?;
            }
            write!(f, " ] ")?;
        }
        Ok(())
    }
}

/// Lower the flag of `region` in each basis to `confidence` (per basis).
pub fn update_on_location(flags: &mut FlagSet, region_x: Region, region_z: Region, confidence: [Weight; 2]) {
    for (basis, region) in [(Basis::X, region_x), (Basis::Z, region_z)] {
        if let Some(flag) = region.flag() {
            flags.lower(basis, flag, confidence[basis.index()]);
        }
    }
}

/// Weight of a correlated error hitting both operands of a two-qubit gate.
#[inline]
pub fn correlated_weight(conf_a: Weight, conf_b: Weight) -> Weight {
    conf_a.max(conf_b)
}

/// Flag updates for one two-qubit gate acting across two blocks, in one
/// basis.
///
/// `single_a`/`single_b` are the regions an error on only that operand lands
/// in; `both_a`/`both_b` those of the correlated error as seen from each
/// block. Returns the correlated weight.
#[allow(clippy::too_many_arguments)]
pub fn update_on_two_qubit_gate(
    flags_a: &mut FlagSet,
    flags_b: &mut FlagSet,
    basis: Basis,
    single_a: Region,
    single_b: Region,
    both_a: Region,
    both_b: Region,
    conf_a: Weight,
    conf_b: Weight,
) -> Weight {
    let correlated = correlated_weight(conf_a, conf_b);
    if let Some(f) = single_a.flag() {
        flags_a.lower(basis, f, conf_a);
    }
    if let Some(f) = single_b.flag() {
        flags_b.lower(basis, f, conf_b);
    }
    if let Some(f) = both_a.flag() {
        flags_a.lower(basis, f, correlated);
    }
    if let Some(f) = both_b.flag() {
        flags_b.lower(basis, f, correlated);
    }
    correlated
}

/// Copy the data-error flags of `source` onto `target` for a transversal
/// CNOT. For X errors the control is the source; for Z errors the target
/// is. Copies are treated as independent errors on the receiving block.
pub fn propagate_flags_cnot(source: &FlagSet, target: &mut FlagSet, basis: Basis) {
    for flag in [Flag::AG1, Flag::AG2, Flag::G1, Flag::G2] {
        target.lower(basis, flag, source.get(basis, flag));
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Match {
    None,
    AG1,
    AG2,
    A,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Correction {
    None,
    Gauge1,
    Gauge2,
}

impl Correction {
    pub fn gauge(self) -> Option<usize> {
        match self {
            Correction::None => None,
            Correction::Gauge1 => Some(0),
            Correction::Gauge2 => Some(1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct DecodeOutcome {
    #[serde(rename = "match")]
    pub matched: Match,
    pub correction: Correction,
    pub c_l: Weight,
    pub c_g1: Weight,
    pub c_g2: Weight,
}

/// Resolves ties between equally cheap flag matches.
pub trait TieBreaker {
    /// Pick one of `n >= 2` tied candidates. Candidates arrive in the fixed
    /// order A, AG1, AG2 (restricted to those tied).
    fn choose(&mut self, n: usize) -> usize;
}

/// Always the first tied candidate, i.e. priority A > AG1 > AG2.
#[derive(Clone, Copy, Debug, Default)]
pub struct PriorityTies;

impl TieBreaker for PriorityTies {
    fn choose(&mut self, _n: usize) -> usize {
        0
    }
}

/// Uniform guess from a seeded stream.
pub struct RandomTies<R>(pub R);

impl<R: Rng> TieBreaker for RandomTies<R> {
    fn choose(&mut self, n: usize) -> usize {
        self.0.random_range(0..n)
    }
}

/// Replays a fixed sequence of choices and records how many options each
/// tie had, so that every branch can be enumerated by backtracking.
#[derive(Clone, Debug, Default)]
pub struct ScriptedTies {
    script: Vec<u8>,
    arity: Vec<u8>,
    pos: usize,
}

impl ScriptedTies {
    pub fn new() -> Self {
        Self::default()
    }

    /// Prepare for the next replay.
    pub fn rewind(&mut self) {
        self.pos = 0;
    }

    /// Advance to the next unexplored branch. Returns false once all
    /// branches of the last run have been visited.
    pub fn advance(&mut self) -> bool {
        self.script.truncate(self.pos);
        self.arity.truncate(self.pos);
        while let Some(last) = self.script.pop() {
            let n = self.arity.pop().unwrap();
            if last + 1 < n {
                self.script.push(last + 1);
                self.arity.push(n);
                self.pos = 0;
                return true;
            }
        }
        self.pos = 0;
        false
    }

    pub fn depth(&self) -> usize {
        self.script.len()
    }
}

impl TieBreaker for ScriptedTies {
    fn choose(&mut self, n: usize) -> usize {
        let c = if self.pos < self.script.len() {
            self.arity[self.pos] = n as u8;
            self.script[self.pos]
        } else {
            self.script.push(0);
            self.arity.push(n as u8);
            0
        };
        self.pos += 1;
        c as usize
    }
}

/// Match a syndrome bit against the flags of one basis.
///
/// Syndrome 0 is always explained by "no error". Syndrome 1 is explained by
/// exactly one of AG1, AG2 or A; the cheapest wins and ties go to
/// `tiebreak`. The confidences are the weights of the matches that would
/// leave each residual error, minus the chosen weight.
pub fn match_syndrome(
    flags: &FlagSet,
    basis: Basis,
    syndrome: bool,
    level: u8,
    tiebreak: &mut dyn TieBreaker,
) -> Result<DecodeOutcome> {
    let ag1 = flags.get(basis, Flag::AG1);
    let ag2 = flags.get(basis, Flag::AG2);
    let a = flags.get(basis, Flag::A);
    if !syndrome {
        return Ok(DecodeOutcome {
            matched: Match::None,
            correction: Correction::None,
            c_l: ag1 + ag2,
            c_g1: ag1 + a,
            c_g2: ag2 + a,
        });
    }
    let candidates = [(Match::A, a), (Match::AG1, ag1), (Match::AG2, ag2)];
    let x = a.min(ag1).min(ag2);
    if x.is_inf() {
        return Err(Error::Inconsistency { level, basis });
    }
    let mut tied = [Match::None; 3];
    let mut n = 0;
    for (m, w) in candidates {
        if w == x {
            tied[n] = m;
            n += 1;
        }
    }
    let chosen = if n == 1 { tied[0] } else { tied[tiebreak.choose(n)] };
    Ok(match chosen {
        Match::AG1 => DecodeOutcome {
            matched: Match::AG1,
            correction: Correction::Gauge1,
            c_l: ag2.minus(x),
            c_g1: a.minus(x),
            c_g2: ag2 + a,
        },
        Match::AG2 => DecodeOutcome {
            matched: Match::AG2,
            correction: Correction::Gauge2,
            c_l: ag1.minus(x),
            c_g1: ag1 + a,
            c_g2: a.minus(x),
        },
        Match::A => DecodeOutcome {
            matched: Match::A,
            correction: Correction::None,
            c_l: ag1 + ag2,
            c_g1: ag1.minus(x),
            c_g2: ag2.minus(x),
        },
        Match::None => unreachable!(),
    })
}

/// Close a cycle in one basis: transitive flags become next-cycle
/// ancilla-visible flags, bounded by the reported data confidences, and the
/// per-cycle flags are cleared.
pub fn end_cycle_update(flags: &mut FlagSet, basis: Basis, outcome: &DecodeOutcome) {
    let g1 = flags.get(basis, Flag::G1);
    let g2 = flags.get(basis, Flag::G2);
    flags.set(basis, Flag::AG1, g1.min(outcome.c_g1));
    flags.set(basis, Flag::AG2, g2.min(outcome.c_g2));
    for flag in [Flag::A, Flag::G1, Flag::G2] {
        flags.set(basis, flag, Weight::INF);
    }
}
