//! Trial execution: Pauli frames, interleaved flag decoding, and the judge.
//!
//! The engine walks the same recursive rectangle structure as
//! [`crate::code`] builds, consuming location ids in the same order. A block
//! of level `k` stores the frame of its 4^k data qubits in one `u64` per
//! basis and the flag sets of itself and every sub-block. Ancilla blocks
//! live on a stack for the duration of one EC cycle.
//!
//! In sparse mode a rectangle whose id range holds no fault and whose input
//! blocks are pristine (zero frame, every flag set fresh or in the clean
//! steady state) is not executed: its output is the clean profile measured
//! once at construction. Frames are reduced modulo gauge operators after
//! every EC cycle, which never changes a syndrome, a readout or a verdict.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::Serialize;

use crate::code::{Circuit, LocationKind, Pattern, RegionTables, Shape, SizeTable, TemplateId, EC_TEMPLATE};
use crate::decoder::{
    end_cycle_update, match_syndrome, propagate_flags_cnot, update_on_location, update_on_two_qubit_gate,
    Flag, FlagSet, PriorityTies, TieBreaker, Weight,
};
use crate::error::{Error, Result};
use crate::pauli::{coset_classify, gauge_of, gauge_representative, Basis, CosetClass, Pauli};

/// Highest level the engine can execute (4^3 data qubits fit a `u64`).
pub const MAX_LEVEL: u8 = 3;
const NODES: usize = 21;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum FaultKind {
    One(Pauli),
    Two(Pauli, Pauli),
    Flip,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Fault {
    pub id: u32,
    pub kind: FaultKind,
}

/// Faults of one trial, sorted by location id, at most one per location.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ErrorSet {
    faults: Vec<Fault>,
}

impl ErrorSet {
    pub fn empty() -> ErrorSet {
        ErrorSet::default()
    }

    /// Sort and check against the circuit listing.
    pub fn new(circuit: &Circuit, mut faults: Vec<Fault>) -> Result<ErrorSet> {
        faults.sort_by_key(|f| f.id);
        for w in faults.windows(2) {
            if w[0].id == w[1].id {
                return Err(Error::InvalidArgument(format!("two faults at location {}", w[0].id)));
            }
        }
        for f in &faults {
            let loc = circuit
                .locations
                .get(f.id as usize)
                .ok_or_else(|| Error::InvalidArgument(format!("location {} out of range", f.id)))?;
            if !fault_fits(loc.kind, f.kind) {
                return Err(Error::InvalidArgument(format!(
                    "fault {:?} does not fit a {:?} location",
                    f.kind, loc.kind
                )));
            }
        }
        Ok(ErrorSet { faults })
    }

    pub fn faults(&self) -> &[Fault] {
        &self.faults
    }

    pub fn len(&self) -> usize {
        self.faults.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faults.is_empty()
    }
}

fn fault_fits(loc: LocationKind, kind: FaultKind) -> bool {
    match (loc, kind) {
        (LocationKind::Init0, FaultKind::One(Pauli::X)) | (LocationKind::InitPlus, FaultKind::One(Pauli::Z)) => true,
        (LocationKind::Wait, FaultKind::One(p)) => p != Pauli::I,
        (LocationKind::Cnot, FaultKind::Two(a, b)) => (a, b) != (Pauli::I, Pauli::I),
        (LocationKind::MeasZ | LocationKind::MeasX, FaultKind::Flip) => true,
        _ => false,
    }
}

/// Every fault a location of this kind can suffer.
pub fn fault_kinds(kind: LocationKind) -> Vec<FaultKind> {
    match kind {
        LocationKind::Init0 => vec![FaultKind::One(Pauli::X)],
        LocationKind::InitPlus => vec![FaultKind::One(Pauli::Z)],
        LocationKind::MeasZ | LocationKind::MeasX => vec![FaultKind::Flip],
        LocationKind::Wait => Pauli::NONTRIVIAL.iter().map(|&p| FaultKind::One(p)).collect(),
        LocationKind::Cnot => Pauli::two_qubit_nontrivial().map(|(a, b)| FaultKind::Two(a, b)).collect(),
    }
}

/// Uniformly random fault for a location.
pub fn draw_fault_kind<R: Rng + ?Sized>(kind: LocationKind, rng: &mut R) -> FaultKind {
    match kind {
        LocationKind::Init0 => FaultKind::One(Pauli::X),
        LocationKind::InitPlus => FaultKind::One(Pauli::Z),
        LocationKind::MeasZ | LocationKind::MeasX => FaultKind::Flip,
        LocationKind::Wait => FaultKind::One(Pauli::NONTRIVIAL[rng.random_range(0..3)]),
        LocationKind::Cnot => {
            let v = rng.random_range(1..16u8);
            let p = |b: u8| Pauli::from_bits(b & 1 != 0, b & 2 != 0);
            FaultKind::Two(p(v & 3), p(v >> 2))
        }
    }
}

/// Each location faults independently with probability `p`.
pub fn inject_stochastic<R: Rng + ?Sized>(circuit: &Circuit, p: f64, rng: &mut R) -> Result<ErrorSet> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("probability {p} outside [0, 1]")));
    }
    let n = circuit.len() as u64;
    let mut faults = Vec::new();
    if p == 0.0 {
        return Ok(ErrorSet { faults });
    }
    let gap = Geometric::new(p).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut id = gap.sample(rng);
    while id < n {
        let kind = circuit.locations[id as usize].kind;
        faults.push(Fault {
            id: id as u32,
            kind: draw_fault_kind(kind, rng),
        });
        id = id.saturating_add(1).saturating_add(gap.sample(rng));
    }
    Ok(ErrorSet { faults })
}

/// Exactly `weight` faults at distinct uniformly chosen locations.
pub fn inject_fixed_weight<R: Rng + ?Sized>(circuit: &Circuit, weight: usize, rng: &mut R) -> Result<ErrorSet> {
    if weight > circuit.len() {
        return Err(Error::InvalidArgument(format!(
            "{weight} faults requested but the circuit has {} locations",
            circuit.len()
        )));
    }
    let mut ids: Vec<u32> = sample(rng, circuit.len(), weight).into_iter().map(|i| i as u32).collect();
    ids.sort_unstable();
    let faults = ids
        .into_iter()
        .map(|id| Fault {
            id,
            kind: draw_fault_kind(circuit.locations[id as usize].kind, rng),
        })
        .collect();
    Ok(ErrorSet { faults })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderMode {
    /// Confidences are the C_L reports of lower-level decoders.
    MessagePassing,
    /// Every location has confidence one at every level.
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TrialResult {
    pub success: bool,
    /// Syndrome-1 events per level (index 0 unused).
    pub nonzero_syndromes: [u32; 4],
    /// (X, Z) syndromes of every top-level cycle, in execution order.
    pub top_syndromes: Vec<[bool; 2]>,
    /// C_L reported by the last EC of each block, indexed `[block][basis]`.
    pub final_cl: [[Weight; 2]; 2],
}

impl TrialResult {
    /// Smallest final logical confidence over blocks and bases.
    pub fn min_final_cl(&self) -> Weight {
        self.final_cl.iter().flatten().copied().min().unwrap_or(Weight::INF)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Reports {
    conf: [[Weight; 2]; 2],
    bit: bool,
}

const NO_REPORT: Reports = Reports {
    conf: [[Weight::INF; 2]; 2],
    bit: false,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Unit {
    b: u8,
    top: u8,
    m: u8,
    i: u32,
}

impl Unit {
    fn root(b: u8, level: u8) -> Unit {
        Unit {
            b,
            top: level,
            m: level,
            i: 0,
        }
    }

    fn sub(self, j: u8) -> Unit {
        Unit {
            b: self.b,
            top: self.top,
            m: self.m - 1,
            i: 4 * self.i + j as u32,
        }
    }

    fn node(self) -> usize {
        node_index(self.top, self.m, self.i)
    }

    fn offset(self) -> u32 {
        self.i * (1 << (2 * self.m))
    }

    fn mask(self) -> u64 {
        width_mask(self.m) << self.offset()
    }
}

fn node_index(top: u8, m: u8, i: u32) -> usize {
    ((1usize << (2 * (top - m))) - 1) / 3 + i as usize
}

fn width_mask(m: u8) -> u64 {
    let w = 1u32 << (2 * m);
    if w >= 64 {
        u64::MAX
    } else {
        (1u64 << w) - 1
    }
}

/// Data frame and flag tree of one block.
#[derive(Clone, Debug)]
struct Block {
    x: u64,
    z: u64,
    flags: [FlagSet; NODES],
}

impl Block {
    fn fresh() -> Block {
        Block {
            x: 0,
            z: 0,
            flags: [FlagSet::fresh(); NODES],
        }
    }

    fn bits(&self, basis: Basis) -> u64 {
        match basis {
            Basis::X => self.x,
            Basis::Z => self.z,
        }
    }

    fn bits_mut(&mut self, basis: Basis) -> &mut u64 {
        match basis {
            Basis::X => &mut self.x,
            Basis::Z => &mut self.z,
        }
    }
}

/// Bare logical operator of a level-`m` block as a mask at offset 0.
fn bare_mask(basis: Basis, m: u8) -> u64 {
    if m == 0 {
        return 1;
    }
    let inner = bare_mask(basis, m - 1);
    let support = match basis {
        Basis::X => [0u32, 2],
        Basis::Z => [0u32, 1],
    };
    let w = 1u32 << (2 * (m - 1));
    support.iter().fold(0, |acc, &j| acc | inner << (j * w))
}

/// Canonical representative of `bits` (a level-`m` block frame at offset 0)
/// modulo gauge and stabilizer operators at every level. Also returns the
/// logical content when every level is syndrome free.
fn canonical(bits: u64, basis: Basis, m: u8) -> (u64, Option<bool>) {
    if bits == 0 {
        return (0, Some(false));
    }
    if m == 0 {
        return (bits & 1, Some(bits & 1 != 0));
    }
    let w = 1u32 << (2 * (m - 1));
    let sub_mask = width_mask(m - 1);
    let mut out = 0u64;
    let mut logical = 0u8;
    let mut clean = true;
    for j in 0..4 {
        let (c, l) = canonical((bits >> (j * w)) & sub_mask, basis, m - 1);
        out |= c << (j * w);
        match l {
            Some(true) => logical |= 1 << j,
            Some(false) => {}
            None => clean = false,
        }
    }
    if !clean {
        return (out, None);
    }
    let inner = bare_mask(basis, m - 1);
    let spread = |v: u8| (0..4u32).filter(|j| v >> j & 1 != 0).fold(0u64, |acc, j| acc | inner << (j * w));
    match coset_classify(logical, basis) {
        CosetClass::Trivial => (0, Some(false)),
        CosetClass::Logical => (spread(bare_logical(basis)), Some(true)),
        CosetClass::Gauge1Side => (spread(1 << gauge_representative(basis, 0)), None),
        CosetClass::Gauge2Side => (spread(1 << gauge_representative(basis, 1)), None),
    }
}

fn bare_logical(basis: Basis) -> u8 {
    match basis {
        Basis::X => 0b0101,
        Basis::Z => 0b0011,
    }
}

/// Clean behaviour of every rectangle, measured by dense runs.
#[derive(Clone, Debug)]
struct Profile {
    steady: [FlagSet; 4],
    rect: [[Reports; 6]; 4],
    ec: [[Weight; 2]; 4],
    /// Flags a level-`k` gadget lowers when all its sub-rectangles are
    /// clean, indexed `[k][template][block]`.
    regions: [[[FlagSet; 2]; 7]; 4],
}

/// Fold the regions of a template under clean sub-rectangle reports.
fn clean_regions(template: TemplateId, below: &[Reports; 6], uniform: bool) -> [FlagSet; 2] {
    let tables = RegionTables::get();
    let mut out = [FlagSet::fresh(); 2];
    for (i, op) in template.ops().iter().enumerate() {
        let conf = if uniform { [[Weight::ONE; 2]; 2] } else { below[op.kind.index()].conf };
        let regions = tables.op(template, i);
        for basis in Basis::BOTH {
            let b = basis.index();
            let (c, t) = (conf[0][b], conf[1][b]);
            let mut lower = |blk: usize, p: Pattern, w: Weight| {
                if let Some(f) = regions.get(basis, p, blk).flag() {
                    out[blk].lower(basis, f, w);
                }
            };
            if op.kind.arity() == 1 {
                lower(0, Pattern::First, c);
            } else {
                for blk in 0..template.blocks() {
                    lower(blk, Pattern::First, c);
                    lower(blk, Pattern::Second, t);
                    lower(blk, Pattern::Both, c.max(t));
                }
            }
        }
    }
    out
}

/// Executes trials of one circuit.
#[derive(Clone, Debug)]
pub struct Engine<'c> {
    circuit: &'c Circuit,
    mode: DecoderMode,
    sparse: bool,
    profile: Option<Profile>,
    /// Locations per template at each level, `[k][template]`.
    template_size: [[u64; 7]; 4],
}

impl<'c> Engine<'c> {
    pub fn new(circuit: &'c Circuit, mode: DecoderMode) -> Result<Engine<'c>> {
        if circuit.level > MAX_LEVEL {
            return Err(Error::InvalidArgument(format!(
                "level {} exceeds the executable maximum {MAX_LEVEL}",
                circuit.level
            )));
        }
        let mut template_size = [[0u64; 7]; 4];
        for k in 1..=circuit.level {
            for t in TemplateId::ALL {
                template_size[k as usize][t.index()] =
                    t.ops().iter().map(|op| circuit.sizes.rect(op.kind, k - 1)).sum();
            }
        }
        let mut engine = Engine {
            circuit,
            mode,
            sparse: false,
            profile: None,
            template_size,
        };
        engine.profile = engine.measure_profile()?;
        engine.sparse = engine.profile.is_some();
        Ok(engine)
    }

    /// Execute every location, never using the clean profile.
    pub fn dense(mut self) -> Engine<'c> {
        self.sparse = false;
        self
    }

    pub fn is_sparse(&self) -> bool {
        self.sparse
    }

    pub fn circuit(&self) -> &Circuit {
        self.circuit
    }

    /// Flag set a level-`m` block settles in after a clean cycle.
    pub fn steady_flags(&self, m: u8) -> Option<FlagSet> {
        self.profile.as_ref().map(|p| p.steady[m as usize])
    }

    pub fn execute(&self, errors: &ErrorSet, tiebreak: &mut dyn TieBreaker) -> Result<TrialResult> {
        let level = self.circuit.level;
        let mut run = Run {
            engine: self,
            sizes: &self.circuit.sizes,
            blocks: Vec::with_capacity(2 + 2 * level as usize),
            faults: errors.faults(),
            cursor: 0,
            next_id: 0,
            tb: tiebreak,
            sparse: self.sparse,
            steady: self.profile.as_ref().map_or([FlagSet::fresh(); 4], |p| p.steady),
            result: TrialResult {
                success: false,
                nonzero_syndromes: [0; 4],
                top_syndromes: Vec::new(),
                final_cl: [[Weight::INF; 2]; 2],
            },
        };
        run.blocks.push(Block::fresh());
        run.blocks.push(Block::fresh());
        let b0 = Unit::root(0, level);
        let b1 = Unit::root(1, level);
        let success = match self.circuit.shape {
            Shape::ExRec => {
                run.ec(b0)?;
                run.ec(b1)?;
                run.cnot_gadget(b0, b1)?;
                run.result.final_cl[0] = run.ec(b0)?;
                run.result.final_cl[1] = run.ec(b1)?;
                run.judge(b0, &Basis::BOTH)? && run.judge(b1, &Basis::BOTH)?
            }
            Shape::EcCycle => {
                run.result.final_cl[0] = run.ec(b0)?;
                run.judge(b0, &Basis::BOTH)?
            }
            Shape::Prep(basis) => {
                let template = TemplateId::for_rect(basis.kind());
                run.template(template, level, [b0, b0], None)?;
                run.judge(b0, &[basis.kind().flip_basis().unwrap()])?
            }
            Shape::Rect(kind) => {
                let r = run.rect(kind, level, [b0, b1])?;
                run.result.final_cl = r.conf;
                match kind {
                    LocationKind::Init0 | LocationKind::InitPlus => run.judge(b0, &[kind.flip_basis().unwrap()])?,
                    LocationKind::MeasZ | LocationKind::MeasX => !r.bit,
                    LocationKind::Wait => run.judge(b0, &Basis::BOTH)?,
                    LocationKind::Cnot => run.judge(b0, &Basis::BOTH)? && run.judge(b1, &Basis::BOTH)?,
                }
            }
        };
        if run.next_id != self.circuit.len() as u64 {
            return Err(Error::Structural(format!(
                "engine consumed {} locations, circuit lists {}",
                run.next_id,
                self.circuit.len()
            )));
        }
        run.result.success = success;
        Ok(run.result)
    }

    fn measure_profile(&self) -> Result<Option<Profile>> {
        let level = self.circuit.level;
        let sizes = SizeTable::new(level);
        let mut profile = Profile {
            steady: [FlagSet::fresh(); 4],
            rect: [[NO_REPORT; 6]; 4],
            ec: [[Weight::INF; 2]; 4],
            regions: [[[FlagSet::fresh(); 2]; 7]; 4],
        };
        profile.rect[0] = [Reports {
            conf: [[Weight::ONE; 2]; 2],
            bit: false,
        }; 6];
        let uniform = self.mode == DecoderMode::Uniform;
        for k in 1..=level {
            for t in TemplateId::ALL {
                profile.regions[k as usize][t.index()] = clean_regions(t, &profile.rect[k as usize - 1], uniform);
            }
            let mut tb = PriorityTies;
            let mut run = Run {
                engine: self,
                sizes: &sizes,
                blocks: vec![Block::fresh(), Block::fresh()],
                faults: &[],
                cursor: 0,
                next_id: 0,
                tb: &mut tb,
                sparse: false,
                steady: profile.steady,
                result: TrialResult {
                    success: true,
                    nonzero_syndromes: [0; 4],
                    top_syndromes: Vec::new(),
                    final_cl: [[Weight::INF; 2]; 2],
                },
            };
            let u = [Unit::root(0, k), Unit::root(1, k)];
            run.ec(u[0])?;
            let first = run.blocks[0].flags;
            let cl = run.ec(u[0])?;
            if run.blocks[0].flags != first {
                return Ok(None);
            }
            for m in 1..=k {
                let steady = first[node_index(k, m, 0)];
                if m < k && steady != profile.steady[m as usize] {
                    return Ok(None);
                }
                profile.steady[m as usize] = steady;
            }
            run.steady = profile.steady;
            if !run.is_steady(u[0]) {
                return Ok(None);
            }
            profile.ec[k as usize] = cl;
            run.ec(u[1])?;
            for kind in LocationKind::ALL {
                // clean inputs: steady blocks, then fresh ones
                let steady = run.rect(kind, k, u)?;
                let steady_ok = kind.is_measurement() || (run.is_steady(u[0]) && run.is_steady(u[1]));
                run.blocks = vec![Block::fresh(), Block::fresh()];
                let fresh = run.rect(kind, k, u)?;
                let fresh_ok = kind.is_measurement() || run.is_steady(u[0]) && (kind.arity() == 1 || run.is_steady(u[1]));
                if steady != fresh || !steady_ok || !fresh_ok {
                    return Ok(None);
                }
                profile.rect[k as usize][kind.index()] = steady;
                run.blocks = vec![Block::fresh(), Block::fresh()];
                run.ec(u[0])?;
                run.ec(u[1])?;
            }
            if run.result.nonzero_syndromes.iter().any(|&n| n > 0) {
                return Ok(None);
            }
        }
        Ok(Some(profile))
    }
}

struct Run<'e, 'c, 't> {
    engine: &'e Engine<'c>,
    sizes: &'e SizeTable,
    blocks: Vec<Block>,
    faults: &'e [Fault],
    cursor: usize,
    next_id: u64,
    tb: &'t mut dyn TieBreaker,
    sparse: bool,
    steady: [FlagSet; 4],
    result: TrialResult,
}

impl Run<'_, '_, '_> {
    fn uniform(&self) -> bool {
        self.engine.mode == DecoderMode::Uniform
    }

    fn fault_free(&self, size: u64) -> bool {
        self.faults
            .get(self.cursor)
            .is_none_or(|f| (f.id as u64) >= self.next_id + size)
    }

    fn flags(&self, u: Unit) -> &FlagSet {
        &self.blocks[u.b as usize].flags[u.node()]
    }

    fn flags_mut(&mut self, u: Unit) -> &mut FlagSet {
        &mut self.blocks[u.b as usize].flags[u.node()]
    }

    /// Visit every flag node of the unit's subtree.
    fn subtree(u: Unit, mut f: impl FnMut(u8, usize) -> bool) -> bool {
        for m in 1..=u.m {
            let span = 1u32 << (2 * (u.m - m));
            let start = node_index(u.top, m, u.i * span);
            for n in start..start + span as usize {
                if !f(m, n) {
                    return false;
                }
            }
        }
        true
    }

    fn is_steady(&self, u: Unit) -> bool {
        let block = &self.blocks[u.b as usize];
        self.frame_zero(u) && Self::subtree(u, |m, n| block.flags[n] == self.steady[m as usize])
    }

    fn frame_zero(&self, u: Unit) -> bool {
        let block = &self.blocks[u.b as usize];
        (block.x | block.z) & u.mask() == 0
    }

    #[inline]
    fn pristine(&self, u: Unit) -> bool {
        let p = self.engine.profile.as_ref().unwrap();
        let block = &self.blocks[u.b as usize];
        self.frame_zero(u)
            && Self::subtree(u, |m, n| {
                let f = &block.flags[n];
                *f == p.steady[m as usize] || *f == FlagSet::fresh()
            })
    }

    fn settle(&mut self, u: Unit) {
        let p = self.engine.profile.as_ref().unwrap();
        let block = &mut self.blocks[u.b as usize];
        Self::subtree(u, |m, n| {
            block.flags[n] = p.steady[m as usize];
            true
        });
    }

    fn reset(&mut self, u: Unit) {
        let block = &mut self.blocks[u.b as usize];
        block.x &= !u.mask();
        block.z &= !u.mask();
        Self::subtree(u, |_, n| {
            block.flags[n] = FlagSet::fresh();
            true
        });
    }

    /// A level-`k` rectangle (a single location at `k = 0`).
    fn rect(&mut self, kind: LocationKind, k: u8, units: [Unit; 2]) -> Result<Reports> {
        if k == 0 {
            return self.physical(kind, units);
        }
        let size = self.sizes.rect(kind, k);
        if self.sparse && self.fault_free(size) {
            let skip = match kind {
                LocationKind::Init0 | LocationKind::InitPlus => true,
                LocationKind::Cnot => self.pristine(units[0]) && self.pristine(units[1]),
                _ => self.pristine(units[0]),
            };
            if skip {
                self.next_id += size;
                let reports = self.engine.profile.as_ref().unwrap().rect[k as usize][kind.index()];
                match kind {
                    LocationKind::MeasZ | LocationKind::MeasX => {}
                    LocationKind::Cnot => {
                        self.settle(units[0]);
                        self.settle(units[1]);
                    }
                    LocationKind::Init0 | LocationKind::InitPlus => {
                        self.reset(units[0]);
                        self.settle(units[0]);
                    }
                    LocationKind::Wait => self.settle(units[0]),
                }
                return Ok(reports);
            }
        }
        match kind {
            LocationKind::Init0 | LocationKind::InitPlus => {
                self.reset(units[0]);
                self.template(TemplateId::for_rect(kind), k, units, None)?;
                let cl = self.ec(units[0])?;
                Ok(Reports {
                    conf: [cl, [Weight::INF; 2]],
                    bit: false,
                })
            }
            LocationKind::Wait => {
                self.template(TemplateId::Wait, k, units, None)?;
                let cl = self.ec(units[0])?;
                Ok(Reports {
                    conf: [cl, [Weight::INF; 2]],
                    bit: false,
                })
            }
            LocationKind::Cnot => {
                self.cnot_gadget(units[0], units[1])?;
                let c = self.ec(units[0])?;
                let t = self.ec(units[1])?;
                Ok(Reports { conf: [c, t], bit: false })
            }
            LocationKind::MeasZ | LocationKind::MeasX => {
                let basis = kind.flip_basis().unwrap();
                let bits = self.template(TemplateId::for_rect(kind), k, units, None)?;
                let mut flags = *self.flags(units[0]);
                flags.set(basis, Flag::A, Weight::INF);
                let (bit, cl) = self.decode_bits(&flags, bits as u8, basis, k)?;
                let mut conf = [[Weight::INF; 2]; 2];
                conf[0][basis.index()] = cl;
                Ok(Reports { conf, bit })
            }
        }
    }

    /// Transversal CNOT gadget between two level-`k` blocks.
    fn cnot_gadget(&mut self, c: Unit, t: Unit) -> Result<()> {
        let k = c.m;
        let fc = *self.flags(c);
        let ft = *self.flags(t);
        propagate_flags_cnot(&fc, self.flags_mut(t), Basis::X);
        propagate_flags_cnot(&ft, self.flags_mut(c), Basis::Z);
        self.template(TemplateId::Cnot, k, [c, t], None)?;
        Ok(())
    }

    fn physical(&mut self, kind: LocationKind, units: [Unit; 2]) -> Result<Reports> {
        let id = self.next_id;
        self.next_id += 1;
        let fault = match self.faults.get(self.cursor) {
            Some(f) if f.id as u64 == id => {
                self.cursor += 1;
                Some(f.kind)
            }
            _ => None,
        };
        let [u, v] = units;
        let mut bit = false;
        match kind {
            LocationKind::Init0 | LocationKind::InitPlus => {
                let block = &mut self.blocks[u.b as usize];
                block.x &= !u.mask();
                block.z &= !u.mask();
            }
            LocationKind::Wait => {}
            LocationKind::Cnot => {
                let xc = self.blocks[u.b as usize].x >> u.offset() & 1;
                self.blocks[v.b as usize].x ^= xc << v.offset();
                let zt = self.blocks[v.b as usize].z >> v.offset() & 1;
                self.blocks[u.b as usize].z ^= zt << u.offset();
            }
            LocationKind::MeasZ | LocationKind::MeasX => {
                let basis = kind.flip_basis().unwrap();
                let block = &mut self.blocks[u.b as usize];
                bit = block.bits(basis) & u.mask() != 0;
                block.x &= !u.mask();
                block.z &= !u.mask();
            }
        }
        match fault {
            None => {}
            Some(FaultKind::Flip) => bit = !bit,
            Some(FaultKind::One(p)) => self.apply(u, p),
            Some(FaultKind::Two(p, q)) => {
                self.apply(u, p);
                self.apply(v, q);
            }
        }
        Ok(Reports {
            conf: [[Weight::ONE; 2]; 2],
            bit,
        })
    }

    fn apply(&mut self, u: Unit, p: Pauli) {
        let block = &mut self.blocks[u.b as usize];
        if p.has_x() {
            block.x ^= u.mask();
        }
        if p.has_z() {
            block.z ^= u.mask();
        }
    }

    /// Run a gadget template at level `k`, each op as a level-`k-1`
    /// rectangle, and feed the reports to the level-`k` flags of `blocks`.
    /// `ancillas` supplies units 4 and 5 of the EC template. Returns the
    /// measurement outcomes indexed by op.
    fn template(&mut self, template: TemplateId, k: u8, blocks: [Unit; 2], ancillas: Option<[Unit; 2]>) -> Result<u32> {
        if self.sparse {
            if let Some(bits) = self.fast_template(template, k, blocks) {
                return Ok(bits);
            }
        }
        let tables = RegionTables::get();
        let mut bits = 0u32;
        for (i, op) in template.ops().iter().enumerate() {
            let map = |u: u8| -> Unit {
                match (template, ancillas) {
                    (TemplateId::Cnot, _) => blocks[(u / 4) as usize].sub(u % 4),
                    (_, Some(a)) if u >= 4 => a[(u - 4) as usize],
                    _ => blocks[0].sub(u),
                }
            };
            let u0 = map(op.units[0]);
            let u1 = if op.kind.arity() == 2 { map(op.units[1]) } else { u0 };
            let rep = self.rect(op.kind, k - 1, [u0, u1])?;
            if rep.bit {
                bits |= 1 << i;
            }
            let conf = if self.uniform() { [[Weight::ONE; 2]; 2] } else { rep.conf };
            let regions = tables.op(template, i);
            for basis in Basis::BOTH {
                let b = basis.index();
                if op.kind.arity() == 1 {
                    let r = regions.get(basis, Pattern::First, 0);
                    let (rx, rz) = match basis {
                        Basis::X => (r, crate::decoder::Region::N),
                        Basis::Z => (crate::decoder::Region::N, r),
                    };
                    update_on_location(self.flags_mut(blocks[0]), rx, rz, [conf[0][b]; 2]);
                } else if template.blocks() == 2 {
                    let mut fa = *self.flags(blocks[0]);
                    let mut fb = *self.flags(blocks[1]);
                    update_on_two_qubit_gate(
                        &mut fa,
                        &mut fb,
                        basis,
                        regions.get(basis, Pattern::First, 0),
                        regions.get(basis, Pattern::Second, 1),
                        regions.get(basis, Pattern::Both, 0),
                        regions.get(basis, Pattern::Both, 1),
                        conf[0][b],
                        conf[1][b],
                    );
                    *self.flags_mut(blocks[0]) = fa;
                    *self.flags_mut(blocks[1]) = fb;
                } else {
                    let flags = self.flags_mut(blocks[0]);
                    let both = conf[0][b].max(conf[1][b]);
                    for (p, w) in [(Pattern::First, conf[0][b]), (Pattern::Second, conf[1][b]), (Pattern::Both, both)] {
                        if let Some(f) = regions.get(basis, p, 0).flag() {
                            flags.lower(basis, f, w);
                        }
                    }
                }
            }
        }
        Ok(bits)
    }

    /// Sub-units a template touches, other than EC ancillas.
    fn template_units(template: TemplateId, blocks: [Unit; 2]) -> ([Unit; 8], usize) {
        let mut out = [blocks[0]; 8];
        let n = if template == TemplateId::Cnot { 8 } else { 4 };
        for (j, slot) in out.iter_mut().enumerate().take(n) {
            *slot = blocks[j / 4].sub((j % 4) as u8);
        }
        (out, n)
    }

    /// A fault-free gadget whose sub-blocks are pristine (or physical).
    /// Every sub-rectangle then reports its clean confidences, so the
    /// level-`k` flags just absorb the folded clean regions. At level one
    /// the frames move transversally; ancillas of an EC cycle are fresh,
    /// so its two syndromes are the data parities.
    fn fast_template(&mut self, template: TemplateId, k: u8, blocks: [Unit; 2]) -> Option<u32> {
        let size = self.engine.template_size[k as usize][template.index()];
        if !self.fault_free(size) {
            return None;
        }
        let (subs, n) = Self::template_units(template, blocks);
        let resets = matches!(template, TemplateId::PrepZero | TemplateId::PrepPlus);
        if k > 1 && !resets && !subs[..n].iter().all(|&u| self.pristine(u)) {
            return None;
        }
        let mut bits = 0u32;
        if k == 1 {
            match template {
                TemplateId::Ec => {
                    let block = &self.blocks[blocks[0].b as usize];
                    let m = blocks[0].mask();
                    // MeasX outcomes carry Z parity (op 10), MeasZ X parity (op 22)
                    bits |= ((block.z & m).count_ones() & 1) << 10;
                    bits |= ((block.x & m).count_ones() & 1) << 22;
                }
                TemplateId::Cnot => {
                    let (c, t) = (blocks[0], blocks[1]);
                    let xc = (self.blocks[c.b as usize].x & c.mask()) >> c.offset();
                    let zt = (self.blocks[t.b as usize].z & t.mask()) >> t.offset();
                    self.blocks[t.b as usize].x ^= xc << t.offset();
                    self.blocks[c.b as usize].z ^= zt << c.offset();
                }
                TemplateId::MeasZ | TemplateId::MeasX => {
                    let basis = if template == TemplateId::MeasZ { Basis::X } else { Basis::Z };
                    let u = blocks[0];
                    let block = &mut self.blocks[u.b as usize];
                    bits = ((block.bits(basis) & u.mask()) >> u.offset()) as u32;
                    block.x &= !u.mask();
                    block.z &= !u.mask();
                }
                TemplateId::PrepZero | TemplateId::PrepPlus => {
                    let u = blocks[0];
                    let block = &mut self.blocks[u.b as usize];
                    block.x &= !u.mask();
                    block.z &= !u.mask();
                }
                TemplateId::Wait => {}
            }
        } else {
            for &u in &subs[..n] {
                if resets {
                    self.reset(u);
                }
                self.settle(u);
            }
        }
        let regions = self.engine.profile.as_ref().unwrap().regions[k as usize][template.index()];
        for (blk, r) in regions.iter().enumerate().take(template.blocks()) {
            let flags = self.flags_mut(blocks[blk]);
            for basis in Basis::BOTH {
                for f in Flag::ALL {
                    flags.lower(basis, f, r.get(basis, f));
                }
            }
        }
        self.next_id += size;
        Some(bits)
    }

    /// One level-`k` EC cycle on `u`. Returns C_L per basis.
    fn ec(&mut self, u: Unit) -> Result<[Weight; 2]> {
        let k = u.m;
        let size = self.sizes.ec(k);
        if self.sparse && self.fault_free(size) && self.pristine(u) {
            self.next_id += size;
            self.settle(u);
            if u.b < 2 && k == self.engine.circuit.level {
                self.result.top_syndromes.push([false, false]);
            }
            return Ok(self.engine.profile.as_ref().unwrap().ec[k as usize]);
        }
        let base = self.blocks.len() as u8;
        self.blocks.push(Block::fresh());
        self.blocks.push(Block::fresh());
        let anc = [Unit::root(base, k - 1), Unit::root(base + 1, k - 1)];
        let bits = self.template(TemplateId::Ec, k, [u, u], Some(anc))?;
        self.blocks.truncate(base as usize);
        let mut syn = [false; 2];
        // X errors flip the Z-gauge outcomes and vice versa
        for (i, op) in EC_TEMPLATE.iter().enumerate() {
            if op.kind.is_measurement() {
                let basis = op.kind.flip_basis().unwrap();
                syn[basis.index()] ^= bits >> i & 1 != 0;
            }
        }
        let mut cl = [Weight::INF; 2];
        for basis in Basis::BOTH {
            let s = syn[basis.index()];
            let flags = *self.flags(u);
            let outcome = match_syndrome(&flags, basis, s, k, &mut *self.tb)?;
            if let Some(g) = outcome.correction.gauge() {
                let target = u.sub(gauge_representative(basis, g) as u8);
                let mask = bare_mask(basis, k - 1) << target.offset();
                *self.blocks[u.b as usize].bits_mut(basis) ^= mask;
            }
            end_cycle_update(self.flags_mut(u), basis, &outcome);
            cl[basis.index()] = if self.uniform() { Weight::ONE } else { outcome.c_l };
            if s {
                self.result.nonzero_syndromes[k as usize] += 1;
            }
        }
        if u.b < 2 && k == self.engine.circuit.level {
            self.result.top_syndromes.push(syn);
        }
        self.canonicalize(u);
        Ok(cl)
    }

    fn canonicalize(&mut self, u: Unit) {
        let block = &mut self.blocks[u.b as usize];
        for basis in Basis::BOTH {
            let bits = block.bits(basis);
            let local = (bits & u.mask()) >> u.offset();
            let (c, _) = canonical(local, basis, u.m);
            *block.bits_mut(basis) = (bits & !u.mask()) | (c << u.offset());
        }
    }

    /// Decode four sub-block readouts with carried flags.
    fn decode_bits(&mut self, flags: &FlagSet, bits: u8, basis: Basis, k: u8) -> Result<(bool, Weight)> {
        let syndrome = bits.count_ones() % 2 == 1;
        let outcome = match_syndrome(flags, basis, syndrome, k, &mut *self.tb)?;
        let mut v = bits;
        if let Some(g) = outcome.correction.gauge() {
            v ^= 1 << gauge_representative(basis, g);
        }
        let cl = if self.uniform() { Weight::ONE } else { outcome.c_l };
        Ok((coset_classify(v, basis) == CosetClass::Logical, cl))
    }

    /// Noiseless flag-informed readout of a level-`m` unit: sub-blocks are
    /// decoded first, their confidences lower the carried flags.
    fn ideal_readout(&mut self, u: Unit, basis: Basis) -> Result<(bool, Weight)> {
        if u.m == 0 {
            let bit = self.blocks[u.b as usize].bits(basis) & u.mask() != 0;
            return Ok((bit, Weight::INF));
        }
        let mut flags = *self.flags(u);
        flags.set(basis, Flag::A, Weight::INF);
        let mut bits = 0u8;
        for j in 0..4 {
            let (bit, conf) = self.ideal_readout(u.sub(j), basis)?;
            if bit {
                bits |= 1 << j;
            }
            if !self.uniform() {
                let flag = if gauge_of(basis, j as usize) == 0 { Flag::AG1 } else { Flag::AG2 };
                flags.lower(basis, flag, conf);
            }
        }
        self.decode_bits(&flags, bits, basis, u.m)
    }

    fn judge(&mut self, u: Unit, bases: &[Basis]) -> Result<bool> {
        for &basis in bases {
            if self.ideal_readout(u, basis)?.0 {
                return Ok(false);
            }
        }
        Ok(true)
    }
}
