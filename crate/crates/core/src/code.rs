//! The [[4,1,2]] code, its gadgets, and the concatenated CNOT exRec.
//!
//! Every gadget is described once as a template over abstract units. At the
//! physical level a unit is a qubit; at level `k` it is a level-`k-1` block
//! and each template operation is carried out by a level-`k-1` rectangle
//! (the encoded operation followed by error correction on its outputs).
//!
//! Unit numbering inside templates:
//! * EC cycle: 0..=3 data, 4 and 5 ancillas.
//! * Transversal CNOT: 0..=3 control block, 4..=7 target block.
//! * Preparation, idle and measurement: 0..=3.
//!
//! Flag regions are derived, not tabulated by hand: for each operation and
//! each way an error can sit on its operands we push a single X or Z error
//! through the rest of the cycle and read off the data coset and whether the
//! ancilla parity flipped.

use std::sync::OnceLock;

use serde::Serialize;

use crate::decoder::{Flag, Region};
use crate::error::{Error, Result};
use crate::pauli::{coset_classify, propagate_in_place, Basis, CosetClass, Gate, PauliFrame};

/// Kinds of circuit locations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LocationKind {
    Init0,
    InitPlus,
    MeasZ,
    MeasX,
    Cnot,
    Wait,
}

impl LocationKind {
    pub const ALL: [LocationKind; 6] = [
        LocationKind::Init0,
        LocationKind::InitPlus,
        LocationKind::MeasZ,
        LocationKind::MeasX,
        LocationKind::Cnot,
        LocationKind::Wait,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn arity(self) -> usize {
        if self == LocationKind::Cnot {
            2
        } else {
            1
        }
    }

    pub fn is_init(self) -> bool {
        matches!(self, LocationKind::Init0 | LocationKind::InitPlus)
    }

    pub fn is_measurement(self) -> bool {
        matches!(self, LocationKind::MeasZ | LocationKind::MeasX)
    }

    /// Errors of this basis flip the outcome of a measurement, or are what
    /// a faulty preparation leaves behind.
    pub fn flip_basis(self) -> Option<Basis> {
        match self {
            LocationKind::Init0 | LocationKind::MeasZ => Some(Basis::X),
            LocationKind::InitPlus | LocationKind::MeasX => Some(Basis::Z),
            _ => None,
        }
    }
}

/// Basis of an encoded preparation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum PrepBasis {
    Zero,
    Plus,
}

impl PrepBasis {
    pub fn kind(self) -> LocationKind {
        match self {
            PrepBasis::Zero => LocationKind::Init0,
            PrepBasis::Plus => LocationKind::InitPlus,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TemplateOp {
    pub kind: LocationKind,
    pub units: [u8; 2],
    pub step: u8,
}

const fn op1(kind: LocationKind, u: u8, step: u8) -> TemplateOp {
    TemplateOp {
        kind,
        units: [u, u8::MAX],
        step,
    }
}

const fn cx(c: u8, t: u8, step: u8) -> TemplateOp {
    TemplateOp {
        kind: LocationKind::Cnot,
        units: [c, t],
        step,
    }
}

use LocationKind::{Init0, InitPlus, MeasX, MeasZ, Wait};

/// One syndrome-extraction cycle. X gauges first (ancilla 4 on {1,2},
/// ancilla 5 on {3,4}), then Z gauges (ancilla 4 on {1,3}, ancilla 5 on
/// {2,4}). Idle data qubits wait during CNOT steps.
pub const EC_TEMPLATE: [TemplateOp; 24] = [
    op1(InitPlus, 4, 0),
    op1(InitPlus, 5, 0),
    cx(4, 0, 1),
    cx(5, 2, 1),
    op1(Wait, 1, 1),
    op1(Wait, 3, 1),
    cx(4, 1, 2),
    cx(5, 3, 2),
    op1(Wait, 0, 2),
    op1(Wait, 2, 2),
    op1(MeasX, 4, 3),
    op1(MeasX, 5, 3),
    op1(Init0, 4, 4),
    op1(Init0, 5, 4),
    cx(0, 4, 5),
    cx(1, 5, 5),
    op1(Wait, 2, 5),
    op1(Wait, 3, 5),
    cx(2, 4, 6),
    cx(3, 5, 6),
    op1(Wait, 0, 6),
    op1(Wait, 1, 6),
    op1(MeasZ, 4, 7),
    op1(MeasZ, 5, 7),
];

/// Encoded |0>: Bell pairs on (1,2) and (3,4).
pub const PREP_ZERO_TEMPLATE: [TemplateOp; 6] = [
    op1(InitPlus, 0, 0),
    op1(Init0, 1, 0),
    op1(InitPlus, 2, 0),
    op1(Init0, 3, 0),
    cx(0, 1, 1),
    cx(2, 3, 1),
];

/// Encoded |+>: Bell pairs on (1,3) and (2,4).
pub const PREP_PLUS_TEMPLATE: [TemplateOp; 6] = [
    op1(InitPlus, 0, 0),
    op1(InitPlus, 1, 0),
    op1(Init0, 2, 0),
    op1(Init0, 3, 0),
    cx(0, 2, 1),
    cx(1, 3, 1),
];

pub const CNOT_TEMPLATE: [TemplateOp; 4] = [cx(0, 4, 0), cx(1, 5, 0), cx(2, 6, 0), cx(3, 7, 0)];

pub const WAIT_TEMPLATE: [TemplateOp; 4] = [op1(Wait, 0, 0), op1(Wait, 1, 0), op1(Wait, 2, 0), op1(Wait, 3, 0)];

pub const MEASZ_TEMPLATE: [TemplateOp; 4] = [op1(MeasZ, 0, 0), op1(MeasZ, 1, 0), op1(MeasZ, 2, 0), op1(MeasZ, 3, 0)];

pub const MEASX_TEMPLATE: [TemplateOp; 4] = [op1(MeasX, 0, 0), op1(MeasX, 1, 0), op1(MeasX, 2, 0), op1(MeasX, 3, 0)];

/// Which gadget a location belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum TemplateId {
    Ec,
    Cnot,
    PrepZero,
    PrepPlus,
    Wait,
    MeasZ,
    MeasX,
}

impl TemplateId {
    pub const ALL: [TemplateId; 7] = [
        TemplateId::Ec,
        TemplateId::Cnot,
        TemplateId::PrepZero,
        TemplateId::PrepPlus,
        TemplateId::Wait,
        TemplateId::MeasZ,
        TemplateId::MeasX,
    ];

    pub fn ops(self) -> &'static [TemplateOp] {
        match self {
            TemplateId::Ec => &EC_TEMPLATE,
            TemplateId::Cnot => &CNOT_TEMPLATE,
            TemplateId::PrepZero => &PREP_ZERO_TEMPLATE,
            TemplateId::PrepPlus => &PREP_PLUS_TEMPLATE,
            TemplateId::Wait => &WAIT_TEMPLATE,
            TemplateId::MeasZ => &MEASZ_TEMPLATE,
            TemplateId::MeasX => &MEASX_TEMPLATE,
        }
    }

    /// Number of blocks whose flags the gadget feeds.
    pub fn blocks(self) -> usize {
        if self == TemplateId::Cnot {
            2
        } else {
            1
        }
    }

    /// The gadget that starts a rectangle of this kind.
    pub fn for_rect(kind: LocationKind) -> TemplateId {
        match kind {
            LocationKind::Init0 => TemplateId::PrepZero,
            LocationKind::InitPlus => TemplateId::PrepPlus,
            LocationKind::MeasZ => TemplateId::MeasZ,
            LocationKind::MeasX => TemplateId::MeasX,
            LocationKind::Cnot => TemplateId::Cnot,
            LocationKind::Wait => TemplateId::Wait,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Which operands of a location carry the error.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Pattern {
    /// The only operand, or the control of a CNOT.
    First,
    /// The target of a CNOT.
    Second,
    /// Both CNOT operands (a correlated error).
    Both,
}

impl Pattern {
    pub const ALL: [Pattern; 3] = [Pattern::First, Pattern::Second, Pattern::Both];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Regions of one template operation, indexed `[basis][pattern][block]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OpRegions(pub [[[Region; 2]; 3]; 2]);

impl OpRegions {
    pub fn get(&self, basis: Basis, pattern: Pattern, block: usize) -> Region {
        self.0[basis.index()][pattern.index()][block]
    }
}

/// Flag regions of every template, computed once.
#[derive(Debug)]
pub struct RegionTables {
    tables: [Vec<OpRegions>; 7],
}

impl RegionTables {
    pub fn get() -> &'static RegionTables {
        static TABLES: OnceLock<RegionTables> = OnceLock::new();
        TABLES.get_or_init(|| RegionTables::compute().expect("syndrome circuit is not fault tolerant"))
    }

    pub fn compute() -> Result<RegionTables> {
        let mut tables: [Vec<OpRegions>; 7] = Default::default();
        for t in TemplateId::ALL {
            tables[t.index()] = compute_template(t)?;
        }
        Ok(RegionTables { tables })
    }

    pub fn op(&self, template: TemplateId, op: usize) -> &OpRegions {
        &self.tables[template.index()][op]
    }

    pub fn template(&self, template: TemplateId) -> &[OpRegions] {
        &self.tables[template.index()]
    }
}

/// A gate in the physical trace used to derive regions. `record` names the
/// (block, basis) whose syndrome a measurement contributes to.
#[derive(Clone, Copy)]
struct TraceOp {
    gate: Gate,
    kind: LocationKind,
    record: Option<(usize, Basis)>,
    qubits: [usize; 2],
}

fn ec_trace(block: usize, out: &mut Vec<TraceOp>) {
    let base = 6 * block;
    for op in EC_TEMPLATE.iter() {
        out.push(trace_op(op, |u| base + u as usize, Some(block)));
    }
}

fn trace_op(op: &TemplateOp, map: impl Fn(u8) -> usize, block: Option<usize>) -> TraceOp {
    let q0 = map(op.units[0]);
    let q1 = if op.kind.arity() == 2 { map(op.units[1]) } else { usize::MAX };
    let gate = match op.kind {
        LocationKind::Cnot => Gate::Cnot {
            control: q0,
            target: q1,
        },
        LocationKind::Init0 | LocationKind::InitPlus => Gate::Init { qubit: q0 },
        LocationKind::MeasZ | LocationKind::MeasX => Gate::Measure { qubit: q0 },
        LocationKind::Wait => Gate::Wait { qubit: q0 },
    };
    let record = match (op.kind, block) {
        (LocationKind::MeasZ, Some(b)) => Some((b, Basis::X)),
        (LocationKind::MeasX, Some(b)) => Some((b, Basis::Z)),
        _ => None,
    };
    TraceOp {
        gate,
        kind: op.kind,
        record,
        qubits: [q0, q1],
    }
}

/// (gauge, parity flip) of one block after pushing an error to cycle end.
fn effect_to_region(coset: CosetClass, flip: bool) -> Result<Region> {
    let gauge = match coset {
        CosetClass::Trivial => None,
        CosetClass::Gauge1Side => Some(0),
        CosetClass::Gauge2Side => Some(1),
        CosetClass::Logical => {
            return Err(Error::Structural(
                "single fault leaves a logical error within one cycle".into(),
            ))
        }
    };
    Ok(Region::from_flag(Flag::from_effect(gauge, flip)))
}

/// Inject a `basis` error after trace op `at` on the operands selected by
/// `pattern`, run to the end and report the region seen by each block.
///
/// `stabilized` is the basis whose logical operator stabilizes the state a
/// preparation gadget produces; such errors are harmless.
fn trace_effect(
    trace: &[TraceOp],
    blocks: usize,
    at: usize,
    basis: Basis,
    pattern: Pattern,
    stabilized: Option<Basis>,
) -> Result<[Region; 2]> {
    let n = 6 * blocks;
    let mut frame = PauliFrame::new(n);
    let mut flips = [[false; 2]; 2];
    let op = trace[at];
    if op.kind.is_measurement() {
        // an outcome flip, visible only to the basis this measurement reads
        if let Some((b, rb)) = op.record {
            if rb == basis && pattern == Pattern::First {
                flips[b][basis.index()] ^= true;
            }
        }
    } else {
        let targets: &[usize] = match pattern {
            Pattern::First => &op.qubits[..1],
            Pattern::Second => &op.qubits[1..2],
            Pattern::Both => &op.qubits[..2],
        };
        for &q in targets {
            frame.flip(q, basis)?;
        }
    }
    for later in &trace[at + 1..] {
        if let Some((b, rb)) = later.record {
            if let Gate::Measure { qubit } = later.gate {
                flips[b][rb.index()] ^= frame.bit(qubit, rb);
            }
        }
        propagate_in_place(&mut frame, &later.gate)?;
    }
    let mut out = [Region::N; 2];
    for (b, slot) in out.iter_mut().enumerate().take(blocks) {
        let mut data = 0u8;
        for j in 0..4 {
            if frame.bit(6 * b + j, basis) {
                data |= 1 << j;
            }
        }
        let mut coset = coset_classify(data, basis);
        if coset == CosetClass::Logical && stabilized == Some(basis) {
            coset = CosetClass::Trivial;
        }
        *slot = effect_to_region(coset, flips[b][basis.index()])?;
    }
    Ok(out)
}

fn compute_template(t: TemplateId) -> Result<Vec<OpRegions>> {
    let ops = t.ops();
    if matches!(t, TemplateId::MeasZ | TemplateId::MeasX) {
        // a flipped outcome on unit j reads like an error on data qubit j
        return Ok(ops
            .iter()
            .map(|op| {
                let mut r = [[[Region::N; 2]; 3]; 2];
                let basis = op.kind.flip_basis().unwrap();
                let coset = coset_classify(1 << op.units[0], basis);
                r[basis.index()][Pattern::First.index()][0] = effect_to_region(coset, true).unwrap();
                OpRegions(r)
            })
            .collect());
    }
    let blocks = t.blocks();
    let mut trace = Vec::new();
    let frag_len = if t == TemplateId::Ec {
        0
    } else {
        for op in ops {
            // fragment units map onto the data qubits of each block
            trace.push(trace_op(op, |u| 6 * (u as usize / 4) + u as usize % 4, None));
        }
        ops.len()
    };
    for b in 0..blocks {
        ec_trace(b, &mut trace);
    }
    let stabilized = match t {
        TemplateId::PrepZero => Some(Basis::Z),
        TemplateId::PrepPlus => Some(Basis::X),
        _ => None,
    };
    let count = if t == TemplateId::Ec { EC_TEMPLATE.len() } else { frag_len };
    let mut out = Vec::with_capacity(count);
    for (i, op) in trace.iter().take(count).enumerate() {
        let mut r = [[[Region::N; 2]; 3]; 2];
        for basis in Basis::BOTH {
            let patterns: &[Pattern] = if op.kind.arity() == 2 { &Pattern::ALL } else { &Pattern::ALL[..1] };
            for &p in patterns {
                r[basis.index()][p.index()] = trace_effect(&trace, blocks, i, basis, p, stabilized).map_err(|e| {
                    Error::Structural(format!("{t:?} op {i} {basis:?} {p:?}: {e}"))
                })?;
            }
        }
        out.push(OpRegions(r));
    }
    Ok(out)
}

/// Location counts of every rectangle kind per level.
#[derive(Clone, Debug)]
pub struct SizeTable {
    rect: Vec<[u64; 6]>,
    ec: Vec<u64>,
}

impl SizeTable {
    pub fn new(max_level: u8) -> SizeTable {
        let mut rect = vec![[1u64; 6]];
        let mut ec = vec![0u64];
        for k in 1..=max_level as usize {
            let below = rect[k - 1];
            let sum = |ops: &[TemplateOp]| ops.iter().map(|op| below[op.kind.index()]).sum::<u64>();
            let e = sum(&EC_TEMPLATE);
            let mut cur = [0u64; 6];
            for kind in LocationKind::ALL {
                let gadget = sum(TemplateId::for_rect(kind).ops());
                cur[kind.index()] = match kind {
                    LocationKind::MeasZ | LocationKind::MeasX => gadget,
                    LocationKind::Cnot => gadget + 2 * e,
                    _ => gadget + e,
                };
            }
            rect.push(cur);
            ec.push(e);
        }
        SizeTable { rect, ec }
    }

    pub fn max_level(&self) -> u8 {
        (self.rect.len() - 1) as u8
    }

    /// Physical locations in a level-`k` rectangle (`k = 0`: one location).
    pub fn rect(&self, kind: LocationKind, k: u8) -> u64 {
        self.rect[k as usize][kind.index()]
    }

    pub fn ec(&self, k: u8) -> u64 {
        self.ec[k as usize]
    }

    pub fn exrec(&self, l: u8) -> u64 {
        4 * self.ec(l) + 4 * self.rect(LocationKind::Cnot, l - 1)
    }

    pub fn prep(&self, k: u8, basis: PrepBasis) -> u64 {
        self.rect(basis.kind(), k) - self.ec(k)
    }

    /// Locations of a level-`k` rectangle before its trailing EC cycles.
    pub fn gadget(&self, kind: LocationKind, k: u8) -> u64 {
        let trailing = match kind {
            LocationKind::MeasZ | LocationKind::MeasX => 0,
            LocationKind::Cnot => 2,
            _ => 1,
        };
        self.rect(kind, k) - trailing * self.ec(k)
    }
}

/// Physical location count of the level-`l` CNOT exRec.
pub fn count_locations(level: u8) -> Result<u64> {
    if level == 0 {
        return Err(Error::InvalidArgument("level must be at least 1".into()));
    }
    Ok(SizeTable::new(level).exrec(level))
}

/// What a circuit implements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Shape {
    /// Leading EC on both blocks, transversal CNOT, trailing EC on both.
    ExRec,
    /// One EC cycle on a fresh block.
    EcCycle,
    /// The encoded preparation gadget alone (no trailing EC).
    Prep(PrepBasis),
    /// A full rectangle of the given kind on fresh blocks.
    Rect(LocationKind),
}

/// Template operation a physical location came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Context {
    pub template: TemplateId,
    pub op: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Location {
    pub id: u32,
    pub kind: LocationKind,
    /// Physical qubits; the second is `u32::MAX` for one-qubit locations.
    pub qubits: [u32; 2],
    pub time_step: u32,
    /// Level of the innermost EC cycle containing the location, or the
    /// circuit level for locations of the outermost gadget.
    pub level: u8,
    pub context: Context,
}

impl Location {
    pub fn operands(&self) -> &[u32] {
        &self.qubits[..self.kind.arity()]
    }

    pub fn gate(&self) -> Gate {
        let q = self.qubits[0] as usize;
        match self.kind {
            LocationKind::Cnot => Gate::Cnot {
                control: q,
                target: self.qubits[1] as usize,
            },
            LocationKind::Init0 | LocationKind::InitPlus => Gate::Init { qubit: q },
            LocationKind::MeasZ | LocationKind::MeasX => Gate::Measure { qubit: q },
            LocationKind::Wait => Gate::Wait { qubit: q },
        }
    }
}

/// Span of one EC cycle in the location list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CycleMarker {
    pub level: u8,
    /// First physical qubit of the corrected block's 6^level qubit range.
    pub block_base: u32,
    pub first_id: u32,
    pub end_id: u32,
}

/// Fully expanded circuit.
///
/// Qubits are laid out recursively: a level-`k` block with its ancillas
/// occupies 6^k consecutive qubits, slots 0..=3 data and 4, 5 ancillas,
/// each slot a level-`k-1` block. Location ids follow execution order:
/// rectangles run depth first, so ids are monotone in time along every
/// qubit but parallel rectangles are serialized.
#[derive(Clone, Debug)]
pub struct Circuit {
    pub level: u8,
    pub shape: Shape,
    pub locations: Vec<Location>,
    pub qubit_count: u32,
    pub cycles: Vec<CycleMarker>,
    pub sizes: SizeTable,
}

impl Circuit {
    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    /// Regions of a location for one basis, per pattern and block.
    pub fn regions(&self, id: u32, basis: Basis) -> [[Region; 2]; 3] {
        let ctx = self.locations[id as usize].context;
        RegionTables::get().op(ctx.template, ctx.op as usize).0[basis.index()]
    }

    /// Region hit by a single-operand error at a location (the control for
    /// CNOTs), on the first block of its gadget.
    pub fn flag_region(&self, id: u32, basis: Basis) -> Region {
        self.regions(id, basis)[Pattern::First.index()][0]
    }
}

struct Builder {
    locations: Vec<Location>,
    cycles: Vec<CycleMarker>,
}

fn pow6(k: u8) -> u32 {
    6u32.pow(k as u32)
}

impl Builder {
    fn loc(&mut self, kind: LocationKind, qubits: [u32; 2], t: u32, level: u8, ctx: Context) {
        let id = self.locations.len() as u32;
        self.locations.push(Location {
            id,
            kind,
            qubits,
            time_step: t,
            level,
            context: ctx,
        });
    }

    /// Slot `j` of the level-`k` block at `base`.
    fn slot(base: u32, k: u8, j: u8) -> u32 {
        base + j as u32 * pow6(k - 1)
    }

    /// Level-`k` rectangle on blocks at `bases`; returns its end time.
    fn rect(&mut self, kind: LocationKind, k: u8, bases: [u32; 2], t: u32, enclosing: u8, ctx: Context) -> u32 {
        if k == 0 {
            let qubits = if kind.arity() == 2 { bases } else { [bases[0], u32::MAX] };
            self.loc(kind, qubits, t, enclosing, ctx);
            return t + 1;
        }
        let template = TemplateId::for_rect(kind);
        let end = self.gadget(template, k, bases, t, enclosing);
        if kind.is_measurement() {
            return end;
        }
        let mut stop = end;
        for &b in &bases[..kind.arity()] {
            stop = stop.max(self.ec(k, b, end));
        }
        stop
    }

    /// The gadget part of a level-`k` rectangle: each template op runs as a
    /// level-`k-1` rectangle on the sub-blocks.
    fn gadget(&mut self, template: TemplateId, k: u8, bases: [u32; 2], t: u32, enclosing: u8) -> u32 {
        let unit = |u: u8| -> u32 {
            if template == TemplateId::Cnot {
                Self::slot(bases[(u / 4) as usize], k, u % 4)
            } else {
                Self::slot(bases[0], k, u)
            }
        };
        self.steps(template, k, unit, t, enclosing)
    }

    fn steps(&mut self, template: TemplateId, k: u8, unit: impl Fn(u8) -> u32, t: u32, enclosing: u8) -> u32 {
        let ops = template.ops();
        let mut step_start = t;
        let mut step_end = t;
        let mut current = ops[0].step;
        for (i, op) in ops.iter().enumerate() {
            if op.step != current {
                current = op.step;
                step_start = step_end;
            }
            let bases = [unit(op.units[0]), if op.kind.arity() == 2 { unit(op.units[1]) } else { 0 }];
            let ctx = Context {
                template,
                op: i as u8,
            };
            let end = self.rect(op.kind, k - 1, bases, step_start, enclosing, ctx);
            step_end = step_end.max(end);
        }
        step_end
    }

    fn ec(&mut self, k: u8, base: u32, t: u32) -> u32 {
        let first = self.locations.len() as u32;
        let unit = |u: u8| Self::slot(base, k, u);
        let end = self.steps(TemplateId::Ec, k, unit, t, k);
        self.cycles.push(CycleMarker {
            level: k,
            block_base: base,
            first_id: first,
            end_id: self.locations.len() as u32,
        });
        end
    }
}

fn build(level: u8, shape: Shape) -> Result<Circuit> {
    if level == 0 {
        return Err(Error::InvalidArgument("level must be at least 1".into()));
    }
    let sizes = SizeTable::new(level);
    let mut b = Builder {
        locations: Vec::new(),
        cycles: Vec::new(),
    };
    let block = pow6(level);
    let mut blocks = 1;
    match shape {
        Shape::ExRec => {
            blocks = 2;
            let t = b.ec(level, 0, 0);
            let t = t.max(b.ec(level, block, 0));
            let end = b.gadget(TemplateId::Cnot, level, [0, block], t, level);
            b.ec(level, 0, end);
            b.ec(level, block, end);
        }
        Shape::EcCycle => {
            b.ec(level, 0, 0);
        }
        Shape::Prep(basis) => {
            let template = TemplateId::for_rect(basis.kind());
            b.gadget(template, level, [0, 0], 0, level);
        }
        Shape::Rect(kind) => {
            blocks = kind.arity();
            b.rect(
                kind,
                level,
                [0, block],
                0,
                level,
                Context {
                    template: TemplateId::for_rect(kind),
                    op: 0,
                },
            );
        }
    }
    Ok(Circuit {
        level,
        shape,
        locations: b.locations,
        qubit_count: blocks as u32 * block,
        cycles: b.cycles,
        sizes,
    })
}

/// Level-`l` CNOT extended rectangle.
pub fn build_exrec(level: u8) -> Result<Circuit> {
    build(level, Shape::ExRec)
}

/// One level-`k` EC cycle on a fresh block.
pub fn build_ec_cycle(level: u8) -> Result<Circuit> {
    build(level, Shape::EcCycle)
}

/// Level-`k` encoded preparation gadget (without the following EC).
pub fn build_prep(level: u8, basis: PrepBasis) -> Result<Circuit> {
    build(level, Shape::Prep(basis))
}

/// A complete level-`k` rectangle on fresh blocks.
pub fn build_rect(level: u8, kind: LocationKind) -> Result<Circuit> {
    build(level, Shape::Rect(kind))
}

/// Code operators as 4-bit masks (bit `j` = qubit `j+1`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CodeDefinition {
    /// (X support, Z support) pairs.
    pub stabilizers: [(u8, u8); 2],
    pub gauges: [(u8, u8); 4],
    pub dressed_x: u8,
    pub dressed_z: u8,
    pub bare_x: u8,
    pub bare_z: u8,
}

pub const CODE: CodeDefinition = CodeDefinition {
    stabilizers: [(0b1111, 0), (0, 0b1111)],
    gauges: [(0b0011, 0), (0b1100, 0), (0, 0b0101), (0, 0b1010)],
    dressed_x: 0b1001,
    dressed_z: 0b1001,
    bare_x: 0b0101,
    bare_z: 0b0011,
};

/// Symplectic product of two (X, Z) operators: true if they anticommute.
pub fn anticommute(a: (u8, u8), b: (u8, u8)) -> bool {
    ((a.0 & b.1).count_ones() + (a.1 & b.0).count_ones()) % 2 == 1
}

impl CodeDefinition {
    /// Check the commutation relations the decoder relies on.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Structural(m.to_string()));
        let [gx1, gx2, gz1, gz2] = self.gauges;
        if (gx1.0 ^ gx2.0, 0) != self.stabilizers[0] || (0, gz1.1 ^ gz2.1) != self.stabilizers[1] {
            return fail("stabilizers are not products of gauge pairs");
        }
        let bare_x = (self.bare_x, 0);
        let bare_z = (0, self.bare_z);
        for g in self.gauges {
            if anticommute(bare_x, g) || anticommute(bare_z, g) {
                return fail("bare logical anticommutes with a gauge generator");
            }
        }
        for s in self.stabilizers {
            for l in [bare_x, bare_z, (self.dressed_x, 0), (0, self.dressed_z)] {
                if anticommute(s, l) {
                    return fail("logical anticommutes with a stabilizer");
                }
            }
        }
        if !anticommute(bare_x, bare_z) {
            return fail("logical X and Z commute");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn code_relations() {
        CODE.validate().unwrap();
    }

    #[test]
    fn regions_are_computable() {
        RegionTables::compute().unwrap();
    }

    #[test]
    fn every_flag_is_raised_in_every_cycle() {
        let t = RegionTables::get();
        for basis in Basis::BOTH {
            for flag in [Region::AG1, Region::AG2, Region::A, Region::G1, Region::G2] {
                let hit = t
                    .template(TemplateId::Ec)
                    .iter()
                    .any(|r| Pattern::ALL.iter().any(|&p| r.get(basis, p, 0) == flag));
                assert!(hit, "{basis:?} {flag:?}");
            }
        }
    }

    #[test]
    fn named_regions() {
        let t = RegionTables::get();
        // X on ancilla 4 between its last Z-phase CNOT and measurement:
        // the Z-phase CNOT (2 -> 4) target-only error.
        let r = t.op(TemplateId::Ec, 18);
        assert_eq!(r.get(Basis::X, Pattern::Second, 0), Region::A);
        // X on data qubit 2 (unit 1) waiting before the Z phase: first gauge, seen
        let r = t.op(TemplateId::Ec, 4);
        assert_eq!(r.get(Basis::X, Pattern::First, 0), Region::AG1);
        // X on data qubit 1 waiting after its Z-phase CNOT: not seen yet
        let r = t.op(TemplateId::Ec, 20);
        assert_eq!(r.get(Basis::X, Pattern::First, 0), Region::G1);
        // measurement flips are ancilla-only
        assert_eq!(t.op(TemplateId::Ec, 22).get(Basis::X, Pattern::First, 0), Region::A);
        assert_eq!(t.op(TemplateId::Ec, 10).get(Basis::Z, Pattern::First, 0), Region::A);
        assert_eq!(t.op(TemplateId::Ec, 10).get(Basis::X, Pattern::First, 0), Region::N);
    }

    #[test]
    fn level_one_counts() {
        let s = SizeTable::new(3);
        assert_eq!(s.ec(1), 24);
        assert_eq!(s.exrec(1), 100);
        assert_eq!(count_locations(1).unwrap(), 100);
        assert!(count_locations(0).is_err());
        for l in 1..=3 {
            assert_eq!(build_exrec(l).unwrap().len() as u64, s.exrec(l));
        }
    }
}
