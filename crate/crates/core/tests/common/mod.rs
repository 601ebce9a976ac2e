//! Checks shared by the property tests and the acceptance report. Each
//! returns a one-line summary on success and the reason on failure.
#![allow(dead_code)]

use std::path::PathBuf;
use std::process::{Command, Output};

use flagpass::code::{anticommute, build_exrec, CODE};
use flagpass::decoder::{
    end_cycle_update, match_syndrome, propagate_flags_cnot, update_on_location, update_on_two_qubit_gate,
    Correction, Flag, FlagSet, Match, PriorityTies, Region, Weight,
};
use flagpass::engine::{DecoderMode, Engine, ErrorSet};
use flagpass::code::count_locations;
use flagpass::montecarlo::{
    assemble_curve, log_grid, read_rates, CalibrationBin, CurvePoint, Sampler, TieRule, WeightEstimate,
};
use flagpass::pauli::{
    compose, coset_classify, gauge1_support, gauge2_support, propagate, Basis, CosetClass, Gate, Pauli, PauliFrame,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

pub type Check = Result<String, String>;

pub fn flagpass(args: &[&str], workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_flagpass"));
    cmd.args(args);
    match workers {
        Some(w) => cmd.env("FLAGPASS_WORKERS", w),
        None => cmd.env_remove("FLAGPASS_WORKERS"),
    };
    cmd.output().unwrap()
}

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// Rows of every `rates_l{level}*.csv` under `data/`.
pub fn stored_rates(level: u8) -> Result<Vec<WeightEstimate>, String> {
    let prefix = format!("rates_l{level}");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(data_dir())
        .map_err(|e| format!("data/: {e}"))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().unwrap().to_string_lossy();
            name.starts_with(&prefix) && name.ends_with(".csv") && !name[prefix.len()..].starts_with(char::is_numeric)
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(format!("no data/{prefix}*.csv; run scripts/gen_rates.sh"));
    }
    let mut rows = Vec::new();
    for p in paths {
        rows.extend(read_rates(&p).map_err(|e| e.to_string())?);
    }
    rows.sort_by_key(|r| r.weight);
    Ok(rows)
}

/// Curve assembled from every stored row, with two-sigma bounds. A grid
/// point where the stored weights miss more than the warning mass of the
/// binomial is an error rather than a number.
pub fn stored_curve(level: u8, pmin: f64, pmax: f64, points: usize) -> Result<Vec<CurvePoint>, String> {
    let rows = stored_rates(level)?;
    let n = count_locations(level).map_err(|e| e.to_string())?;
    let grid = log_grid(pmin, pmax, points).map_err(|e| e.to_string())?;
    let cap = rows.last().map_or(0, |r| r.weight);
    let curve = assemble_curve(level, n, &rows, &grid, cap, 2.0).map_err(|e| e.to_string())?;
    match curve.warnings.first() {
        Some(w) => Err(w.clone()),
        None => Ok(curve.points),
    }
}

/// Below 5e-5 each extra level must lower the logical rate.
pub fn levels_ordered_at_low_p() -> Check {
    let [one, two, three] = [1, 2, 3].map(|l| stored_curve(l, 1e-6, 5e-5, 18));
    let (one, two, three) = (one?, two?, three?);
    for ((a, b), c) in one.iter().zip(&two).zip(&three) {
        if !(c.p_logical < b.p_logical && b.p_logical < a.p_logical) {
            return Err(format!("p = {:.2e}: {:.2e}, {:.2e}, {:.2e}", a.p, a.p_logical, b.p_logical, c.p_logical));
        }
    }
    Ok("levels 3 < 2 < 1 on [1e-6, 5e-5]".into())
}

/// Coset class from commutation with the code's own operators: odd
/// vectors trip the opposite stabilizer, and the class within a parity is
/// set by the opposite-basis bare logical.
fn classify_by_commutation(e: u8, basis: Basis) -> CosetClass {
    let (op, stab, logical) = match basis {
        Basis::X => ((e, 0), CODE.stabilizers[1], (0, CODE.bare_z)),
        Basis::Z => ((0, e), CODE.stabilizers[0], (CODE.bare_x, 0)),
    };
    match (anticommute(op, stab), anticommute(op, logical)) {
        (false, false) => CosetClass::Trivial,
        (false, true) => CosetClass::Logical,
        (true, true) => CosetClass::Gauge1Side,
        (true, false) => CosetClass::Gauge2Side,
    }
}

pub fn coset_gauge_invariance() -> Check {
    let mut n = 0;
    for basis in Basis::BOTH {
        let group = [0, gauge1_support(basis), gauge2_support(basis), 0b1111];
        for e in 0u8..16 {
            let class = coset_classify(e, basis);
            if class != classify_by_commutation(e, basis) {
                return Err(format!("{e:04b} in {basis:?} classified as {class:?}"));
            }
            for g in group {
                if coset_classify(e ^ g, basis) != class {
                    return Err(format!("{e:04b} and {e:04b}*{g:04b} differ in {basis:?}"));
                }
            }
            n += 1;
        }
    }
    Ok(format!("{n} vectors"))
}

fn frame_from(bits: &[(bool, bool)]) -> PauliFrame {
    let mut f = PauliFrame::new(bits.len());
    for (q, &(x, z)) in bits.iter().enumerate() {
        f.apply(q, Pauli::from_bits(x, z)).unwrap();
    }
    f
}

fn gate_strategy(n: usize) -> impl Strategy<Value = Gate> {
    prop_oneof![
        (0..n, 1..n).prop_map(move |(c, d)| Gate::Cnot { control: c, target: (c + d) % n }),
        (0..n).prop_map(|q| Gate::Init { qubit: q }),
        (0..n).prop_map(|q| Gate::Measure { qubit: q }),
        (0..n).prop_map(|q| Gate::Wait { qubit: q }),
    ]
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

/// Two frames pushed through a random gate sequence: the sum of the
/// images is the image of the sum.
pub fn propagate_linearity(cases: u32) -> Check {
    const QUBITS: usize = 70;
    let frame = || prop::collection::vec(any::<(bool, bool)>(), QUBITS);
    let gates = prop::collection::vec(gate_strategy(QUBITS), 1..6);
    runner(cases)
        .run(&(frame(), frame(), gates), |(a, b, gates)| {
            let (mut fa, mut fb) = (frame_from(&a), frame_from(&b));
            let mut fab = compose(&fa, &fb).unwrap();
            for g in &gates {
                fa = propagate(&fa, g).unwrap();
                fb = propagate(&fb, g).unwrap();
                fab = propagate(&fab, g).unwrap();
            }
            prop_assert_eq!(fab, compose(&fa, &fb).unwrap());
            Ok(())
        })
        .map(|_| format!("{cases} random cases"))
        .map_err(|e| e.to_string())
}

fn weight() -> impl Strategy<Value = Weight> {
    prop_oneof![4 => (0u16..12).prop_map(Weight::new), 1 => Just(Weight::INF)]
}

fn flag_set() -> impl Strategy<Value = FlagSet> {
    prop::collection::vec(weight(), 10).prop_map(|w| {
        let mut f = FlagSet::fresh();
        for (i, basis) in Basis::BOTH.into_iter().enumerate() {
            for (j, flag) in Flag::ALL.into_iter().enumerate() {
                f.set(basis, flag, w[i * 5 + j]);
            }
        }
        f
    })
}

fn region() -> impl Strategy<Value = Region> {
    prop_oneof![
        Just(Region::N),
        Just(Region::AG1),
        Just(Region::AG2),
        Just(Region::A),
        Just(Region::G1),
        Just(Region::G2),
    ]
}

fn never_raised(before: &FlagSet, after: &FlagSet) -> bool {
    Basis::BOTH
        .into_iter()
        .all(|b| Flag::ALL.into_iter().all(|f| after.get(b, f) <= before.get(b, f)))
}

/// Random sequences of in-cycle updates on two blocks never raise a weight.
pub fn flag_monotonicity(cases: u32) -> Check {
    let op = (0u8..3, region(), region(), region(), region(), weight(), weight());
    let ops = prop::collection::vec(op, 1..20);
    runner(cases)
        .run(&(flag_set(), flag_set(), ops), |(mut a, mut b, ops)| {
            for (op, r1, r2, r3, r4, c1, c2) in ops {
                let (before_a, before_b) = (a, b);
                match op {
                    0 => update_on_location(&mut a, r1, r2, [c1, c2]),
                    1 => {
                        for basis in Basis::BOTH {
                            update_on_two_qubit_gate(&mut a, &mut b, basis, r1, r2, r3, r4, c1, c2);
                        }
                    }
                    _ => {
                        propagate_flags_cnot(&before_b, &mut a, Basis::X);
                        propagate_flags_cnot(&before_a, &mut b, Basis::Z);
                    }
                }
                prop_assert!(never_raised(&before_a, &a));
                prop_assert!(never_raised(&before_b, &b));
            }
            Ok(())
        })
        .map(|_| format!("{cases} random update sequences"))
        .map_err(|e| e.to_string())
}

/// A correction as a 4-bit data vector: one qubit of the corrected gauge.
fn correction_vector(c: Correction, basis: Basis) -> u8 {
    let support = match c {
        Correction::None => return 0,
        Correction::Gauge1 => gauge1_support(basis),
        Correction::Gauge2 => gauge2_support(basis),
    };
    support & support.wrapping_neg()
}

/// With syndrome 1, the corrections of the AG1 and AG2 matches differ by a
/// logical, and C_L is the weight gap to the complementary match.
pub fn complement_composition(cases: u32) -> Check {
    let basis = prop_oneof![Just(Basis::X), Just(Basis::Z)];
    runner(cases)
        .run(&(0u16..20, 0u16..20, 0u16..20, basis), |(ag1, ag2, a, basis)| {
            let flags = |g1: u16, g2: u16| {
                FlagSet::fresh()
                    .with(basis, Flag::AG1, Weight::new(g1))
                    .with(basis, Flag::AG2, Weight::new(g2))
                    .with(basis, Flag::A, Weight::new(a + 1))
            };
            let one = match_syndrome(&flags(0, ag2 + 1), basis, true, 1, &mut PriorityTies).unwrap();
            let two = match_syndrome(&flags(ag1 + 1, 0), basis, true, 1, &mut PriorityTies).unwrap();
            prop_assert_eq!(one.matched, Match::AG1);
            prop_assert_eq!(two.matched, Match::AG2);
            let both = correction_vector(one.correction, basis) ^ correction_vector(two.correction, basis);
            prop_assert_eq!(coset_classify(both, basis), CosetClass::Logical);
            prop_assert_eq!(one.c_l, Weight::new(ag2 + 1));
            prop_assert_eq!(two.c_l, Weight::new(ag1 + 1));
            let mut after = flags(ag1, ag2);
            let out = match_syndrome(&after, basis, true, 1, &mut PriorityTies).unwrap();
            end_cycle_update(&mut after, basis, &out);
            for f in [Flag::A, Flag::G1, Flag::G2] {
                prop_assert!(after.get(basis, f).is_inf());
            }
            Ok(())
        })
        .map(|_| format!("{cases} random flag sets"))
        .map_err(|e| e.to_string())
}

pub fn noiseless_runs() -> Check {
    for level in 1..=3 {
        let circuit = build_exrec(level).map_err(|e| e.to_string())?;
        for mode in [DecoderMode::MessagePassing, DecoderMode::Uniform] {
            let engine = Engine::new(&circuit, mode).map_err(|e| e.to_string())?;
            for e in [engine.clone(), engine.dense()] {
                let r = e.execute(&ErrorSet::empty(), &mut PriorityTies).map_err(|e| e.to_string())?;
                if !r.success || r.nonzero_syndromes != [0; 4] {
                    return Err(format!("level {level} {mode:?} sparse={}: {r:?}", e.is_sparse()));
                }
            }
        }
    }
    Ok("levels 1-3, both decoder modes, sparse and dense".into())
}

/// The same rates request under 1, 2 and 8 workers.
pub fn worker_determinism() -> Check {
    let args = ["rates", "--level", "2", "--weights", "1..3", "--trials", "3000", "--seed", "9"];
    let mut first: Option<Vec<u8>> = None;
    for w in ["1", "2", "8"] {
        let out = flagpass(&args, Some(w));
        if !out.status.success() {
            return Err(String::from_utf8_lossy(&out.stderr).into_owned());
        }
        match &first {
            None => first = Some(out.stdout),
            Some(f) if *f != out.stdout => return Err(format!("{w} workers changed the CSV")),
            Some(_) => {}
        }
    }
    Ok("level-2 rates CSV byte-identical for 1/2/8 workers".into())
}

/// Level-2 stochastic trials binned by the lowest reported C_L; the
/// failure rate must not rise with C_L across bins of >= `min_bin` trials.
pub fn calibration_monotonic(trials: u64, min_bin: u64) -> Check {
    let circuit = build_exrec(2).map_err(|e| e.to_string())?;
    let engine = Engine::new(&circuit, DecoderMode::MessagePassing).map_err(|e| e.to_string())?;
    let sampler = Sampler::new(engine, TieRule::Random, 1).map_err(|e| e.to_string())?;
    let bins = sampler.calibration(1e-3, trials, 7).map_err(|e| e.to_string())?;
    let kept: Vec<&CalibrationBin> = bins.iter().filter(|b| b.trials >= min_bin).collect();
    if kept.len() < 2 {
        return Err(format!("fewer than two populated bins: {bins:?}"));
    }
    let show = |b: &CalibrationBin| format!("C_L {}: {}/{}", b.c_l, b.failures, b.trials);
    for w in kept.windows(2) {
        let rate = |b: &CalibrationBin| b.failures as f64 / b.trials as f64;
        if rate(w[1]) > rate(w[0]) {
            return Err(format!("rate rises from {} to {}", show(w[0]), show(w[1])));
        }
    }
    Ok(format!("{trials} trials at p = 1e-3: {}", kept.iter().map(|b| show(b)).collect::<Vec<_>>().join(", ")))
}
