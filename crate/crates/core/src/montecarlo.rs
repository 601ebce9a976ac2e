//! Failure-rate estimation, curve assembly and exhaustive search.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::code::Circuit;
use crate::decoder::{PriorityTies, RandomTies, ScriptedTies, TieBreaker, Weight};
use crate::engine::{fault_kinds, inject_fixed_weight, inject_stochastic, Engine, ErrorSet, Fault, TrialResult};
use crate::error::{Error, Result};

pub const DEFAULT_CAP: usize = 29;
/// Assignments per weight above which exhaustive search samples instead.
pub const DEFAULT_BUDGET: u128 = 10_000_000;
/// Tail mass above the cap that makes a curve point suspect.
pub const TAIL_WARNING: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieRule {
    Random,
    Priority,
}

/// One row of the rates file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightEstimate {
    pub level: u8,
    pub weight: usize,
    pub trials: u64,
    pub failures: u64,
    pub r: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl WeightEstimate {
    pub fn new(level: u8, weight: usize, trials: u64, failures: u64, seed: u64) -> WeightEstimate {
        let r = if trials == 0 { 0.0 } else { failures as f64 / trials as f64 };
        let sigma = if trials == 0 {
            0.0
        } else {
            let (lo, hi) = wilson(failures, trials, 1.0);
            (hi - lo) / 2.0
        };
        WeightEstimate {
            level,
            weight,
            trials,
            failures,
            r,
            sigma,
            seed,
        }
    }

    /// Wilson bounds at `z` standard deviations; exact for analytic rows.
    pub fn bounds(&self, z: f64) -> (f64, f64) {
        if self.trials == 0 {
            (self.r, self.r)
        } else {
            wilson(self.failures, self.trials, z)
        }
    }
}

/// Wilson score interval for a binomial proportion.
pub fn wilson(failures: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let phat = failures as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (phat + z2 / (2.0 * n)) / denom;
    let half = z * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if failures == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if failures == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Independent stream for trial `index` of experiment `tag`.
pub fn trial_rng(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15).rotate_left(17));
    rng.set_stream(index);
    rng
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))
}

/// Runs many trials of one engine on a fixed-size worker pool.
pub struct Sampler<'c> {
    engine: Engine<'c>,
    tiebreak: TieRule,
    pool: rayon::ThreadPool,
}

/// Failures grouped by the smallest logical confidence a trial reported.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CalibrationBin {
    pub c_l: Weight,
    pub trials: u64,
    pub failures: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMethod {
    Exhaustive,
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WeightSweep {
    pub weight: usize,
    pub method: SweepMethod,
    /// Fault assignments (placements times kinds) or sampled trials.
    pub assignments: u64,
    /// Executions, counting every tie-break branch separately.
    pub runs: u64,
    pub failures: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExhaustiveReport {
    pub level: u8,
    pub max_weight: usize,
    pub min_failing: Option<usize>,
    pub sweeps: Vec<WeightSweep>,
    pub example: Option<Vec<Fault>>,
}

impl ExhaustiveReport {
    pub fn summary(&self) -> String {
        match self.min_failing {
            Some(w) => format!("level {}: minimum failing weight {w}", self.level),
            None => format!("level {}: none <= {}", self.level, self.max_weight),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ExhaustiveOptions {
    pub max_weight: usize,
    pub budget: u128,
    /// Trials to sample when a weight exceeds the budget; `None` forbids it.
    pub fallback_trials: Option<u64>,
    pub seed: u64,
}

/// Failures of one assignment over every tie-break branch: (runs, failures).
fn all_branches(engine: &Engine, errors: &ErrorSet) -> Result<(u64, u64)> {
    let mut tb = ScriptedTies::new();
    let mut runs = 0;
    let mut failures = 0;
    loop {
        tb.rewind();
        runs += 1;
        if !engine.execute(errors, &mut tb)?.success {
            failures += 1;
        }
        if !tb.advance() {
            return Ok((runs, failures));
        }
    }
}

/// Number of weight-`w` assignments: the elementary symmetric polynomial of
/// the per-location kind counts.
pub fn assignment_count(circuit: &Circuit, w: usize) -> u128 {
    let mut e = vec![0u128; w + 1];
    e[0] = 1;
    for loc in &circuit.locations {
        let k = fault_kinds(loc.kind).len() as u128;
        for j in (1..=w).rev() {
            e[j] = e[j].saturating_add(e[j - 1].saturating_mul(k));
        }
    }
    e[w]
}

impl<'c> Sampler<'c> {
    pub fn new(engine: Engine<'c>, tiebreak: TieRule, workers: usize) -> Result<Sampler<'c>> {
        Ok(Sampler {
            engine,
            tiebreak,
            pool: pool(workers)?,
        })
    }

    pub fn engine(&self) -> &Engine<'c> {
        &self.engine
    }

    fn run_one(&self, errors: &ErrorSet, rng: &mut ChaCha8Rng) -> Result<TrialResult> {
        let mut random;
        let mut priority = PriorityTies;
        let tb: &mut dyn TieBreaker = match self.tiebreak {
            TieRule::Random => {
                random = RandomTies(rng);
                &mut random
            }
            TieRule::Priority => &mut priority,
        };
        self.engine.execute(errors, tb)
    }

    /// Estimate r_w from `trials` executions with exactly `w` faults.
    pub fn estimate_r(&self, weight: usize, trials: u64, seed: u64) -> Result<WeightEstimate> {
        let circuit = self.engine.circuit();
        if weight > circuit.len() {
            return Err(Error::InvalidArgument(format!(
                "weight {weight} exceeds the {} locations",
                circuit.len()
            )));
        }
        if weight == 0 {
            return Ok(WeightEstimate::new(circuit.level, 0, 0, 0, seed));
        }
        let failures = self.pool.install(|| {
            (0..trials)
                .into_par_iter()
                .map(|i| {
                    let mut rng = trial_rng(seed, weight as u64, i);
                    let errors = inject_fixed_weight(circuit, weight, &mut rng)?;
                    Ok::<_, Error>(u64::from(!self.run_one(&errors, &mut rng)?.success))
                })
                .try_reduce(|| 0, |a, b| Ok(a + b))
        })?;
        Ok(WeightEstimate::new(circuit.level, weight, trials, failures, seed))
    }

    /// Stochastic trials at rate `p`, grouped by the lowest final C_L.
    pub fn calibration(&self, p: f64, trials: u64, seed: u64) -> Result<Vec<CalibrationBin>> {
        let circuit = self.engine.circuit();
        let tag = p.to_bits();
        let bins = self.pool.install(|| {
            (0..trials)
                .into_par_iter()
                .map(|i| {
                    let mut rng = trial_rng(seed, tag, i);
                    let errors = inject_stochastic(circuit, p, &mut rng)?;
                    let r = self.run_one(&errors, &mut rng)?;
                    let mut m = BTreeMap::new();
                    m.insert(r.min_final_cl(), (1u64, u64::from(!r.success)));
                    Ok::<_, Error>(m)
                })
                .try_reduce(BTreeMap::new, |mut a, b| {
                    for (k, (t, f)) in b {
                        let e = a.entry(k).or_insert((0, 0));
                        e.0 += t;
                        e.1 += f;
                    }
                    Ok(a)
                })
        })?;
        Ok(bins
            .into_iter()
            .map(|(c_l, (trials, failures))| CalibrationBin { c_l, trials, failures })
            .collect())
    }

    /// Smallest weight with a failing assignment, weights 1..=max_weight.
    /// Every tie-break branch of every assignment is explored.
    pub fn exhaustive(&self, opts: ExhaustiveOptions) -> Result<ExhaustiveReport> {
        let circuit = self.engine.circuit();
        let mut report = ExhaustiveReport {
            level: circuit.level,
            max_weight: opts.max_weight,
            min_failing: None,
            sweeps: Vec::new(),
            example: None,
        };
        for w in 1..=opts.max_weight {
            let needed = assignment_count(circuit, w);
            let sweep = if needed <= opts.budget {
                self.sweep_exhaustive(w, needed as u64, &mut report.example)?
            } else {
                let trials = opts.fallback_trials.ok_or(Error::BudgetExceeded {
                    needed,
                    budget: opts.budget,
                })?;
                let est = self.estimate_r(w, trials, opts.seed)?;
                WeightSweep {
                    weight: w,
                    method: SweepMethod::Sampled,
                    assignments: trials,
                    runs: trials,
                    failures: est.failures,
                }
            };
            let failed = sweep.failures > 0;
            report.sweeps.push(sweep);
            if failed {
                report.min_failing = Some(w);
                break;
            }
        }
        Ok(report)
    }

    fn sweep_exhaustive(&self, w: usize, assignments: u64, example: &mut Option<Vec<Fault>>) -> Result<WeightSweep> {
        let circuit = self.engine.circuit();
        let n = circuit.len();
        let engine = &self.engine;
        let (runs, failures, first) = self.pool.install(|| {
            (0..n)
                .into_par_iter()
                .map(|first| {
                    let mut acc = (0u64, 0u64, None);
                    let mut stack = Vec::with_capacity(w);
                    enumerate(circuit, engine, first, w, &mut stack, &mut acc)?;
                    Ok::<_, Error>(acc)
                })
                .try_reduce(
                    || (0, 0, None),
                    |a, b| {
                        // keep the failing example with the smallest first id
                        let ex = match (a.2, b.2) {
                            (Some(x), Some(y)) => Some(if x[0].id <= y[0].id { x } else { y }),
                            (x, y) => x.or(y),
                        };
                        Ok((a.0 + b.0, a.1 + b.1, ex))
                    },
                )
        })?;
        if example.is_none() {
            *example = first;
        }
        Ok(WeightSweep {
            weight: w,
            method: SweepMethod::Exhaustive,
            assignments,
            runs,
            failures,
        })
    }
}

type Accum = (u64, u64, Option<Vec<Fault>>);

fn enumerate(
    circuit: &Circuit,
    engine: &Engine,
    id: usize,
    remaining: usize,
    stack: &mut Vec<Fault>,
    acc: &mut Accum,
) -> Result<()> {
    for kind in fault_kinds(circuit.locations[id].kind) {
        stack.push(Fault { id: id as u32, kind });
        if remaining == 1 {
            let errors = ErrorSet::new(circuit, stack.clone())?;
            let (runs, failures) = all_branches(engine, &errors)?;
            acc.0 += runs;
            acc.1 += failures;
            if failures > 0 && acc.2.is_none() {
                acc.2 = Some(stack.clone());
            }
        } else {
            for next in id + 1..circuit.len() {
                enumerate(circuit, engine, next, remaining - 1, stack, acc)?;
            }
        }
        stack.pop();
    }
    Ok(())
}

/// Single-fault sweep: for every location and kind, the fraction of
/// tie-break branches that fail. Returns (assignments, mean failure rate).
pub fn single_fault_rate(engine: &Engine) -> Result<(u64, f64)> {
    let circuit = engine.circuit();
    let mut total = 0.0;
    let mut count = 0u64;
    for loc in &circuit.locations {
        for kind in fault_kinds(loc.kind) {
            let errors = ErrorSet::new(circuit, vec![Fault { id: loc.id, kind }])?;
            let (runs, failures) = all_branches(engine, &errors)?;
            total += failures as f64 / runs as f64;
            count += 1;
        }
    }
    Ok((count, total / count as f64))
}

/// Log-spaced grid of `points` values from `pmin` to `pmax` inclusive.
pub fn log_grid(pmin: f64, pmax: f64, points: usize) -> Result<Vec<f64>> {
    if !(pmin > 0.0 && pmax >= pmin && pmax <= 1.0) || points == 0 {
        return Err(Error::InvalidArgument(format!(
            "bad grid: pmin={pmin} pmax={pmax} points={points}"
        )));
    }
    if points == 1 {
        return Ok(vec![pmin]);
    }
    let (a, b) = (pmin.ln(), pmax.ln());
    Ok((0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub level: u8,
    pub p: f64,
    pub p_logical: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub cap: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub points: Vec<CurvePoint>,
    pub warnings: Vec<String>,
}

/// ln of the binomial pmf terms i = 0..=cap for `n` trials at rate `p`.
fn log_binomial_terms(n: u64, p: f64, cap: usize) -> Vec<f64> {
    let lp = p.ln();
    let lq = (-p).ln_1p();
    let mut out = Vec::with_capacity(cap + 1);
    let mut log_choose = 0.0;
    for i in 0..=cap {
        if i > 0 {
            log_choose += ((n - i as u64 + 1) as f64).ln() - (i as f64).ln();
        }
        let li = if p == 1.0 {
            if i as u64 == n {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        } else {
            log_choose + i as f64 * lp + (n - i as u64) as f64 * lq
        };
        out.push(li);
    }
    out
}

/// Expand p_L(p) = sum_i r_i C(N,i) p^i (1-p)^(N-i) up to `cap`. The
/// interval uses the `z`-sigma Wilson bounds of every r_i.
pub fn assemble_curve(
    level: u8,
    n: u64,
    estimates: &[WeightEstimate],
    grid: &[f64],
    cap: usize,
    z: f64,
) -> Result<Curve> {
    let top = cap.min(n as usize);
    let mut r = vec![None; top + 1];
    for e in estimates.iter().filter(|e| e.level == level) {
        if e.weight <= top {
            r[e.weight] = Some(e);
        }
    }
    if let Some(i) = r.iter().position(|e| e.is_none()) {
        return Err(Error::InvalidArgument(format!(
            "level {level}: no estimate for weight {i} (need 0..={top})"
        )));
    }
    let r: Vec<&WeightEstimate> = r.into_iter().map(|e| e.unwrap()).collect();
    let mut points = Vec::with_capacity(grid.len());
    let mut flagged = Vec::new();
    for &p in grid {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidArgument(format!("grid point {p} outside (0, 1]")));
        }
        let terms = log_binomial_terms(n, p, top);
        let (mut mid, mut lo, mut hi, mut head) = (0.0, 0.0, 0.0, 0.0);
        for (t, e) in terms.iter().zip(&r) {
            let w = t.exp();
            let (blo, bhi) = e.bounds(z);
            mid += w * e.r;
            lo += w * blo;
            hi += w * bhi;
            head += w;
        }
        let tail = (1.0 - head).max(0.0);
        if tail > TAIL_WARNING {
            flagged.push((p, tail));
        }
        points.push(CurvePoint {
            level,
            p,
            p_logical: mid.clamp(0.0, 1.0),
            ci_lo: lo.clamp(0.0, 1.0),
            ci_hi: hi.clamp(0.0, 1.0),
            cap: top,
        });
    }
    let mut warnings = Vec::new();
    if let (Some(first), Some(worst)) = (
        flagged.first(),
        flagged.iter().max_by(|a, b| a.1.total_cmp(&b.1)),
    ) {
        warnings.push(format!(
            "level {level}: truncation above weight {top} drops binomial mass > {TAIL_WARNING:e} for p >= {:e} (max {:.3e} at p = {:e})",
            first.0, worst.1, worst.0
        ));
    }
    Ok(Curve { points, warnings })
}

/// Least-squares slope of log p_L against log p over `[lo, hi]`.
pub fn log_slope(points: &[CurvePoint], lo: f64, hi: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|c| c.p >= lo * (1.0 - 1e-9) && c.p <= hi * (1.0 + 1e-9) && c.p_logical > 0.0)
        .map(|c| (c.p.ln(), c.p_logical.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(sxy / sxx)
}

/// First p where curve `b` drops below curve `a`, interpolated in log-log.
/// Both curves must share the grid.
pub fn crossing(a: &[CurvePoint], b: &[CurvePoint]) -> Option<f64> {
    let d: Vec<(f64, f64)> = a
        .iter()
        .zip(b)
        .filter(|(x, y)| x.p_logical > 0.0 && y.p_logical > 0.0)
        .map(|(x, y)| (x.p.ln(), y.p_logical.ln() - x.p_logical.ln()))
        .collect();
    d.windows(2).rev().find_map(|w| {
        let ((x0, d0), (x1, d1)) = (w[0], w[1]);
        (d0 < 0.0 && d1 >= 0.0).then(|| (x0 + (x1 - x0) * (-d0) / (d1 - d0)).exp())
    })
}

/// Comment lines written above every CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct Header {
    pub lines: Vec<String>,
}

impl Header {
    pub fn new(config: &impl Serialize, seed: Option<u64>) -> Result<Header> {
        let mut lines = vec![
            format!("flagpass {}", env!("CARGO_PKG_VERSION")),
            format!("config: {}", serde_json::to_string(config)?),
        ];
        if let Some(s) = seed {
            lines.push(format!("seed: {s}"));
        }
        Ok(Header { lines })
    }

    fn write(&self, out: &mut Vec<u8>, extra: &[String]) {
        for l in self.lines.iter().chain(extra) {
            let _ = writeln!(out, "# {l}");
        }
    }
}

/// Write through a `.partial` sibling so a failed run leaves no file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = PathBuf::from(path);
    let name = format!(
        "{}.partial",
        path.file_name().map(|s| s.to_string_lossy()).unwrap_or_default()
    );
    tmp.set_file_name(name);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn to_csv<T: Serialize>(header: &Header, extra: &[String], rows: &[T]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    header.write(&mut out, extra);
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn rates_csv(header: &Header, rows: &[WeightEstimate]) -> Result<Vec<u8>> {
    to_csv(header, &[], rows)
}

pub fn curve_csv(header: &Header, curve: &Curve) -> Result<Vec<u8>> {
    let warnings: Vec<String> = curve.warnings.iter().map(|w| format!("warning: {w}")).collect();
    to_csv(header, &warnings, &curve.points)
}

pub fn write_rates(path: &Path, header: &Header, rows: &[WeightEstimate]) -> Result<()> {
    write_atomic(path, &rates_csv(header, rows)?)
}

pub fn write_curve(path: &Path, header: &Header, curve: &Curve) -> Result<()> {
    write_atomic(path, &curve_csv(header, curve)?)
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path)?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in rdr.deserialize() {
        rows.push(rec.map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?);
    }
    Ok(rows)
}

pub fn read_rates(path: &Path) -> Result<Vec<WeightEstimate>> {
    let rows: Vec<WeightEstimate> = read_csv(path)?;
    for r in &rows {
        if !(0.0..=1.0).contains(&r.r) || r.failures > r.trials {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: 0,
                msg: format!("inconsistent row for weight {}", r.weight),
            });
        }
    }
    Ok(rows)
}

pub fn read_curve(path: &Path) -> Result<Vec<CurvePoint>> {
    read_csv(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(level: u8, w: usize, r: f64) -> WeightEstimate {
        WeightEstimate {
            level,
            weight: w,
            trials: 0,
            failures: 0,
            r,
            sigma: 0.0,
            seed: 0,
        }
    }

    #[test]
    fn wilson_brackets() {
        let (lo, hi) = wilson(0, 100, 1.0);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.02);
        let (lo, hi) = wilson(50, 100, 2.0);
        assert!(lo < 0.5 && hi > 0.5);
        let (lo2, hi2) = wilson(5000, 10000, 2.0);
        assert!(hi2 - lo2 < (hi - lo) / 5.0);
        let (_, hi) = wilson(100, 100, 1.0);
        assert_eq!(hi, 1.0);
    }

    #[test]
    fn single_location_curve_is_identity() {
        let grid = log_grid(1e-6, 1e-1, 11).unwrap();
        let c = assemble_curve(1, 1, &[est(1, 0, 0.0), est(1, 1, 1.0)], &grid, 29, 2.0).unwrap();
        for p in &c.points {
            assert!((p.p_logical - p.p).abs() <= 1e-12 * p.p);
            assert_eq!(p.cap, 1);
        }
        assert!(c.warnings.is_empty());
    }

    #[test]
    fn certain_failure_is_complement() {
        let n = 20;
        let rows: Vec<_> = (0..=n).map(|i| est(1, i, if i == 0 { 0.0 } else { 1.0 })).collect();
        let grid = [1e-3, 0.05, 0.3];
        let c = assemble_curve(1, n as u64, &rows, &grid, 29, 2.0).unwrap();
        for pt in &c.points {
            let exact = 1.0 - (1.0 - pt.p).powi(n as i32);
            assert!((pt.p_logical - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_weight_is_rejected() {
        let rows = [est(2, 0, 0.0), est(2, 2, 0.1)];
        assert!(assemble_curve(2, 5, &rows, &[1e-3], 29, 2.0).is_err());
    }

    #[test]
    fn truncation_warning() {
        let rows: Vec<_> = (0..=2).map(|i| est(1, i, 0.5)).collect();
        let c = assemble_curve(1, 1000, &rows, &[1e-6, 1e-2], 2, 2.0).unwrap();
        assert_eq!(c.warnings.len(), 1);
        let c = assemble_curve(1, 1000, &rows, &[1e-6], 2, 2.0).unwrap();
        assert!(c.warnings.is_empty());
    }

    #[test]
    fn slope_and_crossing() {
        let grid = log_grid(1e-6, 1e-1, 51).unwrap();
        let mk = |f: &dyn Fn(f64) -> f64| -> Vec<CurvePoint> {
            grid.iter()
                .map(|&p| CurvePoint {
                    level: 1,
                    p,
                    p_logical: f(p),
                    ci_lo: 0.0,
                    ci_hi: 0.0,
                    cap: 29,
                })
                .collect()
        };
        let a = mk(&|p| 10.0 * p * p);
        let b = mk(&|p| 1e4 * p.powi(4));
        assert!((log_slope(&a, 1e-6, 1e-5).unwrap() - 2.0).abs() < 1e-9);
        // 10 p^2 = 1e4 p^4 at p = sqrt(1e-3)
        let x = crossing(&a, &b).unwrap();
        assert!((x / 1e-3f64.sqrt() - 1.0).abs() < 0.05, "{x}");
    }

    #[test]
    fn streams_differ() {
        use rand::Rng;
        let a: u64 = trial_rng(1, 2, 0).random();
        let b: u64 = trial_rng(1, 2, 1).random();
        let c: u64 = trial_rng(1, 3, 0).random();
        assert!(a != b && a != c);
        assert_eq!(a, trial_rng(1, 2, 0).random::<u64>());
    }
}
