//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::code::{build_exrec, count_locations};
use crate::decoder::{match_syndrome, Flag, FlagSet, PriorityTies, RandomTies, TieBreaker, Weight};
use crate::engine::{DecoderMode, Engine, MAX_LEVEL};
use crate::error::{Error, Result};
use crate::montecarlo::{
    assemble_curve, curve_csv, log_grid, rates_csv, read_rates, trial_rng, write_curve, write_rates,
    ExhaustiveOptions, Header, Sampler, TieRule, WeightEstimate, DEFAULT_BUDGET, DEFAULT_CAP,
};
use crate::pauli::Basis;

pub const WORKERS_ENV: &str = "FLAGPASS_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "flagpass", version, about = "Flag-based message-passing decoding of a concatenated [[4,1,2]] CNOT exRec")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the number of physical locations of the level-l exRec.
    Count {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=8))]
        level: u8,
    },
    /// Estimate failure rates r_i for a range of fault counts.
    Rates(Common),
    /// Assemble logical failure curves from one or more rates files.
    Curve(CurveArgs),
    /// Find the smallest number of faults that can cause failure.
    Exhaustive(ExhaustiveArgs),
    /// Decode one syndrome bit against given flag weights.
    DecodeDemo(DecodeArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Mp,
    Uniform,
}

impl From<ModeArg> for DecoderMode {
    fn from(m: ModeArg) -> DecoderMode {
        match m {
            ModeArg::Mp => DecoderMode::MessagePassing,
            ModeArg::Uniform => DecoderMode::Uniform,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieArg {
    Random,
    Priority,
}

impl From<TieArg> for TieRule {
    fn from(t: TieArg) -> TieRule {
        match t {
            TieArg::Random => TieRule::Random,
            TieArg::Priority => TieRule::Priority,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    #[arg(long)]
    pub level: Option<u8>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trials per weight.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Inclusive weight range, e.g. `0..29`.
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    pub tiebreak: Option<TieArg>,
    /// Highest weight `rates` will estimate.
    #[arg(long)]
    pub cap: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file with defaults for any of the options above.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CurveArgs {
    /// Rates CSVs to expand; rows are pooled across files.
    #[arg(long, required = true, num_args = 1..)]
    pub rates: Vec<PathBuf>,
    /// Only this level (default: every level in the file).
    #[arg(long)]
    pub level: Option<u8>,
    #[arg(long)]
    pub pmin: Option<f64>,
    #[arg(long)]
    pub pmax: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    /// Highest weight kept in the expansion.
    #[arg(long)]
    pub cap: Option<usize>,
    /// Location count to use instead of the exRec's.
    #[arg(long)]
    pub locations: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ExhaustiveArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub max_weight: Option<usize>,
    /// Assignments per weight beyond which sampling takes over.
    #[arg(long)]
    pub budget: Option<u128>,
    /// Refuse to sample when the budget is exceeded.
    #[arg(long)]
    pub no_fallback: bool,
}

#[derive(Debug, Clone, Args)]
pub struct DecodeArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
    pub syndrome: u8,
    /// Comma-separated weights, e.g. `AG1=4,AG2=0,A=2`; missing flags are infinite.
    #[arg(long, default_value = "")]
    pub flags: String,
    #[arg(long, value_enum, default_value = "priority")]
    pub tiebreak: TieArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Options as read from `--config`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    level: Option<u8>,
    seed: Option<u64>,
    trials: Option<u64>,
    weights: Option<String>,
    mode: Option<ModeArg>,
    tiebreak: Option<TieArg>,
    out: Option<PathBuf>,
    pmin: Option<f64>,
    pmax: Option<f64>,
    points: Option<usize>,
    cap: Option<usize>,
    locations: Option<u64>,
    max_weight: Option<usize>,
    budget: Option<u128>,
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile> {
    match path {
        None => Ok(ConfigFile::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            Ok(serde_json::from_str(&text)?)
        }
    }
}

/// Fully resolved run configuration, echoed into output headers.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub level: u8,
    pub seed: u64,
    pub trials: u64,
    pub weights: (usize, usize),
    pub mode: ModeArg,
    pub tiebreak: TieArg,
    #[serde(skip_serializing_if = "is_default_cap")]
    pub cap: usize,
    /// Results do not depend on it, so it stays out of headers.
    #[serde(skip)]
    pub workers: usize,
    pub out: Option<PathBuf>,
}

fn is_default_cap(cap: &usize) -> bool {
    *cap == DEFAULT_CAP
}

pub fn workers_from_env() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::InvalidArgument(format!("{WORKERS_ENV}={v} is not a positive integer"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Parse `a..b` (inclusive) or a single weight.
pub fn parse_weights(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::InvalidArgument(format!("weights '{s}' is not of the form a..b"));
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a.trim(), b.trim().trim_start_matches('=')),
        None => (s.trim(), s.trim()),
    };
    let a: usize = a.parse().map_err(|_| bad())?;
    let b: usize = b.parse().map_err(|_| bad())?;
    if a > b {
        return Err(bad());
    }
    Ok((a, b))
}

fn check_level(level: u8) -> Result<u8> {
    if (1..=MAX_LEVEL).contains(&level) {
        Ok(level)
    } else {
        Err(Error::InvalidArgument(format!("level must be in 1..={MAX_LEVEL}, got {level}")))
    }
}

fn resolve(command: &'static str, c: &Common, file: &ConfigFile) -> Result<RunConfig> {
    let level = check_level(c.level.or(file.level).unwrap_or(1))?;
    let weights = match c.weights.as_ref().or(file.weights.as_ref()) {
        Some(s) => parse_weights(s)?,
        None => (0, DEFAULT_CAP),
    };
    let trials = c.trials.or(file.trials).unwrap_or(10_000);
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    Ok(RunConfig {
        command,
        level,
        seed: c.seed.or(file.seed).unwrap_or(0),
        trials,
        weights,
        mode: c.mode.or(file.mode).unwrap_or(ModeArg::Mp),
        tiebreak: c.tiebreak.or(file.tiebreak).unwrap_or(TieArg::Random),
        cap: c.cap.or(file.cap).unwrap_or(DEFAULT_CAP),
        workers: workers_from_env()?,
        out: c.out.clone().or(file.out.clone()),
    })
}

fn emit(out: &mut dyn Write, path: Option<&Path>, bytes: &[u8], write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => write(p),
        None => {
            out.write_all(bytes)?;
            Ok(())
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Count { level } => {
            writeln!(out, "level,total_locations")?;
            writeln!(out, "{level},{}", count_locations(level)?)?;
            Ok(())
        }
        Command::Rates(c) => cmd_rates(&c, out),
        Command::Curve(a) => cmd_curve(&a, out),
        Command::Exhaustive(a) => cmd_exhaustive(&a, out),
        Command::DecodeDemo(a) => cmd_decode_demo(&a, out),
    }
}

fn cmd_rates(c: &Common, out: &mut dyn Write) -> Result<()> {
    let file = load_config(c.config.as_deref())?;
    let cfg = resolve("rates", c, &file)?;
    let circuit = build_exrec(cfg.level)?;
    let (a, b) = cfg.weights;
    let top = cfg.cap.min(circuit.len());
    if b > top {
        return Err(Error::InvalidArgument(format!("weight {b} above the cap {top}")));
    }
    let engine = Engine::new(&circuit, cfg.mode.into())?;
    let sampler = Sampler::new(engine, cfg.tiebreak.into(), cfg.workers)?;
    let mut rows = Vec::new();
    for w in a..=b {
        let est = sampler.estimate_r(w, cfg.trials, cfg.seed)?;
        eprintln!(
            "level {} weight {w}: {}/{} failures",
            cfg.level, est.failures, est.trials
        );
        rows.push(est);
    }
    let header = Header::new(&cfg, Some(cfg.seed))?;
    let bytes = rates_csv(&header, &rows)?;
    emit(out, cfg.out.as_deref(), &bytes, |p| write_rates(p, &header, &rows))
}

#[derive(Debug, Serialize)]
struct CurveConfig {
    command: &'static str,
    rates: Vec<PathBuf>,
    level: Option<u8>,
    pmin: f64,
    pmax: f64,
    points: usize,
    cap: usize,
    locations: Option<u64>,
}

fn cmd_curve(a: &CurveArgs, out: &mut dyn Write) -> Result<()> {
    let file = load_config(a.config.as_deref())?;
    let cfg = CurveConfig {
        command: "curve",
        rates: a.rates.clone(),
        level: a.level.or(file.level),
        pmin: a.pmin.or(file.pmin).unwrap_or(1e-6),
        pmax: a.pmax.or(file.pmax).unwrap_or(1e-2),
        points: a.points.or(file.points).unwrap_or(41),
        cap: a.cap.or(file.cap).unwrap_or(DEFAULT_CAP),
        locations: a.locations.or(file.locations),
    };
    let mut rows = Vec::new();
    for path in &a.rates {
        rows.extend(read_rates(path)?);
    }
    let mut keys: Vec<(u8, usize)> = rows.iter().map(|r| (r.level, r.weight)).collect();
    keys.sort_unstable();
    if let Some(w) = keys.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument(format!(
            "level {} weight {} appears in more than one rates row",
            w[0].0, w[0].1
        )));
    }
    let grid = log_grid(cfg.pmin, cfg.pmax, cfg.points)?;
    let mut levels: Vec<u8> = rows.iter().map(|r| r.level).collect();
    levels.sort_unstable();
    levels.dedup();
    if let Some(l) = cfg.level {
        levels.retain(|&x| x == l);
    }
    if levels.is_empty() {
        return Err(Error::InvalidArgument("rates file has no rows for the requested level".into()));
    }
    let seeds: Vec<u64> = rows.iter().map(|r| r.seed).collect();
    let mut curve = None::<crate::montecarlo::Curve>;
    for level in levels {
        let n = match cfg.locations {
            Some(n) => n,
            None => count_locations(level)?,
        };
        let c = assemble_curve(level, n, &rows, &grid, cfg.cap, 2.0)?;
        for w in &c.warnings {
            eprintln!("warning: {w}");
        }
        match curve.as_mut() {
            None => curve = Some(c),
            Some(acc) => {
                acc.points.extend(c.points);
                acc.warnings.extend(c.warnings);
            }
        }
    }
    let curve = curve.unwrap();
    let seed = seeds.first().copied().filter(|s| seeds.iter().all(|x| x == s));
    let header = Header::new(&cfg, seed)?;
    let bytes = curve_csv(&header, &curve)?;
    emit(out, a.out.as_deref(), &bytes, |p| write_curve(p, &header, &curve))
}

#[derive(Debug, Serialize)]
struct ExhaustiveConfig<'a> {
    #[serde(flatten)]
    run: &'a RunConfig,
    max_weight: usize,
    budget: u128,
    fallback: bool,
}

fn cmd_exhaustive(a: &ExhaustiveArgs, out: &mut dyn Write) -> Result<()> {
    let file = load_config(a.common.config.as_deref())?;
    let cfg = resolve("exhaustive", &a.common, &file)?;
    let max_weight = a.max_weight.or(file.max_weight).unwrap_or(1);
    let budget = a.budget.or(file.budget).unwrap_or(DEFAULT_BUDGET);
    let circuit = build_exrec(cfg.level)?;
    let engine = Engine::new(&circuit, cfg.mode.into())?;
    let sampler = Sampler::new(engine, cfg.tiebreak.into(), cfg.workers)?;
    let report = sampler.exhaustive(ExhaustiveOptions {
        max_weight,
        budget,
        fallback_trials: (!a.no_fallback).then_some(cfg.trials),
        seed: cfg.seed,
    })?;
    writeln!(out, "{}", report.summary())?;
    for s in &report.sweeps {
        writeln!(
            out,
            "  weight {}: {:?}, {} assignments, {} runs, {} failures",
            s.weight, s.method, s.assignments, s.runs, s.failures
        )?;
    }
    #[derive(Serialize)]
    struct Doc<'a> {
        config: ExhaustiveConfig<'a>,
        report: &'a crate::montecarlo::ExhaustiveReport,
    }
    let doc = Doc {
        config: ExhaustiveConfig {
            run: &cfg,
            max_weight,
            budget,
            fallback: !a.no_fallback,
        },
        report: &report,
    };
    let json = serde_json::to_string_pretty(&doc)?;
    match &cfg.out {
        Some(p) => std::fs::write(p, json + "\n")?,
        None => writeln!(out, "{json}")?,
    }
    Ok(())
}

/// Parse `AG1=4,AG2=0,A=2` into X-basis flags; `inf` is accepted.
pub fn parse_flags(s: &str) -> Result<FlagSet> {
    let mut flags = FlagSet::fresh();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, value) = part
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("flag '{part}' is not NAME=WEIGHT")))?;
        let flag = match name.trim().to_ascii_uppercase().as_str() {
            "AG1" => Flag::AG1,
            "AG2" => Flag::AG2,
            "A" => Flag::A,
            "G1" => Flag::G1,
            "G2" => Flag::G2,
            other => return Err(Error::InvalidArgument(format!("unknown flag '{other}'"))),
        };
        let w: Weight = value
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad weight '{value}'")))?;
        flags.set(Basis::X, flag, w);
    }
    Ok(flags)
}

fn cmd_decode_demo(a: &DecodeArgs, out: &mut dyn Write) -> Result<()> {
    let flags = parse_flags(&a.flags)?;
    let mut random = RandomTies(trial_rng(a.seed, 0, 0));
    let mut priority = PriorityTies;
    let tb: &mut dyn TieBreaker = match a.tiebreak {
        TieArg::Random => &mut random,
        TieArg::Priority => &mut priority,
    };
    let outcome = match_syndrome(&flags, Basis::X, a.syndrome == 1, 1, tb)?;
    writeln!(out, "{}", serde_json::to_string(&outcome)?)?;
    Ok(())
}

/// Rates rows for several weights, used by tests and scripts.
pub fn rates_for(sampler: &Sampler, weights: (usize, usize), trials: u64, seed: u64) -> Result<Vec<WeightEstimate>> {
    (weights.0..=weights.1).map(|w| sampler.estimate_r(w, trials, seed)).collect()
}
