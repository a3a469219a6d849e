//! Command-line front end. Exit codes: 0 clean, 1 property or validation
//! failure, 2 usage or configuration error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ffpaxos_core::{
    validate_fast_flexible, validate_fast_paxos, validate_flexible, validate_paxos, LegacyQuorumSystem, QuorumSystem,
    ValidationReport,
};
use serde_json::json;

use crate::bench::{self, BenchSystem};
use crate::checker::{self, exhaustive, Scenario};
use crate::config::{ConfigError, ConfigFile};
use crate::simnet::{self, SimTime};

#[derive(Parser, Debug)]
#[command(name = "ffpaxos", version, about = "Fast Flexible Paxos quorum checks, simulation, exploration and benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate the quorum system of a config.
    Quorum {
        #[command(subcommand)]
        action: QuorumAction,
    },
    /// Run one seeded simulation and check it.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        horizon_ms: Option<f64>,
    },
    /// Check many seeds under an adversarial network, or the tiny model exhaustively.
    Explore {
        config: PathBuf,
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Seed of the first run; later runs count up from it.
        #[arg(long)]
        first_seed: Option<u64>,
        #[arg(long)]
        exhaustive: bool,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        json: bool,
    },
    /// Replay a scripted counterexample on its invalid quorum system.
    Scenario {
        name: String,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Benchmark a config, optionally against a baseline config.
    Bench {
        config: PathBuf,
        /// Per-instance CSV; aggregates and sweep go next to it.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        compare: Option<PathBuf>,
        #[arg(long)]
        sweep: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum QuorumAction {
    Check(QuorumArgs),
    /// Verdicts of every scheme for the same sizes.
    Compare(QuorumArgs),
}

#[derive(Args, Debug)]
pub struct QuorumArgs {
    config: PathBuf,
    #[arg(long)]
    json: bool,
}

const OK: u8 = 0;
const FAILED: u8 = 1;
const USAGE: u8 = 2;

enum Failure {
    Config(String),
    Io(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

type Outcome = Result<u8, Failure>;

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { OK });
        }
    };
    let code = match run(cli) {
        Ok(code) => code,
        Err(Failure::Config(msg) | Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            USAGE
        }
    };
    ExitCode::from(code)
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Quorum { action: QuorumAction::Check(a) } => quorum_check(&a),
        Command::Quorum { action: QuorumAction::Compare(a) } => quorum_compare(&a),
        Command::Simulate { config, seed, trace, horizon_ms } => simulate(&config, seed, trace.as_deref(), horizon_ms),
        Command::Explore { config, seeds, jobs, first_seed, exhaustive, depth, json } => {
            if exhaustive {
                explore_exhaustive(&config, depth, json)
            } else {
                explore(&config, seeds, jobs, first_seed, json)
            }
        }
        Command::Scenario { name, trace } => scenario(&name, trace.as_deref()),
        Command::Bench { config, out, compare, sweep, seed, jobs } => {
            bench(&config, out.as_deref(), compare.as_deref(), sweep, seed, jobs)
        }
    }
}

fn pooled_median(sorted: &[f64]) -> f64 {
    match sorted.len() {
        0 => 0.0,
        n if n % 2 == 1 => sorted[n / 2],
        n => (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0,
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Io(format!("cannot write {}: {e}", path.display()));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, text).map_err(io)
}

fn report_json(r: &ValidationReport) -> serde_json::Value {
    let ft: serde_json::Map<String, serde_json::Value> = r.fault_tolerance.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    json!({
        "scheme": r.scheme.label(),
        "verdict": r.verdict(),
        "violations": r.violations.iter().map(|v| json!({
            "requirement": v.requirement.id(),
            "inequality": v.requirement.inequality(),
            "witness": v.witness.to_string(),
        })).collect::<Vec<_>>(),
        "fault_tolerance": ft,
    })
}

fn quorum_check(a: &QuorumArgs) -> Outcome {
    let cfg = ConfigFile::load(&a.config)?;
    let report = cfg.validate()?;
    if a.json {
        println!("{}", report_json(&report));
    } else {
        println!("{report}");
    }
    Ok(if report.is_valid() { OK } else { FAILED })
}

/// Reads the same cluster under every scheme: phase-1 size `q1`, classic
/// size `q2c`, fast size `q2f`. Fast Paxos uses `q2c` for both classic
/// phases.
fn compare_reports(cfg: &ConfigFile) -> Result<Vec<ValidationReport>, ConfigError> {
    let qs = cfg.quorum_system()?;
    let n = qs.n();
    let mut out = Vec::new();
    let ff = validate_fast_flexible(&qs);
    if let Some((q1, q2c, q2f)) = qs.thresholds() {
        out.push(validate_paxos(n, q2c)?);
        out.push(validate_flexible(n, q1, q2c)?);
        out.push(validate_fast_paxos(&LegacyQuorumSystem::cardinality(n, q2c, q2f)?));
    } else {
        let legacy = LegacyQuorumSystem::new(n, qs.family(ffpaxos_core::Family::Phase2Classic).clone(), qs.family(ffpaxos_core::Family::Phase2Fast).clone())?;
        out.push(validate_fast_paxos(&legacy));
    }
    out.push(ff);
    Ok(out)
}

fn quorum_compare(a: &QuorumArgs) -> Outcome {
    let cfg = ConfigFile::load(&a.config)?;
    let own = cfg.validate()?;
    let reports = compare_reports(&cfg)?;
    if a.json {
        println!("{}", json!({ "config": report_json(&own), "schemes": reports.iter().map(report_json).collect::<Vec<_>>() }));
    } else {
        let qs = cfg.quorum_system()?;
        match qs.thresholds() {
            Some((q1, q2c, q2f)) => println!("n={} q1={q1} q2c={q2c} q2f={q2f}", qs.n()),
            None => println!("n={} explicit quorums", qs.n()),
        }
        for r in &reports {
            let reasons: Vec<&str> = r.violations.iter().map(|v| v.requirement.inequality()).collect();
            if reasons.is_empty() {
                println!("  {:<14} {}", r.scheme.label(), r.verdict());
            } else {
                println!("  {:<14} {} ({})", r.scheme.label(), r.verdict(), reasons.join("; "));
            }
        }
        println!("config scheme {}: {}", own.scheme.label(), own.verdict());
    }
    Ok(if own.is_valid() { OK } else { FAILED })
}

fn simulate(path: &Path, seed: Option<u64>, trace_out: Option<&Path>, horizon_ms: Option<f64>) -> Outcome {
    let file = ConfigFile::load(path)?;
    let mut cfg = file.sim_config()?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let spec = file.workload_spec();
    let workload = spec.generate(cfg.seed);
    let horizon = SimTime::from_ms(horizon_ms.unwrap_or(spec.duration_s.max(0.0) * 1000.0 + bench::DRAIN_MS));
    let trace = simnet::run(&cfg, &workload, horizon).map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(p) = trace_out {
        write_file(p, &trace.to_text())?;
    }
    let verdicts = checker::monitor(&trace);
    let decided: std::collections::BTreeSet<_> = trace.decisions.iter().map(|d| d.instance).collect();
    println!(
        "seed {}: {} submissions, {} of {} instances decided, {} messages ({} dropped, {} duplicated)",
        cfg.seed,
        trace.submissions.len(),
        decided.len(),
        workload.instances().len(),
        trace.stats.sent,
        trace.stats.dropped,
        trace.stats.duplicated
    );
    for v in &verdicts {
        println!("{v}");
    }
    Ok(if checker::all_pass(&verdicts) { OK } else { FAILED })
}

fn explore(path: &Path, seeds: Option<u64>, jobs: usize, first_seed: Option<u64>, json_out: bool) -> Outcome {
    let file = ConfigFile::load(path)?;
    let mut cfg = file.sim_config()?;
    cfg.trace_level = simnet::TraceLevel::Summary;
    let seeds = seeds.unwrap_or(file.checker.seeds);
    let spec = file.explore_spec();
    let horizon = SimTime::from_ms(file.checker.horizon_ms);
    let first = first_seed.unwrap_or(file.seed);
    let summary = checker::explore(&cfg, &|s| spec.generate(s), horizon, first, seeds, &file.adversary(), jobs)
        .map_err(|e| Failure::Config(e.to_string()))?;
    if json_out {
        println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
    } else {
        println!("seeds run: {}", summary.seeds_run);
        println!("decisions: {}", summary.decisions);
        println!("recovery rounds: {} ({} forced picks)", summary.recovery_rounds, summary.forced_picks);
        println!("violations: {}", summary.violations.len());
        for inv in checker::Invariant::ALL {
            println!("  {:<22} {}", inv.id(), summary.count(inv));
        }
        if let Some(seed) = summary.first_failing_seed {
            println!("first failing seed: {seed} (replay with `simulate --seed {seed}` under the same adversary)");
            for v in summary.violations.iter().take(1) {
                for line in &v.counterexample {
                    println!("    {line}");
                }
            }
        }
    }
    Ok(if summary.clean() { OK } else { FAILED })
}

fn explore_exhaustive(path: &Path, depth: Option<usize>, json_out: bool) -> Outcome {
    let file = ConfigFile::load(path)?;
    let qs: QuorumSystem = file.quorum_system()?;
    let model = exhaustive::TinyModel::standard(qs);
    let limits = exhaustive::Limits { depth: depth.or(file.checker.depth).unwrap_or(usize::MAX), max_states: file.checker.max_states };
    let s = exhaustive::exhaustive_explore(&model, limits).map_err(|e| Failure::Config(e.to_string()))?;
    if json_out {
        println!("{}", serde_json::to_string(&s).expect("summary serializes"));
    } else {
        println!("states: {}  transitions: {}  depth: {}", s.states, s.transitions, s.max_depth);
        println!("complete: {}", if s.complete { "yes" } else { "no (bound reached, partial result)" });
        println!("picks checked: {} ({} after a choice)", s.picks_checked, s.picks_after_choice);
        println!("violations: {}", s.violations.len());
        for v in &s.violations {
            println!("  {}: {}", v.invariant, v.detail);
            for step in &v.trail {
                println!("    {step}");
            }
        }
    }
    Ok(if s.clean() { OK } else { FAILED })
}

fn scenario(name: &str, trace_out: Option<&Path>) -> Outcome {
    let sc: Scenario = name.parse().map_err(|e: checker::ScenarioError| Failure::Config(e.to_string()))?;
    let trace = checker::scripted_counterexample(sc);
    if let Some(p) = trace_out {
        write_file(p, &trace.to_text())?;
    }
    let quorums = sc.quorums();
    println!("{sc} on {}", validate_fast_flexible(&quorums));
    let verdicts = checker::monitor(&trace);
    for v in &verdicts {
        println!("{v}");
    }
    Ok(if checker::all_pass(&verdicts) { OK } else { FAILED })
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map_or_else(|| "bench".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}-{suffix}.csv"))
}

fn label(path: &Path) -> String {
    path.file_stem().map_or_else(|| "config".into(), |s| s.to_string_lossy().into_owned())
}

fn bench(path: &Path, out: Option<&Path>, compare: Option<&Path>, sweep: bool, seed: Option<u64>, jobs: usize) -> Outcome {
    let mut configs = vec![(label(path), ConfigFile::load(path)?)];
    if let Some(c) = compare {
        configs.push((label(c), ConfigFile::load(c)?));
    }
    let mut records = String::from(bench::RECORD_HEADER);
    records.push('\n');
    let mut aggregates = String::from(bench::AGGREGATE_HEADER);
    aggregates.push('\n');
    let mut medians = Vec::new();
    let mut systems: Vec<BenchSystem> = Vec::new();
    for (name, file) in &configs {
        let system = file.bench_system()?;
        let spec = file.workload_spec();
        let mut sim = file.sim_config()?;
        let base_seed = seed.unwrap_or(file.seed);
        let mut fast = Vec::new();
        for k in 0..file.workload.seeds.max(1) {
            sim.seed = base_seed + k;
            let mut result = bench::run_bench(&system, &spec, &sim).map_err(|e| Failure::Config(e.to_string()))?;
            result.config = name.clone();
            records.push_str(&result.records_csv(false));
            aggregates.push_str(&result.aggregates_csv(false));
            let a = &result.aggregates;
            println!(
                "{name} seed {}: {} instances, median {:.3} ms, fast-path median {:.3} ms, p99 {:.3} ms, {} races, {} recoveries",
                sim.seed, a.instances, a.median_ms, a.fast_median_ms, a.p99_ms, a.races, a.recoveries
            );
            fast.extend(result.records.iter().filter(|r| r.path == bench::Path::Fast).filter_map(|r| Some(r.decide_ms? - r.submit_ms)));
        }
        fast.sort_by(f64::total_cmp);
        medians.push((name.clone(), pooled_median(&fast)));
        systems.push(system);
    }
    if let [(a, ma), (b, mb)] = medians.as_slice() {
        let rel = if *mb > 0.0 { (mb - ma) / mb * 100.0 } else { 0.0 };
        let dir = if rel >= 0.0 { "lower" } else { "higher" };
        println!("pooled fast-path median: {a} {ma:.3} ms vs {b} {mb:.3} ms ({a} {:.1}% {dir})", rel.abs());
    }
    if let Some(p) = out {
        write_file(p, &records)?;
        write_file(&sibling(p, "aggregates"), &aggregates)?;
    }
    if sweep {
        let (_, first) = &configs[0];
        let sim = first.sim_config()?;
        let seeds: Vec<u64> = (0..first.workload.seeds.max(1)).map(|k| seed.unwrap_or(first.seed) + k).collect();
        let mut rows = bench::conflict_sweep(&systems, &first.workload.sweep_intervals_ms, &first.workload_spec(), &sim, &seeds, jobs)
            .map_err(|e| Failure::Config(e.to_string()))?;
        for (row, i) in rows.iter_mut().zip(0..) {
            row.config = configs[i / first.workload.sweep_intervals_ms.len().max(1)].0.clone();
        }
        let csv = bench::sweep_csv(&rows);
        print!("{csv}");
        if let Some(p) = out {
            write_file(&sibling(p, "sweep"), &csv)?;
        }
    }
    std::io::stdout().flush().ok();
    Ok(OK)
}
