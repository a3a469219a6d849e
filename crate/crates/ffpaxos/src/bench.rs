//! Open-loop benchmark workloads, latency and conflict-recovery metrics.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use ffpaxos_core::{
    validate_fast_flexible, validate_fast_paxos, Family, Instance, LegacyQuorumSystem, NodeId, ProposerId,
    QuorumSystem, Round, RoundKind, ValidationReport, Value,
};
use rand::Rng;
use serde::Serialize;

use crate::simnet::rng::{generator, Purpose};
use crate::simnet::{self, SimConfig, SimError, SimTime, Submission, Trace, TraceLevel, Workload};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorkloadSpec {
    /// Requests per simulated second.
    pub rate: f64,
    pub duration_s: f64,
    /// One client per proposer.
    pub clients: u16,
    /// Chance that a request reuses its predecessor's instance.
    pub conflict_fraction: f64,
    /// Delay between a request and the one racing it.
    pub race_gap_ms: f64,
    /// Uniform jitter added to each fixed-interval arrival.
    pub arrival_jitter_ms: f64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec { rate: 1400.0, duration_s: 1.0, clients: 2, conflict_fraction: 0.10, race_gap_ms: 0.0, arrival_jitter_ms: 0.0 }
    }
}

impl WorkloadSpec {
    pub fn requests(&self) -> u64 {
        if self.rate <= 0.0 || self.duration_s <= 0.0 {
            return 0;
        }
        (self.rate * self.duration_s).floor() as u64
    }

    /// Fixed-rate arrivals with seeded jitter. A racing request goes to the
    /// next client and shares its predecessor's instance; a request that was
    /// itself racing never gets a third competitor.
    pub fn generate(&self, seed: u64) -> Workload {
        let mut rng = generator(seed, Purpose::Workload);
        let clients = self.clients.max(1);
        let mut out: Vec<Submission> = Vec::new();
        let mut next_instance = 0u64;
        let mut pred_raced = true;
        for k in 0..self.requests() {
            let value = Value(k + 1);
            let race = !pred_raced && clients > 1 && rng.random_bool(self.conflict_fraction.clamp(0.0, 1.0));
            let jitter = if self.arrival_jitter_ms > 0.0 { rng.random_range(0.0..self.arrival_jitter_ms) } else { 0.0 };
            let sub = if race {
                let pred = *out.last().expect("a predecessor exists");
                Submission {
                    time: pred.time + SimTime::from_ms(self.race_gap_ms),
                    proposer: ProposerId((pred.proposer.0 + 1) % clients),
                    instance: pred.instance,
                    value,
                }
            } else {
                next_instance += 1;
                Submission {
                    time: SimTime::from_ms(k as f64 * 1000.0 / self.rate + jitter),
                    proposer: ProposerId((k % u64::from(clients)) as u16),
                    instance: Instance(next_instance - 1),
                    value,
                }
            };
            pred_raced = race;
            out.push(sub);
        }
        Workload { submissions: out }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BenchSystem {
    FastFlexible(QuorumSystem),
    FastPaxos(LegacyQuorumSystem),
}

impl BenchSystem {
    pub fn label(&self) -> &'static str {
        match self {
            BenchSystem::FastFlexible(_) => "ffp",
            BenchSystem::FastPaxos(_) => "fp",
        }
    }

    pub fn validate(&self) -> ValidationReport {
        match self {
            BenchSystem::FastFlexible(qs) => validate_fast_flexible(qs),
            BenchSystem::FastPaxos(l) => validate_fast_paxos(l),
        }
    }

    pub fn quorums(&self) -> QuorumSystem {
        match self {
            BenchSystem::FastFlexible(qs) => qs.clone(),
            BenchSystem::FastPaxos(l) => l.to_fast_flexible(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("system rejected under its own scheme\n{0}")]
    Invalid(ValidationReport),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RaceOutcome {
    FastWin,
    Recovery,
    Unclassifiable,
}

/// Fast-win when some value collected a fast quorum of votes in the
/// original fast round.
pub fn classify_race(fast_votes: &[(NodeId, Value)], decided: bool, qs: &QuorumSystem) -> RaceOutcome {
    let mut by_value: BTreeMap<Value, ffpaxos_core::NodeSet> = BTreeMap::new();
    for &(a, v) in fast_votes {
        by_value.entry(v).or_default().insert(a);
    }
    if by_value.values().any(|s| qs.is_quorum(Family::Phase2Fast, *s)) {
        RaceOutcome::FastWin
    } else if decided {
        RaceOutcome::Recovery
    } else {
        RaceOutcome::Unclassifiable
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Path {
    Fast,
    Recovery,
    Undecided,
}

impl Path {
    pub fn label(self) -> &'static str {
        match self {
            Path::Fast => "fast",
            Path::Recovery => "recovery",
            Path::Undecided => "undecided",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InstanceRecord {
    pub instance: u64,
    pub submit_ms: f64,
    pub decide_ms: Option<f64>,
    pub path: Path,
    /// Rounds that reached phase-2 or started phase-1.
    pub rounds: usize,
    pub racing: bool,
    pub race: Option<RaceOutcome>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Aggregates {
    pub instances: usize,
    pub decided: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p99_ms: f64,
    pub fast_median_ms: f64,
    pub throughput: f64,
    pub races: usize,
    pub recoveries: usize,
    pub conflict_probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchResult {
    pub config: String,
    pub seed: u64,
    pub records: Vec<InstanceRecord>,
    pub aggregates: Aggregates,
}

/// Nearest-rank percentile of sorted samples.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

fn median(sorted: &[f64]) -> f64 {
    match sorted.len() {
        0 => 0.0,
        n if n % 2 == 1 => sorted[n / 2],
        n => (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0,
    }
}

/// Per-instance records from a finished trace.
pub fn records(trace: &Trace, qs: &QuorumSystem, fast_round: Round) -> Vec<InstanceRecord> {
    let mut submit: BTreeMap<Instance, (SimTime, usize)> = BTreeMap::new();
    for s in &trace.submissions {
        let e = submit.entry(s.instance).or_insert((s.time, 0));
        e.0 = e.0.min(s.time);
        e.1 += 1;
    }
    let mut decided: BTreeMap<Instance, (SimTime, Round)> = BTreeMap::new();
    for d in &trace.decisions {
        decided.entry(d.instance).or_insert((d.time, d.round));
    }
    let mut fast_votes: BTreeMap<Instance, Vec<(NodeId, Value)>> = BTreeMap::new();
    let mut rounds: BTreeMap<Instance, std::collections::BTreeSet<Round>> = BTreeMap::new();
    for (_, a, i, r, v) in trace.votes() {
        if r == fast_round {
            fast_votes.entry(i).or_default().push((a, v));
        }
        rounds.entry(i).or_default().insert(r);
    }
    for rs in &trace.round_starts {
        rounds.entry(rs.instance).or_default().insert(rs.round);
    }
    submit
        .into_iter()
        .map(|(i, (t, count))| {
            let d = decided.get(&i);
            let path = match d {
                None => Path::Undecided,
                Some((_, r)) if *r == fast_round => Path::Fast,
                Some(_) => Path::Recovery,
            };
            let racing = count > 1;
            let race = racing.then(|| {
                let votes = fast_votes.get(&i).map_or(&[][..], |v| v.as_slice());
                classify_race(votes, d.is_some(), qs)
            });
            InstanceRecord {
                instance: i.0,
                submit_ms: t.as_ms(),
                decide_ms: d.map(|(dt, _)| dt.as_ms()),
                path,
                rounds: rounds.get(&i).map_or(1, |r| r.len().max(1)),
                racing,
                race,
            }
        })
        .collect()
}

pub fn aggregate(records: &[InstanceRecord], duration_s: f64, recovered: usize) -> Aggregates {
    let mut lat: Vec<f64> = records.iter().filter_map(|r| r.decide_ms.map(|d| d - r.submit_ms)).collect();
    lat.sort_by(f64::total_cmp);
    let mut fast: Vec<f64> =
        records.iter().filter(|r| r.path == Path::Fast).filter_map(|r| r.decide_ms.map(|d| d - r.submit_ms)).collect();
    fast.sort_by(f64::total_cmp);
    let races = records.iter().filter(|r| r.racing).count();
    Aggregates {
        instances: records.len(),
        decided: lat.len(),
        mean_ms: if lat.is_empty() { 0.0 } else { lat.iter().sum::<f64>() / lat.len() as f64 },
        median_ms: median(&lat),
        p99_ms: percentile(&lat, 99.0),
        fast_median_ms: median(&fast),
        throughput: if duration_s > 0.0 { lat.len() as f64 / duration_s } else { 0.0 },
        races,
        recoveries: recovered,
        conflict_probability: if races == 0 { 0.0 } else { recovered as f64 / races as f64 },
    }
}

/// Simulated time allowed after the last arrival for stragglers.
pub const DRAIN_MS: f64 = 5000.0;

/// Runs `spec` against `system` with one client per proposer.
pub fn run_bench(system: &BenchSystem, spec: &WorkloadSpec, sim: &SimConfig) -> Result<BenchResult, BenchError> {
    let report = system.validate();
    if !report.is_valid() {
        return Err(BenchError::Invalid(report));
    }
    let mut cfg = sim.clone();
    cfg.quorums = system.quorums();
    cfg.proposers = spec.clients.max(1);
    cfg.rounds.proposers = cfg.proposers;
    cfg.trace_level = TraceLevel::Summary;
    let workload = spec.generate(cfg.seed);
    let horizon = SimTime::from_ms(spec.duration_s.max(0.0) * 1000.0 + DRAIN_MS);
    let trace = simnet::run(&cfg, &workload, horizon)?;
    let fast_round = cfg.rounds.first(RoundKind::Fast).expect("validated by run");
    let recs = records(&trace, &cfg.quorums, fast_round);
    let recovered = {
        let mut set: Vec<Instance> = trace.round_starts.iter().filter(|r| r.round > fast_round).map(|r| r.instance).collect();
        set.sort();
        set.dedup();
        // recoveries only count for instances that actually raced
        let racing: std::collections::BTreeSet<u64> = recs.iter().filter(|r| r.racing).map(|r| r.instance).collect();
        set.iter().filter(|i| racing.contains(&i.0)).count()
    };
    let aggregates = aggregate(&recs, spec.duration_s, recovered);
    Ok(BenchResult { config: system.label().to_string(), seed: cfg.seed, records: recs, aggregates })
}

pub const RECORD_HEADER: &str = "config,seed,instance,submit_ms,decide_ms,path,rounds";
pub const AGGREGATE_HEADER: &str = "config,metric,value";

impl BenchResult {
    pub fn records_csv(&self, header: bool) -> String {
        let mut out = String::new();
        if header {
            writeln!(out, "{RECORD_HEADER}").unwrap();
        }
        for r in &self.records {
            let decide = r.decide_ms.map_or_else(String::new, |d| format!("{d:.3}"));
            writeln!(out, "{},{},{},{:.3},{},{},{}", self.config, self.seed, r.instance, r.submit_ms, decide, r.path.label(), r.rounds).unwrap();
        }
        out
    }

    pub fn aggregates_csv(&self, header: bool) -> String {
        let a = &self.aggregates;
        let mut out = String::new();
        if header {
            writeln!(out, "{AGGREGATE_HEADER}").unwrap();
        }
        let rows: [(&str, String); 10] = [
            ("instances", a.instances.to_string()),
            ("decided", a.decided.to_string()),
            ("mean_ms", format!("{:.3}", a.mean_ms)),
            ("median_ms", format!("{:.3}", a.median_ms)),
            ("p99_ms", format!("{:.3}", a.p99_ms)),
            ("fast_median_ms", format!("{:.3}", a.fast_median_ms)),
            ("throughput", format!("{:.3}", a.throughput)),
            ("races", a.races.to_string()),
            ("recoveries", a.recoveries.to_string()),
            ("conflict_probability", format!("{:.6}", a.conflict_probability)),
        ];
        for (k, v) in rows {
            writeln!(out, "{},{k},{v}", self.config).unwrap();
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub config: String,
    pub interval_ms: f64,
    pub races: usize,
    pub recoveries: usize,
    pub probability: f64,
}

/// Races and recoveries for one (system, interval, seed) cell.
type CellResult = Result<(usize, usize), BenchError>;

pub const SWEEP_HEADER: &str = "config,interval_ms,races,recoveries,probability";

/// Conflict probability for every (system, interval) cell, summed over
/// `seeds`. Cells run on up to `jobs` threads; row order follows the inputs.
pub fn conflict_sweep(
    systems: &[BenchSystem],
    intervals: &[f64],
    spec: &WorkloadSpec,
    sim: &SimConfig,
    seeds: &[u64],
    jobs: usize,
) -> Result<Vec<SweepRow>, BenchError> {
    let cells: Vec<(usize, usize, usize)> = (0..systems.len())
        .flat_map(|s| (0..intervals.len()).flat_map(move |i| (0..seeds.len()).map(move |k| (s, i, k))))
        .collect();
    let next = AtomicUsize::new(0);
    let results: Mutex<BTreeMap<(usize, usize, usize), CellResult>> = Mutex::new(BTreeMap::new());
    std::thread::scope(|scope| {
        for _ in 0..jobs.max(1) {
            scope.spawn(|| loop {
                let c = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(s, i, k)) = cells.get(c) else { break };
                let spec = WorkloadSpec { race_gap_ms: intervals[i], ..*spec };
                let mut cfg = sim.clone();
                cfg.seed = seeds[k];
                let r = run_bench(&systems[s], &spec, &cfg).map(|b| (b.aggregates.races, b.aggregates.recoveries));
                results.lock().expect("no poisoned workers").insert((s, i, k), r);
            });
        }
    });
    let mut results = results.into_inner().expect("no poisoned workers");
    let mut rows = Vec::new();
    for (s, system) in systems.iter().enumerate() {
        for (i, &interval_ms) in intervals.iter().enumerate() {
            let (mut races, mut recoveries) = (0, 0);
            for k in 0..seeds.len() {
                let (a, b) = results.remove(&(s, i, k)).expect("every cell ran")?;
                races += a;
                recoveries += b;
            }
            let probability = if races == 0 { 0.0 } else { recoveries as f64 / races as f64 };
            rows.push(SweepRow { config: system.label().to_string(), interval_ms, races, recoveries, probability });
        }
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        writeln!(out, "{},{:.3},{},{},{:.6}", r.config, r.interval_ms, r.races, r.recoveries, r.probability).unwrap();
    }
    out
}
