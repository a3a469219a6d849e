//! Many-seed randomized exploration under an adversarial network.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use ffpaxos_core::{Addr, PickOutcome};
use rand::Rng;
use serde::Serialize;

use super::monitor::{monitor, Invariant};
use crate::simnet::rng::{generator, Purpose};
use crate::simnet::{self, Jitter, LinkModel, Partition, SimConfig, SimError, SimTime, TraceLevel, Workload};

/// Fault settings layered over the base config for every seed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Adversary {
    pub drop: f64,
    pub dup: f64,
    /// Exponential jitter mean as a multiple of the base link delay.
    pub jitter_factor: f64,
    /// Add one random partition per seed.
    pub partitions: bool,
}

impl Default for Adversary {
    fn default() -> Self {
        Adversary { drop: 0.1, dup: 0.05, jitter_factor: 2.0, partitions: true }
    }
}

impl Adversary {
    /// The config used for `seed`.
    pub fn apply(&self, base: &SimConfig, seed: u64, horizon: SimTime) -> SimConfig {
        let mut cfg = base.clone();
        cfg.seed = seed;
        cfg.drop = self.drop;
        cfg.dup = self.dup;
        cfg.link = LinkModel { base_ms: base.link.base_ms, jitter: Jitter::Exponential { mean_ms: self.jitter_factor * base.link.base_ms } };
        if self.partitions {
            let mut rng = generator(seed, Purpose::Adversary);
            let start = rng.random_range(0..=horizon.0 / 2);
            let len = rng.random_range(0..=horizon.0 / 4);
            let n = u8::try_from(base.quorums.n()).expect("n fits in u8");
            let mut side: Vec<Addr> = (0..n).map(|a| Addr::Acceptor(ffpaxos_core::NodeId(a))).collect();
            side.extend((0..base.proposers).map(|p| Addr::Proposer(ffpaxos_core::ProposerId(p))));
            side.extend((0..base.learners).map(Addr::Learner));
            side.retain(|_| rng.random_bool(0.5));
            cfg.partitions.push(Partition { start: SimTime(start), end: SimTime(start + len), side });
        }
        cfg
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SeedViolation {
    pub seed: u64,
    pub invariant: Invariant,
    pub counterexample: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ExploreSummary {
    pub seeds_run: u64,
    pub violations: Vec<SeedViolation>,
    pub first_failing_seed: Option<u64>,
    /// Decision records across all seeds.
    pub decisions: u64,
    pub messages_sent: u64,
    /// Phase-1 rounds started after the fast round, across all seeds.
    pub recovery_rounds: u64,
    /// Phase-1 completions that found a value already voted.
    pub forced_picks: u64,
}

impl ExploreSummary {
    pub fn clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, inv: Invariant) -> usize {
        self.violations.iter().filter(|v| v.invariant == inv).count()
    }
}

/// Violations and `[decisions, messages, recovery rounds, forced picks]` for one seed.
type SeedOutcome = (u64, Vec<SeedViolation>, [u64; 4]);

/// Runs seeds `first_seed .. first_seed + seeds` on up to `jobs` threads,
/// with `workload(seed)` as each run's client load. Results do not depend
/// on `jobs`.
pub fn explore(
    base: &SimConfig,
    workload: &(dyn Fn(u64) -> Workload + Sync),
    horizon: SimTime,
    first_seed: u64,
    seeds: u64,
    adversary: &Adversary,
    jobs: usize,
) -> Result<ExploreSummary, SimError> {
    if seeds == 0 {
        return Ok(ExploreSummary::default());
    }
    // surface config errors once, before fanning out
    let mut probe = base.clone();
    probe.trace_level = TraceLevel::Summary;
    simnet::run(&probe, &Workload::default(), SimTime::ZERO)?;

    let next = AtomicU64::new(0);
    let results: Mutex<Vec<SeedOutcome>> = Mutex::new(Vec::new());
    std::thread::scope(|s| {
        for _ in 0..jobs.max(1) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= seeds {
                    break;
                }
                let seed = first_seed + i;
                let mut cfg = adversary.apply(base, seed, horizon);
                cfg.trace_level = TraceLevel::Summary;
                let trace = simnet::run(&cfg, &workload(seed), horizon).expect("config checked above");
                let bad: Vec<SeedViolation> = monitor(&trace)
                    .into_iter()
                    .filter(|v| !v.passed)
                    .map(|v| SeedViolation { seed, invariant: v.invariant, counterexample: v.counterexample })
                    .collect();
                let forced = trace.picks.iter().filter(|p| matches!(p.outcome, Some(PickOutcome::Forced(_)))).count();
                let counts = [trace.decisions.len() as u64, trace.stats.sent, trace.round_starts.len() as u64, forced as u64];
                let row = (seed, bad, counts);
                results.lock().expect("no poisoned workers").push(row);
            });
        }
    });
    let mut rows = results.into_inner().expect("no poisoned workers");
    rows.sort_by_key(|r| r.0);
    let mut summary = ExploreSummary { seeds_run: seeds, ..Default::default() };
    for (_, bad, [decisions, sent, starts, forced]) in rows {
        summary.violations.extend(bad);
        summary.decisions += decisions;
        summary.messages_sent += sent;
        summary.recovery_rounds += starts;
        summary.forced_picks += forced;
    }
    summary.first_failing_seed = summary.violations.first().map(|v| v.seed);
    Ok(summary)
}
