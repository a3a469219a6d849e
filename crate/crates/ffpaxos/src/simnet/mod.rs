//! Deterministic discrete-event simulation of a cluster.
//!
//! One event loop, a virtual clock in microseconds and keyed random streams
//! (see [`rng`]). Given the same configuration, workload and horizon, [`run`]
//! returns the same [`Trace`] every time.

pub(crate) mod cluster;
pub mod rng;
pub mod trace;

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use ffpaxos_core::{
    validate_fast_flexible, Addr, Instance, Message, ProposerId, QuorumSystem, Round, RoundConfig, RoundKind,
    ValidationReport, Value,
};
use rand::Rng;
use rand_distr::{Distribution, Exp};
use sha2::{Digest, Sha256};

pub use cluster::Timer;
use cluster::{Cluster, Outbox};
use rng::{Purpose, StreamKey, Streams};
pub use trace::{Trace, TraceLevel};

/// Virtual time in microseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_ms(ms: f64) -> SimTime {
        SimTime((ms * 1000.0).round().max(0.0) as u64)
    }

    pub fn as_ms(self) -> f64 {
        self.0 as f64 / 1000.0
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:03}", self.0 / 1000, self.0 % 1000)
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_add(rhs.0))
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
}

impl Mul<u64> for SimTime {
    type Output = SimTime;
    fn mul(self, rhs: u64) -> SimTime {
        SimTime(self.0.saturating_mul(rhs))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Jitter {
    None,
    Uniform { lo_ms: f64, hi_ms: f64 },
    Exponential { mean_ms: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkModel {
    pub base_ms: f64,
    pub jitter: Jitter,
}

impl LinkModel {
    pub fn constant(base_ms: f64) -> Self {
        LinkModel { base_ms, jitter: Jitter::None }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> SimTime {
        let extra = match self.jitter {
            Jitter::None => 0.0,
            Jitter::Uniform { lo_ms, hi_ms } if hi_ms > lo_ms => rng.random_range(lo_ms..hi_ms),
            Jitter::Uniform { lo_ms, .. } => lo_ms,
            Jitter::Exponential { mean_ms } if mean_ms > 0.0 => Exp::new(1.0 / mean_ms).expect("positive rate").sample(rng),
            Jitter::Exponential { .. } => 0.0,
        };
        SimTime::from_ms(self.base_ms + extra)
    }
}

/// During `[start, end)` no message crosses between `side` and the rest.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    pub start: SimTime,
    pub end: SimTime,
    pub side: Vec<Addr>,
}

impl Partition {
    pub fn separates(&self, at: SimTime, a: Addr, b: Addr) -> bool {
        self.start <= at && at < self.end && self.side.contains(&a) != self.side.contains(&b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Timeouts {
    /// Submission to recovery when nothing was decided.
    pub conflict: SimTime,
    /// Base wait for a recovery round; doubles per retry.
    pub phase: SimTime,
    /// Extra delay per proposer index before eager recovery.
    pub recovery_stagger: SimTime,
}

impl Default for Timeouts {
    fn default() -> Self {
        Timeouts { conflict: SimTime::from_ms(100.0), phase: SimTime::from_ms(60.0), recovery_stagger: SimTime::from_ms(5.0) }
    }
}

/// How the first fast round gets its phase-1 done.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FastStart {
    /// Acceptors start with the first fast round already opened for ANY, as
    /// if its owner had run phase-1 for every instance ahead of time.
    #[default]
    Prepared,
    /// The owner runs phase-1 of the first fast round at time zero for every
    /// instance in the workload.
    Explicit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub proposers: u16,
    pub learners: u16,
    pub quorums: QuorumSystem,
    pub rounds: RoundConfig,
    pub link: LinkModel,
    /// Per-link replacements for `link`, matched on `(from, to)`.
    pub link_overrides: Vec<(Addr, Addr, LinkModel)>,
    pub drop: f64,
    pub dup: f64,
    pub partitions: Vec<Partition>,
    pub timeouts: Timeouts,
    pub fast_start: FastStart,
    pub allow_invalid: bool,
    pub trace_level: TraceLevel,
}

impl SimConfig {
    pub fn new(quorums: QuorumSystem, proposers: u16) -> Self {
        SimConfig {
            seed: 0,
            proposers,
            learners: 1,
            quorums,
            rounds: RoundConfig::new(proposers),
            link: LinkModel::constant(5.0),
            link_overrides: Vec::new(),
            drop: 0.0,
            dup: 0.0,
            partitions: Vec::new(),
            timeouts: Timeouts::default(),
            fast_start: FastStart::default(),
            allow_invalid: false,
            trace_level: TraceLevel::default(),
        }
    }

    pub fn link_for(&self, from: Addr, to: Addr) -> &LinkModel {
        self.link_overrides.iter().find(|(f, t, _)| *f == from && *t == to).map_or(&self.link, |(_, _, m)| m)
    }

    /// SHA-256 of everything except the seed, in hex.
    pub fn config_hash(&self) -> String {
        let mut unseeded = self.clone();
        unseeded.seed = 0;
        hex::encode(Sha256::digest(format!("{unseeded:?}").as_bytes()))
    }

    fn check(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::BadConfig(m.to_string()));
        if !(0.0..=1.0).contains(&self.drop) || !(0.0..=1.0).contains(&self.dup) {
            return bad("probabilities must lie in [0, 1]");
        }
        if self.proposers == 0 {
            return bad("at least one proposer is required");
        }
        if self.rounds.proposers != self.proposers {
            return bad("round config and cluster disagree on the number of proposers");
        }
        let models = std::iter::once(&self.link).chain(self.link_overrides.iter().map(|(_, _, m)| m));
        for m in models {
            let negative = match m.jitter {
                Jitter::None => false,
                Jitter::Uniform { lo_ms, hi_ms } => lo_ms < 0.0 || hi_ms < lo_ms,
                Jitter::Exponential { mean_ms } => mean_ms < 0.0,
            };
            if m.base_ms < 0.0 || negative {
                return bad("delays must be non-negative");
            }
        }
        if self.partitions.iter().any(|p| p.end < p.start) {
            return bad("partition ends before it starts");
        }
        if self.rounds.first(RoundKind::Fast).is_none() {
            return bad("round config has no fast round");
        }
        if !self.allow_invalid {
            let report = validate_fast_flexible(&self.quorums);
            if !report.is_valid() {
                return Err(SimError::InvalidQuorums(report));
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("quorum system rejected (set allow_invalid to simulate it anyway)\n{0}")]
    InvalidQuorums(ValidationReport),
    #[error("bad simulation config: {0}")]
    BadConfig(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Submission {
    pub time: SimTime,
    pub proposer: ProposerId,
    pub instance: Instance,
    pub value: Value,
}

/// Client submissions, in any order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Workload {
    pub submissions: Vec<Submission>,
}

impl Workload {
    pub fn single(proposer: ProposerId, instance: Instance, value: Value) -> Self {
        Workload { submissions: vec![Submission { time: SimTime::ZERO, proposer, instance, value }] }
    }

    pub fn instances(&self) -> Vec<Instance> {
        let mut out: Vec<Instance> = self.submissions.iter().map(|s| s.instance).collect();
        out.sort();
        out.dedup();
        out
    }
}

/// What the network does with one copy of a message.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schedule {
    Drop,
    Deliver(SimTime),
    Duplicate(SimTime, SimTime),
}

/// Draws the fate of a message on `from -> to`. Drop, duplication and each
/// delay come from separate streams keyed by link and instance.
pub fn deliver_schedule(
    streams: &mut Streams,
    link: &LinkModel,
    drop: f64,
    dup: f64,
    from: Addr,
    to: Addr,
    instance: Instance,
) -> Schedule {
    let key = |p| StreamKey::link(p, from, to, instance);
    let dropped = streams.next(key(Purpose::Drop)).random::<f64>() < drop;
    let duplicated = streams.next(key(Purpose::Duplicate)).random::<f64>() < dup;
    let d1 = link.sample(&mut streams.next(key(Purpose::Delay)));
    if dropped {
        Schedule::Drop
    } else if duplicated {
        Schedule::Duplicate(d1, link.sample(&mut streams.next(key(Purpose::Delay))))
    } else {
        Schedule::Deliver(d1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    Start { proposer: ProposerId, instance: Instance, round: Round },
    Submit(Submission),
    Deliver { to: Addr, msg: Message },
    Timer { proposer: ProposerId, timer: Timer },
}

struct Sim<'a> {
    config: &'a SimConfig,
    cluster: Cluster,
    streams: Streams,
    queue: BinaryHeap<Reverse<(SimTime, u64, Event)>>,
    seq: u64,
}

impl Sim<'_> {
    fn push(&mut self, at: SimTime, event: Event) {
        self.queue.push(Reverse((at, self.seq, event)));
        self.seq += 1;
    }

    fn partitioned(&self, at: SimTime, a: Addr, b: Addr) -> bool {
        self.config.partitions.iter().any(|p| p.separates(at, a, b))
    }

    fn flush(&mut self, now: SimTime, out: Outbox) {
        for msg in out.messages {
            for to in self.cluster.expand(msg.to) {
                self.cluster.trace.stats.sent += 1;
                let schedule = if self.partitioned(now, msg.from, to) {
                    Schedule::Drop
                } else {
                    let link = self.config.link_for(msg.from, to);
                    deliver_schedule(&mut self.streams, link, self.config.drop, self.config.dup, msg.from, to, msg.instance)
                };
                match schedule {
                    Schedule::Drop => {
                        self.cluster.trace.stats.dropped += 1;
                        self.cluster.trace.record(now, msg.from, "drop", || format!("{} {} -> {to}", msg.instance, msg.payload));
                    }
                    Schedule::Deliver(d) => self.push(now + d, Event::Deliver { to, msg }),
                    Schedule::Duplicate(d1, d2) => {
                        self.cluster.trace.stats.duplicated += 1;
                        self.push(now + d1, Event::Deliver { to, msg });
                        self.push(now + d2, Event::Deliver { to, msg });
                    }
                }
            }
        }
        for (delay, proposer, timer) in out.timers {
            self.push(now + delay, Event::Timer { proposer, timer });
        }
    }

    fn step(&mut self, now: SimTime, event: Event) {
        let mut out = Outbox::default();
        match event {
            Event::Start { proposer, instance, round } => self.cluster.start_round(now, proposer, instance, round, &mut out),
            Event::Submit(s) => self.cluster.submit(now, s.proposer, s.instance, s.value, &mut out),
            Event::Deliver { to, msg } => {
                if self.partitioned(now, msg.from, to) {
                    self.cluster.trace.stats.dropped += 1;
                    self.cluster.trace.record(now, to, "cut", || format!("{} {}<-{}", msg.instance, msg.payload, msg.from));
                    return;
                }
                self.cluster.deliver(now, to, &msg, &mut out);
            }
            Event::Timer { proposer, timer } => self.cluster.fire(now, proposer, timer, &mut out),
        }
        self.flush(now, out);
    }
}

/// Runs `workload` on a fresh cluster until the queue empties or the clock
/// passes `horizon`.
pub fn run(config: &SimConfig, workload: &Workload, horizon: SimTime) -> Result<Trace, SimError> {
    config.check()?;
    let fast_round = config.rounds.first(RoundKind::Fast).expect("checked");
    let trace = Trace::new(config.seed, config.config_hash(), config.trace_level);
    let cluster = Cluster::new(
        config.quorums.clone(),
        config.rounds,
        config.timeouts,
        fast_round,
        config.fast_start,
        config.learners,
        trace,
    );
    let mut sim = Sim { config, cluster, streams: Streams::new(config.seed), queue: BinaryHeap::new(), seq: 0 };
    if config.fast_start == FastStart::Explicit {
        let owner = config.rounds.owner(fast_round);
        for instance in workload.instances() {
            sim.push(SimTime::ZERO, Event::Start { proposer: owner, instance, round: fast_round });
        }
    }
    let mut submissions = workload.submissions.clone();
    submissions.sort();
    for s in submissions {
        if usize::from(s.proposer.0) >= usize::from(config.proposers) {
            return Err(SimError::BadConfig(format!("submission names unknown proposer {}", s.proposer)));
        }
        sim.push(s.time, Event::Submit(s));
    }
    while let Some(Reverse((at, _, event))) = sim.queue.pop() {
        if at > horizon {
            break;
        }
        sim.step(at, event);
    }
    Ok(sim.cluster.trace)
}
