//! Hand-built delivery schedules on deliberately invalid quorum systems.
//!
//! Each scenario drives the same node handlers as the simulator, but the
//! script decides which in-flight message is delivered next.

use std::fmt;
use std::str::FromStr;

use ffpaxos_core::{
    validate_fast_flexible, Addr, Classification, Instance, Message, NodeId, Ownership, ProposerId, QuorumSystem,
    Round, RoundConfig, RoundKind, Value,
};

use crate::simnet::cluster::{Cluster, Outbox};
use crate::simnet::{FastStart, SimConfig, SimTime, Timeouts, Trace, TraceLevel};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    BrokenFastIntersection,
    BrokenClassicIntersection,
}

impl Scenario {
    pub const ALL: [Scenario; 2] = [Scenario::BrokenFastIntersection, Scenario::BrokenClassicIntersection];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::BrokenFastIntersection => "broken-fast-intersection",
            Scenario::BrokenClassicIntersection => "broken-classic-intersection",
        }
    }

    /// The invalid system the schedule was written for.
    pub fn quorums(self) -> QuorumSystem {
        match self {
            Scenario::BrokenFastIntersection => QuorumSystem::cardinality(5, 3, 3, 3),
            Scenario::BrokenClassicIntersection => QuorumSystem::cardinality(4, 2, 2, 4),
        }
        .expect("well-formed")
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = ScenarioError;
    fn from_str(s: &str) -> Result<Self, ScenarioError> {
        Scenario::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| ScenarioError::Unknown(s.to_string()))
    }
}

#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("unknown scenario {0:?} (known: broken-fast-intersection, broken-classic-intersection)")]
    Unknown(String),
    #[error("scenario {0} only applies to invalid quorum systems")]
    ValidSystem(Scenario),
    #[error("scenario {scenario} needs {need} acceptors, got {got}")]
    ClusterSize { scenario: Scenario, need: usize, got: usize },
}

/// The simulator config matching a scenario, for hashing and display.
pub fn scenario_config(scenario: Scenario, quorums: QuorumSystem) -> SimConfig {
    let mut cfg = SimConfig::new(quorums, 2);
    cfg.rounds = RoundConfig::with_rules(2, Classification::EvenFast, Ownership::Paired);
    cfg.allow_invalid = true;
    cfg.fast_start = match scenario {
        Scenario::BrokenFastIntersection => FastStart::Prepared,
        Scenario::BrokenClassicIntersection => FastStart::Explicit,
    };
    cfg
}

struct Script {
    cluster: Cluster,
    pool: Vec<(Addr, Message)>,
    now: SimTime,
}

const P0: ProposerId = ProposerId(0);
const P1: ProposerId = ProposerId(1);
const I: Instance = Instance(0);
const X: Value = Value(1);
const Y: Value = Value(2);

impl Script {
    fn tick(&mut self) {
        self.now = self.now + SimTime::from_ms(1.0);
    }

    fn absorb(&mut self, out: Outbox) {
        for msg in out.messages {
            for to in self.cluster.expand(msg.to) {
                self.cluster.trace.stats.sent += 1;
                self.pool.push((to, msg));
            }
        }
    }

    fn submit(&mut self, p: ProposerId, v: Value) {
        self.tick();
        let mut out = Outbox::default();
        self.cluster.submit(self.now, p, I, v, &mut out);
        self.absorb(out);
    }

    fn start(&mut self, p: ProposerId, round: Round) {
        self.tick();
        let mut out = Outbox::default();
        self.cluster.start_round(self.now, p, I, round, &mut out);
        self.absorb(out);
    }

    /// Delivers every in-flight message of `kind` from one of `from` to one
    /// of `to`, in the order they were sent.
    fn deliver(&mut self, kind: &str, from: &[Addr], to: &[Addr]) {
        self.tick();
        let (now, rest): (Vec<_>, Vec<_>) = std::mem::take(&mut self.pool)
            .into_iter()
            .partition(|(dst, m)| m.payload.kind() == kind && from.contains(&m.from) && to.contains(dst));
        self.pool = rest;
        for (dst, msg) in now {
            let mut out = Outbox::default();
            self.cluster.deliver(self.now, dst, &msg, &mut out);
            self.absorb(out);
        }
    }
}

fn acceptors(ids: &[u8]) -> Vec<Addr> {
    ids.iter().map(|&a| Addr::Acceptor(NodeId(a))).collect()
}

/// Runs `scenario` on its own invalid system.
pub fn scripted_counterexample(scenario: Scenario) -> Trace {
    run_scenario(scenario, scenario.quorums()).expect("catalog systems are invalid")
}

/// Runs `scenario` on `quorums`, which must be invalid and of the right size.
pub fn run_scenario(scenario: Scenario, quorums: QuorumSystem) -> Result<Trace, ScenarioError> {
    let need = scenario.quorums().n();
    if quorums.n() != need {
        return Err(ScenarioError::ClusterSize { scenario, need, got: quorums.n() });
    }
    if validate_fast_flexible(&quorums).is_valid() {
        return Err(ScenarioError::ValidSystem(scenario));
    }
    let cfg = scenario_config(scenario, quorums);
    let fast = cfg.rounds.first(RoundKind::Fast).expect("even rounds are fast");
    let trace = Trace::new(cfg.seed, cfg.config_hash(), TraceLevel::Full);
    let cluster = Cluster::new(cfg.quorums.clone(), cfg.rounds, Timeouts::default(), fast, cfg.fast_start, cfg.learners, trace);
    let mut s = Script { cluster, pool: Vec::new(), now: SimTime::ZERO };
    let learner = [Addr::Learner(0)];
    let p0 = [Addr::Proposer(P0)];
    let p1 = [Addr::Proposer(P1)];
    match scenario {
        Scenario::BrokenFastIntersection => {
            // Round 2 is open for ANY. X reaches a0..a2, Y reaches a3, a4.
            s.submit(P0, X);
            s.submit(P1, Y);
            s.deliver("Propose", &p0, &acceptors(&[0, 1, 2]));
            s.deliver("Propose", &p1, &acceptors(&[3, 4]));
            s.deliver("P2b", &acceptors(&[0, 1, 2]), &learner);
            // Round 3 (classic, owned by p1) hears only from a2, a3, a4: both
            // values look possible and p1 goes with Y.
            s.start(P1, Round(3));
            s.deliver("P1a", &p1, &acceptors(&[2, 3, 4]));
            s.deliver("P1b", &acceptors(&[2, 3, 4]), &p1);
            s.deliver("P2a", &p1, &acceptors(&[2, 3, 4]));
            s.deliver("P2b", &acceptors(&[2, 3, 4]), &learner);
        }
        Scenario::BrokenClassicIntersection => {
            // Round 1 (classic, p0) decides X on {a0, a1}.
            s.submit(P0, X);
            s.start(P0, Round(1));
            s.deliver("P1a", &p0, &acceptors(&[0, 1]));
            s.deliver("P1b", &acceptors(&[0, 1]), &p0);
            s.deliver("P2a", &p0, &acceptors(&[0, 1]));
            s.deliver("P2b", &acceptors(&[0, 1]), &learner);
            // Round 3 (classic, p1) never meets {a0, a1} and decides Y.
            s.submit(P1, Y);
            s.start(P1, Round(3));
            s.deliver("P1a", &p1, &acceptors(&[2, 3]));
            s.deliver("P1b", &acceptors(&[2, 3]), &p1);
            s.deliver("P2a", &p1, &acceptors(&[2, 3]));
            s.deliver("P2b", &acceptors(&[2, 3]), &learner);
        }
    }
    Ok(s.cluster.trace)
}
