//! Execution traces and their line-oriented text form.
//!
//! The text form starts with `#`-prefixed header lines (format tag, seed,
//! config hash, column names) followed by one tab-separated record per event:
//! `time_ms  node  kind  payload`. Times are printed with three decimals.

use std::fmt::{self, Write as _};

use ffpaxos_core::{AcceptorState, Addr, Fault, Instance, NodeId, NodeSet, PickOutcome, ProposerId, Round, Value};

use super::SimTime;

pub const TRACE_FORMAT: &str = "ffpaxos-trace v1";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TraceLevel {
    /// Keep every event record.
    #[default]
    Full,
    /// Keep only the structured records monitors and benchmarks need.
    Summary,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEntry {
    pub time: SimTime,
    pub node: String,
    pub kind: &'static str,
    pub payload: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecisionRecord {
    pub time: SimTime,
    pub learner: Addr,
    pub instance: Instance,
    pub round: Round,
    pub value: Value,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FaultRecord {
    pub time: SimTime,
    pub node: Addr,
    pub instance: Instance,
    pub fault: Fault,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SubmissionRecord {
    pub time: SimTime,
    pub proposer: ProposerId,
    pub instance: Instance,
    pub value: Value,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AcceptorDelta {
    pub time: SimTime,
    pub acceptor: NodeId,
    pub instance: Instance,
    pub before: AcceptorState,
    pub after: AcceptorState,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RoundStart {
    pub time: SimTime,
    pub proposer: ProposerId,
    pub instance: Instance,
    pub round: Round,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PickRecord {
    pub time: SimTime,
    pub proposer: ProposerId,
    pub instance: Instance,
    pub round: Round,
    pub quorum: NodeSet,
    /// `None` when more than one value survived.
    pub outcome: Option<PickOutcome>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TraceStats {
    pub events: u64,
    pub sent: u64,
    pub dropped: u64,
    pub duplicated: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub seed: u64,
    pub config_hash: String,
    pub level: TraceLevel,
    pub entries: Vec<TraceEntry>,
    pub decisions: Vec<DecisionRecord>,
    pub faults: Vec<FaultRecord>,
    pub submissions: Vec<SubmissionRecord>,
    pub acceptor_deltas: Vec<AcceptorDelta>,
    pub round_starts: Vec<RoundStart>,
    pub picks: Vec<PickRecord>,
    pub stats: TraceStats,
}

impl Trace {
    pub(crate) fn new(seed: u64, config_hash: String, level: TraceLevel) -> Self {
        Trace { seed, config_hash, level, ..Default::default() }
    }

    pub(crate) fn full(&self) -> bool {
        self.level == TraceLevel::Full
    }

    pub(crate) fn record(&mut self, time: SimTime, node: impl fmt::Display, kind: &'static str, payload: impl FnOnce() -> String) {
        if self.full() {
            self.entries.push(TraceEntry { time, node: node.to_string(), kind, payload: payload() });
        }
    }

    /// Votes cast by acceptors, derived from state deltas.
    pub fn votes(&self) -> impl Iterator<Item = (SimTime, NodeId, Instance, Round, Value)> + '_ {
        self.acceptor_deltas
            .iter()
            .filter(|d| d.after.vrnd != d.before.vrnd)
            .map(|d| (d.time, d.acceptor, d.instance, d.after.vrnd, d.after.vval.expect("vote carries a value")))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# {TRACE_FORMAT}").unwrap();
        writeln!(out, "# seed\t{}", self.seed).unwrap();
        writeln!(out, "# config\t{}", self.config_hash).unwrap();
        writeln!(out, "# columns\ttime_ms\tnode\tkind\tpayload").unwrap();
        for e in &self.entries {
            writeln!(out, "{}\t{}\t{}\t{}", e.time, e.node, e.kind, e.payload).unwrap();
        }
        out
    }
}

pub(crate) fn fmt_state(st: &AcceptorState) -> String {
    let vval = st.vval.map_or_else(|| "-".to_string(), |v| v.to_string());
    format!("rnd={} vrnd={} vval={} any={}", st.rnd, st.vrnd, vval, st.open_any)
}
