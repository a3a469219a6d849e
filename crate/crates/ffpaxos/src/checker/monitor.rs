//! Safety monitors evaluated over a finished trace.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use ffpaxos_core::{AcceptorState, Fault, Instance, NodeId, Round, Value};
use serde::Serialize;

use crate::simnet::Trace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Invariant {
    Agreement,
    PerRoundAgreement,
    Validity,
    AcceptorMonotonicity,
    O4Uniqueness,
}

impl Invariant {
    pub const ALL: [Invariant; 5] = [
        Invariant::Agreement,
        Invariant::PerRoundAgreement,
        Invariant::Validity,
        Invariant::AcceptorMonotonicity,
        Invariant::O4Uniqueness,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Invariant::Agreement => "agreement",
            Invariant::PerRoundAgreement => "per-round-agreement",
            Invariant::Validity => "validity",
            Invariant::AcceptorMonotonicity => "acceptor-monotonicity",
            Invariant::O4Uniqueness => "o4-uniqueness",
        }
    }
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MonitorVerdict {
    pub invariant: Invariant,
    pub passed: bool,
    /// Trace records that together show the violation; empty on pass.
    pub counterexample: Vec<String>,
}

impl fmt::Display for MonitorVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<22} {}", self.invariant.id(), if self.passed { "pass" } else { "FAIL" })?;
        for line in &self.counterexample {
            write!(f, "\n    {line}")?;
        }
        Ok(())
    }
}

fn verdict(invariant: Invariant, counterexample: Option<Vec<String>>) -> MonitorVerdict {
    MonitorVerdict { invariant, passed: counterexample.is_none(), counterexample: counterexample.unwrap_or_default() }
}

pub fn all_pass(verdicts: &[MonitorVerdict]) -> bool {
    verdicts.iter().all(|v| v.passed)
}

/// Evaluates every invariant over the whole trace.
pub fn monitor(trace: &Trace) -> Vec<MonitorVerdict> {
    vec![
        verdict(Invariant::Agreement, agreement(trace)),
        verdict(Invariant::PerRoundAgreement, per_round(trace)),
        verdict(Invariant::Validity, validity(trace)),
        verdict(Invariant::AcceptorMonotonicity, monotonicity(trace)),
        verdict(Invariant::O4Uniqueness, o4(trace)),
    ]
}

fn agreement(trace: &Trace) -> Option<Vec<String>> {
    let mut first: BTreeMap<Instance, usize> = BTreeMap::new();
    for (i, d) in trace.decisions.iter().enumerate() {
        let j = *first.entry(d.instance).or_insert(i);
        let e = &trace.decisions[j];
        if e.value != d.value {
            return Some(vec![
                format!("{} {} decided {} in {}", e.time, e.learner, e.value, e.round),
                format!("{} {} decided {} in {}", d.time, d.learner, d.value, d.round),
            ]);
        }
    }
    None
}

fn per_round(trace: &Trace) -> Option<Vec<String>> {
    let mut first: BTreeMap<(Instance, Round), usize> = BTreeMap::new();
    for (i, d) in trace.decisions.iter().enumerate() {
        let j = *first.entry((d.instance, d.round)).or_insert(i);
        let e = &trace.decisions[j];
        if e.value != d.value {
            return Some(vec![
                format!("{} {} decided {} in {}", e.time, e.learner, e.value, e.round),
                format!("{} {} decided {} in {}", d.time, d.learner, d.value, d.round),
            ]);
        }
    }
    // a learner that saw two quorums in one round reports it as a fault
    trace.faults.iter().find_map(|f| match f.fault {
        Fault::Disagreement { first_round, second_round, .. } if first_round == second_round => {
            Some(vec![format!("{} {} {}: {}", f.time, f.node, f.instance, f.fault)])
        }
        _ => None,
    })
}

fn validity(trace: &Trace) -> Option<Vec<String>> {
    let proposed: BTreeSet<(Instance, Value)> = trace.submissions.iter().map(|s| (s.instance, s.value)).collect();
    trace.decisions.iter().find(|d| !proposed.contains(&(d.instance, d.value))).map(|d| {
        vec![format!("{} {} decided {} in {} for {}, never submitted", d.time, d.learner, d.value, d.round, d.instance)]
    })
}

fn monotonicity(trace: &Trace) -> Option<Vec<String>> {
    let mut last: BTreeMap<(NodeId, Instance), AcceptorState> = BTreeMap::new();
    for d in &trace.acceptor_deltas {
        let describe = || format!("{} {} {}: {:?} -> {:?}", d.time, d.acceptor, d.instance, d.before, d.after);
        if d.after.rnd < d.before.rnd || d.after.vrnd < d.before.vrnd || d.after.vrnd > d.after.rnd {
            return Some(vec![describe()]);
        }
        if let Some(prev) = last.insert((d.acceptor, d.instance), d.after) {
            if prev != d.before {
                return Some(vec![format!("state jumped from {prev:?}"), describe()]);
            }
        }
    }
    None
}

fn o4(trace: &Trace) -> Option<Vec<String>> {
    trace.picks.iter().find(|p| p.outcome.is_none()).map(|p| {
        let mut lines = vec![format!("{} {} {} pick in {} over {} left several values", p.time, p.proposer, p.instance, p.round, p.quorum)];
        lines.extend(
            trace
                .faults
                .iter()
                .filter(|f| f.instance == p.instance && matches!(f.fault, Fault::AmbiguousPick { round, .. } if round == p.round))
                .map(|f| format!("{} {} {}", f.time, f.node, f.fault)),
        );
        lines
    })
}
