//! Learner state machine for one instance.

use alloc::collections::{BTreeMap, BTreeSet};

use crate::fault::Fault;
use crate::message::Value;
use crate::nodeset::{NodeId, NodeSet};
use crate::quorum::{Family, QuorumSystem};
use crate::round::{Round, RoundConfig, RoundKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Decision {
    pub round: Round,
    pub value: Value,
}

/// What a single phase-2b did to the learner.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LearnerStep {
    /// A round newly reached a phase-2 quorum.
    pub decision: Option<Decision>,
    /// A fast round in which no fast quorum can still become unanimous.
    pub conflict: Option<Round>,
    pub fault: Option<Fault>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Learner {
    votes: BTreeMap<Round, BTreeMap<NodeId, Value>>,
    decided_rounds: BTreeMap<Round, Value>,
    first: Option<Decision>,
    conflicts: BTreeSet<Round>,
}

impl Learner {
    pub fn new() -> Self {
        Self::default()
    }

    /// First decision learned, if any.
    pub fn decided(&self) -> Option<Decision> {
        self.first
    }

    pub fn decided_rounds(&self) -> &BTreeMap<Round, Value> {
        &self.decided_rounds
    }

    fn voters(&self, round: Round, value: Value) -> NodeSet {
        self.votes
            .get(&round)
            .map(|m| m.iter().filter(|(_, &v)| v == value).map(|(&a, _)| a).collect())
            .unwrap_or_default()
    }

    /// True when every fast quorum already contains two acceptors that voted
    /// differently in `round`.
    pub fn unanimity_impossible(&self, round: Round, qs: &QuorumSystem) -> bool {
        let Some(votes) = self.votes.get(&round) else {
            return false;
        };
        let voted: NodeSet = votes.keys().copied().collect();
        let unvoted = qs.nodes().difference(voted);
        let values: BTreeSet<Value> = votes.values().copied().collect();
        !values
            .iter()
            .any(|&v| qs.is_quorum(Family::Phase2Fast, self.voters(round, v).union(unvoted)))
            && !qs.is_quorum(Family::Phase2Fast, unvoted)
    }

    pub fn on_p2b(&mut self, from: NodeId, round: Round, value: Value, qs: &QuorumSystem, rc: &RoundConfig) -> LearnerStep {
        let mut step = LearnerStep::default();
        let round_votes = self.votes.entry(round).or_default();
        match round_votes.get(&from) {
            Some(&prev) if prev == value => return step,
            Some(&prev) => {
                step.fault = Some(Fault::DoubleVote { acceptor: from, round, first: prev, second: value });
                return step;
            }
            None => {
                round_votes.insert(from, value);
            }
        }

        let kind = rc.kind(round);
        let family = match kind {
            RoundKind::Classic => Family::Phase2Classic,
            RoundKind::Fast => Family::Phase2Fast,
        };
        let voters = self.voters(round, value);
        if qs.is_quorum(family, voters) {
            match self.decided_rounds.get(&round) {
                Some(_) if self.decided_rounds[&round] == value => {}
                Some(&other) => {
                    step.fault = Some(Fault::Disagreement {
                        first_round: round,
                        first_value: other,
                        second_round: round,
                        second_value: value,
                    });
                }
                None => {
                    self.decided_rounds.insert(round, value);
                    let decision = Decision { round, value };
                    match self.first {
                        Some(first) if first.value != value => {
                            step.fault = Some(Fault::Disagreement {
                                first_round: first.round,
                                first_value: first.value,
                                second_round: round,
                                second_value: value,
                            });
                        }
                        Some(_) => {}
                        None => self.first = Some(decision),
                    }
                    step.decision = Some(decision);
                }
            }
        }

        if kind == RoundKind::Fast
            && !self.decided_rounds.contains_key(&round)
            && !self.conflicts.contains(&round)
            && self.unanimity_impossible(round, qs)
        {
            self.conflicts.insert(round);
            step.conflict = Some(round);
        }
        step
    }
}
