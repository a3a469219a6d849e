//! Coordinator (proposer) state machine for one instance.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::message::{Addr, Dest, Instance, Message, Payload, Proposal, Value};
use crate::nodeset::{NodeId, NodeSet};
use crate::pick::{pickable_values, PickError, PickOutcome, Promise};
use crate::quorum::{Family, QuorumSystem};
use crate::round::{ProposerId, Round, RoundConfig, RoundKind};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CoordinatorError {
    #[error("round NONE cannot be started")]
    NoneRound,
    #[error("round {round} is owned by {owner}, not {caller}")]
    NotOwner { round: Round, owner: ProposerId, caller: ProposerId },
    #[error("round {round} is not above current round {current}")]
    NotNewer { round: Round, current: Round },
    #[error("no round owned by {0} follows round {1}")]
    NoRoundAvailable(ProposerId, Round),
    #[error("nothing to resolve")]
    NotAmbiguous,
    #[error("{0} is not a candidate value")]
    NotCandidate(Value),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    Idle,
    Collecting(BTreeMap<NodeId, Promise>),
    /// Classic round with a free pick and no client value yet.
    AwaitingValue,
    /// Several values survived phase-1; the caller must choose one.
    Ambiguous(Vec<Value>),
    Proposed(Proposal),
}

/// Result of delivering a phase-1b reply.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Phase1Step {
    /// Stale, duplicate or late reply.
    Ignored,
    /// Recorded; no phase-1 quorum yet.
    Waiting,
    /// Phase-1 complete. `p2a` is absent when a classic round is free and the
    /// coordinator holds no client value.
    Picked { quorum: NodeSet, outcome: PickOutcome, p2a: Option<Message> },
    /// Phase-1 complete but several values remain possible.
    Ambiguous { quorum: NodeSet, candidates: Vec<Value>, promises: Vec<Promise> },
    /// The collected replies broke a pick precondition.
    Failed(PickError),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Coordinator {
    id: ProposerId,
    instance: Instance,
    round: Round,
    phase: Phase,
    pending: Option<Value>,
}

impl Coordinator {
    pub fn new(id: ProposerId, instance: Instance) -> Self {
        Coordinator { id, instance, round: Round::NONE, phase: Phase::Idle, pending: None }
    }

    /// A coordinator whose fast round has already completed phase-1 with no
    /// prior votes and sent `Any`.
    pub fn opened(id: ProposerId, instance: Instance, round: Round) -> Self {
        Coordinator { id, instance, round, phase: Phase::Proposed(Proposal::Any), pending: None }
    }

    pub fn id(&self) -> ProposerId {
        self.id
    }

    pub fn round(&self) -> Round {
        self.round
    }

    pub fn phase(&self) -> &Phase {
        &self.phase
    }

    pub fn pending(&self) -> Option<Value> {
        self.pending
    }

    fn p2a(&self, proposal: Proposal) -> Message {
        Message {
            instance: self.instance,
            from: Addr::Proposer(self.id),
            to: Dest::Acceptors,
            payload: Payload::P2a { round: self.round, proposal },
        }
    }

    /// Begins phase-1 of `round`, which this coordinator must own.
    pub fn start_round(&mut self, round: Round, rc: &RoundConfig) -> Result<Message, CoordinatorError> {
        if round.is_none() {
            return Err(CoordinatorError::NoneRound);
        }
        let owner = rc.owner(round);
        if owner != self.id {
            return Err(CoordinatorError::NotOwner { round, owner, caller: self.id });
        }
        if round <= self.round {
            return Err(CoordinatorError::NotNewer { round, current: self.round });
        }
        self.round = round;
        self.phase = Phase::Collecting(BTreeMap::new());
        Ok(Message {
            instance: self.instance,
            from: Addr::Proposer(self.id),
            to: Dest::Acceptors,
            payload: Payload::P1a { round },
        })
    }

    /// Starts the next classic round this coordinator owns above both the
    /// failed round and its own current round.
    pub fn recover_conflict(&mut self, failed: Round, rc: &RoundConfig) -> Result<Message, CoordinatorError> {
        let floor = failed.max(self.round);
        let next = rc
            .next_owned(floor, self.id, Some(RoundKind::Classic))
            .ok_or(CoordinatorError::NoRoundAvailable(self.id, floor))?;
        self.start_round(next, rc)
    }

    pub fn on_p1b(&mut self, promise: Promise, qs: &QuorumSystem, rc: &RoundConfig) -> Phase1Step {
        if promise.round != self.round {
            return Phase1Step::Ignored;
        }
        let Phase::Collecting(replies) = &mut self.phase else {
            return Phase1Step::Ignored;
        };
        if replies.contains_key(&promise.from) {
            return Phase1Step::Ignored;
        }
        replies.insert(promise.from, promise);
        let quorum: NodeSet = replies.keys().copied().collect();
        if !qs.is_quorum(Family::Phase1, quorum) {
            return Phase1Step::Waiting;
        }
        let promises: Vec<Promise> = replies.values().copied().collect();
        match pickable_values(quorum, self.round, &promises, qs, rc) {
            Ok(outcome) => {
                let proposal = match (outcome, rc.kind(self.round)) {
                    (PickOutcome::Forced(v), _) => Some(Proposal::Value(v)),
                    (PickOutcome::Free, RoundKind::Fast) => Some(Proposal::Any),
                    (PickOutcome::Free, RoundKind::Classic) => self.pending.map(Proposal::Value),
                };
                let p2a = match proposal {
                    Some(p) => {
                        self.phase = Phase::Proposed(p);
                        Some(self.p2a(p))
                    }
                    None => {
                        self.phase = Phase::AwaitingValue;
                        None
                    }
                };
                Phase1Step::Picked { quorum, outcome, p2a }
            }
            Err(PickError::Ambiguous(candidates)) => {
                self.phase = Phase::Ambiguous(candidates.clone());
                Phase1Step::Ambiguous { quorum, candidates, promises }
            }
            Err(e) => {
                self.phase = Phase::Idle;
                Phase1Step::Failed(e)
            }
        }
    }

    /// Records a client value; completes a classic round that was waiting
    /// for one.
    pub fn on_client_value(&mut self, value: Value) -> Option<Message> {
        if self.pending.is_none() {
            self.pending = Some(value);
        }
        if self.phase == Phase::AwaitingValue {
            let p = Proposal::Value(self.pending.unwrap_or(value));
            self.phase = Phase::Proposed(p);
            return Some(self.p2a(p));
        }
        None
    }

    /// Chooses one of the candidates left by an ambiguous pick.
    pub fn resolve(&mut self, value: Value) -> Result<Message, CoordinatorError> {
        let Phase::Ambiguous(candidates) = &self.phase else {
            return Err(CoordinatorError::NotAmbiguous);
        };
        if !candidates.contains(&value) {
            return Err(CoordinatorError::NotCandidate(value));
        }
        let p = Proposal::Value(value);
        self.phase = Phase::Proposed(p);
        Ok(self.p2a(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const P0: ProposerId = ProposerId(0);
    const I: Instance = Instance(0);

    fn promise(from: u8, round: u64, vrnd: u64, vval: Option<Value>) -> Promise {
        Promise { from: NodeId(from), round: Round(round), vrnd: Round(vrnd), vval }
    }

    #[test]
    fn start_round_checks_ownership() {
        let rc = RoundConfig::new(2);
        // rounds 2,3 belong to p1 and 4,5 to p0 under the paired rule
        let mut c = Coordinator::new(P0, I);
        let msg = c.start_round(Round(4), &rc).unwrap();
        assert_eq!(msg.payload, Payload::P1a { round: Round(4) });
        assert_eq!(msg.to, Dest::Acceptors);
        let mut c1 = Coordinator::new(ProposerId(1), I);
        assert_eq!(
            c1.start_round(Round(4), &rc),
            Err(CoordinatorError::NotOwner { round: Round(4), owner: P0, caller: ProposerId(1) })
        );
        assert_eq!(c.start_round(Round::NONE, &rc), Err(CoordinatorError::NoneRound));
    }

    #[test]
    fn classic_free_uses_client_value() {
        let qs = QuorumSystem::cardinality(3, 2, 2, 3).unwrap();
        let rc = RoundConfig::new(1);
        let mut c = Coordinator::new(P0, I);
        c.on_client_value(Value(9));
        c.start_round(Round(3), &rc).unwrap();
        assert_eq!(c.on_p1b(promise(0, 3, 0, None), &qs, &rc), Phase1Step::Waiting);
        let Phase1Step::Picked { outcome, p2a, .. } = c.on_p1b(promise(1, 3, 0, None), &qs, &rc) else {
            panic!("expected pick");
        };
        assert_eq!(outcome, PickOutcome::Free);
        assert_eq!(p2a.unwrap().payload, Payload::P2a { round: Round(3), proposal: Proposal::Value(Value(9)) });
        // late replies are discarded
        assert_eq!(c.on_p1b(promise(2, 3, 0, None), &qs, &rc), Phase1Step::Ignored);
    }

    #[test]
    fn classic_free_without_value_waits() {
        let qs = QuorumSystem::cardinality(3, 2, 2, 3).unwrap();
        let rc = RoundConfig::new(1);
        let mut c = Coordinator::new(P0, I);
        c.start_round(Round(3), &rc).unwrap();
        c.on_p1b(promise(0, 3, 0, None), &qs, &rc);
        let step = c.on_p1b(promise(1, 3, 0, None), &qs, &rc);
        assert!(matches!(step, Phase1Step::Picked { p2a: None, .. }));
        assert_eq!(c.phase(), &Phase::AwaitingValue);
        let msg = c.on_client_value(Value(4)).unwrap();
        assert_eq!(msg.payload, Payload::P2a { round: Round(3), proposal: Proposal::Value(Value(4)) });
    }

    #[test]
    fn fast_free_sends_any_and_forced_propagates() {
        let qs = QuorumSystem::cardinality(3, 2, 2, 3).unwrap();
        let rc = RoundConfig::new(1);
        let mut c = Coordinator::new(P0, I);
        c.start_round(Round(2), &rc).unwrap();
        c.on_p1b(promise(0, 2, 0, None), &qs, &rc);
        let Phase1Step::Picked { p2a, .. } = c.on_p1b(promise(1, 2, 0, None), &qs, &rc) else { panic!() };
        assert_eq!(p2a.unwrap().payload, Payload::P2a { round: Round(2), proposal: Proposal::Any });

        c.start_round(Round(4), &rc).unwrap();
        c.on_p1b(promise(0, 4, 3, Some(Value(7))), &qs, &rc);
        let Phase1Step::Picked { outcome, p2a, .. } = c.on_p1b(promise(2, 4, 0, None), &qs, &rc) else { panic!() };
        assert_eq!(outcome, PickOutcome::Forced(Value(7)));
        assert_eq!(p2a.unwrap().payload, Payload::P2a { round: Round(4), proposal: Proposal::Value(Value(7)) });
    }

    #[test]
    fn recovery_rounds_strictly_increase() {
        let rc = RoundConfig::new(2);
        let mut c = Coordinator::new(P0, I);
        let mut last = Round(2);
        for _ in 0..5 {
            let msg = c.recover_conflict(last, &rc).unwrap();
            let Payload::P1a { round } = msg.payload else { panic!() };
            assert!(round > last);
            assert_eq!(rc.kind(round), RoundKind::Classic);
            assert_eq!(rc.owner(round), P0);
            last = round;
        }
    }

    #[test]
    fn ambiguous_pick_needs_resolution() {
        use alloc::vec;
        let s = |ids: &[u8]| -> NodeSet { ids.iter().collect() };
        let maj = vec![s(&[0, 1]), s(&[1, 2]), s(&[0, 2])];
        let qs = QuorumSystem::explicit(3, maj.clone(), maj.clone(), maj).unwrap();
        let rc = RoundConfig::new(1);
        let mut c = Coordinator::new(P0, I);
        c.start_round(Round(3), &rc).unwrap();
        c.on_p1b(promise(0, 3, 2, Some(Value(1))), &qs, &rc);
        let step = c.on_p1b(promise(2, 3, 2, Some(Value(2))), &qs, &rc);
        assert!(matches!(step, Phase1Step::Ambiguous { .. }));
        assert_eq!(c.resolve(Value(3)), Err(CoordinatorError::NotCandidate(Value(3))));
        assert!(c.resolve(Value(2)).is_ok());
    }
}
