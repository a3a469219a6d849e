//! Acceptor state and its transitions.
//!
//! Transitions take the state by value and return the successor together
//! with at most one outbound message. Stale messages leave the state
//! unchanged and produce no reply.

use crate::fault::Fault;
use crate::message::{Addr, Dest, Instance, Message, Payload, Proposal, Value};
use crate::nodeset::NodeId;
use crate::round::{Round, RoundConfig};

/// Everything an acceptor persists for one instance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AcceptorState {
    /// Highest round joined or promised.
    pub rnd: Round,
    /// Highest round voted in.
    pub vrnd: Round,
    /// Value voted for in `vrnd`.
    pub vval: Option<Value>,
    /// Fast round opened by an `Any` phase-2a and not yet voted in.
    pub open_any: Round,
}

pub type Step = (AcceptorState, Option<Message>);

impl AcceptorState {
    /// State after joining fast round `round` through a phase-2a `Any`
    /// without having voted before.
    pub fn opened(round: Round) -> Self {
        AcceptorState { rnd: round, vrnd: Round::NONE, vval: None, open_any: round }
    }

    /// Checks the structural invariants.
    pub fn is_well_formed(&self, rc: &RoundConfig) -> bool {
        self.vrnd <= self.rnd
            && self.vval.is_some() == !self.vrnd.is_none()
            && (self.open_any.is_none()
                || (self.open_any == self.rnd && rc.is_fast(self.open_any) && self.vrnd < self.open_any))
    }

    pub fn on_p1a(self, me: NodeId, instance: Instance, round: Round, rc: &RoundConfig) -> Step {
        if round <= self.rnd {
            return (self, None);
        }
        let next = AcceptorState { rnd: round, open_any: Round::NONE, ..self };
        let reply = Message {
            instance,
            from: Addr::Acceptor(me),
            to: Dest::To(Addr::Proposer(rc.owner(round))),
            payload: Payload::P1b { round, vrnd: self.vrnd, vval: self.vval },
        };
        (next, Some(reply))
    }

    pub fn on_p2a(
        self,
        me: NodeId,
        instance: Instance,
        round: Round,
        proposal: Proposal,
        rc: &RoundConfig,
    ) -> Result<Step, Fault> {
        if proposal == Proposal::Any && !rc.is_fast(round) {
            return Err(Fault::AnyInClassicRound { round });
        }
        if round < self.rnd || self.vrnd >= round {
            return Ok((self, None));
        }
        match proposal {
            Proposal::Value(value) => Ok(self.vote(me, instance, round, value)),
            Proposal::Any => Ok((AcceptorState { rnd: round, open_any: round, ..self }, None)),
        }
    }

    pub fn on_propose(self, me: NodeId, instance: Instance, value: Value) -> Step {
        if self.open_any.is_none() || self.open_any != self.rnd || self.vrnd >= self.rnd {
            return (self, None);
        }
        self.vote(me, instance, self.rnd, value)
    }

    fn vote(self, me: NodeId, instance: Instance, round: Round, value: Value) -> Step {
        let next = AcceptorState { rnd: round, vrnd: round, vval: Some(value), open_any: Round::NONE };
        let msg = Message {
            instance,
            from: Addr::Acceptor(me),
            to: Dest::Learners,
            payload: Payload::P2b { round, value },
        };
        (next, Some(msg))
    }

    /// Dispatches any message addressed to an acceptor. Messages that are
    /// not part of the acceptor's vocabulary are ignored.
    pub fn handle(self, me: NodeId, msg: &Message, rc: &RoundConfig) -> Result<Step, Fault> {
        match msg.payload {
            Payload::P1a { round } => Ok(self.on_p1a(me, msg.instance, round, rc)),
            Payload::P2a { round, proposal } => self.on_p2a(me, msg.instance, round, proposal, rc),
            Payload::Propose { value } => Ok(self.on_propose(me, msg.instance, value)),
            _ => Ok((self, None)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: NodeId = NodeId(0);
    const I: Instance = Instance(0);
    const X: Value = Value(1);
    const Y: Value = Value(2);

    fn rc() -> RoundConfig {
        RoundConfig::new(1)
    }

    #[test]
    fn p1a_fresh_acceptor_promises() {
        let (st, reply) = AcceptorState::default().on_p1a(A, I, Round(5), &rc());
        assert_eq!(st.rnd, Round(5));
        let reply = reply.unwrap();
        assert_eq!(reply.payload, Payload::P1b { round: Round(5), vrnd: Round::NONE, vval: None });
        assert_eq!(reply.to, Dest::To(Addr::Proposer(rc().owner(Round(5)))));
    }

    #[test]
    fn p1a_stale_is_dropped() {
        let st = AcceptorState { rnd: Round(5), ..Default::default() };
        assert_eq!(st.on_p1a(A, I, Round(3), &rc()), (st, None));
        assert_eq!(st.on_p1a(A, I, Round(5), &rc()), (st, None));
    }

    #[test]
    fn p1a_reports_vote_history() {
        let st = AcceptorState { rnd: Round(2), vrnd: Round(2), vval: Some(X), open_any: Round::NONE };
        let (next, reply) = st.on_p1a(A, I, Round(7), &rc());
        assert_eq!(next, AcceptorState { rnd: Round(7), ..st });
        assert_eq!(reply.unwrap().payload, Payload::P1b { round: Round(7), vrnd: Round(2), vval: Some(X) });
    }

    #[test]
    fn p2a_votes_once_per_round() {
        let st = AcceptorState { rnd: Round(5), ..Default::default() };
        let (voted, msg) = st.on_p2a(A, I, Round(5), Proposal::Value(X), &rc()).unwrap();
        assert_eq!((voted.vrnd, voted.vval), (Round(5), Some(X)));
        assert_eq!(msg.unwrap().payload, Payload::P2b { round: Round(5), value: X });
        assert_eq!(voted.on_p2a(A, I, Round(5), Proposal::Value(Y), &rc()).unwrap(), (voted, None));
    }

    #[test]
    fn p2a_any_opens_fast_round() {
        let st = AcceptorState { rnd: Round(4), ..Default::default() };
        let (next, msg) = st.on_p2a(A, I, Round(4), Proposal::Any, &rc()).unwrap();
        assert_eq!(next, AcceptorState::opened(Round(4)));
        assert!(msg.is_none());
        assert!(next.is_well_formed(&rc()));
    }

    #[test]
    fn p2a_any_in_classic_round_is_a_fault() {
        let st = AcceptorState::default();
        assert_eq!(
            st.on_p2a(A, I, Round(5), Proposal::Any, &rc()),
            Err(Fault::AnyInClassicRound { round: Round(5) })
        );
    }

    #[test]
    fn p2a_can_join_round_directly() {
        let (next, msg) = AcceptorState::default().on_p2a(A, I, Round(3), Proposal::Value(X), &rc()).unwrap();
        assert_eq!(next.rnd, Round(3));
        assert!(msg.is_some());
    }

    #[test]
    fn propose_first_wins() {
        let st = AcceptorState::opened(Round(4));
        let (voted, msg) = st.on_propose(A, I, X);
        assert_eq!((voted.vrnd, voted.vval, voted.open_any), (Round(4), Some(X), Round::NONE));
        assert_eq!(msg.unwrap().payload, Payload::P2b { round: Round(4), value: X });
        assert_eq!(voted.on_propose(A, I, Y), (voted, None));
    }

    #[test]
    fn propose_without_open_round_ignored() {
        let st = AcceptorState { rnd: Round(4), ..Default::default() };
        assert_eq!(st.on_propose(A, I, X), (st, None));
    }

    #[test]
    fn p1a_closes_open_fast_round() {
        let (st, _) = AcceptorState::opened(Round(4)).on_p1a(A, I, Round(5), &rc());
        assert!(st.open_any.is_none());
        assert_eq!(st.on_propose(A, I, X), (st, None));
    }
}
