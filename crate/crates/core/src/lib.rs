//! Fast Flexible Paxos: quorum systems, intersection validators and the
//! protocol state machines.
//!
//! Fast Paxos lets proposers send values straight to acceptors in *fast*
//! rounds, at the price of stronger quorum intersection. The requirements
//! can be weakened: phase-1 quorums must meet every classic phase-2 quorum
//! and every *pair* of fast phase-2 quorums, and nothing else has to
//! intersect. With 11 acceptors, for instance, phase-1 quorums of 9 allow
//! fast quorums of 7 and classic quorums of 3.
//!
//! This crate is `no_std` and only needs `alloc`. Everything here is a pure
//! function of its inputs:
//!
//! * [`quorum`] defines [`QuorumSystem`] and the validators for Paxos,
//!   Flexible Paxos, Fast Paxos and Fast Flexible Paxos, plus an
//!   enumeration oracle.
//! * [`acceptor`], [`coordinator`] and [`learner`] are per-instance state
//!   machines driven by [`Message`]s.
//! * [`pick`] implements the rule a coordinator uses after phase-1 to
//!   decide which value, if any, it is forced to propose.

#![no_std]

extern crate alloc;

pub mod acceptor;
pub mod coordinator;
pub mod fault;
pub mod learner;
pub mod message;
pub mod nodeset;
pub mod pick;
pub mod quorum;
pub mod round;

pub use acceptor::AcceptorState;
pub use coordinator::{Coordinator, CoordinatorError, Phase, Phase1Step};
pub use fault::Fault;
pub use learner::{Decision, Learner, LearnerStep};
pub use message::{Addr, Dest, Instance, Message, Payload, Proposal, Value};
pub use nodeset::{NodeId, NodeSet, MAX_NODES};
pub use pick::{o4_values, pickable_values, PickError, PickOutcome, Promise};
pub use quorum::{
    brute_force_check, brute_force_check_bounded, validate_fast_flexible, validate_fast_paxos, validate_flexible,
    validate_paxos, Family, LegacyQuorumSystem, QuorumError, QuorumSystem, Quorums, Requirement, Scheme,
    ValidationReport, Violation, Witness,
};
pub use round::{Classification, Ownership, ProposerId, Round, RoundConfig, RoundKind};
