use alloc::vec::Vec;

use crate::message::Value;
use crate::nodeset::NodeId;
use crate::pick::PickError;
use crate::round::Round;

/// A protocol violation observed by a state machine. These are surfaced
/// to the caller as events, never swallowed.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum Fault {
    #[error("phase-2a ANY sent for classic round {round}")]
    AnyInClassicRound { round: Round },
    #[error("acceptor {acceptor} voted {first} and {second} in round {round}")]
    DoubleVote { acceptor: NodeId, round: Round, first: Value, second: Value },
    #[error("agreement violated: {first_value} decided in round {first_round}, {second_value} in round {second_round}")]
    Disagreement { first_round: Round, first_value: Value, second_round: Round, second_value: Value },
    #[error("phase-1 in round {round} left {} candidate values", candidates.len())]
    AmbiguousPick { round: Round, candidates: Vec<Value> },
    #[error("pick precondition violated: {0}")]
    Pick(PickError),
}
