//! Protocol wire vocabulary.

use core::fmt;

use crate::nodeset::NodeId;
use crate::round::{ProposerId, Round};

/// Consensus instance. Instances are independent single-decree runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Instance(pub u64);

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "i{}", self.0)
    }
}

/// An opaque client value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Value(pub u64);

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// Payload of a phase-2a message: a concrete value, or the `Any` marker
/// that opens a fast round to direct proposals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Proposal {
    Any,
    Value(Value),
}

impl fmt::Display for Proposal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Proposal::Any => f.write_str("ANY"),
            Proposal::Value(v) => write!(f, "{v}"),
        }
    }
}

/// A node address.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Addr {
    Acceptor(NodeId),
    Proposer(ProposerId),
    Learner(u16),
}

impl fmt::Display for Addr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Addr::Acceptor(a) => write!(f, "{a}"),
            Addr::Proposer(p) => write!(f, "{p}"),
            Addr::Learner(l) => write!(f, "l{l}"),
        }
    }
}

/// Message destination. Group destinations are expanded by the transport.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Dest {
    To(Addr),
    Acceptors,
    Learners,
    Proposers,
}

impl fmt::Display for Dest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dest::To(a) => write!(f, "{a}"),
            Dest::Acceptors => f.write_str("*acceptors"),
            Dest::Learners => f.write_str("*learners"),
            Dest::Proposers => f.write_str("*proposers"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Payload {
    P1a { round: Round },
    P1b { round: Round, vrnd: Round, vval: Option<Value> },
    P2a { round: Round, proposal: Proposal },
    Propose { value: Value },
    P2b { round: Round, value: Value },
    Decided { round: Round, value: Value },
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::P1a { .. } => "P1a",
            Payload::P1b { .. } => "P1b",
            Payload::P2a { .. } => "P2a",
            Payload::Propose { .. } => "Propose",
            Payload::P2b { .. } => "P2b",
            Payload::Decided { .. } => "Decided",
        }
    }

    pub fn round(&self) -> Option<Round> {
        match *self {
            Payload::P1a { round }
            | Payload::P1b { round, .. }
            | Payload::P2a { round, .. }
            | Payload::P2b { round, .. }
            | Payload::Decided { round, .. } => Some(round),
            Payload::Propose { .. } => None,
        }
    }
}

impl fmt::Display for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payload::P1a { round } => write!(f, "P1a({round})"),
            Payload::P1b { round, vrnd, vval } => match vval {
                Some(v) => write!(f, "P1b({round},{vrnd},{v})"),
                None => write!(f, "P1b({round},{vrnd},-)"),
            },
            Payload::P2a { round, proposal } => write!(f, "P2a({round},{proposal})"),
            Payload::Propose { value } => write!(f, "Propose({value})"),
            Payload::P2b { round, value } => write!(f, "P2b({round},{value})"),
            Payload::Decided { round, value } => write!(f, "Decided({round},{value})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Message {
    pub instance: Instance,
    pub from: Addr,
    pub to: Dest,
    pub payload: Payload,
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}->{} {}", self.instance, self.from, self.to, self.payload)
    }
}
