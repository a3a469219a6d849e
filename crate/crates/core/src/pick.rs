//! The phase-1 value-picking rule.
//!
//! After collecting promises from a phase-1 quorum `Q` for round `i`, the
//! coordinator looks at the highest round `k` any member voted in. A classic
//! `k` forces the single value voted there. A fast `k` may report several
//! values; a value `v` is still possible only if some fast quorum `R` exists
//! in which every member of `Q ∩ R` voted `v` in `k`. Because fast families
//! are superset-closed, such an `R` exists exactly when
//! `voters(v) ∪ (nodes \ Q)` contains a fast quorum.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::message::Value;
use crate::nodeset::{NodeId, NodeSet};
use crate::quorum::{Family, QuorumSystem};
use crate::round::{Round, RoundConfig, RoundKind};

/// A phase-1b reply as seen by the coordinator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Promise {
    pub from: NodeId,
    pub round: Round,
    pub vrnd: Round,
    pub vval: Option<Value>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PickOutcome {
    Forced(Value),
    Free,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PickError {
    #[error("{0} is not a phase-1 quorum")]
    NotAQuorum(NodeSet),
    #[error("no promise from quorum member {0}")]
    MissingPromise(NodeId),
    #[error("promise from {0} which is not in the quorum")]
    Outsider(NodeId),
    #[error("more than one promise from {0}")]
    Duplicate(NodeId),
    #[error("promise from {from} is for round {got}, expected {expected}")]
    WrongRound { from: NodeId, got: Round, expected: Round },
    #[error("promise from {from} reports a vote in round {vrnd} not below {round}")]
    VoteNotBelowRound { from: NodeId, vrnd: Round, round: Round },
    #[error("promise from {0} has inconsistent vote fields")]
    MalformedVote(NodeId),
    #[error("classic round {round} reported two values")]
    ClassicSplit { round: Round },
    #[error("{} values remain possible after phase-1", .0.len())]
    Ambiguous(Vec<Value>),
}

fn check_promises(q: NodeSet, round: Round, promises: &[Promise]) -> Result<(), PickError> {
    let mut seen = NodeSet::EMPTY;
    for p in promises {
        if !q.contains(p.from) {
            return Err(PickError::Outsider(p.from));
        }
        if seen.contains(p.from) {
            return Err(PickError::Duplicate(p.from));
        }
        seen.insert(p.from);
        if p.round != round {
            return Err(PickError::WrongRound { from: p.from, got: p.round, expected: round });
        }
        if p.vrnd >= round {
            return Err(PickError::VoteNotBelowRound { from: p.from, vrnd: p.vrnd, round });
        }
        if p.vrnd.is_none() != p.vval.is_none() {
            return Err(PickError::MalformedVote(p.from));
        }
    }
    if let Some(missing) = q.difference(seen).iter().next() {
        return Err(PickError::MissingPromise(missing));
    }
    Ok(())
}

/// Highest voted round among the promises and the voters of each value in it.
fn highest_votes(promises: &[Promise]) -> (Round, BTreeMap<Value, NodeSet>) {
    let k = promises.iter().map(|p| p.vrnd).max().unwrap_or(Round::NONE);
    let mut voters: BTreeMap<Value, NodeSet> = BTreeMap::new();
    if !k.is_none() {
        for p in promises.iter().filter(|p| p.vrnd == k) {
            if let Some(v) = p.vval {
                voters.entry(v).or_default().insert(p.from);
            }
        }
    }
    (k, voters)
}

/// Values reported at the highest fast round `k` that some fast quorum may
/// have decided. Callers pass promises from quorum `q` only.
pub fn o4_values(q: NodeSet, promises: &[Promise], qs: &QuorumSystem) -> Vec<Value> {
    let (k, voters) = highest_votes(promises);
    if k.is_none() {
        return Vec::new();
    }
    let outside = qs.nodes().difference(q);
    voters
        .into_iter()
        .filter(|(_, who)| qs.is_quorum(Family::Phase2Fast, who.union(outside)))
        .map(|(v, _)| v)
        .collect()
}

/// Decides what a coordinator may propose in round `round` after phase-1
/// over quorum `q`.
///
/// Returns [`PickError::Ambiguous`] when more than one value survives, which
/// only happens for quorum systems that break the fast-pair requirement.
pub fn pickable_values(
    q: NodeSet,
    round: Round,
    promises: &[Promise],
    qs: &QuorumSystem,
    rc: &RoundConfig,
) -> Result<PickOutcome, PickError> {
    if !qs.is_quorum(Family::Phase1, q) {
        return Err(PickError::NotAQuorum(q));
    }
    check_promises(q, round, promises)?;
    let (k, voters) = highest_votes(promises);
    if k.is_none() {
        return Ok(PickOutcome::Free);
    }
    match rc.kind(k) {
        RoundKind::Classic => {
            let mut values = voters.keys();
            match (values.next(), values.next()) {
                (Some(&v), None) => Ok(PickOutcome::Forced(v)),
                _ => Err(PickError::ClassicSplit { round: k }),
            }
        }
        RoundKind::Fast => {
            let candidates = o4_values(q, promises, qs);
            match candidates.as_slice() {
                [] => Ok(PickOutcome::Free),
                [v] => Ok(PickOutcome::Forced(*v)),
                _ => Err(PickError::Ambiguous(candidates)),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nodeset::subsets_of_size;
    use alloc::vec;

    const X: Value = Value(1);
    const Y: Value = Value(2);

    fn promise(from: u8, vrnd: u64, vval: Option<Value>) -> Promise {
        Promise { from: NodeId(from), round: Round(5), vrnd: Round(vrnd), vval }
    }

    fn quorum(ids: &[u8]) -> NodeSet {
        ids.iter().collect()
    }

    /// Direct enumeration of every size-`q2f` fast quorum `R`.
    fn o4_by_enumeration(n: usize, q2f: usize, q: NodeSet, promises: &[Promise]) -> Vec<Value> {
        let (k, voters) = highest_votes(promises);
        if k.is_none() {
            return vec![];
        }
        voters
            .into_iter()
            .filter(|(_, who)| subsets_of_size(n, q2f).any(|r| q.intersection(r).is_subset(*who)))
            .map(|(v, _)| v)
            .collect()
    }

    #[test]
    fn forced_when_three_of_four_agree() {
        // n=5, q1=4, q2f=4, Q={a,b,c,d}, k=2 fast; a,b,c voted X, d voted Y.
        let qs = QuorumSystem::cardinality(5, 4, 2, 4).unwrap();
        let rc = RoundConfig::new(1);
        let q = quorum(&[0, 1, 2, 3]);
        let ps = [promise(0, 2, Some(X)), promise(1, 2, Some(X)), promise(2, 2, Some(X)), promise(3, 2, Some(Y))];
        assert_eq!(o4_by_enumeration(5, 4, q, &ps), vec![X]);
        assert_eq!(pickable_values(q, Round(5), &ps, &qs, &rc), Ok(PickOutcome::Forced(X)));
    }

    #[test]
    fn free_when_no_fast_quorum_could_be_unanimous() {
        let qs = QuorumSystem::cardinality(5, 4, 2, 4).unwrap();
        let rc = RoundConfig::new(1);
        let q = quorum(&[0, 1, 2, 3]);
        let ps = [promise(0, 2, Some(X)), promise(1, 2, Some(Y)), promise(2, 0, None), promise(3, 0, None)];
        assert!(o4_by_enumeration(5, 4, q, &ps).is_empty());
        assert_eq!(pickable_values(q, Round(5), &ps, &qs, &rc), Ok(PickOutcome::Free));
    }

    #[test]
    fn free_without_votes() {
        let qs = QuorumSystem::cardinality(3, 2, 2, 3).unwrap();
        let rc = RoundConfig::new(1);
        let ps = [promise(0, 0, None), promise(2, 0, None)];
        assert_eq!(pickable_values(quorum(&[0, 2]), Round(5), &ps, &qs, &rc), Ok(PickOutcome::Free));
    }

    #[test]
    fn classic_round_forces_its_value() {
        let qs = QuorumSystem::cardinality(3, 2, 2, 3).unwrap();
        let rc = RoundConfig::new(1);
        let ps = [promise(0, 3, Some(Y)), promise(1, 2, Some(X))];
        assert_eq!(pickable_values(quorum(&[0, 1]), Round(5), &ps, &qs, &rc), Ok(PickOutcome::Forced(Y)));
    }

    #[test]
    fn precondition_errors() {
        let qs = QuorumSystem::cardinality(3, 2, 2, 3).unwrap();
        let rc = RoundConfig::new(1);
        assert_eq!(
            pickable_values(quorum(&[0]), Round(5), &[promise(0, 0, None)], &qs, &rc),
            Err(PickError::NotAQuorum(quorum(&[0])))
        );
        assert_eq!(
            pickable_values(quorum(&[0, 1]), Round(5), &[promise(0, 0, None)], &qs, &rc),
            Err(PickError::MissingPromise(NodeId(1)))
        );
        assert_eq!(
            pickable_values(quorum(&[0, 1]), Round(5), &[promise(0, 0, None), promise(1, 5, Some(X))], &qs, &rc),
            Err(PickError::VoteNotBelowRound { from: NodeId(1), vrnd: Round(5), round: Round(5) })
        );
        assert_eq!(
            pickable_values(quorum(&[0, 1]), Round(5), &[promise(0, 0, None), promise(0, 0, None)], &qs, &rc),
            Err(PickError::Duplicate(NodeId(0)))
        );
    }

    #[test]
    fn invalid_fast_pair_requirement_can_be_ambiguous() {
        // n=3, majorities everywhere: Q={0,2} with 0:X and 2:Y in fast round 2.
        let maj = vec![quorum(&[0, 1]), quorum(&[1, 2]), quorum(&[0, 2])];
        let qs = QuorumSystem::explicit(3, maj.clone(), maj.clone(), maj).unwrap();
        let rc = RoundConfig::new(1);
        let ps = [promise(0, 2, Some(X)), promise(2, 2, Some(Y))];
        assert_eq!(pickable_values(quorum(&[0, 2]), Round(5), &ps, &qs, &rc), Err(PickError::Ambiguous(vec![X, Y])));
    }
}
