//! Rounds, their classic/fast classification and ownership.

use core::fmt;

/// A totally ordered round number. `Round::NONE` sorts below every real
/// round and marks "never promised" or "never voted".
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Round(pub u64);

impl Round {
    pub const NONE: Round = Round(0);

    pub fn is_none(self) -> bool {
        self == Round::NONE
    }
}

impl fmt::Display for Round {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_none() {
            f.write_str("-")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Index of a proposer (the coordinator of the rounds it owns).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProposerId(pub u16);

impl fmt::Display for ProposerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum RoundKind {
    Classic,
    Fast,
}

/// Rule mapping round numbers to classic or fast.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Classification {
    #[default]
    EvenFast,
    OddFast,
    AllClassic,
    AllFast,
}

/// Rule mapping round numbers to their owning proposer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Ownership {
    /// `round mod proposers`.
    Modulo,
    /// `(round / 2) mod proposers`: each proposer owns consecutive
    /// even/odd pairs, so it owns rounds of both kinds under `EvenFast`.
    #[default]
    Paired,
}

/// Shared, deterministic round assignment. Every node uses the same value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RoundConfig {
    pub proposers: u16,
    pub classification: Classification,
    pub ownership: Ownership,
}

impl RoundConfig {
    pub fn new(proposers: u16) -> Self {
        assert!(proposers > 0, "at least one proposer is required");
        RoundConfig { proposers, classification: Classification::default(), ownership: Ownership::default() }
    }

    pub fn with_rules(proposers: u16, classification: Classification, ownership: Ownership) -> Self {
        assert!(proposers > 0, "at least one proposer is required");
        RoundConfig { proposers, classification, ownership }
    }

    pub fn kind(&self, round: Round) -> RoundKind {
        let even = round.0.is_multiple_of(2);
        let fast = match self.classification {
            Classification::EvenFast => even,
            Classification::OddFast => !even,
            Classification::AllClassic => false,
            Classification::AllFast => true,
        };
        if fast {
            RoundKind::Fast
        } else {
            RoundKind::Classic
        }
    }

    pub fn is_fast(&self, round: Round) -> bool {
        self.kind(round) == RoundKind::Fast
    }

    pub fn owner(&self, round: Round) -> ProposerId {
        let p = u64::from(self.proposers);
        let idx = match self.ownership {
            Ownership::Modulo => round.0 % p,
            Ownership::Paired => (round.0 / 2) % p,
        };
        ProposerId(idx as u16)
    }

    /// Smallest round above `after` owned by `owner`, optionally restricted
    /// to one kind. Both rules are periodic with period `2 * proposers`.
    pub fn next_owned(&self, after: Round, owner: ProposerId, kind: Option<RoundKind>) -> Option<Round> {
        let period = 2 * u64::from(self.proposers) + 2;
        (1..=period)
            .map(|d| Round(after.0 + d))
            .find(|&r| self.owner(r) == owner && kind.is_none_or(|k| self.kind(r) == k))
    }

    /// Lowest real round of the given kind, whoever owns it.
    pub fn first(&self, kind: RoundKind) -> Option<Round> {
        (1..=2).map(Round).find(|&r| self.kind(r) == kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_rules() {
        let rc = RoundConfig::new(3);
        assert_eq!(rc.kind(Round(2)), RoundKind::Fast);
        assert_eq!(rc.kind(Round(3)), RoundKind::Classic);
        assert_eq!(rc.owner(Round(2)), ProposerId(1));
        assert_eq!(rc.owner(Round(3)), ProposerId(1));
        assert_eq!(rc.first(RoundKind::Fast), Some(Round(2)));
        assert!(Round::NONE < Round(1));
    }

    #[test]
    fn every_proposer_owns_both_kinds_when_paired() {
        for proposers in 1..6u16 {
            let rc = RoundConfig::new(proposers);
            for p in 0..proposers {
                for kind in [RoundKind::Classic, RoundKind::Fast] {
                    let r = rc.next_owned(Round(7), ProposerId(p), Some(kind)).unwrap();
                    assert!(r > Round(7));
                    assert_eq!(rc.owner(r), ProposerId(p));
                    assert_eq!(rc.kind(r), kind);
                }
            }
        }
    }

    #[test]
    fn modulo_rule_can_starve_a_kind() {
        let rc = RoundConfig::with_rules(2, Classification::EvenFast, Ownership::Modulo);
        assert_eq!(rc.next_owned(Round(0), ProposerId(0), Some(RoundKind::Classic)), None);
        assert_eq!(rc.next_owned(Round(0), ProposerId(1), Some(RoundKind::Classic)), Some(Round(1)));
        assert_eq!(rc.owner(Round(5)), ProposerId(1));
    }
}
