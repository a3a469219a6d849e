//! Quorum systems and their intersection requirements.
//!
//! A [`QuorumSystem`] carries three families: phase-1 quorums, phase-2
//! quorums for classic rounds and phase-2 quorums for fast rounds. Each family
//! is either threshold based (every set of at least `q` acceptors) or an
//! explicit list of acceptor sets. Explicit families are superset-closed: any
//! set containing a declared quorum is itself a quorum.
//!
//! The validators check the classic Paxos, Flexible Paxos, Fast Paxos and
//! Fast Flexible Paxos requirements. [`brute_force_check`] evaluates the Fast
//! Flexible requirements literally by enumeration and serves as an oracle for
//! [`validate_fast_flexible`].

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::nodeset::{subsets_of_size, NodeSet, MAX_NODES};

/// Default largest `n` accepted by [`brute_force_check`].
pub const DEFAULT_EXHAUSTIVE_BOUND: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum QuorumError {
    #[error("cluster size must be in 1..={max}, got {0}", max = MAX_NODES)]
    ClusterSize(usize),
    #[error("{family} quorum size must be in 1..={n}, got {size}")]
    Size { family: &'static str, size: usize, n: usize },
    #[error("{family} family is empty")]
    EmptyFamily { family: &'static str },
    #[error("{family} contains an empty quorum")]
    EmptyQuorum { family: &'static str },
    #[error("{family} quorum {set} names a node outside 0..{n}")]
    OutOfRange { family: &'static str, set: NodeSet, n: usize },
    #[error("unknown quorum family `{0}` (expected p1, p2c or p2f)")]
    UnknownFamily(String),
    #[error("exhaustive check refused: n={n} exceeds bound {bound}")]
    TooLarge { n: usize, bound: usize },
}

/// The three quorum families of a Fast Flexible quorum system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Family {
    Phase1,
    Phase2Classic,
    Phase2Fast,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Phase1, Family::Phase2Classic, Family::Phase2Fast];

    pub fn label(self) -> &'static str {
        match self {
            Family::Phase1 => "p1",
            Family::Phase2Classic => "p2c",
            Family::Phase2Fast => "p2f",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Family {
    type Err = QuorumError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "p1" | "P1" | "phase1" => Ok(Family::Phase1),
            "p2c" | "P2C" | "classic" => Ok(Family::Phase2Classic),
            "p2f" | "P2F" | "fast" => Ok(Family::Phase2Fast),
            other => Err(QuorumError::UnknownFamily(other.into())),
        }
    }
}

/// One quorum family: a threshold or an explicit list of minimal members.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Quorums {
    Threshold(usize),
    Explicit(Vec<NodeSet>),
}

impl Quorums {
    fn check(&self, family: &'static str, n: usize) -> Result<(), QuorumError> {
        match self {
            Quorums::Threshold(q) if *q == 0 || *q > n => {
                Err(QuorumError::Size { family, size: *q, n })
            }
            Quorums::Threshold(_) => Ok(()),
            Quorums::Explicit(sets) => {
                if sets.is_empty() {
                    return Err(QuorumError::EmptyFamily { family });
                }
                let universe = NodeSet::all(n);
                for &set in sets {
                    if set.is_empty() {
                        return Err(QuorumError::EmptyQuorum { family });
                    }
                    if !set.is_subset(universe) {
                        return Err(QuorumError::OutOfRange { family, set, n });
                    }
                }
                Ok(())
            }
        }
    }

    pub fn contains_quorum(&self, s: NodeSet) -> bool {
        match self {
            Quorums::Threshold(q) => s.len() >= *q,
            Quorums::Explicit(sets) => sets.iter().any(|q| q.is_subset(s)),
        }
    }

    /// Smallest quorum cardinality in the family.
    pub fn min_size(&self) -> usize {
        match self {
            Quorums::Threshold(q) => *q,
            Quorums::Explicit(sets) => sets.iter().map(|s| s.len()).min().unwrap_or(0),
        }
    }

    /// The inclusion-minimal quorums, expanded from a threshold if needed.
    pub fn minimal(&self, n: usize) -> Vec<NodeSet> {
        match self {
            Quorums::Threshold(q) => subsets_of_size(n, *q).collect(),
            Quorums::Explicit(sets) => {
                let mut out: Vec<NodeSet> = Vec::new();
                for &s in sets {
                    let dominated = sets.iter().any(|&t| t != s && t.is_subset(s));
                    if !dominated && !out.contains(&s) {
                        out.push(s);
                    }
                }
                out
            }
        }
    }
}

/// A quorum system for Fast Flexible Paxos over `n` acceptors.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuorumSystem {
    n: usize,
    phase1: Quorums,
    classic: Quorums,
    fast: Quorums,
}

impl QuorumSystem {
    pub fn new(n: usize, phase1: Quorums, classic: Quorums, fast: Quorums) -> Result<Self, QuorumError> {
        if n == 0 || n > MAX_NODES {
            return Err(QuorumError::ClusterSize(n));
        }
        phase1.check("p1", n)?;
        classic.check("p2c", n)?;
        fast.check("p2f", n)?;
        Ok(QuorumSystem { n, phase1, classic, fast })
    }

    /// Threshold system with phase-1 size `q1`, classic phase-2 size `q2c`
    /// and fast phase-2 size `q2f`.
    pub fn cardinality(n: usize, q1: usize, q2c: usize, q2f: usize) -> Result<Self, QuorumError> {
        Self::new(n, Quorums::Threshold(q1), Quorums::Threshold(q2c), Quorums::Threshold(q2f))
    }

    pub fn explicit(
        n: usize,
        phase1: Vec<NodeSet>,
        classic: Vec<NodeSet>,
        fast: Vec<NodeSet>,
    ) -> Result<Self, QuorumError> {
        Self::new(n, Quorums::Explicit(phase1), Quorums::Explicit(classic), Quorums::Explicit(fast))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> NodeSet {
        NodeSet::all(self.n)
    }

    pub fn family(&self, family: Family) -> &Quorums {
        match family {
            Family::Phase1 => &self.phase1,
            Family::Phase2Classic => &self.classic,
            Family::Phase2Fast => &self.fast,
        }
    }

    /// Threshold sizes `(q1, q2c, q2f)` when every family is threshold based.
    pub fn thresholds(&self) -> Option<(usize, usize, usize)> {
        match (&self.phase1, &self.classic, &self.fast) {
            (Quorums::Threshold(a), Quorums::Threshold(b), Quorums::Threshold(c)) => Some((*a, *b, *c)),
            _ => None,
        }
    }

    /// Whether `s` contains a quorum of `family`. Members of `s` outside the
    /// cluster are ignored.
    pub fn is_quorum(&self, family: Family, s: NodeSet) -> bool {
        self.family(family).contains_quorum(s.intersection(self.nodes()))
    }

    pub fn fault_tolerance(&self) -> Vec<(Family, usize)> {
        Family::ALL
            .iter()
            .map(|&f| (f, self.n - self.family(f).min_size()))
            .collect()
    }
}

/// Fast Paxos quorum system: one classic family and one fast family used
/// for both phases.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LegacyQuorumSystem {
    n: usize,
    classic: Quorums,
    fast: Quorums,
}

impl LegacyQuorumSystem {
    pub fn new(n: usize, classic: Quorums, fast: Quorums) -> Result<Self, QuorumError> {
        if n == 0 || n > MAX_NODES {
            return Err(QuorumError::ClusterSize(n));
        }
        classic.check("classic", n)?;
        fast.check("fast", n)?;
        Ok(LegacyQuorumSystem { n, classic, fast })
    }

    pub fn cardinality(n: usize, qc: usize, qf: usize) -> Result<Self, QuorumError> {
        Self::new(n, Quorums::Threshold(qc), Quorums::Threshold(qf))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn classic(&self) -> &Quorums {
        &self.classic
    }

    pub fn fast(&self) -> &Quorums {
        &self.fast
    }

    /// The equivalent Fast Flexible system: classic quorums serve phase-1 and
    /// classic phase-2, fast quorums serve fast phase-2.
    pub fn to_fast_flexible(&self) -> QuorumSystem {
        QuorumSystem {
            n: self.n,
            phase1: self.classic.clone(),
            classic: self.classic.clone(),
            fast: self.fast.clone(),
        }
    }
}

/// Which set of intersection requirements a report checked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Scheme {
    Paxos,
    Flexible,
    FastPaxos,
    FastFlexible,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::Paxos => "paxos",
            Scheme::Flexible => "flexible",
            Scheme::FastPaxos => "fast-paxos",
            Scheme::FastFlexible => "fast-flexible",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A single intersection requirement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Requirement {
    /// Any two quorums intersect.
    QuorumPairs,
    /// Every phase-1 quorum meets every phase-2 quorum.
    Phase1MeetsPhase2,
    /// Any two classic quorums intersect.
    ClassicPairs,
    /// Any two fast quorums and any classic quorum share a node.
    FastPairMeetsClassic,
    /// Any three fast quorums share a node.
    FastTriples,
    /// Every phase-1 quorum meets every classic phase-2 quorum.
    Phase1MeetsClassic,
    /// Every phase-1 quorum meets every pair of fast phase-2 quorums.
    Phase1MeetsFastPair,
}

impl Requirement {
    pub fn id(self) -> &'static str {
        match self {
            Requirement::QuorumPairs => "q-q",
            Requirement::Phase1MeetsPhase2 => "q1-q2",
            Requirement::ClassicPairs => "qc-qc",
            Requirement::FastPairMeetsClassic => "qc-qf-qf",
            Requirement::FastTriples => "qf-qf-qf",
            Requirement::Phase1MeetsClassic => "q1-q2c",
            Requirement::Phase1MeetsFastPair => "q1-q2f-q2f",
        }
    }

    /// The threshold form of the requirement.
    pub fn inequality(self) -> &'static str {
        match self {
            Requirement::QuorumPairs => "2q > n",
            Requirement::Phase1MeetsPhase2 => "q1 + q2 > n",
            Requirement::ClassicPairs => "2qc > n",
            Requirement::FastPairMeetsClassic => "qc + 2qf > 2n",
            Requirement::FastTriples => "3qf > 2n",
            Requirement::Phase1MeetsClassic => "q1 + q2c > n",
            Requirement::Phase1MeetsFastPair => "q1 + 2q2f > 2n",
        }
    }
}

impl fmt::Display for Requirement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.inequality())
    }
}

/// Evidence that a requirement fails.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Witness {
    /// A threshold inequality `lhs > rhs` that does not hold.
    Inequality { lhs: usize, rhs: usize },
    /// Quorums whose common intersection is empty.
    Quorums(Vec<NodeSet>),
}

impl Witness {
    /// Re-tests the witness: true when it really demonstrates a violation.
    pub fn holds(&self) -> bool {
        match self {
            Witness::Inequality { lhs, rhs } => lhs <= rhs,
            Witness::Quorums(sets) => sets
                .iter()
                .fold(NodeSet::from_bits(u64::MAX), |acc, &s| acc.intersection(s))
                .is_empty(),
        }
    }
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Witness::Inequality { lhs, rhs } => write!(f, "{lhs} <= {rhs}"),
            Witness::Quorums(sets) => {
                for (i, s) in sets.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ∩ ")?;
                    }
                    write!(f, "{s}")?;
                }
                f.write_str(" = {}")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Violation {
    pub requirement: Requirement,
    pub witness: Witness,
}

/// Outcome of checking a quorum system against one scheme.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ValidationReport {
    pub scheme: Scheme,
    pub violations: Vec<Violation>,
    /// `n` minus the smallest quorum of each family, keyed by family label.
    pub fault_tolerance: Vec<(String, usize)>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn verdict(&self) -> &'static str {
        if self.is_valid() {
            "VALID"
        } else {
            "INVALID"
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.scheme, self.verdict())?;
        if !self.violations.is_empty() {
            f.write_str(" (")?;
            for (i, v) in self.violations.iter().enumerate() {
                if i > 0 {
                    f.write_str("; ")?;
                }
                write!(f, "{}", v.requirement)?;
            }
            f.write_str(")")?;
        }
        for v in &self.violations {
            write!(f, "\n  violated {} [{}]: {}", v.requirement, v.requirement.id(), v.witness)?;
        }
        f.write_str("\n  fault tolerance:")?;
        for (family, ft) in &self.fault_tolerance {
            write!(f, " {family}={ft}")?;
        }
        Ok(())
    }
}

fn check_inequality(out: &mut Vec<Violation>, requirement: Requirement, lhs: usize, rhs: usize) {
    if lhs <= rhs {
        out.push(Violation { requirement, witness: Witness::Inequality { lhs, rhs } });
    }
}

fn labelled(pairs: Vec<(Family, usize)>) -> Vec<(String, usize)> {
    pairs.into_iter().map(|(f, v)| (f.label().into(), v)).collect()
}

/// Classic Paxos: one family of size `q`, any two quorums intersect.
pub fn validate_paxos(n: usize, q: usize) -> Result<ValidationReport, QuorumError> {
    Quorums::Threshold(q).check("q", n)?;
    let mut violations = Vec::new();
    check_inequality(&mut violations, Requirement::QuorumPairs, 2 * q, n);
    Ok(ValidationReport {
        scheme: Scheme::Paxos,
        violations,
        fault_tolerance: alloc::vec![("q".into(), n - q)],
    })
}

/// Flexible Paxos: phase-1 quorums of size `q1` must meet phase-2 quorums of
/// size `q2`.
pub fn validate_flexible(n: usize, q1: usize, q2: usize) -> Result<ValidationReport, QuorumError> {
    if n == 0 || n > MAX_NODES {
        return Err(QuorumError::ClusterSize(n));
    }
    Quorums::Threshold(q1).check("q1", n)?;
    Quorums::Threshold(q2).check("q2", n)?;
    let mut violations = Vec::new();
    check_inequality(&mut violations, Requirement::Phase1MeetsPhase2, q1 + q2, n);
    Ok(ValidationReport {
        scheme: Scheme::Flexible,
        violations,
        fault_tolerance: alloc::vec![("q1".into(), n - q1), ("q2".into(), n - q2)],
    })
}

/// First pair `(a, b)` with `a ∈ left`, `b ∈ right` and `a ∩ b = ∅`.
fn disjoint_pair(left: &[NodeSet], right: &[NodeSet]) -> Option<Vec<NodeSet>> {
    for &a in left {
        for &b in right {
            if a.intersection(b).is_empty() {
                return Some(alloc::vec![a, b]);
            }
        }
    }
    None
}

/// First triple `(a, b, c)` with `a ∈ first`, `b, c ∈ pairs` and empty
/// common intersection.
fn disjoint_triple(first: &[NodeSet], pairs: &[NodeSet]) -> Option<Vec<NodeSet>> {
    for (i, &b) in pairs.iter().enumerate() {
        for &c in &pairs[i..] {
            let bc = b.intersection(c);
            for &a in first {
                if a.intersection(bc).is_empty() {
                    return Some(alloc::vec![a, b, c]);
                }
            }
        }
    }
    None
}

fn push_set_violation(out: &mut Vec<Violation>, requirement: Requirement, witness: Option<Vec<NodeSet>>) {
    if let Some(sets) = witness {
        out.push(Violation { requirement, witness: Witness::Quorums(sets) });
    }
}

/// Fast Flexible Paxos: phase-1 quorums meet every classic phase-2 quorum
/// and every pair of fast phase-2 quorums.
///
/// Threshold systems are decided by `q1 + q2c > n` and `q1 + 2·q2f > 2n`;
/// explicit systems by checking the declared quorums (supersets only grow
/// intersections, so declared members are sufficient).
pub fn validate_fast_flexible(qs: &QuorumSystem) -> ValidationReport {
    let n = qs.n;
    let mut violations = Vec::new();
    if let Some((q1, q2c, q2f)) = qs.thresholds() {
        check_inequality(&mut violations, Requirement::Phase1MeetsClassic, q1 + q2c, n);
        check_inequality(&mut violations, Requirement::Phase1MeetsFastPair, q1 + 2 * q2f, 2 * n);
    } else {
        let p1 = qs.phase1.minimal(n);
        let p2c = qs.classic.minimal(n);
        let p2f = qs.fast.minimal(n);
        push_set_violation(&mut violations, Requirement::Phase1MeetsClassic, disjoint_pair(&p1, &p2c));
        push_set_violation(&mut violations, Requirement::Phase1MeetsFastPair, disjoint_triple(&p1, &p2f));
    }
    ValidationReport {
        scheme: Scheme::FastFlexible,
        violations,
        fault_tolerance: labelled(qs.fault_tolerance()),
    }
}

/// Fast Paxos: classic pairs intersect, two fast quorums meet any classic
/// quorum, and any three fast quorums intersect.
pub fn validate_fast_paxos(lqs: &LegacyQuorumSystem) -> ValidationReport {
    let n = lqs.n;
    let mut violations = Vec::new();
    match (&lqs.classic, &lqs.fast) {
        (Quorums::Threshold(qc), Quorums::Threshold(qf)) => {
            check_inequality(&mut violations, Requirement::ClassicPairs, 2 * qc, n);
            check_inequality(&mut violations, Requirement::FastPairMeetsClassic, qc + 2 * qf, 2 * n);
            check_inequality(&mut violations, Requirement::FastTriples, 3 * qf, 2 * n);
        }
        _ => {
            let c = lqs.classic.minimal(n);
            let f = lqs.fast.minimal(n);
            push_set_violation(&mut violations, Requirement::ClassicPairs, disjoint_pair(&c, &c));
            push_set_violation(&mut violations, Requirement::FastPairMeetsClassic, disjoint_triple(&c, &f));
            push_set_violation(&mut violations, Requirement::FastTriples, disjoint_triple(&f, &f));
        }
    }
    ValidationReport {
        scheme: Scheme::FastPaxos,
        violations,
        fault_tolerance: alloc::vec![
            ("qc".into(), n - lqs.classic.min_size()),
            ("qf".into(), n - lqs.fast.min_size()),
        ],
    }
}

/// Enumerates every (phase-1, classic) pair and every (phase-1, fast, fast)
/// triple of minimal quorums. Refuses clusters above
/// [`DEFAULT_EXHAUSTIVE_BOUND`].
pub fn brute_force_check(qs: &QuorumSystem) -> Result<ValidationReport, QuorumError> {
    brute_force_check_bounded(qs, DEFAULT_EXHAUSTIVE_BOUND)
}

pub fn brute_force_check_bounded(qs: &QuorumSystem, bound: usize) -> Result<ValidationReport, QuorumError> {
    if qs.n > bound {
        return Err(QuorumError::TooLarge { n: qs.n, bound });
    }
    let p1 = qs.phase1.minimal(qs.n);
    let p2c = qs.classic.minimal(qs.n);
    let p2f = qs.fast.minimal(qs.n);
    let mut violations = Vec::new();

    let mut pair = None;
    'pairs: for &a in &p1 {
        for &b in &p2c {
            if a.intersection(b).is_empty() {
                pair = Some(alloc::vec![a, b]);
                break 'pairs;
            }
        }
    }
    push_set_violation(&mut violations, Requirement::Phase1MeetsClassic, pair);

    let mut triple = None;
    'triples: for &a in &p1 {
        for &b in &p2f {
            for &c in &p2f {
                if a.intersection(b).intersection(c).is_empty() {
                    triple = Some(alloc::vec![a, b, c]);
                    break 'triples;
                }
            }
        }
    }
    push_set_violation(&mut violations, Requirement::Phase1MeetsFastPair, triple);

    Ok(ValidationReport {
        scheme: Scheme::FastFlexible,
        violations,
        fault_tolerance: labelled(qs.fault_tolerance()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nodeset::NodeId;
    use alloc::vec;

    fn set(ids: &[u8]) -> NodeSet {
        ids.iter().collect()
    }

    #[test]
    fn is_quorum_threshold_and_explicit() {
        let qs = QuorumSystem::cardinality(11, 9, 3, 7).unwrap();
        let nine: NodeSet = (0..9u8).map(NodeId).collect();
        assert!(qs.is_quorum(Family::Phase1, nine));
        let mut eight = nine;
        eight.remove(NodeId(0));
        assert!(!qs.is_quorum(Family::Phase1, eight));

        let one = QuorumSystem::cardinality(1, 1, 1, 1).unwrap();
        assert!(one.is_quorum(Family::Phase1, set(&[0])));

        let ex = QuorumSystem::explicit(3, vec![set(&[0, 1])], vec![set(&[1])], vec![set(&[0, 1, 2])]).unwrap();
        assert!(!ex.is_quorum(Family::Phase2Fast, set(&[0, 1])));
        assert!(ex.is_quorum(Family::Phase2Fast, set(&[0, 1, 2])));
        // superset closure
        assert!(ex.is_quorum(Family::Phase1, set(&[0, 1, 2])));
    }

    #[test]
    fn unknown_family_is_usage_error() {
        assert_eq!("p3".parse::<Family>(), Err(QuorumError::UnknownFamily("p3".into())));
        assert_eq!("p2f".parse::<Family>(), Ok(Family::Phase2Fast));
    }

    #[test]
    fn malformed_systems_rejected() {
        assert_eq!(
            QuorumSystem::cardinality(5, 0, 3, 3),
            Err(QuorumError::Size { family: "p1", size: 0, n: 5 })
        );
        assert!(QuorumSystem::cardinality(5, 3, 6, 3).is_err());
        assert!(QuorumSystem::cardinality(0, 1, 1, 1).is_err());
        assert!(QuorumSystem::explicit(3, vec![], vec![set(&[0])], vec![set(&[0])]).is_err());
        assert!(QuorumSystem::explicit(3, vec![NodeSet::EMPTY], vec![set(&[0])], vec![set(&[0])]).is_err());
        assert!(matches!(
            QuorumSystem::explicit(3, vec![set(&[0, 3])], vec![set(&[0])], vec![set(&[0])]),
            Err(QuorumError::OutOfRange { .. })
        ));
    }

    #[test]
    fn fast_flexible_examples() {
        for (n, q1, q2c, q2f) in [(11, 9, 3, 7), (11, 6, 6, 9), (11, 11, 1, 6)] {
            let qs = QuorumSystem::cardinality(n, q1, q2c, q2f).unwrap();
            assert!(validate_fast_flexible(&qs).is_valid(), "{n}/{q1}/{q2c}/{q2f}");
        }
        let bad = QuorumSystem::cardinality(5, 3, 3, 3).unwrap();
        let report = validate_fast_flexible(&bad);
        assert!(!report.is_valid());
        assert_eq!(
            report.violations,
            vec![Violation {
                requirement: Requirement::Phase1MeetsFastPair,
                witness: Witness::Inequality { lhs: 9, rhs: 10 },
            }]
        );
    }

    #[test]
    fn fast_paxos_examples() {
        assert!(validate_fast_paxos(&LegacyQuorumSystem::cardinality(11, 6, 9).unwrap()).is_valid());
        assert!(validate_fast_paxos(&LegacyQuorumSystem::cardinality(4, 3, 3).unwrap()).is_valid());
        let r = validate_fast_paxos(&LegacyQuorumSystem::cardinality(11, 6, 7).unwrap());
        assert!(!r.is_valid());
        assert_eq!(r.violations[0].requirement, Requirement::FastPairMeetsClassic);
        assert_eq!(r.violations[0].witness, Witness::Inequality { lhs: 20, rhs: 22 });
        // 3·7 = 21 <= 22 fails as well
        assert_eq!(r.violations[1].requirement, Requirement::FastTriples);
    }

    #[test]
    fn flexible_examples() {
        assert!(validate_flexible(11, 9, 3).unwrap().is_valid());
        assert!(!validate_flexible(2, 1, 1).unwrap().is_valid());
        assert!(validate_flexible(11, 6, 6).unwrap().is_valid());
        assert!(validate_paxos(11, 6).unwrap().is_valid());
        assert!(!validate_paxos(4, 2).unwrap().is_valid());
    }

    #[test]
    fn brute_force_examples() {
        let qs = QuorumSystem::cardinality(11, 9, 3, 7).unwrap();
        let oracle = brute_force_check(&qs).unwrap();
        assert!(oracle.is_valid());
        assert_eq!(oracle.is_valid(), validate_fast_flexible(&qs).is_valid());

        let ex = QuorumSystem::explicit(3, vec![set(&[0, 1]), set(&[1, 2])], vec![set(&[1])], vec![set(&[0, 1, 2])])
            .unwrap();
        assert!(brute_force_check(&ex).unwrap().is_valid());

        let bad = QuorumSystem::explicit(2, vec![set(&[0])], vec![set(&[1])], vec![set(&[0])]).unwrap();
        let r = brute_force_check(&bad).unwrap();
        assert_eq!(
            r.violations[0],
            Violation { requirement: Requirement::Phase1MeetsClassic, witness: Witness::Quorums(vec![set(&[0]), set(&[1])]) }
        );
        assert!(r.violations.iter().all(|v| v.witness.holds()));
    }

    #[test]
    fn brute_force_refuses_large_clusters() {
        let qs = QuorumSystem::cardinality(13, 9, 5, 9).unwrap();
        assert_eq!(brute_force_check(&qs), Err(QuorumError::TooLarge { n: 13, bound: 12 }));
        assert!(brute_force_check_bounded(&qs, 13).is_ok());
    }

    #[test]
    fn explicit_validator_reports_witness() {
        let majorities = vec![set(&[0, 1]), set(&[1, 2]), set(&[0, 2])];
        let qs = QuorumSystem::explicit(3, majorities.clone(), majorities.clone(), majorities).unwrap();
        let r = validate_fast_flexible(&qs);
        assert!(!r.is_valid());
        assert_eq!(r.violations[0].requirement, Requirement::Phase1MeetsFastPair);
        assert!(r.violations[0].witness.holds());
    }

    #[test]
    fn fault_tolerance_per_family() {
        let qs = QuorumSystem::cardinality(11, 9, 3, 7).unwrap();
        let r = validate_fast_flexible(&qs);
        assert_eq!(r.fault_tolerance, vec![("p1".into(), 2), ("p2c".into(), 8), ("p2f".into(), 4)]);
    }

    #[test]
    fn minimal_drops_supersets() {
        let q = Quorums::Explicit(vec![set(&[0, 1, 2]), set(&[0, 1]), set(&[0, 1])]);
        assert_eq!(q.minimal(3), vec![set(&[0, 1])]);
    }
}
