//! Acceptor identifiers and compact acceptor sets.

use core::fmt;

/// Largest supported cluster size. Node sets are single-word bitsets.
pub const MAX_NODES: usize = 64;

/// Index of an acceptor within a cluster of `n` acceptors.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NodeId(pub u8);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

/// A set of acceptors, stored as a bitset over `[0, MAX_NODES)`.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NodeSet(u64);

impl NodeSet {
    pub const EMPTY: NodeSet = NodeSet(0);

    /// All nodes `0..n`.
    pub fn all(n: usize) -> NodeSet {
        assert!(n <= MAX_NODES, "cluster size {n} exceeds {MAX_NODES}");
        if n == MAX_NODES {
            NodeSet(u64::MAX)
        } else {
            NodeSet((1u64 << n) - 1)
        }
    }

    pub fn from_bits(bits: u64) -> NodeSet {
        NodeSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn singleton(node: NodeId) -> NodeSet {
        NodeSet(1u64 << node.0)
    }

    pub fn contains(self, node: NodeId) -> bool {
        (node.index()) < MAX_NODES && self.0 & (1u64 << node.0) != 0
    }

    pub fn insert(&mut self, node: NodeId) {
        self.0 |= 1u64 << node.0;
    }

    pub fn remove(&mut self, node: NodeId) {
        self.0 &= !(1u64 << node.0);
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: NodeSet) -> NodeSet {
        NodeSet(self.0 | other.0)
    }

    pub fn intersection(self, other: NodeSet) -> NodeSet {
        NodeSet(self.0 & other.0)
    }

    pub fn difference(self, other: NodeSet) -> NodeSet {
        NodeSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: NodeSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Highest member index plus one, or zero for the empty set.
    pub fn span(self) -> usize {
        MAX_NODES - self.0.leading_zeros() as usize
    }

    pub fn iter(self) -> Iter {
        Iter(self.0)
    }
}

impl FromIterator<NodeId> for NodeSet {
    fn from_iter<I: IntoIterator<Item = NodeId>>(iter: I) -> Self {
        let mut set = NodeSet::EMPTY;
        for node in iter {
            set.insert(node);
        }
        set
    }
}

impl<'a> FromIterator<&'a u8> for NodeSet {
    fn from_iter<I: IntoIterator<Item = &'a u8>>(iter: I) -> Self {
        iter.into_iter().map(|&i| NodeId(i)).collect()
    }
}

pub struct Iter(u64);

impl Iterator for Iter {
    type Item = NodeId;

    fn next(&mut self) -> Option<NodeId> {
        if self.0 == 0 {
            return None;
        }
        let idx = self.0.trailing_zeros();
        self.0 &= self.0 - 1;
        Some(NodeId(idx as u8))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl IntoIterator for NodeSet {
    type Item = NodeId;
    type IntoIter = Iter;

    fn into_iter(self) -> Iter {
        self.iter()
    }
}

impl fmt::Debug for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, node) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", node.0)?;
        }
        f.write_str("}")
    }
}

/// Iterates every subset of `0..n` with exactly `k` members, in increasing
/// bit-pattern order (Gosper's hack).
pub fn subsets_of_size(n: usize, k: usize) -> impl Iterator<Item = NodeSet> {
    assert!(n <= MAX_NODES);
    let limit: u128 = 1u128 << n;
    let mut next: Option<u64> = if k > n {
        None
    } else if k == 0 {
        Some(0)
    } else {
        Some((u64::MAX) >> (64 - k))
    };
    core::iter::from_fn(move || {
        let cur = next?;
        next = if cur == 0 {
            None
        } else {
            let c = cur & cur.wrapping_neg();
            let r = (cur as u128) + (c as u128);
            let succ = ((((r as u64) ^ cur) >> 2) / c) | (r as u64);
            if r >= limit {
                None
            } else {
                Some(succ)
            }
        };
        Some(NodeSet(cur))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn binomial(n: usize, k: usize) -> usize {
        if k > n {
            return 0;
        }
        (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn subset_enumeration_counts() {
        for n in 0..=10 {
            for k in 0..=n + 1 {
                let subsets: Vec<_> = subsets_of_size(n, k).collect();
                assert_eq!(subsets.len(), binomial(n, k), "n={n} k={k}");
                assert!(subsets.iter().all(|s| s.len() == k));
                assert!(subsets.iter().all(|s| s.is_subset(NodeSet::all(n))));
                assert!(subsets.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn full_width_sets() {
        assert_eq!(NodeSet::all(64).len(), 64);
        assert_eq!(subsets_of_size(64, 64).count(), 1);
        assert_eq!(subsets_of_size(64, 1).count(), 64);
    }

    #[test]
    fn set_algebra() {
        let a: NodeSet = [0u8, 1, 2].iter().collect();
        let b: NodeSet = [2u8, 3].iter().collect();
        assert_eq!(a.intersection(b).len(), 1);
        assert_eq!(a.union(b).len(), 4);
        assert_eq!(a.difference(b).len(), 2);
        assert!(a.intersection(b).is_subset(a));
        assert_eq!(b.span(), 4);
        assert_eq!(alloc::format!("{a}"), "{0,1,2}");
    }
}
