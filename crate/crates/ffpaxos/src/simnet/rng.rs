//! Seed-stable random draws.
//!
//! Every draw is keyed by purpose, link and instance, and by how many draws
//! that key has made so far. Each key maps to its own ChaCha stream, so
//! adding traffic on one link or one instance never shifts the draws seen by
//! another.

use std::collections::HashMap;

use ffpaxos_core::{Addr, Instance};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Words reserved per draw inside a stream.
const WORDS_PER_DRAW: u128 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Purpose {
    Delay = 1,
    Drop = 2,
    Duplicate = 3,
    Workload = 4,
    Adversary = 5,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub purpose: Purpose,
    pub from: Option<Addr>,
    pub to: Option<Addr>,
    pub instance: Option<Instance>,
}

impl StreamKey {
    pub fn link(purpose: Purpose, from: Addr, to: Addr, instance: Instance) -> Self {
        StreamKey { purpose, from: Some(from), to: Some(to), instance: Some(instance) }
    }

    pub fn global(purpose: Purpose) -> Self {
        StreamKey { purpose, from: None, to: None, instance: None }
    }

    fn id(&self) -> u64 {
        let addr = |a: Option<Addr>| match a {
            None => 0,
            Some(Addr::Acceptor(n)) => 0x1_0000 | u64::from(n.0),
            Some(Addr::Proposer(p)) => 0x2_0000 | u64::from(p.0),
            Some(Addr::Learner(l)) => 0x3_0000 | u64::from(l),
        };
        let mut h = mix(self.purpose as u64);
        h = mix(h ^ addr(self.from));
        h = mix(h ^ addr(self.to).rotate_left(21));
        h = mix(h ^ self.instance.map_or(u64::MAX, |i| i.0).rotate_left(42));
        h
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug)]
pub struct Streams {
    seed: u64,
    counters: HashMap<StreamKey, u64>,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Streams { seed, counters: HashMap::new() }
    }

    /// A generator positioned at the next unused draw of `key`.
    pub fn next(&mut self, key: StreamKey) -> ChaCha8Rng {
        let counter = self.counters.entry(key).or_insert(0);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(key.id());
        rng.set_word_pos(u128::from(*counter) * WORDS_PER_DRAW);
        *counter += 1;
        rng
    }
}

/// A single long stream for bulk generation (workloads, adversary schedules).
pub fn generator(seed: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(StreamKey::global(purpose).id());
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use ffpaxos_core::{NodeId, ProposerId};
    use rand::Rng;

    #[test]
    fn keyed_draws_are_independent_of_other_keys() {
        let k1 = StreamKey::link(Purpose::Delay, Addr::Proposer(ProposerId(0)), Addr::Acceptor(NodeId(1)), Instance(3));
        let k2 = StreamKey::link(Purpose::Delay, Addr::Proposer(ProposerId(1)), Addr::Acceptor(NodeId(1)), Instance(3));
        let mut a = Streams::new(7);
        let first: Vec<u64> = (0..3).map(|_| a.next(k1).random()).collect();
        let mut b = Streams::new(7);
        let _ = b.next(k2).random::<u64>();
        let second: Vec<u64> = (0..3).map(|_| b.next(k1).random()).collect();
        assert_eq!(first, second);
        assert_ne!(first[0], first[1]);
    }
}
