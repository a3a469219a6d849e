use ffpaxos_core::{
    brute_force_check, o4_values, validate_fast_flexible, validate_fast_paxos, AcceptorState, Addr, Dest, Family,
    Instance, LegacyQuorumSystem, Message, NodeId, NodeSet, Payload, Promise, Proposal, ProposerId, QuorumSystem,
    Quorums, Round, RoundConfig, Value, Witness,
};
use proptest::prelude::*;

/// Intersection requirements checked over raw bitmasks, independent of the
/// library's quorum enumeration: every superset of a declared quorum is a
/// quorum, so checking the declared sets is enough.
fn naive_valid(n: usize, p1: &[u64], p2c: &[u64], p2f: &[u64]) -> bool {
    let mask = (1u64 << n) - 1;
    p1.iter().all(|&a| {
        p2c.iter().all(|&b| a & b & mask != 0) && p2f.iter().all(|&b| p2f.iter().all(|&c| a & b & c & mask != 0))
    })
}

fn family(n: usize) -> impl Strategy<Value = Vec<u64>> {
    prop::collection::vec(1u64..(1u64 << n), 1..4)
}

fn to_sets(bits: &[u64]) -> Vec<NodeSet> {
    bits.iter().map(|&b| NodeSet::from_bits(b)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn explicit_validator_matches_oracles((n, p1, p2c, p2f) in (1usize..=6).prop_flat_map(|n| (Just(n), family(n), family(n), family(n)))) {
        let qs = QuorumSystem::explicit(n, to_sets(&p1), to_sets(&p2c), to_sets(&p2f)).unwrap();
        let fast = validate_fast_flexible(&qs);
        let brute = brute_force_check(&qs).unwrap();
        let expected = naive_valid(n, &p1, &p2c, &p2f);
        prop_assert_eq!(fast.is_valid(), expected);
        prop_assert_eq!(brute.is_valid(), expected);
        for v in fast.violations.iter().chain(&brute.violations) {
            prop_assert!(v.witness.holds(), "witness {} does not hold", v.witness);
            if let Witness::Quorums(sets) = &v.witness {
                for s in sets {
                    prop_assert!(s.is_subset(NodeSet::all(n)));
                }
            }
        }
    }

    #[test]
    fn fast_paxos_configs_stay_legal(n in 1usize..=16, qc in 1usize..=16, qf in 1usize..=16) {
        prop_assume!(qc <= n && qf <= n);
        let fp = validate_fast_paxos(&LegacyQuorumSystem::cardinality(n, qc, qf).unwrap());
        let ffp = validate_fast_flexible(&QuorumSystem::cardinality(n, qc, qc, qf).unwrap());
        prop_assert!(!fp.is_valid() || ffp.is_valid());
    }

    #[test]
    fn cardinality_witnesses_are_real(n in 1usize..=8, q1 in 1usize..=8, q2c in 1usize..=8, q2f in 1usize..=8) {
        prop_assume!(q1 <= n && q2c <= n && q2f <= n);
        let qs = QuorumSystem::cardinality(n, q1, q2c, q2f).unwrap();
        for v in brute_force_check(&qs).unwrap().violations {
            prop_assert!(v.witness.holds());
            let Witness::Quorums(sets) = v.witness else { panic!("brute force gives quorum witnesses") };
            let families = match sets.len() {
                2 => vec![Family::Phase1, Family::Phase2Classic],
                _ => vec![Family::Phase1, Family::Phase2Fast, Family::Phase2Fast],
            };
            for (s, f) in sets.iter().zip(families) {
                prop_assert!(qs.is_quorum(f, *s));
            }
        }
    }

    #[test]
    fn is_quorum_is_monotone((n, p) in (1usize..=8).prop_flat_map(|n| (Just(n), family(n))), s in any::<u64>(), extra in any::<u64>(), q in 1usize..=8) {
        let mask = (1u64 << n) - 1;
        let small = NodeSet::from_bits(s & mask);
        let big = small.union(NodeSet::from_bits(extra & mask));
        let explicit = Quorums::Explicit(to_sets(&p));
        prop_assert!(!explicit.contains_quorum(small) || explicit.contains_quorum(big));
        let threshold = Quorums::Threshold(q.min(n));
        prop_assert!(!threshold.contains_quorum(small) || threshold.contains_quorum(big));
    }
}

#[derive(Clone, Debug)]
enum Event {
    P1a(u64),
    P2a(u64, Option<u64>),
    Propose(u64),
}

fn event() -> impl Strategy<Value = Event> {
    prop_oneof![
        (1u64..8).prop_map(Event::P1a),
        (1u64..8, prop::option::of(1u64..4)).prop_map(|(r, v)| Event::P2a(r, v)),
        (1u64..4).prop_map(Event::Propose),
    ]
}

fn message(e: &Event) -> Message {
    let payload = match *e {
        Event::P1a(r) => Payload::P1a { round: Round(r) },
        Event::P2a(r, v) => Payload::P2a { round: Round(r), proposal: v.map_or(Proposal::Any, |v| Proposal::Value(Value(v))) },
        Event::Propose(v) => Payload::Propose { value: Value(v) },
    };
    Message { instance: Instance(0), from: Addr::Proposer(ProposerId(0)), to: Dest::Acceptors, payload }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn acceptor_is_monotone_deterministic_and_votes_once(events in prop::collection::vec(event(), 0..40)) {
        let rc = RoundConfig::new(2);
        let me = NodeId(0);
        let mut st = AcceptorState::default();
        let mut votes: std::collections::BTreeMap<Round, Value> = Default::default();
        for e in &events {
            let msg = message(e);
            let first = st.handle(me, &msg, &rc);
            prop_assert_eq!(&first, &st.handle(me, &msg, &rc));
            let Ok((next, reply)) = first else { continue };
            prop_assert!(next.rnd >= st.rnd && next.vrnd >= st.vrnd);
            prop_assert!(next.is_well_formed(&rc), "{:?}", next);
            if let Some(Message { payload: Payload::P2b { round, value }, .. }) = reply {
                prop_assert!(votes.insert(round, value).is_none(), "second vote in {}", round);
            }
            st = next;
        }
    }
}

/// Values v for which some fast quorum R has every member of Q ∩ R voting v
/// at the top round, by enumerating every R.
fn o4_oracle(n: usize, q2f: usize, quorum: u64, votes: &[Option<u64>]) -> Vec<u64> {
    let mut out = Vec::new();
    for v in 1..=3u64 {
        let ok = (0u64..(1 << n)).filter(|r| r.count_ones() as usize >= q2f).any(|r| {
            (0..n).filter(|&a| quorum & r & (1 << a) != 0).all(|a| votes[a] == Some(v))
        });
        if ok {
            out.push(v);
        }
    }
    out
}

/// Sizes satisfying q1 + q2c > n and q1 + 2q2f > 2n.
fn valid_sizes() -> impl Strategy<Value = (usize, usize, usize, usize)> {
    (1usize..=8)
        .prop_flat_map(|n| (Just(n), (n + 2) / 2..=n))
        .prop_flat_map(|(n, q2f)| (Just(n), (2 * n + 1).saturating_sub(2 * q2f).max(1)..=n, Just(q2f)))
        .prop_flat_map(|(n, q1, q2f)| (Just(n), Just(q1), (n + 1 - q1)..=n, Just(q2f)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn o4_matches_enumeration_and_is_unique(
        (n, q1, q2c, q2f) in valid_sizes(),
        qbits in any::<u64>(),
        votes in prop::collection::vec(prop::option::of(1u64..=3), 8),
    ) {
        let qs = QuorumSystem::cardinality(n, q1, q2c, q2f).unwrap();
        prop_assert!(validate_fast_flexible(&qs).is_valid());
        // widen a random set into a phase-1 quorum
        let mut quorum = qbits & ((1u64 << n) - 1);
        let mut a = 0;
        while (quorum.count_ones() as usize) < q1 {
            quorum |= 1 << a;
            a += 1;
        }
        let promises: Vec<Promise> = (0..n)
            .filter(|&a| quorum & (1 << a) != 0)
            .map(|a| Promise {
                from: NodeId(a as u8),
                round: Round(9),
                vrnd: if votes[a].is_some() { Round(2) } else { Round::NONE },
                vval: votes[a].map(Value),
            })
            .collect();
        let got: Vec<u64> = o4_values(NodeSet::from_bits(quorum), &promises, &qs).into_iter().map(|v| v.0).collect();
        let all_votes: Vec<Option<u64>> = (0..n).map(|a| if quorum & (1 << a) != 0 { votes[a] } else { None }).collect();
        let expected = if promises.iter().any(|p| p.vval.is_some()) { o4_oracle(n, q2f, quorum, &all_votes) } else { Vec::new() };
        prop_assert_eq!(&got, &expected);
        prop_assert!(got.len() <= 1);
    }
}
