use std::collections::BTreeSet;

use ffpaxos::bench::{
    classify_race, conflict_sweep, run_bench, sweep_csv, BenchError, BenchSystem, Path, RaceOutcome, WorkloadSpec,
    AGGREGATE_HEADER, RECORD_HEADER, SWEEP_HEADER,
};
use ffpaxos::simnet::{Jitter, LinkModel, SimConfig};
use ffpaxos_core::{LegacyQuorumSystem, NodeId, QuorumSystem, Value};

fn votes(split: &[(u64, usize)]) -> Vec<(NodeId, Value)> {
    let mut out = Vec::new();
    let mut next = 0u8;
    for &(v, count) in split {
        for _ in 0..count {
            out.push((NodeId(next), Value(v)));
            next += 1;
        }
    }
    out
}

fn ffp() -> BenchSystem {
    BenchSystem::FastFlexible(QuorumSystem::cardinality(11, 9, 3, 7).unwrap())
}

fn fp() -> BenchSystem {
    BenchSystem::FastPaxos(LegacyQuorumSystem::cardinality(11, 6, 9).unwrap())
}

fn sim() -> SimConfig {
    let mut cfg = SimConfig::new(QuorumSystem::cardinality(11, 9, 3, 7).unwrap(), 2);
    cfg.link = LinkModel { base_ms: 5.0, jitter: Jitter::Exponential { mean_ms: 2.0 } };
    cfg
}

#[test]
fn race_classification() {
    let q7 = QuorumSystem::cardinality(11, 9, 3, 7).unwrap();
    let q9 = QuorumSystem::cardinality(11, 6, 6, 9).unwrap();
    assert_eq!(classify_race(&votes(&[(1, 7)]), true, &q7), RaceOutcome::FastWin);
    assert_eq!(classify_race(&votes(&[(1, 7), (2, 4)]), true, &q7), RaceOutcome::FastWin);
    assert_eq!(classify_race(&votes(&[(1, 6), (2, 5)]), true, &q7), RaceOutcome::Recovery);
    assert_eq!(classify_race(&votes(&[(1, 8), (2, 3)]), true, &q9), RaceOutcome::Recovery);
    assert_eq!(classify_race(&votes(&[(1, 8), (2, 3)]), true, &q7), RaceOutcome::FastWin);
    assert_eq!(classify_race(&votes(&[(1, 6), (2, 5)]), false, &q7), RaceOutcome::Unclassifiable);
}

#[test]
fn workload_generation() {
    assert!(WorkloadSpec { rate: 0.0, ..Default::default() }.generate(1).submissions.is_empty());
    assert!(WorkloadSpec { duration_s: 0.0, ..Default::default() }.generate(1).submissions.is_empty());

    let spec = WorkloadSpec { rate: 1000.0, duration_s: 2.0, conflict_fraction: 0.3, ..Default::default() };
    let w = spec.generate(9);
    assert_eq!(w.submissions.len() as u64, spec.requests());
    assert_eq!(w, spec.generate(9));
    let values: BTreeSet<Value> = w.submissions.iter().map(|s| s.value).collect();
    assert_eq!(values.len(), w.submissions.len());
    // at most two clients per instance, and never the same client twice
    for i in w.instances() {
        let subs: Vec<_> = w.submissions.iter().filter(|s| s.instance == i).collect();
        assert!(subs.len() <= 2);
        if subs.len() == 2 {
            assert_ne!(subs[0].proposer, subs[1].proposer);
        }
    }
    let racing = w.submissions.len() - w.instances().len();
    let expected = 0.3 / 1.3 * w.submissions.len() as f64;
    assert!((racing as f64 - expected).abs() < 0.25 * expected, "{racing} vs {expected}");

    let single = WorkloadSpec { clients: 1, conflict_fraction: 1.0, ..Default::default() }.generate(1);
    assert_eq!(single.instances().len(), single.submissions.len());
}

#[test]
fn invalid_systems_are_refused() {
    let broken = BenchSystem::FastFlexible(QuorumSystem::cardinality(5, 3, 3, 3).unwrap());
    assert!(matches!(run_bench(&broken, &WorkloadSpec::default(), &sim()), Err(BenchError::Invalid(_))));
}

#[test]
fn records_are_consistent() {
    let spec = WorkloadSpec { rate: 500.0, duration_s: 0.5, conflict_fraction: 0.3, race_gap_ms: 0.5, ..Default::default() };
    for system in [ffp(), fp()] {
        let r = run_bench(&system, &spec, &sim()).unwrap();
        let a = &r.aggregates;
        assert_eq!(a.instances, r.records.len());
        assert_eq!(a.decided, a.instances, "{}: quiescent runs decide everything", r.config);
        assert!(a.recoveries <= a.races);
        assert!(a.fast_median_ms <= a.p99_ms && a.median_ms <= a.p99_ms);
        for rec in &r.records {
            let d = rec.decide_ms.unwrap();
            assert!(d >= rec.submit_ms);
            assert_eq!(rec.racing, rec.race.is_some());
            if rec.path == Path::Fast {
                assert_eq!(rec.rounds, 1);
            }
        }
        let races = r.records.iter().filter(|x| x.racing).count();
        assert_eq!(races, a.races);
    }
}

#[test]
fn csv_shapes() {
    let empty = run_bench(&ffp(), &WorkloadSpec { duration_s: 0.0, ..Default::default() }, &sim()).unwrap();
    assert_eq!(empty.records_csv(true), format!("{RECORD_HEADER}\n"));
    let aggr = empty.aggregates_csv(true);
    assert!(aggr.starts_with(&format!("{AGGREGATE_HEADER}\n")));
    assert!(aggr.contains("ffp,instances,0\n"));

    let r = run_bench(&ffp(), &WorkloadSpec { rate: 100.0, duration_s: 0.2, ..Default::default() }, &sim()).unwrap();
    let csv = r.records_csv(true);
    let cols = RECORD_HEADER.split(',').count();
    assert_eq!(csv.lines().count(), 21);
    assert!(csv.lines().all(|l| l.split(',').count() == cols));
}

#[test]
fn sweep_is_ordered_and_complete() {
    let spec = WorkloadSpec { rate: 500.0, duration_s: 0.4, conflict_fraction: 0.5, ..Default::default() };
    let rows = conflict_sweep(&[ffp(), fp()], &[0.0, 5.0], &spec, &sim(), &[1, 2], 2).unwrap();
    let keys: Vec<(&str, f64)> = rows.iter().map(|r| (r.config.as_str(), r.interval_ms)).collect();
    assert_eq!(keys, vec![("ffp", 0.0), ("ffp", 5.0), ("fp", 0.0), ("fp", 5.0)]);
    for r in &rows {
        assert!(r.races > 0 && r.recoveries <= r.races);
    }
    let csv = sweep_csv(&rows);
    assert!(csv.starts_with(SWEEP_HEADER));
    assert_eq!(csv.lines().count(), 5);
}
