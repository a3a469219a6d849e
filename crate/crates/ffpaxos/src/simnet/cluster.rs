//! Node state and event handlers, independent of how messages travel.
//!
//! Proposers host a learner of their own: phase-2b messages addressed to the
//! learners also reach every proposer, which is how proposers notice
//! decisions and conflicts.

use std::collections::{BTreeMap, HashMap};

use ffpaxos_core::{
    AcceptorState, Addr, Coordinator, Decision, Dest, Fault, Instance, Learner, Message, NodeId, Payload, Phase,
    Phase1Step, PickOutcome, Promise, ProposerId, QuorumSystem, Round, RoundConfig, Value,
};

use super::trace::{
    fmt_state, AcceptorDelta, DecisionRecord, FaultRecord, PickRecord, RoundStart, SubmissionRecord, Trace,
};
use super::{FastStart, SimTime, Timeouts};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Timer {
    /// No decision some time after a client submission.
    ConflictTimeout(Instance),
    /// Eager recovery after a detected split in `failed`.
    Recover { instance: Instance, failed: Round },
    /// A recovery round has not produced a decision in time.
    PhaseTimeout { instance: Instance, round: Round },
}

impl std::fmt::Display for Timer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Timer::ConflictTimeout(i) => write!(f, "conflict-timeout {i}"),
            Timer::Recover { instance, failed } => write!(f, "recover {instance} after {failed}"),
            Timer::PhaseTimeout { instance, round } => write!(f, "phase-timeout {instance} {round}"),
        }
    }
}

/// Messages and timers produced by one handler invocation.
#[derive(Debug, Default)]
pub struct Outbox {
    pub messages: Vec<Message>,
    /// `(delay, proposer, timer)`.
    pub timers: Vec<(SimTime, ProposerId, Timer)>,
}

#[derive(Clone, Debug)]
struct ProposerInstance {
    coord: Coordinator,
    learner: Learner,
    decided: Option<Decision>,
    max_round: Round,
    attempts: u32,
}

#[derive(Debug)]
pub struct Cluster {
    qs: QuorumSystem,
    rc: RoundConfig,
    timeouts: Timeouts,
    fast_round: Round,
    fast_start: FastStart,
    acceptors: Vec<HashMap<Instance, AcceptorState>>,
    proposers: Vec<BTreeMap<Instance, ProposerInstance>>,
    learners: Vec<BTreeMap<Instance, Learner>>,
    pub trace: Trace,
}

impl Cluster {
    pub fn new(
        qs: QuorumSystem,
        rc: RoundConfig,
        timeouts: Timeouts,
        fast_round: Round,
        fast_start: FastStart,
        learners: u16,
        trace: Trace,
    ) -> Self {
        Cluster {
            acceptors: vec![HashMap::new(); qs.n()],
            proposers: vec![BTreeMap::new(); usize::from(rc.proposers)],
            learners: vec![BTreeMap::new(); usize::from(learners)],
            qs,
            rc,
            timeouts,
            fast_round,
            fast_start,
            trace,
        }
    }

    /// Point-to-point recipients of `dest`.
    pub fn expand(&self, dest: Dest) -> Vec<Addr> {
        match dest {
            Dest::To(a) => vec![a],
            Dest::Acceptors => (0..self.qs.n()).map(|a| Addr::Acceptor(NodeId(a as u8))).collect(),
            Dest::Proposers => (0..self.rc.proposers).map(|p| Addr::Proposer(ProposerId(p))).collect(),
            Dest::Learners => {
                let mut out: Vec<Addr> = (0..self.learners.len() as u16).map(Addr::Learner).collect();
                out.extend((0..self.rc.proposers).map(|p| Addr::Proposer(ProposerId(p))));
                out
            }
        }
    }

    pub fn acceptor_state(&self, acceptor: NodeId, instance: Instance) -> AcceptorState {
        self.acceptors[acceptor.index()].get(&instance).copied().unwrap_or_else(|| self.initial_acceptor())
    }

    fn initial_acceptor(&self) -> AcceptorState {
        match self.fast_start {
            FastStart::Prepared => AcceptorState::opened(self.fast_round),
            FastStart::Explicit => AcceptorState::default(),
        }
    }

    fn proposer_instance(&mut self, p: ProposerId, instance: Instance) -> &mut ProposerInstance {
        let prepared_owner = self.fast_start == FastStart::Prepared && self.rc.owner(self.fast_round) == p;
        let fast_round = self.fast_round;
        self.proposers[usize::from(p.0)].entry(instance).or_insert_with(|| ProposerInstance {
            coord: if prepared_owner {
                Coordinator::opened(p, instance, fast_round)
            } else {
                Coordinator::new(p, instance)
            },
            learner: Learner::new(),
            decided: None,
            max_round: fast_round,
            attempts: 0,
        })
    }

    fn fault(&mut self, time: SimTime, node: Addr, instance: Instance, fault: Fault) {
        self.trace.record(time, node, "fault", || format!("{instance} {fault}"));
        self.trace.faults.push(FaultRecord { time, node, instance, fault });
    }

    pub fn deliver(&mut self, now: SimTime, to: Addr, msg: &Message, out: &mut Outbox) {
        self.trace.stats.events += 1;
        let first_out = out.messages.len();
        let note = match to {
            Addr::Acceptor(a) => self.deliver_acceptor(now, a, msg, out),
            Addr::Proposer(p) => self.deliver_proposer(now, p, msg, out),
            Addr::Learner(l) => self.deliver_learner(now, l, msg, out),
        };
        if self.trace.full() {
            let sent = render_out(&out.messages[first_out..]);
            self.trace.record(now, to, "recv", || format!("{} {}<-{} | {} | {}", msg.instance, msg.payload, msg.from, note, sent));
        }
    }

    fn deliver_acceptor(&mut self, now: SimTime, a: NodeId, msg: &Message, out: &mut Outbox) -> String {
        let before = self.acceptor_state(a, msg.instance);
        match before.handle(a, msg, &self.rc) {
            Ok((after, reply)) => {
                out.messages.extend(reply);
                if after == before {
                    return "unchanged".into();
                }
                self.acceptors[a.index()].insert(msg.instance, after);
                self.trace.acceptor_deltas.push(AcceptorDelta { time: now, acceptor: a, instance: msg.instance, before, after });
                if self.trace.full() {
                    format!("{} => {}", fmt_state(&before), fmt_state(&after))
                } else {
                    String::new()
                }
            }
            Err(fault) => {
                self.fault(now, Addr::Acceptor(a), msg.instance, fault);
                "rejected".into()
            }
        }
    }

    fn deliver_learner(&mut self, now: SimTime, l: u16, msg: &Message, out: &mut Outbox) -> String {
        let Payload::P2b { round, value } = msg.payload else {
            return "ignored".into();
        };
        let Addr::Acceptor(from) = msg.from else {
            return "ignored".into();
        };
        let learner = self.learners[usize::from(l)].entry(msg.instance).or_default();
        let step = learner.on_p2b(from, round, value, &self.qs, &self.rc);
        let mut note = String::from("recorded");
        if let Some(d) = step.decision {
            self.trace.decisions.push(DecisionRecord { time: now, learner: Addr::Learner(l), instance: msg.instance, round: d.round, value: d.value });
            out.messages.push(Message {
                instance: msg.instance,
                from: Addr::Learner(l),
                to: Dest::Proposers,
                payload: Payload::Decided { round: d.round, value: d.value },
            });
            note = format!("decided {} in {}", d.value, d.round);
        }
        if let Some(fault) = step.fault {
            self.fault(now, Addr::Learner(l), msg.instance, fault);
        }
        note
    }

    fn deliver_proposer(&mut self, now: SimTime, p: ProposerId, msg: &Message, out: &mut Outbox) -> String {
        let instance = msg.instance;
        match msg.payload {
            Payload::P1b { round, vrnd, vval } => {
                let Addr::Acceptor(from) = msg.from else { return "ignored".into() };
                let (qs, rc) = (self.qs.clone(), self.rc);
                let pi = self.proposer_instance(p, instance);
                let step = pi.coord.on_p1b(Promise { from, round, vrnd, vval }, &qs, &rc);
                self.after_phase1(now, p, instance, round, step, out)
            }
            Payload::P2b { round, value } => {
                let Addr::Acceptor(from) = msg.from else { return "ignored".into() };
                let (qs, rc) = (self.qs.clone(), self.rc);
                let stagger = self.timeouts.recovery_stagger;
                let pi = self.proposer_instance(p, instance);
                pi.max_round = pi.max_round.max(round);
                let step = pi.learner.on_p2b(from, round, value, &qs, &rc);
                let mut note = String::from("recorded");
                if let Some(d) = step.decision {
                    pi.decided.get_or_insert(d);
                    note = format!("decided {} in {}", d.value, d.round);
                }
                if let Some(failed) = step.conflict {
                    if pi.decided.is_none() && pi.coord.pending().is_some() {
                        out.timers.push((stagger * u64::from(p.0), p, Timer::Recover { instance, failed }));
                        note = format!("conflict in {failed}");
                    }
                }
                if let Some(d) = step.decision {
                    self.trace.decisions.push(DecisionRecord { time: now, learner: Addr::Proposer(p), instance, round: d.round, value: d.value });
                }
                if let Some(fault) = step.fault {
                    self.fault(now, Addr::Proposer(p), instance, fault);
                }
                note
            }
            Payload::Decided { round, value } => {
                let pi = self.proposer_instance(p, instance);
                pi.max_round = pi.max_round.max(round);
                pi.decided.get_or_insert(Decision { round, value });
                "learned".into()
            }
            _ => "ignored".into(),
        }
    }

    fn after_phase1(&mut self, now: SimTime, p: ProposerId, instance: Instance, round: Round, step: Phase1Step, out: &mut Outbox) -> String {
        match step {
            Phase1Step::Ignored => "ignored".into(),
            Phase1Step::Waiting => "waiting".into(),
            Phase1Step::Picked { quorum, outcome, p2a } => {
                self.trace.picks.push(PickRecord { time: now, proposer: p, instance, round, quorum, outcome: Some(outcome) });
                out.messages.extend(p2a);
                match (outcome, p2a) {
                    (PickOutcome::Forced(v), _) => format!("forced {v}"),
                    (PickOutcome::Free, Some(_)) => "free".into(),
                    (PickOutcome::Free, None) => "free, awaiting value".into(),
                }
            }
            Phase1Step::Ambiguous { quorum, candidates, promises } => {
                self.trace.picks.push(PickRecord { time: now, proposer: p, instance, round, quorum, outcome: None });
                let choice = plurality(&candidates, &promises);
                self.fault(now, Addr::Proposer(p), instance, Fault::AmbiguousPick { round, candidates });
                let pi = self.proposer_instance(p, instance);
                let msg = pi.coord.resolve(choice).expect("choice is a candidate");
                out.messages.push(msg);
                format!("ambiguous, chose {choice}")
            }
            Phase1Step::Failed(e) => {
                self.fault(now, Addr::Proposer(p), instance, Fault::Pick(e));
                "failed".into()
            }
        }
    }

    /// A client hands `value` to proposer `p` for `instance`; the proposer
    /// sends it straight to the acceptors.
    pub fn submit(&mut self, now: SimTime, p: ProposerId, instance: Instance, value: Value, out: &mut Outbox) {
        self.trace.stats.events += 1;
        self.trace.submissions.push(SubmissionRecord { time: now, proposer: p, instance, value });
        let conflict_timeout = self.timeouts.conflict;
        let first_out = out.messages.len();
        let pi = self.proposer_instance(p, instance);
        let note = if let Some(d) = pi.decided {
            format!("already decided {}", d.value)
        } else {
            out.messages.extend(pi.coord.on_client_value(value));
            out.messages.push(Message { instance, from: Addr::Proposer(p), to: Dest::Acceptors, payload: Payload::Propose { value } });
            out.timers.push((conflict_timeout, p, Timer::ConflictTimeout(instance)));
            "proposed".into()
        };
        if self.trace.full() {
            let sent = render_out(&out.messages[first_out..]);
            self.trace.record(now, Addr::Proposer(p), "submit", || format!("{instance} {value} | {note} | {sent}"));
        }
    }

    /// Proposer `p` begins phase-1 of `round` for `instance`.
    pub fn start_round(&mut self, now: SimTime, p: ProposerId, instance: Instance, round: Round, out: &mut Outbox) {
        self.trace.stats.events += 1;
        let rc = self.rc;
        let pi = self.proposer_instance(p, instance);
        match pi.coord.start_round(round, &rc) {
            Ok(msg) => {
                out.messages.push(msg);
                self.trace.round_starts.push(RoundStart { time: now, proposer: p, instance, round });
                self.trace.record(now, Addr::Proposer(p), "start", || format!("{instance} {}", msg.payload));
            }
            Err(e) => self.trace.record(now, Addr::Proposer(p), "start", || format!("{instance} refused: {e}")),
        }
    }

    pub fn fire(&mut self, now: SimTime, p: ProposerId, timer: Timer, out: &mut Outbox) {
        self.trace.stats.events += 1;
        let (instance, floor, retry) = match timer {
            Timer::ConflictTimeout(i) => (i, Round::NONE, false),
            Timer::Recover { instance, failed } => (instance, failed, false),
            Timer::PhaseTimeout { instance, round } => (instance, round, true),
        };
        let rc = self.rc;
        let Timeouts { phase, recovery_stagger, .. } = self.timeouts;
        let fast_round = self.fast_round;
        let pi = self.proposer_instance(p, instance);
        let skip = if pi.decided.is_some() {
            Some("decided")
        } else if pi.coord.pending().is_none() {
            Some("no value")
        } else if retry && pi.coord.round() != floor {
            Some("superseded")
        } else if !retry && pi.coord.round() > fast_round && !matches!(pi.coord.phase(), Phase::Idle) {
            Some("recovery in progress")
        } else {
            None
        };
        if let Some(reason) = skip {
            self.trace.record(now, Addr::Proposer(p), "timer", || format!("{timer} | skipped: {reason}"));
            return;
        }
        if retry {
            pi.attempts += 1;
        }
        let failed = floor.max(pi.max_round);
        match pi.coord.recover_conflict(failed, &rc) {
            Ok(msg) => {
                let Payload::P1a { round } = msg.payload else { unreachable!("recovery starts with phase-1a") };
                let backoff = phase * (1u64 << pi.attempts.min(6)) + recovery_stagger * u64::from(p.0);
                out.messages.push(msg);
                out.timers.push((backoff, p, Timer::PhaseTimeout { instance, round }));
                self.trace.round_starts.push(RoundStart { time: now, proposer: p, instance, round });
                self.trace.record(now, Addr::Proposer(p), "timer", || format!("{timer} | recover with {}", msg.payload));
            }
            Err(e) => self.trace.record(now, Addr::Proposer(p), "timer", || format!("{timer} | {e}")),
        }
    }
}

/// Candidate with the most votes at the highest reported round, lowest
/// value on ties.
fn plurality(candidates: &[Value], promises: &[Promise]) -> Value {
    let k = promises.iter().map(|p| p.vrnd).max().unwrap_or(Round::NONE);
    let count = |v: Value| promises.iter().filter(|p| p.vrnd == k && p.vval == Some(v)).count();
    *candidates
        .iter()
        .max_by(|a, b| count(**a).cmp(&count(**b)).then(b.cmp(a)))
        .expect("ambiguous pick has candidates")
}

fn render_out(msgs: &[Message]) -> String {
    if msgs.is_empty() {
        return "-".into();
    }
    msgs.iter().map(|m| format!("{}->{}", m.payload, m.to)).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plurality_prefers_more_votes_then_lower_value() {
        let p = |from: u8, v: u64| Promise { from: NodeId(from), round: Round(5), vrnd: Round(2), vval: Some(Value(v)) };
        assert_eq!(plurality(&[Value(1), Value(2)], &[p(0, 1), p(1, 2), p(2, 2)]), Value(2));
        assert_eq!(plurality(&[Value(1), Value(2)], &[p(0, 1), p(1, 2)]), Value(1));
    }
}
