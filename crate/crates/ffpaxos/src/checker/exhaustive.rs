//! Exhaustive exploration of a tiny single-instance model.
//!
//! Messages are never consumed: the network is the growing set of every
//! message ever sent, and any message may be delivered to any of its
//! recipients at any time, any number of times. Drops, duplicates and all
//! reorderings are covered by that one rule. A value counts as chosen as
//! soon as the set holds phase-2b messages for it from a phase-2 quorum of
//! the round's kind.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;
use std::hash::{Hash, Hasher};

use ffpaxos_core::{
    AcceptorState, Addr, Classification, Coordinator, Dest, Family, Instance, Message, NodeId, NodeSet, Ownership,
    Payload, Phase, Phase1Step, PickOutcome, Promise, ProposerId, QuorumSystem, Round, RoundConfig, RoundKind, Value,
};
use serde::Serialize;

const I: Instance = Instance(0);

/// One coordinated round and the client value its owner holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RoundPlan {
    pub round: Round,
    pub value: Value,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TinyModel {
    pub quorums: QuorumSystem,
    pub rounds: RoundConfig,
    pub plan: Vec<RoundPlan>,
    /// Values sent directly to acceptors, one per proposer.
    pub direct: Vec<Value>,
}

#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("tiny model allows at most 3 acceptors, 2 proposers, 2 values and 2 rounds")]
    TooLarge,
    #[error("round {0} appears twice in the plan")]
    DuplicateRound(Round),
}

impl TinyModel {
    /// Fast round 2 owned by p0 (client value X) followed by classic round 3
    /// owned by p1 (client value Y); both clients also propose directly.
    pub fn standard(quorums: QuorumSystem) -> Self {
        let (x, y) = (Value(1), Value(2));
        TinyModel {
            quorums,
            rounds: RoundConfig::with_rules(2, Classification::EvenFast, Ownership::Modulo),
            plan: vec![RoundPlan { round: Round(2), value: x }, RoundPlan { round: Round(3), value: y }],
            direct: vec![x, y],
        }
    }

    fn check(&self) -> Result<(), ModelError> {
        let values: BTreeSet<Value> = self.plan.iter().map(|p| p.value).chain(self.direct.iter().copied()).collect();
        if self.quorums.n() > 3 || self.rounds.proposers > 2 || values.len() > 2 || self.plan.len() > 2 || self.direct.len() > 2 {
            return Err(ModelError::TooLarge);
        }
        let mut seen = BTreeSet::new();
        for p in &self.plan {
            if !seen.insert(p.round) {
                return Err(ModelError::DuplicateRound(p.round));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Limits {
    /// Longest action sequence explored.
    pub depth: usize,
    pub max_states: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { depth: usize::MAX, max_states: 10_000_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExhaustiveViolation {
    pub invariant: &'static str,
    pub detail: String,
    /// Actions from the initial state.
    pub trail: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ExhaustiveSummary {
    pub states: u64,
    pub transitions: u64,
    pub max_depth: usize,
    /// False when a bound cut the search short.
    pub complete: bool,
    /// Phase-1 completions checked against earlier choices.
    pub picks_checked: u64,
    /// Picks made while some value was already chosen in a lower round.
    pub picks_after_choice: u64,
    pub states_with_choice: u64,
    /// First violation found per invariant.
    pub violations: Vec<ExhaustiveViolation>,
}

impl ExhaustiveSummary {
    pub fn clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn found(&self, invariant: &str) -> bool {
        self.violations.iter().any(|v| v.invariant == invariant)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct State {
    acceptors: Vec<AcceptorState>,
    msgs: BTreeSet<Message>,
    coords: Vec<Coordinator>,
    started: Vec<bool>,
}

#[derive(Clone, Debug)]
enum Action {
    Start(usize),
    Deliver(Addr, Message),
    Resolve(usize, Value),
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Start(i) => write!(f, "start plan #{i}"),
            Action::Deliver(to, m) => write!(f, "deliver {} from {} to {to}", m.payload, m.from),
            Action::Resolve(i, v) => write!(f, "plan #{i} resolves to {v}"),
        }
    }
}

fn fingerprint(s: &State) -> u128 {
    let mut a = DefaultHasher::new();
    let mut b = DefaultHasher::new();
    0xa5u8.hash(&mut b);
    s.hash(&mut a);
    s.hash(&mut b);
    (u128::from(a.finish()) << 64) | u128::from(b.finish())
}

/// Values chosen in each round, by round.
fn chosen(msgs: &BTreeSet<Message>, qs: &QuorumSystem, rc: &RoundConfig) -> BTreeMap<Round, BTreeSet<Value>> {
    let mut voters: BTreeMap<(Round, Value), NodeSet> = BTreeMap::new();
    for m in msgs {
        if let (Payload::P2b { round, value }, Addr::Acceptor(a)) = (m.payload, m.from) {
            voters.entry((round, value)).or_default().insert(a);
        }
    }
    let mut out: BTreeMap<Round, BTreeSet<Value>> = BTreeMap::new();
    for ((round, value), set) in voters {
        let family = match rc.kind(round) {
            RoundKind::Classic => Family::Phase2Classic,
            RoundKind::Fast => Family::Phase2Fast,
        };
        if qs.is_quorum(family, set) {
            out.entry(round).or_default().insert(value);
        }
    }
    out
}

struct Explorer<'a> {
    model: &'a TinyModel,
    proposed: BTreeSet<Value>,
    summary: ExhaustiveSummary,
    trail: Vec<(u32, Option<Action>)>,
}

impl Explorer<'_> {
    fn violate(&mut self, invariant: &'static str, detail: String, at: u32, last: Option<&Action>) {
        if self.summary.found(invariant) {
            return;
        }
        let mut trail = Vec::new();
        let mut i = at;
        loop {
            let (parent, action) = &self.trail[i as usize];
            match action {
                Some(a) => trail.push(a.to_string()),
                None => break,
            }
            i = *parent;
        }
        trail.reverse();
        trail.extend(last.map(|a| a.to_string()));
        self.summary.violations.push(ExhaustiveViolation { invariant, detail, trail });
    }

    fn check_state(&mut self, s: &State, at: u32) {
        let ch = chosen(&s.msgs, &self.model.quorums, &self.model.rounds);
        if ch.is_empty() {
            return;
        }
        self.summary.states_with_choice += 1;
        let values: BTreeSet<Value> = ch.values().flatten().copied().collect();
        if values.len() > 1 {
            let detail = format!("chosen: {ch:?}");
            let per_round = ch.values().any(|v| v.len() > 1);
            if per_round {
                self.violate("per-round-agreement", detail.clone(), at, None);
            }
            self.violate("agreement", detail, at, None);
        }
        if let Some(v) = values.iter().find(|v| !self.proposed.contains(v)) {
            self.violate("validity", format!("{v} chosen but never proposed"), at, None);
        }
    }

    /// All successors of `s`, with any violation found while computing them.
    fn successors(&mut self, s: &State, at: u32) -> Vec<(Action, State)> {
        let m = self.model;
        let mut out = Vec::new();
        for (i, plan) in m.plan.iter().enumerate() {
            if !s.started[i] {
                let mut t = s.clone();
                t.started[i] = true;
                if let Ok(msg) = t.coords[i].start_round(plan.round, &m.rounds) {
                    t.msgs.insert(msg);
                }
                out.push((Action::Start(i), t));
            }
        }
        for msg in &s.msgs {
            match msg.payload {
                Payload::P1a { .. } | Payload::P2a { .. } | Payload::Propose { .. } => {
                    for (a, st) in s.acceptors.iter().enumerate() {
                        let me = NodeId(a as u8);
                        let Ok((next, reply)) = st.handle(me, msg, &m.rounds) else { continue };
                        if next == *st && reply.is_none_or(|r| s.msgs.contains(&r)) {
                            continue;
                        }
                        let mut t = s.clone();
                        t.acceptors[a] = next;
                        t.msgs.extend(reply);
                        out.push((Action::Deliver(Addr::Acceptor(me), *msg), t));
                    }
                }
                Payload::P1b { round, vrnd, vval } => {
                    let (Dest::To(to), Addr::Acceptor(from)) = (msg.to, msg.from) else { continue };
                    let Some(i) = m.plan.iter().position(|p| p.round == round) else { continue };
                    let mut t = s.clone();
                    let step = t.coords[i].on_p1b(Promise { from, round, vrnd, vval }, &m.quorums, &m.rounds);
                    let action = Action::Deliver(to, *msg);
                    match step {
                        Phase1Step::Ignored => continue,
                        Phase1Step::Waiting => {}
                        Phase1Step::Picked { outcome, p2a, .. } => {
                            self.check_pick(s, round, Some(outcome), at, &action);
                            t.msgs.extend(p2a);
                        }
                        Phase1Step::Ambiguous { candidates, .. } => {
                            self.check_pick(s, round, None, at, &action);
                            self.violate("o4-uniqueness", format!("{} values possible in {round}: {candidates:?}", candidates.len()), at, Some(&action));
                        }
                        Phase1Step::Failed(e) => {
                            self.violate("pick-precondition", e.to_string(), at, Some(&action));
                        }
                    }
                    out.push((action, t));
                }
                _ => {}
            }
        }
        for (i, c) in s.coords.iter().enumerate() {
            if let Phase::Ambiguous(candidates) = c.phase() {
                for &v in candidates {
                    let mut t = s.clone();
                    let msg = t.coords[i].resolve(v).expect("candidate");
                    t.msgs.insert(msg);
                    out.push((Action::Resolve(i, v), t));
                }
            }
        }
        out
    }

    /// A pick in `round` must force any value already chosen below it.
    fn check_pick(&mut self, s: &State, round: Round, outcome: Option<PickOutcome>, at: u32, action: &Action) {
        self.summary.picks_checked += 1;
        let ch = chosen(&s.msgs, &self.model.quorums, &self.model.rounds);
        let earlier: BTreeSet<Value> = ch.range(..round).flat_map(|(_, v)| v.iter().copied()).collect();
        if earlier.is_empty() {
            return;
        }
        self.summary.picks_after_choice += 1;
        for v in earlier {
            if outcome != Some(PickOutcome::Forced(v)) {
                self.violate("pick-soundness", format!("{v} chosen below {round} but pick gave {outcome:?}"), at, Some(action));
            }
        }
    }
}

/// Breadth-first search over every reachable state of `model`.
pub fn exhaustive_explore(model: &TinyModel, limits: Limits) -> Result<ExhaustiveSummary, ModelError> {
    model.check()?;
    let coords = model
        .plan
        .iter()
        .map(|p| {
            let mut c = Coordinator::new(model.rounds.owner(p.round), I);
            c.on_client_value(p.value);
            c
        })
        .collect();
    let msgs = model
        .direct
        .iter()
        .enumerate()
        .map(|(p, &value)| Message {
            instance: I,
            from: Addr::Proposer(ProposerId(p as u16)),
            to: Dest::Acceptors,
            payload: Payload::Propose { value },
        })
        .collect();
    let init = State {
        acceptors: vec![AcceptorState::default(); model.quorums.n()],
        msgs,
        coords,
        started: vec![false; model.plan.len()],
    };
    let proposed = model.plan.iter().map(|p| p.value).chain(model.direct.iter().copied()).collect();
    let mut ex = Explorer { model, proposed, summary: ExhaustiveSummary { complete: true, ..Default::default() }, trail: vec![(0, None)] };
    let mut seen: HashSet<u128> = HashSet::new();
    seen.insert(fingerprint(&init));
    ex.summary.states = 1;
    ex.check_state(&init, 0);
    let mut queue = VecDeque::from([(init, 0usize, 0u32)]);
    while let Some((s, depth, at)) = queue.pop_front() {
        ex.summary.max_depth = ex.summary.max_depth.max(depth);
        let next = ex.successors(&s, at);
        if depth >= limits.depth {
            if !next.is_empty() {
                ex.summary.complete = false;
            }
            continue;
        }
        for (action, t) in next {
            ex.summary.transitions += 1;
            if !seen.insert(fingerprint(&t)) {
                continue;
            }
            if seen.len() > limits.max_states {
                ex.summary.complete = false;
                return Ok(ex.summary);
            }
            ex.summary.states += 1;
            let id = ex.trail.len() as u32;
            ex.trail.push((at, Some(action)));
            ex.check_state(&t, id);
            queue.push_back((t, depth + 1, id));
        }
    }
    Ok(ex.summary)
}
