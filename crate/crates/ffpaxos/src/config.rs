//! The TOML experiment file shared by every command.

use std::path::Path;

use ffpaxos_core::{
    validate_fast_flexible, validate_fast_paxos, validate_flexible, validate_paxos, Addr, Classification,
    LegacyQuorumSystem, NodeId, NodeSet, Ownership, ProposerId, QuorumError, QuorumSystem, Quorums, RoundConfig,
    Scheme, ValidationReport,
};
use serde::Deserialize;

use crate::bench::{BenchSystem, WorkloadSpec};
use crate::checker::Adversary;
use crate::simnet::{FastStart, Jitter, LinkModel, Partition, SimConfig, SimTime, Timeouts, TraceLevel};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid quorums: {0}")]
    Quorum(#[from] QuorumError),
    #[error("{0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub allow_invalid: bool,
    pub cluster: ClusterSection,
    pub quorums: QuorumSection,
    #[serde(default)]
    pub rounds: RoundsSection,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub workload: WorkloadSection,
    #[serde(default)]
    pub checker: CheckerSection,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ClusterSection {
    pub n: usize,
    #[serde(default = "default_proposers")]
    pub proposers: u16,
    #[serde(default = "default_learners")]
    pub learners: u16,
}

fn default_proposers() -> u16 {
    2
}

fn default_learners() -> u16 {
    1
}

/// Either sizes or explicit node lists, depending on the scheme.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct QuorumSection {
    pub scheme: Scheme,
    pub q: Option<usize>,
    pub q1: Option<usize>,
    pub q2: Option<usize>,
    pub q2c: Option<usize>,
    pub q2f: Option<usize>,
    pub qc: Option<usize>,
    pub qf: Option<usize>,
    pub p1: Option<Vec<Vec<u8>>>,
    pub p2c: Option<Vec<Vec<u8>>>,
    pub p2f: Option<Vec<Vec<u8>>>,
    pub classic: Option<Vec<Vec<u8>>>,
    pub fast: Option<Vec<Vec<u8>>>,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum FastStartKey {
    #[default]
    Prepared,
    Explicit,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RoundsSection {
    #[serde(default)]
    pub classification: Classification,
    #[serde(default)]
    pub ownership: Ownership,
    #[serde(default)]
    pub fast_start: FastStartKey,
    #[serde(default = "default_conflict_timeout")]
    pub conflict_timeout_ms: f64,
    #[serde(default = "default_phase_timeout")]
    pub phase_timeout_ms: f64,
    #[serde(default = "default_stagger")]
    pub recovery_stagger_ms: f64,
}

fn default_conflict_timeout() -> f64 {
    Timeouts::default().conflict.as_ms()
}

fn default_phase_timeout() -> f64 {
    Timeouts::default().phase.as_ms()
}

fn default_stagger() -> f64 {
    Timeouts::default().recovery_stagger.as_ms()
}

impl Default for RoundsSection {
    fn default() -> Self {
        RoundsSection {
            classification: Classification::default(),
            ownership: Ownership::default(),
            fast_start: FastStartKey::default(),
            conflict_timeout_ms: default_conflict_timeout(),
            phase_timeout_ms: default_phase_timeout(),
            recovery_stagger_ms: default_stagger(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum JitterKind {
    #[default]
    None,
    Uniform,
    Exponential,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    #[serde(default = "default_base")]
    pub base_ms: f64,
    #[serde(default)]
    pub jitter: JitterKind,
    pub jitter_lo_ms: Option<f64>,
    pub jitter_hi_ms: Option<f64>,
    pub jitter_mean_ms: Option<f64>,
}

fn default_base() -> f64 {
    5.0
}

impl LinkSection {
    fn model(&self) -> Result<LinkModel, ConfigError> {
        let need = |v: Option<f64>, key: &str| v.ok_or_else(|| ConfigError::Invalid(format!("jitter needs {key}")));
        let jitter = match self.jitter {
            JitterKind::None => Jitter::None,
            JitterKind::Uniform => Jitter::Uniform { lo_ms: need(self.jitter_lo_ms, "jitter_lo_ms")?, hi_ms: need(self.jitter_hi_ms, "jitter_hi_ms")? },
            JitterKind::Exponential => Jitter::Exponential { mean_ms: need(self.jitter_mean_ms, "jitter_mean_ms")? },
        };
        Ok(LinkModel { base_ms: self.base_ms, jitter })
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LinkOverride {
    pub from: String,
    pub to: String,
    #[serde(flatten)]
    pub link: LinkSection,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PartitionSection {
    pub start_ms: f64,
    pub end_ms: f64,
    /// Node names (`a0`, `p1`, `l0`) on one side of the cut.
    pub side: Vec<String>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    #[serde(flatten)]
    pub link: LinkSection,
    #[serde(default)]
    pub drop: f64,
    #[serde(default)]
    pub dup: f64,
    #[serde(default)]
    pub partitions: Vec<PartitionSection>,
    #[serde(default)]
    pub links: Vec<LinkOverride>,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection {
            link: LinkSection { base_ms: default_base(), jitter: JitterKind::None, jitter_lo_ms: None, jitter_hi_ms: None, jitter_mean_ms: None },
            drop: 0.0,
            dup: 0.0,
            partitions: Vec::new(),
            links: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSection {
    #[serde(default = "default_rate")]
    pub rate: f64,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    pub clients: Option<u16>,
    #[serde(default = "default_conflict_fraction")]
    pub conflict_fraction: f64,
    #[serde(default)]
    pub race_gap_ms: f64,
    #[serde(default)]
    pub arrival_jitter_ms: f64,
    /// Gaps for the conflict sweep.
    #[serde(default = "default_intervals")]
    pub sweep_intervals_ms: Vec<f64>,
    #[serde(default = "default_bench_seeds")]
    pub seeds: u64,
}

fn default_rate() -> f64 {
    1400.0
}

fn default_duration() -> f64 {
    1.0
}

fn default_conflict_fraction() -> f64 {
    0.10
}

fn default_intervals() -> Vec<f64> {
    vec![0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0]
}

fn default_bench_seeds() -> u64 {
    1
}

impl Default for WorkloadSection {
    fn default() -> Self {
        WorkloadSection {
            rate: default_rate(),
            duration_s: default_duration(),
            clients: None,
            conflict_fraction: default_conflict_fraction(),
            race_gap_ms: 0.0,
            arrival_jitter_ms: 0.0,
            sweep_intervals_ms: default_intervals(),
            seeds: default_bench_seeds(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CheckerSection {
    #[serde(default = "default_seeds")]
    pub seeds: u64,
    /// Client requests per explored run.
    #[serde(default = "default_requests")]
    pub requests: u64,
    #[serde(default = "default_explore_conflicts")]
    pub conflict_fraction: f64,
    #[serde(default = "default_horizon")]
    pub horizon_ms: f64,
    #[serde(default = "default_drop")]
    pub drop: f64,
    #[serde(default = "default_dup")]
    pub dup: f64,
    #[serde(default = "default_jitter_factor")]
    pub jitter_factor: f64,
    #[serde(default = "default_true")]
    pub partitions: bool,
    pub depth: Option<usize>,
    #[serde(default = "default_max_states")]
    pub max_states: usize,
}

fn default_seeds() -> u64 {
    1000
}

fn default_requests() -> u64 {
    8
}

fn default_explore_conflicts() -> f64 {
    0.5
}

fn default_horizon() -> f64 {
    3000.0
}

fn default_drop() -> f64 {
    Adversary::default().drop
}

fn default_dup() -> f64 {
    Adversary::default().dup
}

fn default_jitter_factor() -> f64 {
    Adversary::default().jitter_factor
}

fn default_true() -> bool {
    true
}

fn default_max_states() -> usize {
    10_000_000
}

impl Default for CheckerSection {
    fn default() -> Self {
        CheckerSection {
            seeds: default_seeds(),
            requests: default_requests(),
            conflict_fraction: default_explore_conflicts(),
            horizon_ms: default_horizon(),
            drop: default_drop(),
            dup: default_dup(),
            jitter_factor: default_jitter_factor(),
            partitions: true,
            depth: None,
            max_states: default_max_states(),
        }
    }
}

/// Parses a node name such as `a3`, `p0` or `l1`.
pub fn parse_addr(s: &str) -> Option<Addr> {
    let (kind, idx) = s.split_at_checked(1)?;
    let idx: u16 = idx.parse().ok()?;
    match kind {
        "a" => u8::try_from(idx).ok().map(|i| Addr::Acceptor(NodeId(i))),
        "p" => Some(Addr::Proposer(ProposerId(idx))),
        "l" => Some(Addr::Learner(idx)),
        _ => None,
    }
}

fn sets(n: usize, raw: &[Vec<u8>], key: &str) -> Result<Quorums, ConfigError> {
    let mut out = Vec::new();
    for q in raw {
        if let Some(bad) = q.iter().find(|&&a| usize::from(a) >= n) {
            return invalid(format!("{key} names node {bad}, but n = {n}"));
        }
        out.push(q.iter().collect::<NodeSet>());
    }
    Ok(Quorums::Explicit(out))
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ConfigFile = toml::from_str(text)?;
        cfg.quorum_system()?;
        cfg.sim_config()?;
        Ok(cfg)
    }

    fn n(&self) -> usize {
        self.cluster.n
    }

    fn size(&self, v: Option<usize>, key: &str) -> Result<usize, ConfigError> {
        v.ok_or_else(|| ConfigError::Invalid(format!("scheme {} needs `{key}`", self.quorums.scheme)))
    }

    fn family(&self, size: Option<usize>, list: &Option<Vec<Vec<u8>>>, key: &str) -> Result<Quorums, ConfigError> {
        match (size, list) {
            (Some(_), Some(_)) => invalid(format!("give either a size or explicit sets for {key}, not both")),
            (Some(q), None) => Ok(Quorums::Threshold(q)),
            (None, Some(l)) => sets(self.n(), l, key),
            (None, None) => invalid(format!("scheme {} needs `{key}`", self.quorums.scheme)),
        }
    }

    /// The system simulated for this config. Schemes without fast rounds
    /// use every acceptor as the fast quorum.
    pub fn quorum_system(&self) -> Result<QuorumSystem, ConfigError> {
        let q = &self.quorums;
        let n = self.n();
        let all = Quorums::Threshold(n);
        Ok(match q.scheme {
            Scheme::FastFlexible => QuorumSystem::new(
                n,
                self.family(q.q1, &q.p1, "q1")?,
                self.family(q.q2c, &q.p2c, "q2c")?,
                self.family(q.q2f, &q.p2f, "q2f")?,
            )?,
            Scheme::FastPaxos => self.legacy()?.to_fast_flexible(),
            Scheme::Flexible => {
                QuorumSystem::new(n, Quorums::Threshold(self.size(q.q1, "q1")?), Quorums::Threshold(self.size(q.q2, "q2")?), all)?
            }
            Scheme::Paxos => {
                let size = self.size(q.q, "q")?;
                QuorumSystem::new(n, Quorums::Threshold(size), Quorums::Threshold(size), all)?
            }
        })
    }

    pub fn legacy(&self) -> Result<LegacyQuorumSystem, ConfigError> {
        let q = &self.quorums;
        Ok(LegacyQuorumSystem::new(self.n(), self.family(q.qc, &q.classic, "qc")?, self.family(q.qf, &q.fast, "qf")?)?)
    }

    /// Validation under the config's own scheme.
    pub fn validate(&self) -> Result<ValidationReport, ConfigError> {
        let q = &self.quorums;
        Ok(match q.scheme {
            Scheme::FastFlexible => validate_fast_flexible(&self.quorum_system()?),
            Scheme::FastPaxos => validate_fast_paxos(&self.legacy()?),
            Scheme::Flexible => validate_flexible(self.n(), self.size(q.q1, "q1")?, self.size(q.q2, "q2")?)?,
            Scheme::Paxos => validate_paxos(self.n(), self.size(q.q, "q")?)?,
        })
    }

    pub fn bench_system(&self) -> Result<BenchSystem, ConfigError> {
        Ok(match self.quorums.scheme {
            Scheme::FastPaxos => BenchSystem::FastPaxos(self.legacy()?),
            _ => BenchSystem::FastFlexible(self.quorum_system()?),
        })
    }

    fn addr(&self, name: &str) -> Result<Addr, ConfigError> {
        let a = parse_addr(name).ok_or_else(|| ConfigError::Invalid(format!("bad node name {name:?}")))?;
        let known = match a {
            Addr::Acceptor(id) => id.index() < self.n(),
            Addr::Proposer(p) => p.0 < self.cluster.proposers,
            Addr::Learner(l) => l < self.cluster.learners,
        };
        if !known {
            return invalid(format!("node {name} is outside the cluster"));
        }
        Ok(a)
    }

    pub fn sim_config(&self) -> Result<SimConfig, ConfigError> {
        let mut cfg = SimConfig::new(self.quorum_system()?, self.cluster.proposers);
        cfg.seed = self.seed;
        cfg.learners = self.cluster.learners;
        cfg.rounds = RoundConfig::with_rules(self.cluster.proposers, self.rounds.classification, self.rounds.ownership);
        cfg.link = self.network.link.model()?;
        for o in &self.network.links {
            cfg.link_overrides.push((self.addr(&o.from)?, self.addr(&o.to)?, o.link.model()?));
        }
        cfg.drop = self.network.drop;
        cfg.dup = self.network.dup;
        for p in &self.network.partitions {
            let side = p.side.iter().map(|s| self.addr(s)).collect::<Result<_, _>>()?;
            cfg.partitions.push(Partition { start: SimTime::from_ms(p.start_ms), end: SimTime::from_ms(p.end_ms), side });
        }
        cfg.timeouts = Timeouts {
            conflict: SimTime::from_ms(self.rounds.conflict_timeout_ms),
            phase: SimTime::from_ms(self.rounds.phase_timeout_ms),
            recovery_stagger: SimTime::from_ms(self.rounds.recovery_stagger_ms),
        };
        cfg.fast_start = match self.rounds.fast_start {
            FastStartKey::Prepared => FastStart::Prepared,
            FastStartKey::Explicit => FastStart::Explicit,
        };
        cfg.allow_invalid = self.allow_invalid;
        cfg.trace_level = TraceLevel::Full;
        Ok(cfg)
    }

    pub fn workload_spec(&self) -> WorkloadSpec {
        let w = &self.workload;
        WorkloadSpec {
            rate: w.rate,
            duration_s: w.duration_s,
            clients: w.clients.unwrap_or(self.cluster.proposers),
            conflict_fraction: w.conflict_fraction,
            race_gap_ms: w.race_gap_ms,
            arrival_jitter_ms: w.arrival_jitter_ms,
        }
    }

    /// The short workload each explored seed runs.
    pub fn explore_spec(&self) -> WorkloadSpec {
        let base = self.workload_spec();
        let rate = if base.rate > 0.0 { base.rate } else { default_rate() };
        WorkloadSpec {
            rate,
            duration_s: self.checker.requests as f64 / rate,
            clients: self.cluster.proposers,
            conflict_fraction: self.checker.conflict_fraction,
            ..base
        }
    }

    pub fn adversary(&self) -> Adversary {
        Adversary {
            drop: self.checker.drop,
            dup: self.checker.dup,
            jitter_factor: self.checker.jitter_factor,
            partitions: self.checker.partitions,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FFP: &str = r#"
        [cluster]
        n = 11
        [quorums]
        scheme = "fast-flexible"
        q1 = 9
        q2c = 3
        q2f = 7
    "#;

    #[test]
    fn minimal_config_parses() {
        let cfg = ConfigFile::parse(FFP).unwrap();
        assert!(cfg.validate().unwrap().is_valid());
        assert_eq!(cfg.quorum_system().unwrap().thresholds(), Some((9, 3, 7)));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{FFP}\nq3 = 1\n");
        assert!(matches!(ConfigFile::parse(&text), Err(ConfigError::Parse(_))));
        let text = FFP.replace("[cluster]", "[cluster]\nspeed = 3");
        assert!(matches!(ConfigFile::parse(&text), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn out_of_range_nodes_are_rejected() {
        let text = r#"
            [cluster]
            n = 3
            [quorums]
            scheme = "fast-flexible"
            p1 = [[0, 1], [1, 3]]
            p2c = [[0, 1]]
            p2f = [[0, 1, 2]]
        "#;
        assert!(matches!(ConfigFile::parse(text), Err(ConfigError::Invalid(_))));
        let part = format!("{FFP}\n[network]\n[[network.partitions]]\nstart_ms = 0\nend_ms = 1\nside = [\"a11\"]\n");
        assert!(matches!(ConfigFile::parse(&part), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn node_names() {
        assert_eq!(parse_addr("a3"), Some(Addr::Acceptor(NodeId(3))));
        assert_eq!(parse_addr("p1"), Some(Addr::Proposer(ProposerId(1))));
        assert_eq!(parse_addr("l0"), Some(Addr::Learner(0)));
        assert_eq!(parse_addr("x1"), None);
        assert_eq!(parse_addr("a"), None);
    }
}
