//! Safety checking: trace monitors, randomized exploration, exhaustive
//! exploration of a tiny model and scripted counterexamples.

pub mod exhaustive;
pub mod explore;
pub mod monitor;
pub mod scenario;

pub use exhaustive::{exhaustive_explore, ExhaustiveSummary, Limits, TinyModel};
pub use explore::{explore, Adversary, ExploreSummary};
pub use monitor::{all_pass, monitor, Invariant, MonitorVerdict};
pub use scenario::{run_scenario, scripted_counterexample, Scenario, ScenarioError};
