//! Simulator, safety checker and benchmark harness for Fast Flexible Paxos.

pub mod simnet;
pub mod checker;
pub mod bench;
pub mod config;
pub mod cli;
