//! Seeded discrete-event simulation of a small mining network.

pub mod config;
pub mod engine;
pub mod rules;

pub use config::{ConfigError, MinerStrategy, PropagationDelay, SimulationConfig, StrategyKind};
pub use engine::{
    chain_digest, run_simulation, write_jsonl, BlockRecord, EventKind, SimulationEvent, SimulationOutcome,
    SimulationStats, Simulator,
};
pub use rules::{median_past_11, network_time, validate_block_timestamp, NodeClock};
