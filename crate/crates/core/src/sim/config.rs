use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::Digest;

pub const DEFAULT_BLOCK_INTERVAL: u64 = 600;
pub const DEFAULT_PROPAGATION_DELAY: u64 = 2;
pub const DEFAULT_GENESIS_TIME: u64 = 1_700_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid simulation config field `{field}`: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    #[default]
    Honest,
    ShiftFixed,
    ShiftMaxFuture,
    ShiftMaxPast,
    CensorCommitments,
}

/// How a miner stamps and fills its blocks.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinerStrategy {
    pub kind: StrategyKind,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub shift_seconds: i64,
    /// Payloads to refuse. `None` refuses every commitment transaction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub censor_targets: Option<Vec<Digest>>,
}

fn is_zero(v: &i64) -> bool {
    *v == 0
}

impl MinerStrategy {
    pub fn honest() -> Self {
        MinerStrategy::default()
    }

    pub fn shift_fixed(shift_seconds: i64) -> Self {
        MinerStrategy {
            kind: StrategyKind::ShiftFixed,
            shift_seconds,
            censor_targets: None,
        }
    }

    pub fn shift_max_future() -> Self {
        MinerStrategy {
            kind: StrategyKind::ShiftMaxFuture,
            ..Default::default()
        }
    }

    pub fn shift_max_past() -> Self {
        MinerStrategy {
            kind: StrategyKind::ShiftMaxPast,
            ..Default::default()
        }
    }

    pub fn censor_all() -> Self {
        MinerStrategy {
            kind: StrategyKind::CensorCommitments,
            ..Default::default()
        }
    }

    pub fn censor_targets(targets: Vec<Digest>) -> Self {
        MinerStrategy {
            kind: StrategyKind::CensorCommitments,
            shift_seconds: 0,
            censor_targets: Some(targets),
        }
    }

    pub fn is_honest(&self) -> bool {
        self.kind == StrategyKind::Honest
    }

    /// Whether this miner refuses to include `tx`.
    pub fn censors(&self, tx: &crate::model::Transaction) -> bool {
        if self.kind != StrategyKind::CensorCommitments || !tx.is_commitment() {
            return false;
        }
        match &self.censor_targets {
            None => true,
            Some(targets) => targets
                .iter()
                .any(|t| !tx.payload().is_empty() && t.0.starts_with(tx.payload())),
        }
    }
}

/// Uniform integer propagation delay in `[min, max]` seconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationDelay {
    pub min: u64,
    pub max: u64,
}

impl Default for PropagationDelay {
    fn default() -> Self {
        PropagationDelay {
            min: DEFAULT_PROPAGATION_DELAY,
            max: DEFAULT_PROPAGATION_DELAY,
        }
    }
}

impl PropagationDelay {
    pub fn constant(seconds: u64) -> Self {
        PropagationDelay {
            min: seconds,
            max: seconds,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub seed: u64,
    pub miner_count: usize,
    /// One entry per miner; empty means every miner is honest.
    #[serde(default)]
    pub adversary_strategy: Vec<MinerStrategy>,
    #[serde(default = "default_interval")]
    pub mean_block_interval: u64,
    #[serde(default)]
    pub propagation_delay: PropagationDelay,
    /// Each miner's clock is off true time by a uniform draw in `[-clock_drift, clock_drift]`.
    #[serde(default)]
    pub clock_drift: u64,
    pub run_length: u64,
    #[serde(default = "default_genesis")]
    pub genesis_time: u64,
    /// Relative hash power per miner; empty means equal shares.
    #[serde(default)]
    pub hash_share: Vec<f64>,
    /// Forced producers for heights 1, 2, ...; later heights are drawn by share.
    #[serde(default)]
    pub miner_schedule: Vec<usize>,
    /// Filler payment transactions per block.
    #[serde(default = "default_background")]
    pub background_txs: usize,
}

fn default_interval() -> u64 {
    DEFAULT_BLOCK_INTERVAL
}

fn default_genesis() -> u64 {
    DEFAULT_GENESIS_TIME
}

fn default_background() -> usize {
    2
}

impl SimulationConfig {
    pub fn honest(seed: u64, miner_count: usize, run_length: u64) -> Self {
        SimulationConfig {
            seed,
            miner_count,
            adversary_strategy: Vec::new(),
            mean_block_interval: DEFAULT_BLOCK_INTERVAL,
            propagation_delay: PropagationDelay::default(),
            clock_drift: 0,
            run_length,
            genesis_time: DEFAULT_GENESIS_TIME,
            hash_share: Vec::new(),
            miner_schedule: Vec::new(),
            background_txs: default_background(),
        }
    }

    pub fn strategy(&self, miner: usize) -> MinerStrategy {
        self.adversary_strategy.get(miner).cloned().unwrap_or_default()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.miner_count == 0 {
            return Err(ConfigError::new("miner_count", "must be positive"));
        }
        if !self.adversary_strategy.is_empty() && self.adversary_strategy.len() != self.miner_count {
            return Err(ConfigError::new(
                "adversary_strategy",
                format!(
                    "expected {} entries (one per miner), got {}",
                    self.miner_count,
                    self.adversary_strategy.len()
                ),
            ));
        }
        if self.mean_block_interval == 0 {
            return Err(ConfigError::new("mean_block_interval", "must be positive"));
        }
        if self.propagation_delay.min > self.propagation_delay.max {
            return Err(ConfigError::new("propagation_delay", "min exceeds max"));
        }
        if !self.hash_share.is_empty() {
            if self.hash_share.len() != self.miner_count {
                return Err(ConfigError::new(
                    "hash_share",
                    format!("expected {} entries, got {}", self.miner_count, self.hash_share.len()),
                ));
            }
            if self.hash_share.iter().any(|s| !s.is_finite() || *s < 0.0)
                || self.hash_share.iter().sum::<f64>() <= 0.0
            {
                return Err(ConfigError::new("hash_share", "shares must be non-negative with a positive sum"));
            }
        }
        if let Some(bad) = self.miner_schedule.iter().find(|&&m| m >= self.miner_count) {
            return Err(ConfigError::new(
                "miner_schedule",
                format!("miner index {bad} out of range"),
            ));
        }
        if self.clock_drift > i64::MAX as u64 / 4 {
            return Err(ConfigError::new("clock_drift", "too large"));
        }
        Ok(())
    }
}
