//! Consensus timestamp rules: median-time-past and the network-time bound.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::BlockHeader;

/// Number of ancestors considered by the median-time-past rule.
pub const MEDIAN_WINDOW: usize = 11;
/// Largest correction the peer median may apply to a node's local clock.
pub const MAX_CLOCK_ADJUSTMENT: i64 = 70 * 60;
/// How far past network time a block timestamp may be.
pub const MAX_FUTURE_DRIFT: i64 = 2 * 60 * 60;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuleError {
    #[error("median-time-past needs at least one header")]
    NoHeaders,
}

/// Lower-middle median of a non-empty list.
pub fn lower_median<T: Ord + Copy>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    Some(sorted[(sorted.len() - 1) / 2])
}

/// Median timestamp of the last (up to) eleven headers in `headers`.
pub fn median_past_11(headers: &[BlockHeader]) -> Result<u64, RuleError> {
    let start = headers.len().saturating_sub(MEDIAN_WINDOW);
    let stamps: Vec<u64> = headers[start..].iter().map(|h| h.timestamp).collect();
    lower_median(&stamps).ok_or(RuleError::NoHeaders)
}

/// A node's view of time: its own clock plus the offsets its peers report.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NodeClock {
    pub local_time: u64,
    pub peer_offsets: Vec<i64>,
}

impl NodeClock {
    pub fn new(local_time: u64, peer_offsets: Vec<i64>) -> Self {
        NodeClock {
            local_time,
            peer_offsets,
        }
    }

    /// Peer-median correction, clamped to ±70 minutes.
    pub fn adjustment(&self) -> i64 {
        lower_median(&self.peer_offsets)
            .unwrap_or(0)
            .clamp(-MAX_CLOCK_ADJUSTMENT, MAX_CLOCK_ADJUSTMENT)
    }

    pub fn network_time(&self) -> u64 {
        (self.local_time as i64).saturating_add(self.adjustment()).max(0) as u64
    }
}

pub fn network_time(clock: &NodeClock) -> u64 {
    clock.network_time()
}

/// Both consensus timestamp rules:
/// `candidate > median_past_11(prev)` and `candidate - 2h < network_time`.
///
/// An empty `prev_headers` (a block directly on genesis with no history
/// supplied) satisfies the median rule vacuously.
pub fn validate_block_timestamp(candidate: u64, prev_headers: &[BlockHeader], clock: &NodeClock) -> bool {
    let above_median = match median_past_11(prev_headers) {
        Ok(median) => candidate > median,
        Err(RuleError::NoHeaders) => true,
    };
    let not_too_far = (candidate as i128) - (MAX_FUTURE_DRIFT as i128) < clock.network_time() as i128;
    above_median && not_too_far
}
