//! Single-threaded event loop producing one linear chain.
//!
//! Randomness comes from two ChaCha20 streams derived from `config.seed`.
//! Stream 0 drives the chain and is consumed in this order:
//!
//! 1. at start, one drift draw per miner (index order);
//! 2. per block: interval, producer selection, propagation delay, header
//!    nonce, then `background_txs` payloads of 32 bytes each.
//!
//! Stream 1 draws the propagation delay of each submitted transaction in
//! submission order, so submissions never perturb block timing.
//!
//! Mining of block `n + 1` starts once block `n` has propagated; a block found
//! earlier would have been stale, so it is never materialized.

use std::io::{self, Write};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::config::{ConfigError, SimulationConfig, StrategyKind};
use super::rules::{median_past_11, validate_block_timestamp, NodeClock, MAX_FUTURE_DRIFT, MEDIAN_WINDOW};
use crate::hash::{sha256, Digest};
use crate::model::{Block, BlockHeader, Transaction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    BlockMined,
    BlockReceived,
    TxSubmitted,
    TxIncluded,
    TxCensored,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationEvent {
    pub sim_time: u64,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub miner: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub txid: Option<Digest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
    /// Header timestamp minus true mining time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deviation: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violation: Option<bool>,
    /// Observer verdict under both consensus timestamp rules.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accepted: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rejected_by: Vec<usize>,
}

impl SimulationEvent {
    fn new(sim_time: u64, kind: EventKind) -> Self {
        SimulationEvent {
            sim_time,
            kind,
            height: None,
            miner: None,
            txid: None,
            timestamp: None,
            deviation: None,
            violation: None,
            accepted: None,
            rejected_by: Vec::new(),
        }
    }
}

/// Ground truth about one block, kept outside the chain itself.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub height: u64,
    /// `None` for genesis.
    pub miner: Option<usize>,
    pub strategy: StrategyKind,
    pub mined_at: u64,
    pub observed_at: u64,
    pub timestamp: u64,
    pub violation: bool,
    pub observer_accepted: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SimulationStats {
    pub blocks: u64,
    pub violations: u64,
    pub consensus_rejections: u64,
    pub censored_txs: u64,
    pub never_included: u64,
}

#[derive(Clone, Debug)]
pub struct SimulationOutcome {
    pub chain: Vec<Block>,
    pub records: Vec<BlockRecord>,
    pub events: Vec<SimulationEvent>,
    pub never_included: Vec<Digest>,
    pub stats: SimulationStats,
}

impl SimulationOutcome {
    /// Hash over every header in order; a compact fingerprint of the chain.
    pub fn chain_digest(&self) -> Digest {
        chain_digest(&self.chain)
    }
}

pub fn chain_digest(chain: &[Block]) -> Digest {
    let bytes: Vec<u8> = chain.iter().flat_map(|b| b.header.to_bytes()).collect();
    sha256(&[&bytes])
}

pub fn write_jsonl<T: Serialize, W: Write>(items: &[T], mut out: W) -> io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Clone, Debug)]
struct PendingTx {
    tx: Transaction,
    arrives_at: u64,
    censored: bool,
}

pub struct Simulator {
    config: SimulationConfig,
    chain_rng: ChaCha20Rng,
    tx_rng: ChaCha20Rng,
    interval: Exp<f64>,
    /// Per-miner drift; the observer (index `miner_count`) runs on true time.
    drifts: Vec<i64>,
    chain: Vec<Block>,
    records: Vec<BlockRecord>,
    events: Vec<SimulationEvent>,
    mempool: Vec<PendingTx>,
    censored_total: u64,
}

impl Simulator {
    pub fn new(config: SimulationConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let mut chain_rng = ChaCha20Rng::seed_from_u64(config.seed);
        let mut tx_rng = ChaCha20Rng::seed_from_u64(config.seed);
        tx_rng.set_stream(1);
        let interval = Exp::new(1.0 / config.mean_block_interval as f64)
            .map_err(|e| ConfigError::new("mean_block_interval", e.to_string()))?;
        let drift = config.clock_drift as i64;
        let mut drifts: Vec<i64> = (0..config.miner_count)
            .map(|_| chain_rng.gen_range(-drift..=drift))
            .collect();
        drifts.push(0);

        let genesis_time = config.genesis_time;
        let genesis = Block::assemble(0, Digest::ZERO, genesis_time, 0, vec![coinbase(0, None)])
            .expect("non-empty body");
        let record = BlockRecord {
            height: 0,
            miner: None,
            strategy: StrategyKind::Honest,
            mined_at: genesis_time,
            observed_at: genesis_time,
            timestamp: genesis_time,
            violation: false,
            observer_accepted: true,
        };
        Ok(Simulator {
            config,
            chain_rng,
            tx_rng,
            interval,
            drifts,
            chain: vec![genesis],
            records: vec![record],
            events: Vec::new(),
            mempool: Vec::new(),
            censored_total: 0,
        })
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    pub fn chain(&self) -> &[Block] {
        &self.chain
    }

    pub fn records(&self) -> &[BlockRecord] {
        &self.records
    }

    pub fn tip(&self) -> &Block {
        self.chain.last().expect("genesis always present")
    }

    pub fn tip_record(&self) -> &BlockRecord {
        self.records.last().expect("genesis always present")
    }

    pub fn is_finished(&self) -> bool {
        self.chain.len() as u64 > self.config.run_length
    }

    /// Queues `tx` as broadcast at `at`; it becomes minable after a
    /// propagation delay.
    pub fn submit(&mut self, tx: Transaction, at: u64) {
        let delay = self.draw_delay_tx();
        let mut ev = SimulationEvent::new(at, EventKind::TxSubmitted);
        ev.txid = Some(tx.txid());
        self.events.push(ev);
        self.mempool.push(PendingTx {
            tx,
            arrives_at: at.saturating_add(delay),
            censored: false,
        });
    }

    fn draw_delay_tx(&mut self) -> u64 {
        let d = self.config.propagation_delay;
        self.tx_rng.gen_range(d.min..=d.max)
    }

    fn clock_for(&self, node: usize, true_time: u64) -> NodeClock {
        let own = self.drifts[node];
        let peer_offsets = self
            .drifts
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != node)
            .map(|(_, d)| d - own)
            .collect();
        NodeClock::new((true_time as i64 + own).max(0) as u64, peer_offsets)
    }

    fn pick_miner(&mut self, height: u64) -> usize {
        let u: f64 = self.chain_rng.gen();
        if let Some(&forced) = self.config.miner_schedule.get(height as usize - 1) {
            return forced;
        }
        let n = self.config.miner_count;
        if self.config.hash_share.is_empty() {
            return ((u * n as f64) as usize).min(n - 1);
        }
        let total: f64 = self.config.hash_share.iter().sum();
        let mut acc = 0.0;
        for (i, share) in self.config.hash_share.iter().enumerate() {
            acc += share / total;
            if u < acc {
                return i;
            }
        }
        n - 1
    }

    fn recent_headers(&self) -> Vec<BlockHeader> {
        let start = self.chain.len().saturating_sub(MEDIAN_WINDOW);
        self.chain[start..].iter().map(|b| b.header).collect()
    }

    /// Mines and propagates the next block. Returns `None` once the
    /// configured run length is reached.
    pub fn mine_block(&mut self) -> Option<&Block> {
        if self.is_finished() {
            return None;
        }
        let height = self.chain.len() as u64;
        let start = self.tip_record().observed_at;
        let wait = self.interval.sample(&mut self.chain_rng).ceil().max(1.0) as u64;
        let mined_at = start + wait;
        let miner = self.pick_miner(height);
        let delay = {
            let d = self.config.propagation_delay;
            self.chain_rng.gen_range(d.min..=d.max)
        };
        let nonce = self.chain_rng.next_u64();
        let mut background = Vec::with_capacity(self.config.background_txs);
        for _ in 0..self.config.background_txs {
            let mut payload = vec![0u8; 32];
            self.chain_rng.fill_bytes(&mut payload);
            background.push(Transaction::payment(payload));
        }

        let strategy = self.config.strategy(miner);
        let recent = self.recent_headers();
        let mtp = median_past_11(&recent).expect("chain is never empty");
        let network_time = self.clock_for(miner, mined_at).network_time();
        let honest_stamp = network_time.max(mtp + 1);
        let timestamp = match strategy.kind {
            StrategyKind::Honest | StrategyKind::CensorCommitments => honest_stamp,
            StrategyKind::ShiftFixed => (network_time as i64).saturating_add(strategy.shift_seconds).max(0) as u64,
            StrategyKind::ShiftMaxFuture => network_time + MAX_FUTURE_DRIFT as u64 - 1,
            StrategyKind::ShiftMaxPast => mtp + 1,
        };
        let deviation = timestamp as i64 - mined_at as i64;
        let violation = deviation.unsigned_abs() > self.config.clock_drift;

        let mut transactions = vec![coinbase(height, Some(miner))];
        transactions.extend(background);
        let mut included_events = Vec::new();
        let mut censored_events = Vec::new();
        let mut remaining = Vec::with_capacity(self.mempool.len());
        for mut pending in std::mem::take(&mut self.mempool) {
            if pending.arrives_at > mined_at {
                remaining.push(pending);
            } else if strategy.censors(&pending.tx) {
                let mut ev = SimulationEvent::new(mined_at, EventKind::TxCensored);
                ev.height = Some(height);
                ev.miner = Some(miner);
                ev.txid = Some(pending.tx.txid());
                censored_events.push(ev);
                if !pending.censored {
                    pending.censored = true;
                    self.censored_total += 1;
                }
                remaining.push(pending);
            } else {
                let mut ev = SimulationEvent::new(mined_at, EventKind::TxIncluded);
                ev.height = Some(height);
                ev.miner = Some(miner);
                ev.txid = Some(pending.tx.txid());
                included_events.push(ev);
                transactions.push(pending.tx);
            }
        }
        self.mempool = remaining;

        let block = Block::assemble(height, self.tip().hash(), timestamp, nonce, transactions)
            .expect("coinbase keeps the body non-empty");

        let observed_at = mined_at + delay;
        let observer = self.config.miner_count;
        let observer_accepted =
            validate_block_timestamp(timestamp, &recent, &self.clock_for(observer, observed_at));
        let rejected_by: Vec<usize> = (0..self.config.miner_count)
            .filter(|&n| n != miner)
            .filter(|&n| !validate_block_timestamp(timestamp, &recent, &self.clock_for(n, observed_at)))
            .collect();

        let mut mined = SimulationEvent::new(mined_at, EventKind::BlockMined);
        mined.height = Some(height);
        mined.miner = Some(miner);
        mined.timestamp = Some(timestamp);
        mined.deviation = Some(deviation);
        mined.violation = Some(violation);
        self.events.push(mined);
        self.events.extend(censored_events);
        self.events.extend(included_events);
        let mut received = SimulationEvent::new(observed_at, EventKind::BlockReceived);
        received.height = Some(height);
        received.accepted = Some(observer_accepted);
        received.rejected_by = rejected_by;
        self.events.push(received);

        self.records.push(BlockRecord {
            height,
            miner: Some(miner),
            strategy: strategy.kind,
            mined_at,
            observed_at,
            timestamp,
            violation,
            observer_accepted,
        });
        self.chain.push(block);
        self.chain.last()
    }

    /// Mines the remaining blocks of the run.
    pub fn run_to_end(&mut self) {
        while self.mine_block().is_some() {}
    }

    pub fn finish(self) -> SimulationOutcome {
        let mut events = self.events;
        events.sort_by_key(|e| e.sim_time);
        let never_included: Vec<Digest> = self.mempool.iter().map(|p| p.tx.txid()).collect();
        let stats = SimulationStats {
            blocks: self.chain.len() as u64 - 1,
            violations: self.records.iter().filter(|r| r.violation).count() as u64,
            consensus_rejections: self.records.iter().filter(|r| !r.observer_accepted).count() as u64,
            censored_txs: self.censored_total,
            never_included: never_included.len() as u64,
        };
        SimulationOutcome {
            chain: self.chain,
            records: self.records,
            events,
            never_included,
            stats,
        }
    }
}

fn coinbase(height: u64, miner: Option<usize>) -> Transaction {
    let mut payload = b"coinbase".to_vec();
    payload.extend_from_slice(&height.to_be_bytes());
    payload.extend_from_slice(&miner.map_or(u64::MAX, |m| m as u64).to_be_bytes());
    Transaction::payment(payload)
}

/// Runs `config` to completion with transactions broadcast at the given times.
pub fn run_simulation(
    config: SimulationConfig,
    injected: &[(u64, Transaction)],
) -> Result<SimulationOutcome, ConfigError> {
    let mut sim = Simulator::new(config)?;
    for (at, tx) in injected {
        sim.submit(tx.clone(), *at);
    }
    sim.run_to_end();
    Ok(sim.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::merkle::{merkle_prove, merkle_verify};
    use crate::model::TxKind;
    use crate::sim::config::MinerStrategy;

    fn commitment_tx(byte: u8) -> Transaction {
        Transaction::new(TxKind::CommitmentOpreturn, vec![byte; 32]).unwrap()
    }

    #[test]
    fn deterministic_for_equal_seed() {
        let a = run_simulation(SimulationConfig::honest(1, 10, 100), &[]).unwrap();
        let b = run_simulation(SimulationConfig::honest(1, 10, 100), &[]).unwrap();
        assert_eq!(a.chain.len(), 101);
        assert_eq!(a.chain_digest(), b.chain_digest());
        assert_eq!(a.events, b.events);
        let c = run_simulation(SimulationConfig::honest(2, 10, 100), &[]).unwrap();
        assert_ne!(a.chain_digest(), c.chain_digest());
    }

    #[test]
    fn chain_is_linked_and_bodies_prove() {
        let mut cfg = SimulationConfig::honest(5, 4, 40);
        cfg.clock_drift = 30;
        let out = run_simulation(cfg, &[(cfg_time(5), commitment_tx(1))]).unwrap();
        for pair in out.chain.windows(2) {
            assert_eq!(pair[1].header.prev_hash, pair[0].hash());
            assert_eq!(pair[1].header.height, pair[0].header.height + 1);
        }
        for block in &out.chain {
            assert!(block.is_consistent());
            for (i, tx) in block.transactions.iter().enumerate() {
                let proof = merkle_prove(&block.transactions, i).unwrap();
                assert!(merkle_verify(&block.header.merkle_root, &tx.txid(), &proof));
            }
        }
    }

    fn cfg_time(offset: u64) -> u64 {
        super::super::config::DEFAULT_GENESIS_TIME + offset
    }

    #[test]
    fn events_are_time_ordered() {
        let out = run_simulation(
            SimulationConfig::honest(3, 3, 30),
            &[(cfg_time(10_000), commitment_tx(2)), (cfg_time(1), commitment_tx(3))],
        )
        .unwrap();
        assert!(out.events.windows(2).all(|w| w[0].sim_time <= w[1].sim_time));
        assert_eq!(out.never_included.len(), 0);
    }

    #[test]
    fn shifted_miner_is_recorded() {
        let mut cfg = SimulationConfig::honest(9, 1, 5);
        cfg.adversary_strategy = vec![MinerStrategy::shift_fixed(3600)];
        let out = run_simulation(cfg, &[]).unwrap();
        for record in &out.records[1..] {
            assert_eq!(record.timestamp, record.mined_at + 3600);
            assert!(record.violation);
            assert!(record.observer_accepted);
        }
        assert_eq!(out.stats.violations, 5);
    }

    #[test]
    fn total_censorship_starves_commitment() {
        let mut cfg = SimulationConfig::honest(4, 2, 20);
        cfg.adversary_strategy = vec![MinerStrategy::censor_all(), MinerStrategy::censor_all()];
        let tx = commitment_tx(7);
        let out = run_simulation(cfg, &[(cfg_time(0), tx.clone())]).unwrap();
        assert_eq!(out.never_included, vec![tx.txid()]);
        assert!(out
            .events
            .iter()
            .any(|e| e.kind == EventKind::TxCensored && e.txid == Some(tx.txid())));
        assert!(!out.events.iter().any(|e| e.kind == EventKind::TxIncluded));
    }

    #[test]
    fn late_submission_is_never_included() {
        let tx = commitment_tx(4);
        let out = run_simulation(SimulationConfig::honest(1, 2, 3), &[(u64::MAX / 2, tx.clone())]).unwrap();
        assert_eq!(out.never_included, vec![tx.txid()]);
        assert_eq!(out.stats.never_included, 1);
    }

    #[test]
    fn max_future_is_accepted_but_flagged() {
        let mut cfg = SimulationConfig::honest(2, 1, 3);
        cfg.adversary_strategy = vec![MinerStrategy::shift_max_future()];
        let out = run_simulation(cfg, &[]).unwrap();
        assert!(out.records[1..].iter().all(|r| r.observer_accepted && r.violation));
    }
}
