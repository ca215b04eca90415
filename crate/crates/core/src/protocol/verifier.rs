//! The verifier's round state machine, run against any [`ChainView`].

use serde::{Deserialize, Serialize};

use super::{
    chain_next, encode_commitment_tx, locate_commitment, make_commitment, make_digest, Commitment,
    CommitmentEncoding, FreshnessProof, Nonce, NonceSource, ProtocolError,
};
use crate::hash::Digest;
use crate::model::{Block, BlockHeader, Transaction};
use crate::sim::Simulator;
use crate::tsa::{TimestampToken, TrustStore, Tsa, TsaError};

pub const DEFAULT_STARVATION_BUDGET: u64 = 6;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservedBlock {
    pub block: Block,
    /// When the verifier received it.
    pub observed_at: u64,
}

/// The verifier's window onto the network.
pub trait ChainView {
    /// The next block in height order, or `None` when the chain stops.
    fn next_block(&mut self) -> Option<ObservedBlock>;
    /// Broadcasts `tx` at time `at`.
    fn broadcast(&mut self, tx: Transaction, at: u64);
}

/// Feeds a [`Simulator`] chain to a verifier, mining on demand.
pub struct SimChainView<'a> {
    sim: &'a mut Simulator,
    cursor: usize,
}

impl<'a> SimChainView<'a> {
    /// Starts from genesis.
    pub fn new(sim: &'a mut Simulator) -> Self {
        SimChainView { sim, cursor: 0 }
    }

    pub fn simulator(&self) -> &Simulator {
        self.sim
    }
}

impl ChainView for SimChainView<'_> {
    fn next_block(&mut self) -> Option<ObservedBlock> {
        if self.cursor >= self.sim.chain().len() {
            self.sim.mine_block()?;
        }
        let observed = ObservedBlock {
            block: self.sim.chain()[self.cursor].clone(),
            observed_at: self.sim.records()[self.cursor].observed_at,
        };
        self.cursor += 1;
        Some(observed)
    }

    fn broadcast(&mut self, tx: Transaction, at: u64) {
        self.sim.submit(tx, at);
    }
}

/// The authorities a verifier stamps with; every digest goes to all of them.
pub struct TsaSet {
    tsas: Vec<Tsa>,
}

impl TsaSet {
    pub fn new(mut tsas: Vec<Tsa>) -> Result<Self, TsaError> {
        if tsas.is_empty() {
            return Err(TsaError::TrustStore("empty tsa set".into()));
        }
        tsas.sort_by(|a, b| a.id().cmp(b.id()));
        if let Some(w) = tsas.windows(2).find(|w| w[0].id() == w[1].id()) {
            return Err(TsaError::TrustStore(format!("duplicate tsa id {}", hex::encode(w[0].id()))));
        }
        Ok(TsaSet { tsas })
    }

    pub fn single(tsa: Tsa) -> Self {
        TsaSet { tsas: vec![tsa] }
    }

    pub fn stamp(&mut self, digest: Digest, now: u64) -> Result<Vec<TimestampToken>, TsaError> {
        self.tsas.iter_mut().map(|t| t.issue_token(digest, now)).collect()
    }

    pub fn trust_store(&self) -> TrustStore {
        self.tsas.iter().map(Tsa::identity).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tsa> {
        self.tsas.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Tsa> {
        self.tsas.iter_mut()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifierConfig {
    #[serde(default)]
    pub encoding: CommitmentEncoding,
    /// Fleet members to stamp with; empty means all of them.
    #[serde(default)]
    pub tsa_set: Vec<String>,
    #[serde(default = "one")]
    pub rounds: usize,
    #[serde(default)]
    pub chained: bool,
    #[serde(default = "default_budget")]
    pub starvation_budget: u64,
    /// Height of the first block the verifier anchors on.
    #[serde(default = "one_u64")]
    pub start_height: u64,
}

fn one() -> usize {
    1
}

fn one_u64() -> u64 {
    1
}

fn default_budget() -> u64 {
    DEFAULT_STARVATION_BUDGET
}

impl Default for VerifierConfig {
    fn default() -> Self {
        VerifierConfig {
            encoding: CommitmentEncoding::OpReturn,
            tsa_set: Vec::new(),
            rounds: 1,
            chained: false,
            starvation_budget: DEFAULT_STARVATION_BUDGET,
            start_height: 1,
        }
    }
}

/// A commitment broadcast and waiting for a block.
struct Pending {
    r0: Nonce,
    header_prev: BlockHeader,
    token0: Vec<TimestampToken>,
    commitment: Commitment,
}

fn open_round(
    anchor: &ObservedBlock,
    view: &mut dyn ChainView,
    tsas: &mut TsaSet,
    nonces: &mut NonceSource,
    encoding: CommitmentEncoding,
) -> Result<Pending, ProtocolError> {
    let r0 = nonces.draw();
    let header_prev = anchor.block.header;
    let token0 = tsas.stamp(make_digest(&r0, &header_prev), anchor.observed_at)?;
    let commitment = make_commitment(&token0, encoding)?;
    view.broadcast(encode_commitment_tx(&commitment), anchor.observed_at);
    Ok(Pending {
        r0,
        header_prev,
        token0,
        commitment,
    })
}

fn close_round(
    pending: Pending,
    view: &mut dyn ChainView,
    tsas: &mut TsaSet,
    nonces: &mut NonceSource,
    budget: u64,
) -> Result<(FreshnessProof, ObservedBlock, bool), ProtocolError> {
    let mut covered = Vec::new();
    for _ in 0..budget {
        let observed = view.next_block().ok_or(ProtocolError::ChainEnded)?;
        covered.push(observed.block.header);
        let Some(found) = locate_commitment(&observed.block, &pending.commitment) else {
            continue;
        };
        let r1 = nonces.draw();
        let header_i = observed.block.header;
        let token1 = tsas.stamp(make_digest(&r1, &header_i), observed.observed_at)?;
        let proof = FreshnessProof {
            r0: pending.r0,
            header_prev: pending.header_prev,
            token0: pending.token0,
            r1,
            header_i,
            token1,
            inclusion: found.proof,
            commitment_tx: observed.block.transactions[found.index].clone(),
            covered_headers: covered,
        };
        return Ok((proof, observed, found.duplicate_payload));
    }
    Err(ProtocolError::CommitmentStarved { budget })
}

fn first_anchor(view: &mut dyn ChainView, start_height: u64) -> Result<ObservedBlock, ProtocolError> {
    loop {
        let observed = view.next_block().ok_or(ProtocolError::ChainEnded)?;
        if observed.block.header.height >= start_height {
            return Ok(observed);
        }
    }
}

/// One full round: anchor on the first block at or above
/// `config.start_height`, commit, wait for inclusion, close the window.
pub fn run_verifier_round(
    view: &mut dyn ChainView,
    tsas: &mut TsaSet,
    config: &VerifierConfig,
    nonces: &mut NonceSource,
) -> Result<FreshnessProof, ProtocolError> {
    let anchor = first_anchor(view, config.start_height)?;
    let pending = open_round(&anchor, view, tsas, nonces, config.encoding)?;
    close_round(pending, view, tsas, nonces, config.starvation_budget).map(|(proof, _, _)| proof)
}

#[derive(Debug, Default)]
pub struct SessionOutcome {
    pub proofs: Vec<FreshnessProof>,
    /// Rounds whose inclusion block carried the payload more than once.
    pub duplicate_payload_rounds: Vec<usize>,
    /// Why the session stopped early, if it did. Earlier proofs stay valid.
    pub error: Option<ProtocolError>,
}

/// Runs `config.rounds` consecutive rounds. In chained mode each round's
/// closing tokens become the next round's commitment, so windows tile.
pub fn run_session(
    view: &mut dyn ChainView,
    tsas: &mut TsaSet,
    config: &VerifierConfig,
    nonces: &mut NonceSource,
) -> SessionOutcome {
    let mut outcome = SessionOutcome::default();
    let mut pending = match first_anchor(view, config.start_height)
        .and_then(|anchor| open_round(&anchor, view, tsas, nonces, config.encoding))
    {
        Ok(p) => p,
        Err(e) => {
            outcome.error = Some(e);
            return outcome;
        }
    };
    for round in 0..config.rounds {
        let (proof, inclusion_block, duplicate) =
            match close_round(pending, view, tsas, nonces, config.starvation_budget) {
                Ok(done) => done,
                Err(e) => {
                    outcome.error = Some(e);
                    return outcome;
                }
            };
        if duplicate {
            outcome.duplicate_payload_rounds.push(round);
        }
        let next = if round + 1 == config.rounds {
            Ok(None)
        } else if config.chained {
            chain_next(&proof.token1, config.encoding).map(|commitment| {
                view.broadcast(encode_commitment_tx(&commitment), inclusion_block.observed_at);
                Pending {
                    r0: proof.r1,
                    header_prev: proof.header_i,
                    token0: proof.token1.clone(),
                    commitment,
                }
            })
            .map(Some)
        } else {
            open_round(&inclusion_block, view, tsas, nonces, config.encoding).map(Some)
        };
        outcome.proofs.push(proof);
        match next {
            Ok(Some(p)) => pending = p,
            Ok(None) => break,
            Err(e) => {
                outcome.error = Some(e);
                break;
            }
        }
    }
    outcome
}
