//! Evidence that an authority contradicted itself.
//!
//! A valid proof shows that `D1` was derived from a header committing to a
//! token over `D0`, so `D0` existed first. If the same authority nonetheless
//! stamped `D0` later than `D1`, its two signatures are the evidence.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::merkle::{merkle_verify, MerkleProof};
use crate::model::{BlockHeader, Transaction};
use crate::protocol::{
    make_commitment, make_digest, verify_proof, CommitmentEncoding, FreshnessProof, Nonce, ReasonCode,
};
use crate::tsa::{TimestampToken, TrustStore};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AuditError {
    #[error("cannot audit unverifiable proof: {0:?}")]
    Unverifiable(Vec<ReasonCode>),
}

/// Everything needed to show `token0`'s digest predates `token1`'s.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CausalChain {
    pub r0: Nonce,
    pub header_prev: BlockHeader,
    /// All tokens the commitment was computed over (one per authority).
    pub commitment_tokens: Vec<TimestampToken>,
    pub commitment_tx: Transaction,
    pub inclusion: MerkleProof,
    pub covered_headers: Vec<BlockHeader>,
    pub r1: Nonce,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MisbehaviorEvidence {
    pub token0: TimestampToken,
    pub token1: TimestampToken,
    pub causal_chain: CausalChain,
    pub verdict: String,
}

impl MisbehaviorEvidence {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("evidence serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Two different authorities whose windows disagree. Not misbehavior.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossTsaDisagreement {
    #[serde(with = "hex::serde")]
    pub opening_tsa: Vec<u8>,
    #[serde(with = "hex::serde")]
    pub closing_tsa: Vec<u8>,
    pub opening_time: u64,
    pub closing_time: u64,
}

/// Looks for a same-authority inversion `token0.time > token1.time`.
///
/// The proof must pass every structural check except window ordering.
pub fn audit_proof(
    proof: &FreshnessProof,
    trust: &TrustStore,
) -> Result<Option<MisbehaviorEvidence>, AuditError> {
    let report = verify_proof(proof, trust);
    if !report.causally_sound() {
        return Err(AuditError::Unverifiable(report.failure_reasons));
    }
    let inverted = proof.token0.iter().find_map(|t0| {
        proof
            .token1
            .iter()
            .find(|t1| t1.tsa_id == t0.tsa_id && t0.time > t1.time)
            .map(|t1| (t0, t1))
    });
    Ok(inverted.map(|(t0, t1)| MisbehaviorEvidence {
        token0: t0.clone(),
        token1: t1.clone(),
        causal_chain: CausalChain {
            r0: proof.r0,
            header_prev: proof.header_prev,
            commitment_tokens: proof.token0.clone(),
            commitment_tx: proof.commitment_tx.clone(),
            inclusion: proof.inclusion.clone(),
            covered_headers: proof.covered_headers.clone(),
            r1: proof.r1,
        },
        verdict: format!(
            "tsa {} stamped {} later ({}) than a digest derived from it ({})",
            hex::encode(&t0.tsa_id),
            t0.digest,
            t0.time,
            t1.time
        ),
    }))
}

/// Opening and closing times from different authorities that are out of
/// order. Reported for information only.
pub fn cross_tsa_disagreements(proof: &FreshnessProof) -> Vec<CrossTsaDisagreement> {
    let mut out = Vec::new();
    for t0 in &proof.token0 {
        for t1 in proof.token1.iter().filter(|t1| t1.tsa_id != t0.tsa_id) {
            if t0.time > t1.time {
                out.push(CrossTsaDisagreement {
                    opening_tsa: t0.tsa_id.clone(),
                    closing_tsa: t1.tsa_id.clone(),
                    opening_time: t0.time,
                    closing_time: t1.time,
                });
            }
        }
    }
    out
}

/// Re-checks the causal chain and the inversion using only the trust store.
pub fn verify_evidence(ev: &MisbehaviorEvidence, trust: &TrustStore) -> bool {
    let chain = &ev.causal_chain;
    let Some(last) = chain.covered_headers.last() else {
        return false;
    };
    if ev.token0.tsa_id != ev.token1.tsa_id || !chain.commitment_tokens.contains(&ev.token0) {
        return false;
    }
    if chain.commitment_tokens.iter().chain([&ev.token1]).any(|t| trust.check(t).is_err()) {
        return false;
    }
    let d0 = make_digest(&chain.r0, &chain.header_prev);
    if chain.commitment_tokens.iter().any(|t| t.digest != d0) {
        return false;
    }
    let committed = CommitmentEncoding::for_kind(chain.commitment_tx.kind())
        .and_then(|enc| make_commitment(&chain.commitment_tokens, enc).ok())
        .is_some_and(|c| c.matches(&chain.commitment_tx));
    if !committed || !merkle_verify(&last.merkle_root, &chain.commitment_tx.txid(), &chain.inclusion) {
        return false;
    }
    let mut parent = chain.header_prev;
    for header in &chain.covered_headers {
        if header.prev_hash != parent.hash() || header.height != parent.height.wrapping_add(1) {
            return false;
        }
        parent = *header;
    }
    ev.token1.digest == make_digest(&chain.r1, last) && ev.token0.time > ev.token1.time
}
