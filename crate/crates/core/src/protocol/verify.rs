use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{make_commitment, make_digest, CommitmentEncoding, FreshnessProof};
use crate::hash::Digest;
use crate::merkle::merkle_verify;
use crate::tsa::TrustStore;

/// Stable reason codes used in reports and on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ReasonCode {
    #[serde(rename = "digest_mismatch_token0")]
    DigestMismatchToken0,
    #[serde(rename = "digest_mismatch_token1")]
    DigestMismatchToken1,
    #[serde(rename = "token_invalid")]
    TokenInvalid,
    #[serde(rename = "inclusion_invalid")]
    InclusionInvalid,
    #[serde(rename = "linkage_broken")]
    LinkageBroken,
    #[serde(rename = "commitment_mismatch")]
    CommitmentMismatch,
    #[serde(rename = "window_inverted")]
    WindowInverted,
    #[serde(rename = "duplicate_payload")]
    DuplicatePayload,
    #[serde(rename = "commitment starved")]
    CommitmentStarved,
}

impl ReasonCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ReasonCode::DigestMismatchToken0 => "digest_mismatch_token0",
            ReasonCode::DigestMismatchToken1 => "digest_mismatch_token1",
            ReasonCode::TokenInvalid => "token_invalid",
            ReasonCode::InclusionInvalid => "inclusion_invalid",
            ReasonCode::LinkageBroken => "linkage_broken",
            ReasonCode::CommitmentMismatch => "commitment_mismatch",
            ReasonCode::WindowInverted => "window_inverted",
            ReasonCode::DuplicatePayload => "duplicate_payload",
            ReasonCode::CommitmentStarved => "commitment starved",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeightRange {
    pub start: u64,
    pub end: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeaderCheck {
    pub height: u64,
    pub timestamp: u64,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Structural validity; says nothing about the block timestamps.
    pub valid: bool,
    pub window_start: u64,
    pub window_end: u64,
    pub covered_heights: Option<HeightRange>,
    /// `window_start < timestamp < window_end`, one entry per covered header.
    pub timestamp_ok: Vec<HeaderCheck>,
    pub failure_reasons: Vec<ReasonCode>,
    pub proof_digest: Digest,
}

impl VerificationReport {
    pub fn all_timestamps_ok(&self) -> bool {
        self.timestamp_ok.iter().all(|c| c.ok)
    }

    pub fn flagged_heights(&self) -> Vec<u64> {
        self.timestamp_ok.iter().filter(|c| !c.ok).map(|c| c.height).collect()
    }

    /// Everything except the window ordering holds.
    pub fn causally_sound(&self) -> bool {
        self.failure_reasons.iter().all(|r| *r == ReasonCode::WindowInverted)
    }
}

fn tsa_ids(tokens: &[crate::tsa::TimestampToken]) -> Option<BTreeSet<&[u8]>> {
    let ids: BTreeSet<&[u8]> = tokens.iter().map(|t| t.tsa_id.as_slice()).collect();
    (ids.len() == tokens.len() && !ids.is_empty()).then_some(ids)
}

/// Runs every structural check and the per-header window test.
///
/// `valid` covers token signatures, both digest derivations, the commitment
/// recomputation, Merkle inclusion in the commitment-carrying header,
/// prev-hash linkage from `header_prev` through `covered_headers`, and
/// `T0 < T1`. Timestamp verdicts are reported separately.
pub fn verify_proof(proof: &FreshnessProof, trust: &TrustStore) -> VerificationReport {
    let mut reasons = Vec::new();

    let ids0 = tsa_ids(&proof.token0);
    let ids1 = tsa_ids(&proof.token1);
    let tokens_ok = ids0.is_some()
        && ids0 == ids1
        && proof
            .token0
            .iter()
            .chain(&proof.token1)
            .all(|t| trust.check(t).is_ok());
    if !tokens_ok {
        reasons.push(ReasonCode::TokenInvalid);
    }

    let d0 = make_digest(&proof.r0, &proof.header_prev);
    if proof.token0.is_empty() || proof.token0.iter().any(|t| t.digest != d0) {
        reasons.push(ReasonCode::DigestMismatchToken0);
    }

    let commitment_ok = CommitmentEncoding::for_kind(proof.commitment_tx.kind())
        .and_then(|enc| make_commitment(&proof.token0, enc).ok())
        .is_some_and(|c| c.matches(&proof.commitment_tx));
    if !commitment_ok {
        reasons.push(ReasonCode::CommitmentMismatch);
    }

    let last = proof.covered_headers.last();
    let included = last.is_some_and(|h| {
        merkle_verify(&h.merkle_root, &proof.commitment_tx.txid(), &proof.inclusion)
    });
    if !included {
        reasons.push(ReasonCode::InclusionInvalid);
    }

    let mut linked = last == Some(&proof.header_i);
    let mut parent = proof.header_prev;
    for header in &proof.covered_headers {
        linked &= header.prev_hash == parent.hash() && header.height == parent.height.wrapping_add(1);
        parent = *header;
    }
    if !linked {
        reasons.push(ReasonCode::LinkageBroken);
    }

    let d1 = make_digest(&proof.r1, &proof.header_i);
    if proof.token1.is_empty() || proof.token1.iter().any(|t| t.digest != d1) {
        reasons.push(ReasonCode::DigestMismatchToken1);
    }

    let window_start = proof.window_start().unwrap_or(0);
    let window_end = proof.window_end().unwrap_or(0);
    if window_start >= window_end {
        reasons.push(ReasonCode::WindowInverted);
    }

    let timestamp_ok = proof
        .covered_headers
        .iter()
        .map(|h| HeaderCheck {
            height: h.height,
            timestamp: h.timestamp,
            ok: window_start < h.timestamp && h.timestamp < window_end,
        })
        .collect();
    let covered_heights = match (proof.covered_headers.first(), last) {
        (Some(first), Some(last)) => Some(HeightRange {
            start: first.height,
            end: last.height,
        }),
        _ => None,
    };

    VerificationReport {
        valid: reasons.is_empty(),
        window_start,
        window_end,
        covered_heights,
        timestamp_ok,
        failure_reasons: reasons,
        proof_digest: proof.digest(),
    }
}
