//! The freshness proof and its two representations: JSON with hex-encoded
//! binary fields, and a canonical length-prefixed binary form whose hash is
//! the proof digest.

use serde::{Deserialize, Serialize};

use super::{Nonce, NONCE_LEN};
use crate::codec::{put_prefixed, DecodeError, Reader};
use crate::hash::{sha256, Digest};
use crate::merkle::MerkleProof;
use crate::model::{BlockHeader, Transaction};
use crate::tsa::TimestampToken;

/// Evidence that every header in `covered_headers` was created between the
/// authority times in `token0` and `token1`.
///
/// `header_i` is the block that carries the commitment and is the last
/// entry of `covered_headers`; earlier entries are blocks mined while the
/// commitment was still waiting for inclusion.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreshnessProof {
    pub r0: Nonce,
    pub header_prev: BlockHeader,
    pub token0: Vec<TimestampToken>,
    pub r1: Nonce,
    pub header_i: BlockHeader,
    pub token1: Vec<TimestampToken>,
    pub inclusion: MerkleProof,
    pub commitment_tx: Transaction,
    pub covered_headers: Vec<BlockHeader>,
}

fn put_tokens(out: &mut Vec<u8>, tokens: &[TimestampToken]) {
    out.push(tokens.len() as u8);
    for token in tokens {
        put_prefixed(out, &token.to_bytes());
    }
}

fn read_tokens(r: &mut Reader<'_>) -> Result<Vec<TimestampToken>, DecodeError> {
    let n = r.u8("proof.token_count")?;
    (0..n)
        .map(|_| TimestampToken::from_bytes(r.prefixed("proof.token")?))
        .collect()
}

fn read_header(r: &mut Reader<'_>, what: &'static str) -> Result<BlockHeader, DecodeError> {
    BlockHeader::from_bytes(r.take(crate::model::HEADER_LEN, what)?)
}

impl FreshnessProof {
    pub fn window_start(&self) -> Option<u64> {
        self.token0.iter().map(|t| t.time).max()
    }

    pub fn window_end(&self) -> Option<u64> {
        self.token1.iter().map(|t| t.time).min()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.r0.0);
        out.extend_from_slice(&self.header_prev.to_bytes());
        put_tokens(&mut out, &self.token0);
        out.extend_from_slice(&self.r1.0);
        out.extend_from_slice(&self.header_i.to_bytes());
        put_tokens(&mut out, &self.token1);
        put_prefixed(&mut out, &self.inclusion.to_bytes());
        put_prefixed(&mut out, &self.commitment_tx.to_bytes());
        out.extend_from_slice(&(self.covered_headers.len() as u32).to_be_bytes());
        for header in &self.covered_headers {
            out.extend_from_slice(&header.to_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let r0 = Nonce(r.array::<NONCE_LEN>("proof.r0")?);
        let header_prev = read_header(&mut r, "proof.header_prev")?;
        let token0 = read_tokens(&mut r)?;
        let r1 = Nonce(r.array::<NONCE_LEN>("proof.r1")?);
        let header_i = read_header(&mut r, "proof.header_i")?;
        let token1 = read_tokens(&mut r)?;
        let inclusion = MerkleProof::from_bytes(r.prefixed("proof.inclusion")?)?;
        let commitment_tx = Transaction::from_bytes(r.prefixed("proof.commitment_tx")?)?;
        let count = r.u32("proof.covered_count")? as usize;
        if count > bytes.len() / crate::model::HEADER_LEN {
            return Err(DecodeError::Truncated("proof.covered_headers"));
        }
        let covered_headers = (0..count)
            .map(|_| read_header(&mut r, "proof.covered_header"))
            .collect::<Result<_, _>>()?;
        r.finish()?;
        Ok(FreshnessProof {
            r0,
            header_prev,
            token0,
            r1,
            header_i,
            token1,
            inclusion,
            commitment_tx,
            covered_headers,
        })
    }

    /// Hash of the canonical binary form.
    pub fn digest(&self) -> Digest {
        sha256(&[&self.to_bytes()])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("proof serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
