use serde::{Deserialize, Serialize};

use super::ProtocolError;
use crate::hash::{sha256, Digest};
use crate::merkle::{merkle_prove, MerkleProof};
use crate::model::{Block, Transaction, TxKind, P2PKH_PAYLOAD_LEN};
use crate::tsa::TimestampToken;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommitmentEncoding {
    #[default]
    OpReturn,
    P2pkhTruncated,
}

impl CommitmentEncoding {
    pub fn tx_kind(self) -> TxKind {
        match self {
            CommitmentEncoding::OpReturn => TxKind::CommitmentOpreturn,
            CommitmentEncoding::P2pkhTruncated => TxKind::CommitmentP2pkh,
        }
    }

    pub fn for_kind(kind: TxKind) -> Option<Self> {
        match kind {
            TxKind::CommitmentOpreturn => Some(CommitmentEncoding::OpReturn),
            TxKind::CommitmentP2pkh => Some(CommitmentEncoding::P2pkhTruncated),
            TxKind::Payment => None,
        }
    }
}

/// `C`: the hash of the token(s) binding a timestamp into a block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Commitment {
    pub value: Digest,
    /// Sorted by ascending tsa id.
    pub source_tokens: Vec<TimestampToken>,
    pub encoding: CommitmentEncoding,
}

impl Commitment {
    /// Bytes carried on chain under this commitment's encoding.
    pub fn payload(&self) -> &[u8] {
        match self.encoding {
            CommitmentEncoding::OpReturn => &self.value.0,
            CommitmentEncoding::P2pkhTruncated => &self.value.0[..P2PKH_PAYLOAD_LEN],
        }
    }

    pub fn matches(&self, tx: &Transaction) -> bool {
        tx.kind() == self.encoding.tx_kind() && tx.payload() == self.payload()
    }
}

/// Hashes the canonical encodings of `tokens` in ascending tsa-id order.
pub fn make_commitment(
    tokens: &[TimestampToken],
    encoding: CommitmentEncoding,
) -> Result<Commitment, ProtocolError> {
    if tokens.is_empty() {
        return Err(ProtocolError::NoTokens);
    }
    let mut sorted = tokens.to_vec();
    sorted.sort_by(|a, b| a.tsa_id.cmp(&b.tsa_id));
    if let Some(pair) = sorted.windows(2).find(|w| w[0].tsa_id == w[1].tsa_id) {
        return Err(ProtocolError::DuplicateTsa(hex::encode(&pair[0].tsa_id)));
    }
    let encoded: Vec<Vec<u8>> = sorted.iter().map(TimestampToken::to_bytes).collect();
    let parts: Vec<&[u8]> = encoded.iter().map(Vec::as_slice).collect();
    Ok(Commitment {
        value: sha256(&parts),
        source_tokens: sorted,
        encoding,
    })
}

pub fn encode_commitment_tx(c: &Commitment) -> Transaction {
    Transaction::new(c.encoding.tx_kind(), c.payload().to_vec()).expect("payload width matches kind")
}

/// Chained continuation: the previous round's closing token(s) become the
/// next commitment.
pub fn chain_next(
    prev_token1: &[TimestampToken],
    encoding: CommitmentEncoding,
) -> Result<Commitment, ProtocolError> {
    make_commitment(prev_token1, encoding)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocatedCommitment {
    pub index: usize,
    pub proof: MerkleProof,
    /// More than one transaction in the block carries the payload.
    pub duplicate_payload: bool,
}

/// First transaction in `block` carrying `c`, with its inclusion proof.
pub fn locate_commitment(block: &Block, c: &Commitment) -> Option<LocatedCommitment> {
    let mut hits = block
        .transactions
        .iter()
        .enumerate()
        .filter(|(_, tx)| c.matches(tx))
        .map(|(i, _)| i);
    let index = hits.next()?;
    let duplicate_payload = hits.next().is_some();
    Some(LocatedCommitment {
        index,
        proof: merkle_prove(&block.transactions, index).expect("index from enumeration"),
        duplicate_payload,
    })
}
