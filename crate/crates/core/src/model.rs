//! Blocks, headers and transactions with their canonical byte encodings.
//!
//! All multi-byte integers are big-endian. The header encoding is a fixed
//! 88-byte layout:
//!
//! ```text
//! height (8) || prev_hash (32) || merkle_root (32) || timestamp (8) || nonce (8)
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{DecodeError, Reader};
use crate::hash::{sha256, Digest};
use crate::merkle;

pub const HEADER_LEN: usize = 88;
pub const OP_RETURN_PAYLOAD_LEN: usize = 32;
pub const P2PKH_PAYLOAD_LEN: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("empty block body")]
    EmptyBlockBody,
    #[error("leaf index {index} out of range for {count} leaves")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("{kind:?} payload must be {expected} bytes, got {actual}")]
    PayloadLength {
        kind: TxKind,
        expected: usize,
        actual: usize,
    },
    #[error("txid does not match the transaction encoding")]
    TxidMismatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct BlockHeader {
    pub height: u64,
    pub prev_hash: Digest,
    pub merkle_root: Digest,
    pub timestamp: u64,
    pub nonce: u64,
}

impl BlockHeader {
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[0..8].copy_from_slice(&self.height.to_be_bytes());
        out[8..40].copy_from_slice(&self.prev_hash.0);
        out[40..72].copy_from_slice(&self.merkle_root.0);
        out[72..80].copy_from_slice(&self.timestamp.to_be_bytes());
        out[80..88].copy_from_slice(&self.nonce.to_be_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let header = BlockHeader {
            height: r.u64("header.height")?,
            prev_hash: Digest(r.array("header.prev_hash")?),
            merkle_root: Digest(r.array("header.merkle_root")?),
            timestamp: r.u64("header.timestamp")?,
            nonce: r.u64("header.nonce")?,
        };
        r.finish()?;
        Ok(header)
    }

    /// `h(serialize_header(self))`, the value a child stores as `prev_hash`.
    pub fn hash(&self) -> Digest {
        sha256(&[&self.to_bytes()])
    }
}

/// Free-function form of [`BlockHeader::to_bytes`].
pub fn serialize_header(header: &BlockHeader) -> [u8; HEADER_LEN] {
    header.to_bytes()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxKind {
    Payment,
    CommitmentOpreturn,
    CommitmentP2pkh,
}

impl TxKind {
    pub fn tag(self) -> u8 {
        match self {
            TxKind::Payment => 0,
            TxKind::CommitmentOpreturn => 1,
            TxKind::CommitmentP2pkh => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(TxKind::Payment),
            1 => Some(TxKind::CommitmentOpreturn),
            2 => Some(TxKind::CommitmentP2pkh),
            _ => None,
        }
    }

    fn required_len(self) -> Option<usize> {
        match self {
            TxKind::Payment => None,
            TxKind::CommitmentOpreturn => Some(OP_RETURN_PAYLOAD_LEN),
            TxKind::CommitmentP2pkh => Some(P2PKH_PAYLOAD_LEN),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TransactionRepr {
    kind: TxKind,
    #[serde(with = "hex::serde")]
    payload: Vec<u8>,
    txid: Digest,
}

/// A transaction. Payment payloads are opaque; commitment payloads carry
/// either a full 32-byte value or a 20-byte prefix of one.
///
/// The canonical encoding is `kind tag (1) || payload length (4) || payload`
/// and `txid = h(encoding)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "TransactionRepr", into = "TransactionRepr")]
pub struct Transaction {
    kind: TxKind,
    payload: Vec<u8>,
    txid: Digest,
}

impl Transaction {
    pub fn new(kind: TxKind, payload: Vec<u8>) -> Result<Self, ModelError> {
        if let Some(expected) = kind.required_len() {
            if payload.len() != expected {
                return Err(ModelError::PayloadLength {
                    kind,
                    expected,
                    actual: payload.len(),
                });
            }
        }
        let txid = sha256(&[&encode_tx(kind, &payload)]);
        Ok(Transaction { kind, payload, txid })
    }

    pub fn payment(payload: Vec<u8>) -> Self {
        Transaction::new(TxKind::Payment, payload).expect("payments accept any payload")
    }

    pub fn kind(&self) -> TxKind {
        self.kind
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn txid(&self) -> Digest {
        self.txid
    }

    pub fn is_commitment(&self) -> bool {
        self.kind != TxKind::Payment
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        encode_tx(self.kind, &self.payload)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let tag = r.u8("tx.kind")?;
        let kind = TxKind::from_tag(tag)
            .ok_or_else(|| DecodeError::invalid("tx.kind", format!("unknown tag {tag}")))?;
        let payload = r.prefixed("tx.payload")?.to_vec();
        r.finish()?;
        Transaction::new(kind, payload).map_err(|e| DecodeError::invalid("tx.payload", e.to_string()))
    }
}

impl TryFrom<TransactionRepr> for Transaction {
    type Error = ModelError;

    fn try_from(repr: TransactionRepr) -> Result<Self, Self::Error> {
        let tx = Transaction::new(repr.kind, repr.payload)?;
        if tx.txid != repr.txid {
            return Err(ModelError::TxidMismatch);
        }
        Ok(tx)
    }
}

impl From<Transaction> for TransactionRepr {
    fn from(tx: Transaction) -> Self {
        TransactionRepr {
            kind: tx.kind,
            payload: tx.payload,
            txid: tx.txid,
        }
    }
}

fn encode_tx(kind: TxKind, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(5 + payload.len());
    out.push(kind.tag());
    crate::codec::put_prefixed(&mut out, payload);
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub header: BlockHeader,
    pub transactions: Vec<Transaction>,
}

impl Block {
    /// Builds a block whose header commits to `transactions`.
    pub fn assemble(
        height: u64,
        prev_hash: Digest,
        timestamp: u64,
        nonce: u64,
        transactions: Vec<Transaction>,
    ) -> Result<Self, ModelError> {
        let merkle_root = merkle::merkle_root(&transactions)?;
        Ok(Block {
            header: BlockHeader {
                height,
                prev_hash,
                merkle_root,
                timestamp,
                nonce,
            },
            transactions,
        })
    }

    pub fn hash(&self) -> Digest {
        self.header.hash()
    }

    /// Checks that the header's Merkle root matches the body.
    pub fn is_consistent(&self) -> bool {
        merkle::merkle_root(&self.transactions) == Ok(self.header.merkle_root)
    }
}
