//! Provable bounds on block creation time.
//!
//! A verifier timestamps a fresh block header with a timestamp authority,
//! commits to the signed token on chain, and timestamps the block that
//! includes the commitment. The two authority times bracket when the
//! including block (and any block skipped while waiting) was mined.

pub mod codec;
pub mod hash;
pub mod merkle;
pub mod model;
pub mod sim;

pub use hash::{sha256, Digest};
pub use merkle::{merkle_prove, merkle_root, merkle_verify, MerkleProof, PathStep, Side};
pub use model::{serialize_header, Block, BlockHeader, ModelError, Transaction, TxKind};
pub mod tsa;
pub mod protocol;
pub mod accountability;
pub mod scenario;
pub mod cli;
