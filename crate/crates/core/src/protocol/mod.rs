//! The verifier side: nonces, commitments, proofs and their verification.

mod commitment;
mod proof;
mod verifier;
mod verify;

use rand::rngs::OsRng;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use commitment::{
    chain_next, encode_commitment_tx, locate_commitment, make_commitment, Commitment, CommitmentEncoding,
    LocatedCommitment,
};
pub use proof::FreshnessProof;
pub use verifier::{
    run_session, run_verifier_round, ChainView, ObservedBlock, SessionOutcome, SimChainView, TsaSet,
    VerifierConfig, DEFAULT_STARVATION_BUDGET,
};
pub use verify::{verify_proof, HeaderCheck, HeightRange, ReasonCode, VerificationReport};

use crate::hash::{sha256, Digest};
use crate::model::BlockHeader;
use crate::tsa::TsaError;

pub const NONCE_LEN: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("commitment needs at least one token")]
    NoTokens,
    #[error("duplicate tsa id {0} in commitment token set")]
    DuplicateTsa(String),
    #[error("commitment starved: not included within {budget} blocks")]
    CommitmentStarved { budget: u64 },
    #[error("chain view ended before the round completed")]
    ChainEnded,
    #[error(transparent)]
    Tsa(#[from] TsaError),
}

/// The verifier's 128-bit secret, blinding each digest it timestamps.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Default)]
pub struct Nonce(pub [u8; NONCE_LEN]);

impl Serialize for Nonce {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&hex::encode(self.0))
    }
}

impl<'de> Deserialize<'de> for Nonce {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        let mut out = [0u8; NONCE_LEN];
        hex::decode_to_slice(&s, &mut out).map_err(serde::de::Error::custom)?;
        Ok(Nonce(out))
    }
}

/// Where nonces come from. The mode is always chosen explicitly.
pub enum NonceSource {
    /// Operating-system randomness.
    Production,
    /// Reproducible draws for simulation.
    Seeded(Box<ChaCha20Rng>),
}

impl NonceSource {
    pub fn seeded(seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(2);
        NonceSource::Seeded(Box::new(rng))
    }

    pub fn draw(&mut self) -> Nonce {
        let mut out = [0u8; NONCE_LEN];
        match self {
            NonceSource::Production => OsRng.fill_bytes(&mut out),
            NonceSource::Seeded(rng) => rng.fill_bytes(&mut out),
        }
        Nonce(out)
    }
}

/// `h(r || serialize_header(header))`.
pub fn make_digest(r: &Nonce, header: &BlockHeader) -> Digest {
    sha256(&[&r.0, &header.to_bytes()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_nonce_genesis_digest() {
        assert_eq!(make_digest(&Nonce::default(), &BlockHeader::default()), sha256(&[&[0u8; 104]]));
    }

    #[test]
    fn single_nonce_bit_changes_digest() {
        let header = BlockHeader {
            height: 3,
            timestamp: 99,
            ..Default::default()
        };
        let base = make_digest(&Nonce::default(), &header);
        for bit in 0..128 {
            let mut r = Nonce::default();
            r.0[bit / 8] ^= 1 << (bit % 8);
            assert_ne!(make_digest(&r, &header), base);
        }
        assert_eq!(make_digest(&Nonce::default(), &header), base);
    }

    #[test]
    fn seeded_nonces_repeat_and_production_differs() {
        let (mut a, mut b) = (NonceSource::seeded(1), NonceSource::seeded(1));
        assert_eq!(a.draw(), b.draw());
        let mut p = NonceSource::Production;
        assert_ne!(p.draw(), p.draw());
    }
}
