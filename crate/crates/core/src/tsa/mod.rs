//! Timestamp authorities: issuing, identities, and token verification.

mod authority;
mod token;

use std::collections::BTreeMap;

use ed25519_dalek::{Signature, VerifyingKey};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use authority::{ClockStep, Observation, Tsa, TsaClock};
pub use token::{
    batch_payload, fold_batch_path, rfc3161_payload, tls_payload, tls_server_random, Backend, TimestampToken,
    MAX_TSA_ID_LEN, TLS_PARAMS_PLACEHOLDER,
};

use crate::merkle;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TsaError {
    #[error("timestamp authority {0} unreachable")]
    Unreachable(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("timestamp overflow: {0} does not fit in 32 bits")]
    TimestampOverflow(u64),
    #[error("clock reading {0} is before the epoch")]
    NegativeTime(i64),
    #[error("tsa id must be 1..=32 bytes, got {0}")]
    BadId(usize),
    #[error("trust store: {0}")]
    TrustStore(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TsaIdentity {
    pub tsa_id: Vec<u8>,
    pub public_key: [u8; 32],
}

/// Why a token failed verification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum TokenFault {
    #[error("token issued by a different authority")]
    TsaIdMismatch,
    #[error("public key is not a valid curve point")]
    BadPublicKey,
    #[error("signed payload does not match the token fields")]
    PayloadMismatch,
    #[error("malformed signature")]
    MalformedSignature,
    #[error("signature does not verify")]
    BadSignature,
    #[error("batch path missing, inconsistent, or not linking digest to the signed root")]
    BatchPath,
}

/// Full check of `token` against `identity`, reporting the first fault.
pub fn check_token(token: &TimestampToken, identity: &TsaIdentity) -> Result<(), TokenFault> {
    if token.tsa_id != identity.tsa_id {
        return Err(TokenFault::TsaIdMismatch);
    }
    let key = VerifyingKey::from_bytes(&identity.public_key).map_err(|_| TokenFault::BadPublicKey)?;
    let signature = Signature::from_slice(&token.signature).map_err(|_| TokenFault::MalformedSignature)?;
    key.verify_strict(&token.raw_signed_payload, &signature)
        .map_err(|_| TokenFault::BadSignature)?;
    match token.backend {
        Backend::RoughtimeStyle => {
            let path = token.batch_path.as_ref().ok_or(TokenFault::BatchPath)?;
            let payload = &token.raw_signed_payload;
            if payload.len() != 40 || payload[32..] != token.time.to_be_bytes() {
                return Err(TokenFault::PayloadMismatch);
            }
            let root = crate::hash::Digest::from_slice(&payload[..32]).expect("32 bytes");
            if !merkle::verify_value(&root, &token.digest, path) {
                return Err(TokenFault::BatchPath);
            }
        }
        Backend::TlsStyle => {
            let payload = &token.raw_signed_payload;
            if payload.len() != 72 {
                return Err(TokenFault::PayloadMismatch);
            }
            let client_random = &payload[..32];
            let time = u32::from_be_bytes(payload[32..36].try_into().expect("4 bytes"));
            if client_random != token.digest.0 || u64::from(time) != token.time {
                return Err(TokenFault::PayloadMismatch);
            }
            if token.batch_path.is_some() || token.expected_payload().as_deref() != Some(&payload[..]) {
                return Err(TokenFault::PayloadMismatch);
            }
        }
        Backend::Rfc3161Style => {
            if token.batch_path.is_some() || token.expected_payload().as_deref() != Some(&token.raw_signed_payload[..]) {
                return Err(TokenFault::PayloadMismatch);
            }
        }
    }
    Ok(())
}

pub fn verify_token(token: &TimestampToken, identity: &TsaIdentity) -> bool {
    check_token(token, identity).is_ok()
}

/// Trusted authorities keyed by id. Serialized as `{hex id: hex public key}`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TrustStore {
    keys: BTreeMap<Vec<u8>, [u8; 32]>,
}

impl TrustStore {
    pub fn new() -> Self {
        TrustStore::default()
    }

    pub fn insert(&mut self, identity: TsaIdentity) -> Result<(), TsaError> {
        if self.keys.contains_key(&identity.tsa_id) {
            return Err(TsaError::TrustStore(format!(
                "duplicate tsa id {}",
                hex::encode(&identity.tsa_id)
            )));
        }
        self.keys.insert(identity.tsa_id, identity.public_key);
        Ok(())
    }

    pub fn get(&self, tsa_id: &[u8]) -> Option<TsaIdentity> {
        self.keys.get(tsa_id).map(|key| TsaIdentity {
            tsa_id: tsa_id.to_vec(),
            public_key: *key,
        })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Verifies `token` against whichever trusted identity it names.
    pub fn check(&self, token: &TimestampToken) -> Result<(), TokenFault> {
        let identity = self.get(&token.tsa_id).ok_or(TokenFault::TsaIdMismatch)?;
        check_token(token, &identity)
    }

    pub fn to_json(&self) -> String {
        let map: BTreeMap<String, String> = self
            .keys
            .iter()
            .map(|(id, key)| (hex::encode(id), hex::encode(key)))
            .collect();
        serde_json::to_string_pretty(&map).expect("string map serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TsaError> {
        let map: BTreeMap<String, String> =
            serde_json::from_str(text).map_err(|e| TsaError::TrustStore(e.to_string()))?;
        let mut store = TrustStore::new();
        for (id_hex, key_hex) in map {
            let tsa_id = hex::decode(&id_hex).map_err(|e| TsaError::TrustStore(format!("id {id_hex}: {e}")))?;
            if tsa_id.is_empty() || tsa_id.len() > MAX_TSA_ID_LEN {
                return Err(TsaError::BadId(tsa_id.len()));
            }
            let mut public_key = [0u8; 32];
            hex::decode_to_slice(&key_hex, &mut public_key)
                .map_err(|e| TsaError::TrustStore(format!("key for {id_hex}: {e}")))?;
            store.insert(TsaIdentity { tsa_id, public_key })?;
        }
        Ok(store)
    }
}

impl FromIterator<TsaIdentity> for TrustStore {
    fn from_iter<I: IntoIterator<Item = TsaIdentity>>(iter: I) -> Self {
        TrustStore {
            keys: iter.into_iter().map(|i| (i.tsa_id, i.public_key)).collect(),
        }
    }
}

impl Serialize for TrustStore {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let map: BTreeMap<String, String> = self
            .keys
            .iter()
            .map(|(id, key)| (hex::encode(id), hex::encode(key)))
            .collect();
        map.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TrustStore {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(deserializer)?;
        TrustStore::from_json(&value.to_string()).map_err(serde::de::Error::custom)
    }
}
