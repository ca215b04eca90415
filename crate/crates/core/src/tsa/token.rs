//! Signed `(digest, time)` tokens and their canonical encoding.
//!
//! ```text
//! backend tag (1) || digest (32) || time (8) || id length (1) || id
//!   || signature length (2) || signature || [batch path, roughtime only]
//! ```
//!
//! The signed payload is never carried separately on the wire: every backend
//! rebuilds it from the encoded fields.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::codec::{DecodeError, Reader};
use crate::hash::{sha256, Digest};
use crate::merkle::{leaf_hash, node_hash, MerkleProof, Side};

pub const MAX_TSA_ID_LEN: usize = 32;
pub const TLS_PARAMS_PLACEHOLDER: [u8; 8] = *b"DHPARAMS";
const TLS_RANDOM_DOMAIN: &[u8] = b"tls-server-random";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Rfc3161Style,
    RoughtimeStyle,
    TlsStyle,
}

impl Backend {
    pub fn tag(self) -> u8 {
        match self {
            Backend::Rfc3161Style => 1,
            Backend::RoughtimeStyle => 2,
            Backend::TlsStyle => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(Backend::Rfc3161Style),
            2 => Some(Backend::RoughtimeStyle),
            3 => Some(Backend::TlsStyle),
            _ => None,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TimestampToken {
    pub backend: Backend,
    pub digest: Digest,
    pub time: u64,
    pub tsa_id: Vec<u8>,
    pub signature: Vec<u8>,
    pub batch_path: Option<MerkleProof>,
    pub raw_signed_payload: Vec<u8>,
}

impl fmt::Debug for TimestampToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TimestampToken")
            .field("backend", &self.backend)
            .field("digest", &self.digest)
            .field("time", &self.time)
            .field("tsa_id", &String::from_utf8_lossy(&self.tsa_id))
            .finish_non_exhaustive()
    }
}

/// Bytes an RFC 3161-style authority signs: the canonical prefix up to the
/// signature.
pub fn rfc3161_payload(digest: &Digest, time: u64, tsa_id: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(42 + tsa_id.len());
    out.push(Backend::Rfc3161Style.tag());
    out.extend_from_slice(&digest.0);
    out.extend_from_slice(&time.to_be_bytes());
    out.push(tsa_id.len() as u8);
    out.extend_from_slice(tsa_id);
    out
}

/// Bytes a Roughtime-style authority signs once per batch.
pub fn batch_payload(root: &Digest, time: u64) -> Vec<u8> {
    let mut out = Vec::with_capacity(40);
    out.extend_from_slice(&root.0);
    out.extend_from_slice(&time.to_be_bytes());
    out
}

/// The 32-byte server random: 4-byte time, then 28 bytes derived from public
/// inputs so any holder can rebuild the signed payload.
pub fn tls_server_random(tsa_id: &[u8], digest: &Digest, time: u32) -> [u8; 32] {
    let tail = sha256(&[TLS_RANDOM_DOMAIN, &[tsa_id.len() as u8], tsa_id, &digest.0, &time.to_be_bytes()]);
    let mut out = [0u8; 32];
    out[..4].copy_from_slice(&time.to_be_bytes());
    out[4..].copy_from_slice(&tail.0[..28]);
    out
}

/// `client_random (= digest) || server_random || parameter placeholder`.
pub fn tls_payload(tsa_id: &[u8], digest: &Digest, time: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity(72);
    out.extend_from_slice(&digest.0);
    out.extend_from_slice(&tls_server_random(tsa_id, digest, time));
    out.extend_from_slice(&TLS_PARAMS_PLACEHOLDER);
    out
}

/// Folds `digest` up `path` by side markers only; index consistency is
/// checked separately at verification.
pub fn fold_batch_path(digest: &Digest, path: &MerkleProof) -> Digest {
    path.path.iter().fold(leaf_hash(digest), |acc, step| match step.side {
        Side::Left => node_hash(&step.sibling, &acc),
        Side::Right => node_hash(&acc, &step.sibling),
    })
}

impl TimestampToken {
    /// The payload the signature should cover, rebuilt from the token fields.
    pub fn expected_payload(&self) -> Option<Vec<u8>> {
        match self.backend {
            Backend::Rfc3161Style => Some(rfc3161_payload(&self.digest, self.time, &self.tsa_id)),
            Backend::RoughtimeStyle => {
                let path = self.batch_path.as_ref()?;
                Some(batch_payload(&fold_batch_path(&self.digest, path), self.time))
            }
            Backend::TlsStyle => {
                let time = u32::try_from(self.time).ok()?;
                Some(tls_payload(&self.tsa_id, &self.digest, time))
            }
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(108 + self.tsa_id.len());
        out.push(self.backend.tag());
        out.extend_from_slice(&self.digest.0);
        out.extend_from_slice(&self.time.to_be_bytes());
        out.push(self.tsa_id.len() as u8);
        out.extend_from_slice(&self.tsa_id);
        out.extend_from_slice(&(self.signature.len() as u16).to_be_bytes());
        out.extend_from_slice(&self.signature);
        if self.backend == Backend::RoughtimeStyle {
            self.batch_path.clone().unwrap_or_default().encode_into(&mut out);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let tag = r.u8("token.backend")?;
        let backend = Backend::from_tag(tag)
            .ok_or_else(|| DecodeError::invalid("token.backend", format!("unknown tag {tag}")))?;
        let digest = Digest(r.array("token.digest")?);
        let time = r.u64("token.time")?;
        let id_len = r.u8("token.tsa_id_len")? as usize;
        if id_len > MAX_TSA_ID_LEN {
            return Err(DecodeError::invalid("token.tsa_id", format!("{id_len} bytes")));
        }
        let tsa_id = r.take(id_len, "token.tsa_id")?.to_vec();
        let sig_len = r.u16("token.signature_len")? as usize;
        let signature = r.take(sig_len, "token.signature")?.to_vec();
        let batch_path = match backend {
            Backend::RoughtimeStyle => Some(MerkleProof::decode_from(&mut r)?),
            _ => None,
        };
        r.finish()?;
        let mut token = TimestampToken {
            backend,
            digest,
            time,
            tsa_id,
            signature,
            batch_path,
            raw_signed_payload: Vec::new(),
        };
        token.raw_signed_payload = token
            .expected_payload()
            .ok_or_else(|| DecodeError::invalid("token.time", "not representable for this backend"))?;
        Ok(token)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn from_hex(s: &str) -> Result<Self, DecodeError> {
        let bytes = hex::decode(s.trim()).map_err(|e| DecodeError::invalid("token.hex", e.to_string()))?;
        Self::from_bytes(&bytes)
    }
}

impl Serialize for TimestampToken {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for TimestampToken {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        TimestampToken::from_hex(&s).map_err(serde::de::Error::custom)
    }
}
