//! Issuing side of the timestamp authority.

use ed25519_dalek::{Signer, SigningKey};
use serde::{Deserialize, Serialize};

use super::token::{batch_payload, rfc3161_payload, tls_payload, Backend, TimestampToken, MAX_TSA_ID_LEN};
use super::{TsaError, TsaIdentity};
use crate::hash::{sha256, Digest};
use crate::merkle;

/// A one-off clock step: when issuing token number `after_issuances`
/// (zero-based), the clock is reset to `delta` seconds relative to its
/// previous reading and then keeps running.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockStep {
    pub after_issuances: u64,
    pub delta: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TsaClock {
    /// Added to true time; zero for an honest authority.
    pub offset: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<ClockStep>,
}

impl TsaClock {
    pub fn honest() -> Self {
        TsaClock::default()
    }

    pub fn skewed(offset: i64) -> Self {
        TsaClock { offset, step: None }
    }

    pub fn is_honest(&self) -> bool {
        self.offset == 0 && self.step.is_none()
    }
}

/// What the authority saw: only the submitted digest and when.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub digest: Digest,
    pub received_at: u64,
    pub stamped: u64,
}

pub struct Tsa {
    id: Vec<u8>,
    key: SigningKey,
    backend: Backend,
    clock: TsaClock,
    reachable: bool,
    issued: u64,
    last_reading: Option<u64>,
    log: Vec<Observation>,
}

impl Tsa {
    pub fn new(id: impl Into<Vec<u8>>, backend: Backend, secret: [u8; 32]) -> Result<Self, TsaError> {
        let id = id.into();
        if id.is_empty() || id.len() > MAX_TSA_ID_LEN {
            return Err(TsaError::BadId(id.len()));
        }
        Ok(Tsa {
            id,
            key: SigningKey::from_bytes(&secret),
            backend,
            clock: TsaClock::honest(),
            reachable: true,
            issued: 0,
            last_reading: None,
            log: Vec::new(),
        })
    }

    /// Key material derived from `(seed, id)` so scenario runs are reproducible.
    pub fn deterministic(id: impl Into<Vec<u8>>, backend: Backend, seed: u64) -> Result<Self, TsaError> {
        let id = id.into();
        let secret = sha256(&[b"freshproof-tsa-key", &seed.to_be_bytes(), &id]);
        Tsa::new(id, backend, secret.0)
    }

    pub fn with_clock(mut self, clock: TsaClock) -> Self {
        self.clock = clock;
        self
    }

    pub fn set_reachable(&mut self, reachable: bool) {
        self.reachable = reachable;
    }

    pub fn id(&self) -> &[u8] {
        &self.id
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn identity(&self) -> TsaIdentity {
        TsaIdentity {
            tsa_id: self.id.clone(),
            public_key: self.key.verifying_key().to_bytes(),
        }
    }

    pub fn observations(&self) -> &[Observation] {
        &self.log
    }

    fn read_clock(&mut self, now: u64) -> Result<u64, TsaError> {
        if let (Some(step), Some(last)) = (self.clock.step, self.last_reading) {
            if step.after_issuances == self.issued {
                let target = last as i64 + step.delta;
                self.clock.offset = target - now as i64;
            }
        }
        let reading = now as i64 + self.clock.offset;
        if reading < 0 {
            return Err(TsaError::NegativeTime(reading));
        }
        Ok(reading as u64)
    }

    fn begin(&mut self, now: u64) -> Result<u64, TsaError> {
        if !self.reachable {
            return Err(TsaError::Unreachable(String::from_utf8_lossy(&self.id).into_owned()));
        }
        self.read_clock(now)
    }

    fn finish(&mut self, digests: &[Digest], now: u64, reading: u64) {
        self.issued += 1;
        self.last_reading = Some(reading);
        self.log.extend(digests.iter().map(|&digest| Observation {
            digest,
            received_at: now,
            stamped: reading,
        }));
    }

    /// Timestamps `digest` at true time `now` using this authority's backend.
    pub fn issue_token(&mut self, digest: Digest, now: u64) -> Result<TimestampToken, TsaError> {
        match self.backend {
            Backend::Rfc3161Style => self.issue_rfc3161(digest, now),
            Backend::RoughtimeStyle => Ok(self.issue_batch(&[digest], now)?.remove(0)),
            Backend::TlsStyle => self.issue_tls_style(digest, now),
        }
    }

    fn issue_rfc3161(&mut self, digest: Digest, now: u64) -> Result<TimestampToken, TsaError> {
        let time = self.begin(now)?;
        let payload = rfc3161_payload(&digest, time, &self.id);
        let signature = self.key.sign(&payload).to_bytes().to_vec();
        self.finish(&[digest], now, time);
        Ok(TimestampToken {
            backend: Backend::Rfc3161Style,
            digest,
            time,
            tsa_id: self.id.clone(),
            signature,
            batch_path: None,
            raw_signed_payload: payload,
        })
    }

    /// Signs `root || time` once over a Merkle tree of `digests` and hands
    /// back one token per digest with its own path.
    pub fn issue_batch(&mut self, digests: &[Digest], now: u64) -> Result<Vec<TimestampToken>, TsaError> {
        if digests.is_empty() {
            return Err(TsaError::EmptyBatch);
        }
        let time = self.begin(now)?;
        let root = merkle::root_of(digests).expect("non-empty");
        let payload = batch_payload(&root, time);
        let signature = self.key.sign(&payload).to_bytes().to_vec();
        self.finish(digests, now, time);
        Ok(digests
            .iter()
            .enumerate()
            .map(|(i, &digest)| TimestampToken {
                backend: Backend::RoughtimeStyle,
                digest,
                time,
                tsa_id: self.id.clone(),
                signature: signature.clone(),
                batch_path: Some(merkle::prove_value(digests, i).expect("index in range")),
                raw_signed_payload: payload.clone(),
            })
            .collect())
    }

    /// Models a ServerKeyExchange signature with the client random set to
    /// `digest` and the server random leading with a 32-bit time.
    pub fn issue_tls_style(&mut self, digest: Digest, now: u64) -> Result<TimestampToken, TsaError> {
        if !self.reachable {
            return Err(TsaError::Unreachable(String::from_utf8_lossy(&self.id).into_owned()));
        }
        let time = self.read_clock(now)?;
        let time32 = u32::try_from(time).map_err(|_| TsaError::TimestampOverflow(time))?;
        let payload = tls_payload(&self.id, &digest, time32);
        let signature = self.key.sign(&payload).to_bytes().to_vec();
        self.finish(&[digest], now, time);
        Ok(TimestampToken {
            backend: Backend::TlsStyle,
            digest,
            time,
            tsa_id: self.id.clone(),
            signature,
            batch_path: None,
            raw_signed_payload: payload,
        })
    }
}
