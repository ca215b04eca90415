//! Scenario documents: a simulation, a fleet of authorities and a verifier
//! configuration that together fully determine a run.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::{sha256, Digest};
use crate::protocol::{run_session, FreshnessProof, NonceSource, ProtocolError, SimChainView, TsaSet, VerifierConfig};
use crate::sim::{run_simulation, ConfigError, SimulationConfig, SimulationOutcome, Simulator};
use crate::tsa::{Backend, ClockStep, TrustStore, Tsa, TsaClock, TsaError, MAX_TSA_ID_LEN};

/// Scenarios shipped with the crate, by name.
pub const BUNDLED: [(&str, &str); 6] = [
    ("honest_baseline", include_str!("../scenarios/honest_baseline.json")),
    ("shifted_miner", include_str!("../scenarios/shifted_miner.json")),
    ("late_inclusion", include_str!("../scenarios/late_inclusion.json")),
    ("censor_partial", include_str!("../scenarios/censor_partial.json")),
    ("skewed_tsa", include_str!("../scenarios/skewed_tsa.json")),
    ("multi_tsa", include_str!("../scenarios/multi_tsa.json")),
];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario does not parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Tsa(#[from] TsaError),
    #[error("unknown bundled scenario `{0}`")]
    UnknownBundled(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TsaSpec {
    pub tsa_id: String,
    pub backend: Backend,
    #[serde(default)]
    pub clock_offset: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clock_step: Option<ClockStep>,
}

impl TsaSpec {
    pub fn clock(&self) -> TsaClock {
        TsaClock {
            offset: self.clock_offset,
            step: self.clock_step,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub tsa_fleet: Vec<TsaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verifier: Option<VerifierConfig>,
    #[serde(default)]
    pub outputs: OutputSpec,
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let spec: ScenarioSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn bundled(name: &str) -> Result<Self, ScenarioError> {
        let (_, text) = BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| ScenarioError::UnknownBundled(name.to_string()))?;
        Self::from_json(text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.simulation.validate()?;
        for (i, tsa) in self.tsa_fleet.iter().enumerate() {
            if tsa.tsa_id.is_empty() || tsa.tsa_id.len() > MAX_TSA_ID_LEN {
                return Err(ConfigError::new(format!("tsa_fleet[{i}].tsa_id"), "must be 1..=32 bytes"));
            }
            if self.tsa_fleet[..i].iter().any(|t| t.tsa_id == tsa.tsa_id) {
                return Err(ConfigError::new(format!("tsa_fleet[{i}].tsa_id"), "duplicate id"));
            }
        }
        if let Some(v) = &self.verifier {
            if self.tsa_fleet.is_empty() {
                return Err(ConfigError::new("tsa_fleet", "a verifier needs at least one authority"));
            }
            if let Some(missing) = v.tsa_set.iter().find(|id| !self.tsa_fleet.iter().any(|t| &t.tsa_id == *id)) {
                return Err(ConfigError::new("verifier.tsa_set", format!("`{missing}` is not in tsa_fleet")));
            }
            if v.rounds == 0 {
                return Err(ConfigError::new("verifier.rounds", "must be positive"));
            }
            if v.starvation_budget == 0 {
                return Err(ConfigError::new("verifier.starvation_budget", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.simulation.seed = seed;
        self
    }

    pub fn output_dir(&self) -> PathBuf {
        self.outputs
            .dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("out").join(&self.name))
    }

    /// The authorities the verifier stamps with, keyed from the scenario seed.
    pub fn build_tsas(&self) -> Result<TsaSet, ScenarioError> {
        let selected = self.verifier.as_ref().map(|v| v.tsa_set.clone()).unwrap_or_default();
        let tsas = self
            .tsa_fleet
            .iter()
            .filter(|t| selected.is_empty() || selected.contains(&t.tsa_id))
            .map(|t| {
                Tsa::deterministic(t.tsa_id.as_bytes().to_vec(), t.backend, self.simulation.seed)
                    .map(|tsa| tsa.with_clock(t.clock()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TsaSet::new(tsas)?)
    }

    /// Trust store covering the whole fleet.
    pub fn trust_store(&self) -> Result<TrustStore, ScenarioError> {
        self.tsa_fleet
            .iter()
            .map(|t| {
                Tsa::deterministic(t.tsa_id.as_bytes().to_vec(), t.backend, self.simulation.seed)
                    .map(|tsa| tsa.identity())
                    .map_err(ScenarioError::from)
            })
            .collect()
    }
}

pub fn simulate(spec: &ScenarioSpec) -> Result<SimulationOutcome, ScenarioError> {
    Ok(run_simulation(spec.simulation.clone(), &[])?)
}

#[derive(Debug)]
pub struct StampOutcome {
    pub simulation: SimulationOutcome,
    pub proofs: Vec<FreshnessProof>,
    pub trust_store: TrustStore,
    pub duplicate_payload_rounds: Vec<usize>,
    pub error: Option<ProtocolError>,
}

impl StampOutcome {
    /// Hash over the canonical bytes of every proof, in round order.
    pub fn proofs_digest(&self) -> Digest {
        let digests: Vec<[u8; 32]> = self.proofs.iter().map(|p| p.digest().0).collect();
        sha256(&[&digests.concat()])
    }
}

/// Runs the simulation with an embedded verifier, then mines out the rest
/// of the configured run.
pub fn stamp(spec: &ScenarioSpec) -> Result<StampOutcome, ScenarioError> {
    let config = spec.verifier.clone().unwrap_or_default();
    let mut tsas = spec.build_tsas()?;
    let trust_store = spec.trust_store()?;
    let mut sim = Simulator::new(spec.simulation.clone())?;
    let mut nonces = NonceSource::seeded(spec.simulation.seed);
    let session = {
        let mut view = SimChainView::new(&mut sim);
        run_session(&mut view, &mut tsas, &config, &mut nonces)
    };
    sim.run_to_end();
    Ok(StampOutcome {
        simulation: sim.finish(),
        proofs: session.proofs,
        trust_store,
        duplicate_payload_rounds: session.duplicate_payload_rounds,
        error: session.error,
    })
}
