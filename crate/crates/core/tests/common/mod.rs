#![allow(dead_code)]

use freshproof::protocol::{run_session, NonceSource, SessionOutcome, SimChainView, TsaSet, VerifierConfig};
use freshproof::sim::{SimulationConfig, SimulationOutcome, Simulator};
use freshproof::tsa::{Backend, TrustStore, Tsa, TsaClock};

pub fn tsa(id: &str, backend: Backend) -> Tsa {
    Tsa::deterministic(id.as_bytes().to_vec(), backend, 11).unwrap()
}

pub fn honest_tsas() -> TsaSet {
    TsaSet::single(tsa("tsa-a", Backend::Rfc3161Style))
}

pub fn skewed_tsas(clock: TsaClock) -> TsaSet {
    TsaSet::single(tsa("tsa-a", Backend::Rfc3161Style).with_clock(clock))
}

pub struct Run {
    pub session: SessionOutcome,
    pub sim: SimulationOutcome,
    pub trust: TrustStore,
    pub tsas: TsaSet,
}

pub fn run(config: SimulationConfig, mut tsas: TsaSet, verifier: VerifierConfig) -> Run {
    let seed = config.seed;
    let mut sim = Simulator::new(config).unwrap();
    let trust = tsas.trust_store();
    let mut nonces = NonceSource::seeded(seed);
    let session = {
        let mut view = SimChainView::new(&mut sim);
        run_session(&mut view, &mut tsas, &verifier, &mut nonces)
    };
    Run {
        session,
        sim: sim.finish(),
        trust,
        tsas,
    }
}

pub fn rounds(n: usize, chained: bool) -> VerifierConfig {
    VerifierConfig {
        rounds: n,
        chained,
        ..VerifierConfig::default()
    }
}
