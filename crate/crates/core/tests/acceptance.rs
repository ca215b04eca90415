//! End-to-end acceptance checks. Run with `--nocapture` to see one
//! PASS/FAIL line per criterion.

use std::time::Instant;

use freshproof::accountability::{audit_proof, verify_evidence};
use freshproof::hash::sha256;
use freshproof::protocol::{
    encode_commitment_tx, make_commitment, make_digest, verify_proof, CommitmentEncoding, FreshnessProof,
    NonceSource,
};
use freshproof::scenario::{stamp, ScenarioSpec, StampOutcome, BUNDLED};
use freshproof::sim::rules::{median_past_11, network_time, validate_block_timestamp, NodeClock};
use freshproof::sim::{write_jsonl, StrategyKind};
use freshproof::tsa::{Backend, TimestampToken, Tsa};
use freshproof::{BlockHeader, Digest, Transaction, TxKind};
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn check(cond: bool, detail: String) -> Verdict {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn bundled(name: &str) -> ScenarioSpec {
    ScenarioSpec::bundled(name).unwrap()
}

fn median(v: &mut [u64]) -> f64 {
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0
    }
}

fn honest_200() -> StampOutcome {
    let mut spec = bundled("honest_baseline");
    spec.simulation.run_length = 600;
    spec.verifier.as_mut().unwrap().rounds = 200;
    stamp(&spec).unwrap()
}

fn accuracy() -> Verdict {
    let started = Instant::now();
    let out = honest_200();
    let reports: Vec<_> = out.proofs.iter().map(|p| verify_proof(p, &out.trust_store)).collect();
    let elapsed = started.elapsed().as_secs_f64();
    let mut windows: Vec<u64> = reports.iter().map(|r| r.window_end - r.window_start).collect();
    let mean = windows.iter().sum::<u64>() as f64 / windows.len() as f64;
    let med = median(&mut windows);
    let all_valid = reports.iter().all(|r| r.valid);
    check(
        out.error.is_none()
            && out.proofs.len() >= 200
            && all_valid
            && (300.0..=900.0).contains(&med)
            && (mean - 600.0).abs() <= 0.25 * 600.0
            && elapsed < 30.0,
        format!(
            "{} proofs, all valid {all_valid}, median window {med:.1} s, mean {mean:.1} s, runtime {elapsed:.2} s",
            out.proofs.len()
        ),
    )
}

fn detection() -> Verdict {
    let mut spec = bundled("shifted_miner");
    spec.simulation.run_length = 1200;
    spec.verifier.as_mut().unwrap().rounds = 1050;
    let out = stamp(&spec).unwrap();
    let records = &out.simulation.records;
    let (mut adversary, mut flagged, mut honest, mut false_pos, mut invalid) = (0, 0, 0, 0, 0);
    for proof in &out.proofs {
        let report = verify_proof(proof, &out.trust_store);
        if !report.valid {
            invalid += 1;
        }
        for hc in &report.timestamp_ok {
            if records[hc.height as usize].strategy == StrategyKind::ShiftFixed {
                adversary += 1;
                flagged += usize::from(!hc.ok);
            } else {
                honest += 1;
                false_pos += usize::from(!hc.ok);
            }
        }
    }
    let covered = adversary + honest;
    check(
        out.error.is_none() && invalid == 0 && covered >= 1000 && adversary > 0 && flagged == adversary && false_pos == 0,
        format!(
            "{covered} covered blocks, adversary flagged {flagged}/{adversary}, honest false positives {false_pos}/{honest}, invalid proofs {invalid}"
        ),
    )
}

fn later_inclusion() -> Verdict {
    let out = stamp(&bundled("late_inclusion")).unwrap();
    let Some(proof) = out.proofs.first() else {
        return Err(format!("no proof: {:?}", out.error));
    };
    let report = verify_proof(proof, &out.trust_store);
    let mined: Vec<u64> = proof
        .covered_headers
        .iter()
        .map(|h| out.simulation.records[h.height as usize].mined_at)
        .collect();
    let inside = mined.iter().all(|&t| report.window_start < t && t < report.window_end);
    check(
        proof.covered_headers.len() >= 2 && report.valid && report.all_timestamps_ok() && inside,
        format!(
            "covered heights {:?}, valid {}, window ({}, {}), mining times {:?}",
            report.covered_heights.map(|r| r.start..=r.end),
            report.valid,
            report.window_start,
            report.window_end,
            mined
        ),
    )
}

/// One distinguisher trial. The adversary sees the block, the previous
/// header and a signing oracle of the public TSA, but not the nonce. It
/// recomputes commitments for every digest it can form and every plausible
/// stamping second; with no match it guesses uniformly.
fn distinguisher_trial(rng: &mut ChaCha20Rng, tsa: &mut Tsa, oracle: &mut Tsa, with_nonce: bool) -> bool {
    const N: usize = 16;
    const GUESSES: usize = 16;
    let header_prev = BlockHeader {
        height: rng.gen_range(1..1_000_000),
        prev_hash: Digest(rng.gen()),
        merkle_root: Digest(rng.gen()),
        timestamp: 1_700_000_000 + rng.gen_range(0..10_000_000),
        nonce: rng.next_u64(),
    };
    let observed = header_prev.timestamp + rng.gen_range(0..4);
    let d0 = if with_nonce {
        make_digest(&NonceSource::seeded(rng.next_u64()).draw(), &header_prev)
    } else {
        sha256(&[&header_prev.to_bytes()])
    };
    let token = tsa.issue_token(d0, observed).unwrap();
    let c = make_commitment(&[token], CommitmentEncoding::OpReturn).unwrap();
    let mut txs: Vec<Transaction> = (0..N - 1)
        .map(|_| Transaction::new(TxKind::CommitmentOpreturn, rng.gen::<[u8; 32]>().to_vec()).unwrap())
        .collect();
    txs.push(encode_commitment_tx(&c));
    txs.shuffle(rng);
    let truth = txs.iter().position(|t| c.matches(t)).unwrap();

    let mut digests = vec![sha256(&[&header_prev.to_bytes()])];
    for _ in 0..GUESSES {
        digests.push(make_digest(&NonceSource::seeded(rng.next_u64()).draw(), &header_prev));
    }
    for d in digests {
        for t in header_prev.timestamp..header_prev.timestamp + 4 {
            let guess = make_commitment(&[oracle.issue_token(d, t).unwrap()], CommitmentEncoding::OpReturn).unwrap();
            if let Some(i) = txs.iter().position(|tx| guess.matches(tx)) {
                return i == truth;
            }
        }
    }
    rng.gen_range(0..N) == truth
}

fn censorship() -> Verdict {
    const TRIALS: u64 = 1000;
    let mut rng = ChaCha20Rng::seed_from_u64(0xC3);
    let mut tsa = Tsa::deterministic(b"tsa-rfc".to_vec(), Backend::Rfc3161Style, 4).unwrap();
    let mut oracle = Tsa::deterministic(b"tsa-rfc".to_vec(), Backend::Rfc3161Style, 4).unwrap();
    let wins = (0..TRIALS)
        .filter(|_| distinguisher_trial(&mut rng, &mut tsa, &mut oracle, true))
        .count() as f64;
    let control = (0..200)
        .filter(|_| distinguisher_trial(&mut rng, &mut tsa, &mut oracle, false))
        .count();
    let p = 1.0 / 16.0;
    let expected = TRIALS as f64 * p;
    let sigma = (TRIALS as f64 * p * (1.0 - p)).sqrt();
    let z = (wins - expected) / sigma;
    check(
        z.abs() <= 3.0 && control == 200,
        format!(
            "adversary {wins}/{TRIALS} (expected {expected:.1}, z = {z:.2}); nonce-less control {control}/200"
        ),
    )
}

fn accountability() -> Verdict {
    let skewed = stamp(&bundled("skewed_tsa")).unwrap();
    let evidence = skewed
        .proofs
        .first()
        .and_then(|p| audit_proof(p, &skewed.trust_store).ok().flatten());
    let skew_ok = evidence.as_ref().is_some_and(|e| verify_evidence(e, &skewed.trust_store));
    let diff = evidence.as_ref().map(|e| e.token0.time as i64 - e.token1.time as i64);

    let honest = honest_200();
    let mut audited = 0;
    let mut false_evidence = 0;
    for p in &honest.proofs {
        match audit_proof(p, &honest.trust_store) {
            Ok(None) => audited += 1,
            _ => false_evidence += 1,
        }
    }
    check(
        skew_ok && audited >= 200 && false_evidence == 0,
        format!(
            "skewed evidence verifies {skew_ok} (T0 - T1 = {diff:?}); honest audits clean {audited}, with evidence {false_evidence}"
        ),
    )
}

fn oracle_lower_median(values: &[u64]) -> u64 {
    // The element with at most (n-1)/2 values strictly below it and more than
    // (n-1)/2 values at or below it.
    let k = (values.len() - 1) / 2;
    *values
        .iter()
        .find(|&&x| {
            values.iter().filter(|&&v| v < x).count() <= k && values.iter().filter(|&&v| v <= x).count() > k
        })
        .unwrap()
}

fn oracle_network_time(local: u64, offsets: &[i64]) -> u64 {
    let mut adj = 0i64;
    if !offsets.is_empty() {
        let k = (offsets.len() - 1) / 2;
        adj = *offsets
            .iter()
            .find(|&&x| {
                offsets.iter().filter(|&&v| v < x).count() <= k && offsets.iter().filter(|&&v| v <= x).count() > k
            })
            .unwrap();
        adj = adj.clamp(-4200, 4200);
    }
    (local as i64 + adj) as u64
}

fn rule_conformance() -> Verdict {
    let mut rng = ChaCha20Rng::seed_from_u64(0x2101);
    let mut mismatches = 0;
    for case in 0..10_000 {
        let n = rng.gen_range(0..=15);
        let base = 1_600_000_000u64;
        let spread = if case % 2 == 0 { 20 } else { 100_000 };
        let headers: Vec<BlockHeader> = (0..n)
            .map(|i| BlockHeader {
                height: i as u64,
                prev_hash: Digest::ZERO,
                merkle_root: Digest::ZERO,
                timestamp: base + rng.gen_range(0..spread),
                nonce: 0,
            })
            .collect();
        let last: Vec<u64> = headers.iter().rev().take(11).map(|h| h.timestamp).collect();
        let mtp = (!last.is_empty()).then(|| oracle_lower_median(&last));
        if median_past_11(&headers).ok() != mtp {
            mismatches += 1;
        }

        let peers = rng.gen_range(0..8);
        let offsets: Vec<i64> = (0..peers).map(|_| rng.gen_range(-9000..=9000)).collect();
        let local = base + rng.gen_range(0..spread);
        let clock = NodeClock::new(local, offsets.clone());
        let nt = oracle_network_time(local, &offsets);
        if network_time(&clock) != nt {
            mismatches += 1;
        }

        let candidate = match rng.gen_range(0..4) {
            0 => mtp.unwrap_or(base) + rng.gen_range(0..3) - 1,
            1 => nt + 7200 + rng.gen_range(0..3) - 1,
            _ => base + rng.gen_range(0..spread + 8000),
        };
        let expected = mtp.is_none_or(|m| candidate > m) && candidate < nt + 7200;
        if validate_block_timestamp(candidate, &headers, &clock) != expected {
            mismatches += 1;
        }
    }
    check(mismatches == 0, format!("10000 random cases, {mismatches} mismatches"))
}

const PIN_FILE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/scenario_digests.txt");

fn scenario_digests(name: &str) -> String {
    let out = stamp(&bundled(name)).unwrap();
    let mut events = Vec::new();
    write_jsonl(&out.simulation.events, &mut events).unwrap();
    format!(
        "{name} {} {} {}",
        out.simulation.chain_digest().to_hex(),
        sha256(&[&events]).to_hex(),
        out.proofs_digest().to_hex()
    )
}

fn fixture_vectors_match() -> bool {
    let headers = include_str!("fixtures/header_vectors.txt");
    let tokens = include_str!("fixtures/token_vectors.txt");
    let rows = |t: &'static str| {
        t.lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
            .map(|l| l.split_whitespace().collect::<Vec<_>>())
    };
    let headers_ok = rows(headers).all(|f| {
        let h = BlockHeader::from_bytes(&hex::decode(f[5]).unwrap()).unwrap();
        hex::encode(h.to_bytes()) == f[5] && h.hash().to_hex() == f[6]
    });
    let tokens_ok = rows(tokens).all(|f| {
        let t = TimestampToken::from_hex(f[6]).unwrap();
        t.to_hex() == f[6] && make_commitment(&[t], CommitmentEncoding::OpReturn).unwrap().value.to_hex() == f[7]
    });
    headers_ok && tokens_ok
}

fn determinism() -> Verdict {
    let first: Vec<String> = BUNDLED.iter().map(|(name, _)| scenario_digests(name)).collect();
    let second: Vec<String> = BUNDLED.iter().map(|(name, _)| scenario_digests(name)).collect();
    let current = first.join("\n") + "\n";
    if std::env::var_os("FRESHPROOF_PIN_DIGESTS").is_some() {
        std::fs::write(PIN_FILE, &current).unwrap();
    }
    let pinned = std::fs::read_to_string(PIN_FILE).unwrap_or_default();
    let repeat = first == second;
    let matches_pin = pinned == current;
    let vectors = fixture_vectors_match();
    check(
        repeat && matches_pin && vectors,
        format!(
            "{} scenarios, repeat run identical {repeat}, pinned digests match {matches_pin}, cross-implementation vectors {vectors}",
            first.len()
        ),
    )
}

fn mutation() -> Verdict {
    let mut proofs: Vec<(FreshnessProof, freshproof::tsa::TrustStore)> = Vec::new();
    for name in ["honest_baseline", "multi_tsa", "late_inclusion", "shifted_miner"] {
        let out = stamp(&bundled(name)).unwrap();
        proofs.extend(out.proofs.into_iter().take(5).map(|p| (p, out.trust_store.clone())));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(0x8);
    let (mut decode_err, mut invalid, mut flipped, mut silent) = (0, 0, 0, 0);
    for _ in 0..1000 {
        let (proof, trust) = &proofs[rng.gen_range(0..proofs.len())];
        let baseline = verify_proof(proof, trust);
        assert!(baseline.valid);
        let mut bytes = proof.to_bytes();
        let bit = rng.gen_range(0..bytes.len() * 8);
        bytes[bit / 8] ^= 1 << (bit % 8);
        match FreshnessProof::from_bytes(&bytes) {
            Err(_) => decode_err += 1,
            Ok(mutated) => {
                let report = verify_proof(&mutated, trust);
                if !report.valid {
                    invalid += 1;
                } else if report.timestamp_ok != baseline.timestamp_ok {
                    flipped += 1;
                } else {
                    silent += 1;
                }
            }
        }
    }
    check(
        silent == 0,
        format!("1000 mutations: decode errors {decode_err}, invalid {invalid}, check flipped {flipped}, silently valid {silent}"),
    )
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 8] = [
        ("1 accuracy", accuracy),
        ("2 detection", detection),
        ("3 later inclusion", later_inclusion),
        ("4 censorship resistance", censorship),
        ("5 accountability", accountability),
        ("6 rule conformance", rule_conformance),
        ("7 determinism", determinism),
        ("8 mutation robustness", mutation),
    ];
    let mut failed = Vec::new();
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                println!("FAIL criterion {name}: {detail}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
