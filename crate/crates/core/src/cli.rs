//! Command-line front end. Exit codes are part of the interface:
//! 0 success or clean, 1 structural failure, 2 timestamp violation detected,
//! 3 commitment starvation, 64 usage error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::accountability::{audit_proof, cross_tsa_disagreements, verify_evidence, MisbehaviorEvidence};
use crate::protocol::{verify_proof, FreshnessProof, ProtocolError};
use crate::scenario::{self, ScenarioSpec, BUNDLED};
use crate::sim::{write_jsonl, SimulationOutcome};
use crate::tsa::TrustStore;

pub const EXIT_OK: i32 = 0;
pub const EXIT_STRUCTURAL: i32 = 1;
pub const EXIT_TIMESTAMP_VIOLATION: i32 = 2;
pub const EXIT_STARVED: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "freshproof", version, about = "Timestamp-authority freshness proofs for simulated block chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Args, Debug)]
pub struct SpecArgs {
    /// Scenario JSON file.
    #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
    pub spec: Option<PathBuf>,
    /// Name of a bundled scenario instead of a file.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Output directory (overrides the scenario's `outputs.dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `simulation.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a scenario's simulation and write the chain and event log.
    Simulate(SpecArgs),
    /// Run a scenario with an embedded verifier and write one proof per round.
    Stamp(SpecArgs),
    /// Verify a proof file against a trust store.
    Verify {
        #[arg(long)]
        proof: PathBuf,
        #[arg(long)]
        trust_store: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Look for authority self-contradiction in a proof, or re-check evidence.
    Audit {
        #[arg(long, required_unless_present = "verify_evidence")]
        proof: Option<PathBuf>,
        #[arg(long)]
        trust_store: PathBuf,
        /// Where to write evidence when found.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Re-check an existing evidence file instead of auditing a proof.
        #[arg(long, conflicts_with = "proof")]
        verify_evidence: Option<PathBuf>,
    },
    /// List bundled scenarios, or write them to a directory.
    Scenarios {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn structural(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_STRUCTURAL,
            message: message.into(),
        }
    }
}

type CmdResult = Result<i32, Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{e}");
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(&args, out),
        Command::Stamp(args) => cmd_stamp(&args, out),
        Command::Verify {
            proof,
            trust_store,
            format,
        } => cmd_verify(&proof, &trust_store, format, out),
        Command::Audit {
            proof,
            trust_store,
            out: evidence_out,
            verify_evidence,
        } => match (proof, verify_evidence) {
            (_, Some(evidence)) => cmd_verify_evidence(&evidence, &trust_store, out),
            (Some(proof), None) => cmd_audit(&proof, &trust_store, evidence_out.as_deref(), out),
            (None, None) => Err(Failure::usage("audit needs --proof or --verify-evidence")),
        },
        Command::Scenarios { out: dir } => cmd_scenarios(dir.as_deref(), out),
    };
    match result {
        Ok(code) => code,
        Err(failure) => {
            let _ = writeln!(err, "error: {}", failure.message);
            failure.code
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Failure::usage(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, contents).map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
}

fn load_spec(args: &SpecArgs) -> Result<ScenarioSpec, Failure> {
    let spec = match (&args.spec, &args.scenario) {
        (Some(path), _) => ScenarioSpec::from_json(&read(path)?),
        (None, Some(name)) => ScenarioSpec::bundled(name),
        (None, None) => return Err(Failure::usage("one of --spec or --scenario is required")),
    }
    .map_err(|e| Failure::usage(e.to_string()))?;
    Ok(match args.seed {
        Some(seed) => spec.with_seed(seed),
        None => spec,
    })
}

fn load_trust(path: &Path) -> Result<TrustStore, Failure> {
    TrustStore::from_json(&read(path)?).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn write_simulation(dir: &Path, sim: &SimulationOutcome) -> Result<(), Failure> {
    let mut chain = Vec::new();
    write_jsonl(&sim.chain, &mut chain).expect("in-memory write");
    let mut events = Vec::new();
    write_jsonl(&sim.events, &mut events).expect("in-memory write");
    write_file(&dir.join("chain.jsonl"), &chain)?;
    write_file(&dir.join("events.jsonl"), &events)
}

fn cmd_simulate(args: &SpecArgs, out: &mut dyn Write) -> CmdResult {
    let spec = load_spec(args)?;
    let dir = args.out.clone().unwrap_or_else(|| spec.output_dir());
    let sim = scenario::simulate(&spec).map_err(|e| Failure::usage(e.to_string()))?;
    write_simulation(&dir, &sim)?;
    let summary = json!({
        "scenario": spec.name,
        "seed": spec.simulation.seed,
        "blocks": sim.stats.blocks,
        "violations": sim.stats.violations,
        "consensus_rejections": sim.stats.consensus_rejections,
        "censored_txs": sim.stats.censored_txs,
        "chain_digest": sim.chain_digest(),
        "out": dir,
    });
    match args.format {
        Format::Json => writeln!(out, "{summary}"),
        Format::Text => writeln!(
            out,
            "{}: blocks={} violations={} censored={} chain={}",
            spec.name,
            sim.stats.blocks,
            sim.stats.violations,
            sim.stats.censored_txs,
            sim.chain_digest()
        ),
    }
    .ok();
    Ok(EXIT_OK)
}

fn cmd_stamp(args: &SpecArgs, out: &mut dyn Write) -> CmdResult {
    let spec = load_spec(args)?;
    if spec.verifier.is_none() {
        return Err(Failure::usage(format!("scenario `{}` has no `verifier` section", spec.name)));
    }
    let dir = args.out.clone().unwrap_or_else(|| spec.output_dir());
    let outcome = scenario::stamp(&spec).map_err(|e| Failure::usage(e.to_string()))?;
    write_simulation(&dir, &outcome.simulation)?;
    write_file(&dir.join("trust_store.json"), outcome.trust_store.to_json().as_bytes())?;
    let mut files = Vec::new();
    for (i, proof) in outcome.proofs.iter().enumerate() {
        let path = dir.join(format!("proof_{i:03}.json"));
        write_file(&path, proof.to_json().as_bytes())?;
        files.push(path);
    }
    let summary = json!({
        "scenario": spec.name,
        "proofs": outcome.proofs.len(),
        "proof_digests": outcome.proofs.iter().map(|p| p.digest()).collect::<Vec<_>>(),
        "duplicate_payload_rounds": outcome.duplicate_payload_rounds,
        "error": outcome.error.as_ref().map(|e| e.to_string()),
        "out": dir,
    });
    match args.format {
        Format::Json => writeln!(out, "{summary}"),
        Format::Text => writeln!(out, "{}: wrote {} proof(s) to {}", spec.name, files.len(), dir.display()),
    }
    .ok();
    match outcome.error {
        None => Ok(EXIT_OK),
        Some(ProtocolError::CommitmentStarved { .. }) | Some(ProtocolError::ChainEnded) => Err(Failure {
            code: EXIT_STARVED,
            message: format!(
                "commitment starved after {} proof(s): {}",
                outcome.proofs.len(),
                outcome.error.expect("matched")
            ),
        }),
        Some(e) => Err(Failure::structural(e.to_string())),
    }
}

fn cmd_verify(proof: &Path, trust: &Path, format: Format, out: &mut dyn Write) -> CmdResult {
    let text = read(proof)?;
    let trust = load_trust(trust)?;
    let proof = FreshnessProof::from_json(&text).map_err(|e| Failure::structural(format!("proof does not parse: {e}")))?;
    let report = verify_proof(&proof, &trust);
    match format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&report).expect("report serializes")),
        Format::Text => writeln!(
            out,
            "valid={} window=({}, {}) flagged={:?} reasons={:?}",
            report.valid,
            report.window_start,
            report.window_end,
            report.flagged_heights(),
            report.failure_reasons.iter().map(|r| r.as_str()).collect::<Vec<_>>()
        ),
    }
    .ok();
    Ok(if !report.valid {
        EXIT_STRUCTURAL
    } else if !report.all_timestamps_ok() {
        EXIT_TIMESTAMP_VIOLATION
    } else {
        EXIT_OK
    })
}

fn cmd_audit(proof_path: &Path, trust: &Path, evidence_out: Option<&Path>, out: &mut dyn Write) -> CmdResult {
    let text = read(proof_path)?;
    let trust = load_trust(trust)?;
    let proof = FreshnessProof::from_json(&text).map_err(|e| Failure::structural(format!("proof does not parse: {e}")))?;
    let evidence = audit_proof(&proof, &trust).map_err(|e| Failure::structural(e.to_string()))?;
    for note in cross_tsa_disagreements(&proof) {
        writeln!(
            out,
            "note: tsa {} opened at {} after tsa {} closed at {}",
            hex::encode(&note.opening_tsa),
            note.opening_time,
            hex::encode(&note.closing_tsa),
            note.closing_time
        )
        .ok();
    }
    match evidence {
        None => {
            writeln!(out, "clean").ok();
        }
        Some(ev) => {
            let path = evidence_out
                .map(Path::to_path_buf)
                .unwrap_or_else(|| proof_path.with_extension("evidence.json"));
            write_file(&path, ev.to_json().as_bytes())?;
            writeln!(out, "evidence: {}", path.display()).ok();
        }
    }
    Ok(EXIT_OK)
}

fn cmd_verify_evidence(path: &Path, trust: &Path, out: &mut dyn Write) -> CmdResult {
    let text = read(path)?;
    let trust = load_trust(trust)?;
    let ev = MisbehaviorEvidence::from_json(&text)
        .map_err(|e| Failure::structural(format!("evidence does not parse: {e}")))?;
    let ok = verify_evidence(&ev, &trust);
    writeln!(out, "{ok}").ok();
    Ok(if ok { EXIT_OK } else { EXIT_STRUCTURAL })
}

fn cmd_scenarios(dir: Option<&Path>, out: &mut dyn Write) -> CmdResult {
    for (name, text) in BUNDLED {
        match dir {
            Some(dir) => {
                let path = dir.join(format!("{name}.json"));
                write_file(&path, text.as_bytes())?;
                writeln!(out, "{}", path.display()).ok();
            }
            None => {
                writeln!(out, "{name}").ok();
            }
        }
    }
    Ok(EXIT_OK)
}
