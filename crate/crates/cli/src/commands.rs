use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clawbell::circuits::phase::{phase_circuit_resources, PhaseVariant};
use clawbell::circuits::{build_for_modulus, count_gates, CircuitKind, CostBasis, ResourceReport};
use clawbell::extractor::{extract_and_factor, ExtractError, GlParams};
use clawbell::postselect::{rows_to_csv, run_sweep, threshold_of, DiscardSide, Estimator, SweepConfig, SweepError};
use clawbell::protocol::{ProtocolError, Verifier, VerifierConfig};
use clawbell::provers::{splitmix, Prover, ProverSpec};
use clawbell::tcf::{ddh_gen, rabin_gen, KeyFile, SecurityParams, VerifierKey};
use clawbell::wire::{serve_prover, Channel, RemoteProver, WireError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::{
    BasisArg, DiscardArg, EstimatorArg, ExtractArgs, Family, KeySource, KeygenArgs, ProveArgs, ResourcesArgs, RunArgs,
    SessionArgs, SweepArgs, VerifyArgs,
};

/// 3 for transport failures, 4 for protocol violations, 1 otherwise.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(p) = cause.downcast_ref::<ProtocolError>() {
            match p {
                ProtocolError::Transport(_) => return 3,
                ProtocolError::Violation(_) => return 4,
                _ => {}
            }
        }
        if let Some(w) = cause.downcast_ref::<WireError>() {
            return match w {
                WireError::Violation(_) | WireError::Parse(_) => 4,
                _ => 3,
            };
        }
        if let Some(ExtractError::Transport(_)) = cause.downcast_ref::<ExtractError>() {
            return 3;
        }
    }
    1
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

fn load_secret(path: &Path) -> Result<VerifierKey> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading key file {}", path.display()))?;
    let file = KeyFile::from_json(&text).with_context(|| format!("key file {}", path.display()))?;
    Ok(file.secret().with_context(|| format!("key file {}", path.display()))?.clone())
}

fn key_from(src: &KeySource, seed: u64) -> Result<VerifierKey> {
    match &src.key {
        Some(p) => load_secret(p),
        None => Ok(VerifierKey::rabin(rabin_gen(SecurityParams { n_bits: src.bits, rng_seed: seed })?)),
    }
}

/// The key the verifier uses with a prover that expects lift `m`.
fn with_lift(vk: VerifierKey, lift: Option<u32>) -> Result<VerifierKey> {
    match (vk, lift) {
        (VerifierKey::Rabin { keys, .. }, Some(m)) => Ok(VerifierKey::Rabin { keys, lift: m }),
        (VerifierKey::Ddh(_), Some(_)) => bail!("a lifted prover needs a Rabin key"),
        (vk, None) => Ok(vk),
    }
}

pub fn keygen(a: KeygenArgs) -> Result<()> {
    let vk = match a.family {
        Family::Rabin => VerifierKey::rabin(rabin_gen(SecurityParams { n_bits: a.bits, rng_seed: a.seed })?),
        Family::Ddh => VerifierKey::Ddh(ddh_gen(a.k, a.bits, a.seed)?),
    };
    let file = KeyFile::Secret(vk);
    emit(a.out.as_deref(), &format!("{}\n", file.to_json()))?;
    if let Some(p) = a.public_out {
        emit(Some(&p), &format!("{}\n", file.to_public().to_json()))?;
    }
    Ok(())
}

fn transcript_writer(path: Option<&PathBuf>) -> Result<Option<BufWriter<File>>> {
    path.map(|p| File::create(p).map(BufWriter::new).with_context(|| format!("creating {}", p.display()))).transpose()
}

/// Plays `trials` iterations and writes the report.
fn play(vk: &VerifierKey, prover: &mut dyn Prover, s: &SessionArgs, label: &str) -> Result<()> {
    let cfg = VerifierConfig { challenge_ratio: s.challenge_ratio, postselect: !s.no_postselect };
    let mut verifier = Verifier::new(vk.clone(), cfg, s.seed)?;
    let mut sink = transcript_writer(s.transcripts.as_ref())?;
    let mut sink_err: Option<io::Error> = None;
    let tally = verifier.run(prover, s.trials, |t| {
        if let (Some(w), None) = (sink.as_mut(), &sink_err) {
            let res = serde_json::to_writer(&mut *w, t).map_err(io::Error::from).and_then(|()| w.write_all(b"\n"));
            sink_err = res.err();
        }
    })?;
    if let Some(e) = sink_err {
        return Err(e).context("writing transcripts");
    }
    if let Some(mut w) = sink {
        w.flush().context("writing transcripts")?;
    }
    let report = match tally.report() {
        Ok(r) => serde_json::to_value(r)?,
        Err(ProtocolError::InsufficientData { .. }) => Value::Null,
        Err(e) => return Err(e.into()),
    };
    let public = vk.public();
    let out = json!({
        "prover": label,
        "family": match public { clawbell::tcf::PublicKey::Rabin(_) => "rabin", clawbell::tcf::PublicKey::Ddh(_) => "ddh" },
        "domain_bits": public.domain_bits(),
        "trials": s.trials,
        "seed": s.seed,
        "challenge_ratio": s.challenge_ratio,
        "postselect": !s.no_postselect,
        "discarded": tally.discarded,
        "report": report,
    });
    emit(s.out.as_deref(), &pretty(&out))
}

pub fn verify(a: VerifyArgs) -> Result<()> {
    let vk = load_secret(&a.key)?;
    let session = format!("{:016x}", a.session.seed);
    let (mut channel, mut child) = if let Some(addr) = &a.listen {
        let listener = TcpListener::bind(addr).map_err(WireError::from).with_context(|| format!("binding {addr}"))?;
        eprintln!("listening on {}", listener.local_addr()?);
        let (stream, _) = listener.accept().map_err(WireError::from)?;
        (Channel::tcp(stream, session)?, None)
    } else {
        let cmd = a.spawn.as_deref().expect("clap requires --listen or --spawn");
        let mut parts = cmd.split_whitespace();
        let program = parts.next().ok_or_else(|| anyhow!("empty --spawn command"))?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(WireError::from)
            .with_context(|| format!("starting {program}"))?;
        let (stdout, stdin) = (child.stdout.take().expect("piped"), child.stdin.take().expect("piped"));
        (Channel::new(stdout, stdin, session), Some(child))
    };
    channel.set_timeout(Duration::from_secs(a.timeout));
    let mut remote = RemoteProver::new(channel);
    let result = play(&vk, &mut remote, &a.session, "remote").and_then(|()| {
        remote.close().map_err(|e| ProtocolError::Transport(e.to_string()))?;
        Ok(())
    });
    if let Some(c) = child.as_mut() {
        if result.is_err() {
            let _ = c.kill();
        }
        let _ = c.wait();
    }
    result
}

pub fn prove(a: ProveArgs) -> Result<()> {
    let spec: ProverSpec = a.prover.parse()?;
    let mut prover = spec.build(a.seed, None)?;
    let mut channel = match &a.connect {
        Some(addr) => {
            let stream =
                TcpStream::connect(addr).map_err(WireError::from).with_context(|| format!("connecting to {addr}"))?;
            Channel::tcp(stream, "")?
        }
        None => Channel::stdio(),
    };
    channel.set_timeout(Duration::from_secs(a.timeout));
    serve_prover(&mut *prover, &mut channel)?;
    Ok(())
}

pub fn run(a: RunArgs) -> Result<()> {
    let spec: ProverSpec = a.prover.parse()?;
    let vk = with_lift(key_from(&a.key, a.session.seed)?, spec.lift())?;
    let mut prover = spec.build(splitmix(a.session.seed), None)?;
    play(&vk, &mut *prover, &a.session, &spec.to_string())
}

pub fn sweep(a: SweepArgs) -> Result<()> {
    let keys = rabin_gen(SecurityParams { n_bits: a.bits, rng_seed: a.seed })?;
    let mut cfg = SweepConfig::new(a.m, a.fidelities, a.trials, a.seed);
    cfg.circuit = a.circuit.parse()?;
    cfg.estimator = match a.estimator {
        EstimatorArg::Protocol => Estimator::Protocol,
        EstimatorArg::StateAnalysis => Estimator::StateAnalysis,
    };
    cfg.discard = match a.discard {
        DiscardArg::Prover => DiscardSide::Prover,
        DiscardArg::Verifier => DiscardSide::Verifier,
    };
    let rows = run_sweep(&cfg, &keys)?;
    if !a.json {
        return emit(a.out.as_deref(), &rows_to_csv(&rows));
    }
    let thresholds: serde_json::Map<String, Value> = cfg
        .m_values
        .iter()
        .map(|&m| {
            let of_m: Vec<_> = rows.iter().filter(|r| r.m == m).cloned().collect();
            let t = match threshold_of(&of_m) {
                Ok(f) => json!(f),
                Err(SweepError::NoCrossing) => Value::Null,
                Err(e) => return Err(e),
            };
            Ok((m.to_string(), t))
        })
        .collect::<Result<_, SweepError>>()?;
    let out = json!({
        "bits": a.bits,
        "seed": a.seed,
        "circuit": cfg.circuit.to_string(),
        "estimator": cfg.estimator,
        "discard": cfg.discard,
        "rows": rows,
        "thresholds": thresholds,
    });
    emit(a.out.as_deref(), &pretty(&out))
}

pub fn resources(a: ResourcesArgs) -> Result<()> {
    let report: ResourceReport = match a.builder.as_str() {
        "phase1" => phase_circuit_resources(PhaseVariant::Ancilla, a.n)?,
        "phase2" => phase_circuit_resources(PhaseVariant::Counter, a.n)?,
        other => {
            let kind: CircuitKind = other.parse()?;
            let keys = rabin_gen(SecurityParams { n_bits: a.n, rng_seed: a.seed })?;
            let basis = match a.basis {
                BasisArg::Native => CostBasis::Native,
                BasisArg::CliffordT => CostBasis::CliffordT,
            };
            count_gates(&build_for_modulus(kind, &keys.n, a.lift), basis)
        }
    };
    if a.json {
        let mut v = serde_json::to_value(report)?;
        v["builder"] = json!(a.builder);
        v["n"] = json!(a.n);
        return emit(None, &pretty(&v));
    }
    emit(
        None,
        &format!(
            "builder,n,qubits,total_gates,toffoli_count,depth\n{},{},{},{},{},{}\n",
            a.builder, a.n, report.qubits, report.total_gates, report.toffoli_count, report.depth
        ),
    )
}

pub fn extract(a: ExtractArgs) -> Result<()> {
    let vk = key_from(&a.key, a.seed)?;
    let key = vk.public();
    let spec: ProverSpec = a.prover.parse()?;
    let mut prover = spec.build(splitmix(a.seed), None)?;
    let params = GlParams::for_width(key.domain_bits(), a.mu)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let report = extract_and_factor(&mut *prover, &key, &params, &mut rng)?;
    emit(a.out.as_deref(), &pretty(&serde_json::to_value(report)?))
}
