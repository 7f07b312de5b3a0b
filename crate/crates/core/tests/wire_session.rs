use std::net::TcpListener;

use clawbell::protocol::{Tally, Verifier, VerifierConfig};
use clawbell::provers::{Cheater, IdealProver, Prover};
use clawbell::tcf::{rabin_gen, SecurityParams, VerifierKey};
use clawbell::wire::{serve_prover, Channel, RemoteProver};

fn key() -> VerifierKey {
    VerifierKey::rabin(rabin_gen(SecurityParams { n_bits: 32, rng_seed: 5 }).unwrap())
}

fn run_local(prover: &mut dyn Prover, trials: u64) -> Tally {
    let mut v = Verifier::new(key(), VerifierConfig::default(), 9).unwrap();
    v.run(prover, trials, |_| ()).unwrap()
}

fn run_over_pipes<P: Prover + Send + 'static>(mut prover: P, trials: u64) -> Tally {
    let (to_prover_r, to_prover_w) = std::io::pipe().unwrap();
    let (to_verifier_r, to_verifier_w) = std::io::pipe().unwrap();
    let server = std::thread::spawn(move || {
        let mut ch = Channel::accepting(to_prover_r, to_verifier_w);
        serve_prover(&mut prover, &mut ch).unwrap()
    });
    let mut remote = RemoteProver::new(Channel::new(to_verifier_r, to_prover_w, "pipe-1"));
    let mut v = Verifier::new(key(), VerifierConfig::default(), 9).unwrap();
    let tally = v.run(&mut remote, trials, |_| ()).unwrap();
    remote.close().unwrap();
    assert!(server.join().unwrap() > trials);
    tally
}

fn run_over_tcp<P: Prover + Send + 'static>(mut prover: P, trials: u64) -> Tally {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let server = std::thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let reader = stream.try_clone().unwrap();
        let mut ch = Channel::accepting(reader, stream);
        serve_prover(&mut prover, &mut ch).unwrap()
    });
    let stream = std::net::TcpStream::connect(addr).unwrap();
    let mut remote = RemoteProver::new(Channel::tcp(stream, "tcp-1").unwrap());
    let mut v = Verifier::new(key(), VerifierConfig::default(), 9).unwrap();
    let tally = v.run(&mut remote, trials, |_| ()).unwrap();
    remote.close().unwrap();
    server.join().unwrap();
    tally
}

#[test]
fn remote_provers_reproduce_local_runs() {
    let local = run_local(&mut IdealProver::new(3), 2000);
    assert_eq!(run_over_pipes(IdealProver::new(3), 2000), local);
    assert_eq!(run_over_tcp(IdealProver::new(3), 2000), local);
    let r = local.report().unwrap();
    assert!((r.score_f64() - (2f64.sqrt() - 1.0)).abs() < r.ci_halfwidth);
}

#[test]
fn cheater_over_pipes_scores_near_zero() {
    let r = run_over_pipes(Cheater::new(4), 4000).report().unwrap();
    assert_eq!(r.p_x_f64(), 1.0);
    assert!(r.score_f64().abs() < r.ci_halfwidth);
}

#[test]
fn verifier_sees_transport_failure_when_prover_vanishes() {
    let (_r, w) = std::io::pipe().unwrap();
    let (r2, w2) = std::io::pipe().unwrap();
    drop(w2);
    let mut remote = RemoteProver::new(Channel::new(r2, w, "gone"));
    let mut v = Verifier::new(key(), VerifierConfig::default(), 1).unwrap();
    let err = v.run_iteration(&mut remote).unwrap_err();
    assert!(err.to_string().contains("transport"), "{err}");
}
