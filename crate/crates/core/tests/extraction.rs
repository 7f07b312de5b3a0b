use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use clawbell::bits::BitString;
use clawbell::extractor::{extract_and_factor, lemma1_bound, ExtractError, GlParams, SyntheticOracle};
use clawbell::protocol::{Basis, ImageMsg};
use clawbell::provers::{Cheater, IdealProver, Prover, ProverError, Simulator};
use clawbell::tcf::{rabin_gen, PublicKey, SecurityParams, VerifierKey};

fn key(bits: u32, seed: u64) -> VerifierKey {
    VerifierKey::rabin(rabin_gen(SecurityParams { n_bits: bits, rng_seed: seed }).unwrap())
}

fn successes<F>(trials: u64, bits: u32, mut make: F) -> u64
where
    F: FnMut(&VerifierKey, u64) -> Box<dyn Prover>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(bits as u64);
    (0..trials)
        .filter(|&i| {
            let vk = key(bits, 1000 + i);
            let pk = vk.public();
            let mut prover = make(&vk, i);
            let params = GlParams::for_width(pk.domain_bits(), GlParams::DEFAULT_MU).unwrap();
            match extract_and_factor(&mut prover, &pk, &params, &mut rng) {
                Ok(report) => {
                    let (p, q) = report.factors.expect("claw implies factors");
                    let PublicKey::Rabin(rp) = &pk else { unreachable!() };
                    assert_eq!(&p * &q, rp.n);
                    true
                }
                Err(ExtractError::ExtractionFailed { .. }) => false,
                Err(e) => panic!("{e}"),
            }
        })
        .count() as u64
}

#[test]
fn ideal_prover_is_factored() {
    let ok = successes(30, 32, |vk, s| Box::new(IdealProver::with_simulator(Simulator::from_trapdoor(vk.clone()), s)));
    assert!(ok >= 27, "{ok}/30");
}

#[test]
fn cheater_yields_nothing() {
    let ok = successes(30, 24, |_, s| Box::new(Cheater::new(s)));
    assert_eq!(ok, 0);
}

#[test]
fn phase_noise_prover_above_score_point_two_is_factored() {
    // delta = 0.4 at its optimal angle scores about 0.28.
    let ok = successes(40, 24, |vk, s| {
        let mut p = IdealProver::phase_noise(0.4, None, s).unwrap();
        p.set_simulator(Simulator::from_trapdoor(vk.clone()));
        Box::new(p)
    });
    assert!(ok >= 20, "{ok}/40");
}

struct Refuser(Cheater);

impl Prover for Refuser {
    fn round1(&mut self, key: &PublicKey) -> Result<ImageMsg, ProverError> {
        self.0.round1(key)
    }
    fn answer_preimage(&mut self) -> Result<BigUint, ProverError> {
        Err(ProverError::Refused)
    }
    fn round2(&mut self, r: &BitString) -> Result<BitString, ProverError> {
        self.0.round2(r)
    }
    fn round3(&mut self, basis: Basis) -> Result<bool, ProverError> {
        self.0.round3(basis)
    }
    fn reset(&mut self) -> Result<(), ProverError> {
        self.0.reset()
    }
}

#[test]
fn refusing_preimage_fails_early() {
    let pk = key(24, 3).public();
    let params = GlParams::for_width(pk.domain_bits(), 0.25).unwrap();
    let err = extract_and_factor(&mut Refuser(Cheater::new(1)), &pk, &params, &mut ChaCha8Rng::seed_from_u64(0));
    assert_eq!(err.unwrap_err(), ExtractError::ExtractionFailed { stage: "preimage", queries_used: 0 });
}

#[test]
fn lemma1_holds_on_planted_families() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let n = 10;
    for plant in 0..50u64 {
        let ys = rng.random_range(20..80);
        let mu: f64 = rng.random_range(0.01..0.3);
        // Mixture: most images nearly clean, some near or past 1/2.
        let rates: Vec<f64> = (0..ys)
            .map(|_| if rng.random_bool(0.7) { rng.random_range(0.0..0.2) } else { rng.random_range(0.3..0.9) })
            .collect();
        let measured: Vec<f64> = rates
            .iter()
            .enumerate()
            .map(|(i, &e)| {
                let secret = BitString::random(n, &mut rng);
                SyntheticOracle::new(secret, 1.0 - e, plant << 32 | i as u64).exact_noise_rate()
            })
            .collect();
        let eps = measured.iter().sum::<f64>() / ys as f64;
        let good = measured.iter().filter(|&&e| e < 0.5 - mu).count() as f64 / ys as f64;
        assert!(good >= lemma1_bound(eps, mu), "plant {plant}: {good} < bound({eps}, {mu})");
    }
}
