//! Verifier state machine: one call drives one full iteration against a prover.

use std::collections::HashMap;
use std::sync::Arc;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::messages::{Basis, Challenge, GarbageReport, ImageMsg, RoundMessage};
use super::qubit::{expected_bit, qubit_state_with_phase, single_state};
use super::score::Tally;
use super::ProtocolError;
use crate::bits::BitString;
use crate::circuits::{self, Circuit, CircuitKind};
use crate::provers::{Prover, ProverError};
use crate::tcf::{Image, ImageCheck, PublicKey, VerifierKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    AcceptedPreimage,
    RejectedPreimage,
    AcceptedMeasurement,
    RejectedMeasurement,
    DiscardedInvalidY,
}

/// Message log of one iteration, in protocol order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub iter: u64,
    pub msgs: Vec<RoundMessage>,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifierConfig {
    /// Probability of issuing the preimage challenge.
    pub challenge_ratio: f64,
    /// Silently discard iterations whose `y` has no preimage.
    pub postselect: bool,
}

impl Default for VerifierConfig {
    fn default() -> Self {
        Self { challenge_ratio: 0.5, postselect: true }
    }
}

/// Trapdoor inversion of `y`.
pub fn verifier_check_image(keys: &VerifierKey, y: &Image) -> ImageCheck {
    keys.invert(y)
}

pub fn choose_challenge<R: Rng + ?Sized>(rng: &mut R, ratio: f64) -> Result<Challenge, ProtocolError> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(ProtocolError::BadRatio(ratio));
    }
    Ok(if rng.random_bool(ratio) { Challenge::Preimage } else { Challenge::Continue })
}

pub fn check_preimage(key: &PublicKey, x: &BigUint, y: &Image) -> bool {
    key.check_preimage(x, y)
}

/// Drives one iteration with a throwaway verifier seeded from `rng`.
pub fn run_iteration<R: Rng + ?Sized>(
    keys: &VerifierKey,
    prover: &mut dyn Prover,
    rng: &mut R,
    config: VerifierConfig,
) -> Result<Transcript, ProtocolError> {
    Verifier::new(keys.clone(), config, rng.random())?.run_iteration(prover)
}

/// A verifier session holding the trapdoor, its randomness and a cache of rebuilt circuits.
pub struct Verifier {
    key: VerifierKey,
    public: PublicKey,
    width: usize,
    config: VerifierConfig,
    seed: u64,
    next_iter: u64,
    circuits: HashMap<CircuitKind, Arc<Circuit>>,
}

fn transport(e: ProverError) -> Result<(), ProtocolError> {
    match e {
        ProverError::Transport(m) => Err(ProtocolError::Transport(m)),
        ProverError::Violation(m) => Err(ProtocolError::Violation(m)),
        _ => Ok(()),
    }
}

impl Verifier {
    pub fn new(key: VerifierKey, config: VerifierConfig, seed: u64) -> Result<Self, ProtocolError> {
        if !(config.challenge_ratio > 0.0 && config.challenge_ratio <= 1.0) {
            return Err(ProtocolError::BadRatio(config.challenge_ratio));
        }
        let public = key.public();
        let width = public.domain_bits();
        Ok(Self { key, public, width, config, seed, next_iter: 0, circuits: HashMap::new() })
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.public
    }

    pub fn domain_bits(&self) -> usize {
        self.width
    }

    /// Runs `trials` iterations, handing each transcript to `sink`.
    pub fn run<F>(&mut self, prover: &mut dyn Prover, trials: u64, mut sink: F) -> Result<Tally, ProtocolError>
    where
        F: FnMut(&Transcript),
    {
        let mut tally = Tally::default();
        for _ in 0..trials {
            let t = self.run_iteration(prover)?;
            tally.record(t.outcome);
            sink(&t);
        }
        Ok(tally)
    }

    pub fn run_iteration(&mut self, prover: &mut dyn Prover) -> Result<Transcript, ProtocolError> {
        let iter = self.next_iter;
        self.next_iter += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(iter);

        let mut msgs = vec![RoundMessage::Key(self.public.clone())];
        let image = match prover.round1(&self.public) {
            Ok(m) => m,
            Err(e) => {
                transport(e.clone())?;
                return Err(ProtocolError::Prover(e.to_string()));
            }
        };
        msgs.push(RoundMessage::Image(image.clone()));
        let check = verifier_check_image(&self.key, &image.y);

        let challenge = choose_challenge(&mut rng, self.config.challenge_ratio)?;
        if matches!(check, ImageCheck::Invalid) && self.config.postselect {
            // Keep the traffic indistinguishable from a scored iteration.
            self.play_decoy(prover, challenge, &mut rng)?;
            return Ok(Transcript { iter, msgs, outcome: Outcome::DiscardedInvalidY });
        }
        msgs.push(RoundMessage::Challenge(challenge));
        let outcome = match challenge {
            Challenge::Preimage => match prover.answer_preimage() {
                Ok(x) => {
                    let ok = check_preimage(&self.public, &x, &image.y);
                    msgs.push(RoundMessage::Preimage(x));
                    if ok {
                        Outcome::AcceptedPreimage
                    } else {
                        Outcome::RejectedPreimage
                    }
                }
                Err(e) => {
                    transport(e)?;
                    Outcome::RejectedPreimage
                }
            },
            Challenge::Continue => self.measurement_branch(prover, &check, &image, &mut msgs, &mut rng)?,
        };
        Ok(Transcript { iter, msgs, outcome })
    }

    fn measurement_branch(
        &mut self,
        prover: &mut dyn Prover,
        check: &ImageCheck,
        image: &ImageMsg,
        msgs: &mut Vec<RoundMessage>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Outcome, ProtocolError> {
        let r = BitString::random(self.width, rng);
        msgs.push(RoundMessage::Vector(r.clone()));
        let d = match prover.round2(&r) {
            Ok(d) => d,
            Err(e) => {
                transport(e)?;
                return Ok(Outcome::RejectedMeasurement);
            }
        };
        msgs.push(RoundMessage::Equation(d.clone()));
        let basis = if rng.random_bool(0.5) { Basis::Plus } else { Basis::Minus };
        msgs.push(RoundMessage::Basis(basis));
        let bit = match prover.round3(basis) {
            Ok(b) => b,
            Err(e) => {
                transport(e)?;
                return Ok(Outcome::RejectedMeasurement);
            }
        };
        msgs.push(RoundMessage::Result(u8::from(bit)));
        if d.len() != self.width {
            return Ok(Outcome::RejectedMeasurement);
        }
        let state = match check {
            ImageCheck::Invalid => return Ok(Outcome::RejectedMeasurement),
            ImageCheck::Single(x) => single_state(&BitString::from_biguint(x, self.width), &r),
            ImageCheck::Claw(c) => {
                let x0 = BitString::from_biguint(&c.x0, self.width);
                let x1 = BitString::from_biguint(&c.x1, self.width);
                let flip = match &image.garbage {
                    None => false,
                    Some(g) => match self.garbage_phase(g, &c.x0, &c.x1) {
                        Some(f) => f,
                        None => return Ok(Outcome::RejectedMeasurement),
                    },
                };
                qubit_state_with_phase(&x0, &x1, &r, &d, flip)
            }
        };
        Ok(if bit == expected_bit(state, basis) { Outcome::AcceptedMeasurement } else { Outcome::RejectedMeasurement })
    }

    /// Phase `h.(g(x0) xor g(x1))` imposed by measuring away garbage; `None` if the report is malformed.
    fn garbage_phase(&mut self, report: &GarbageReport, x0: &BigUint, x1: &BigUint) -> Option<bool> {
        let VerifierKey::Rabin { keys, lift } = &self.key else {
            return None;
        };
        // The circuit takes base inputs and applies the lift itself.
        let k = BigUint::from(3u32).pow(*lift);
        let x0 = BitString::from_biguint(&(x0 / &k), self.width);
        let x1 = BitString::from_biguint(&(x1 / &k), self.width);
        let circuit = self
            .circuits
            .entry(report.circuit)
            .or_insert_with(|| Arc::new(circuits::build_for_modulus(report.circuit, &keys.n, *lift)))
            .clone();
        let g0 = circuits::evaluate_classical(&circuit, &x0).ok()?.garbage;
        let g1 = circuits::evaluate_classical(&circuit, &x1).ok()?.garbage;
        if report.h.len() != g0.len() {
            return None;
        }
        Some(report.h.dot(&g0.xor(&g1)))
    }

    fn play_decoy(
        &mut self,
        prover: &mut dyn Prover,
        challenge: Challenge,
        rng: &mut ChaCha8Rng,
    ) -> Result<(), ProtocolError> {
        let result = match challenge {
            Challenge::Preimage => prover.answer_preimage().map(|_| ()),
            Challenge::Continue => {
                let r = BitString::random(self.width, rng);
                let basis = if rng.random_bool(0.5) { Basis::Plus } else { Basis::Minus };
                prover.round2(&r).and_then(|_| prover.round3(basis)).map(|_| ())
            }
        };
        match result {
            Ok(()) => Ok(()),
            Err(e) => transport(e),
        }
    }
}

impl Outcome {
    pub fn is_scored(self) -> bool {
        self != Self::DiscardedInvalidY
    }
}
