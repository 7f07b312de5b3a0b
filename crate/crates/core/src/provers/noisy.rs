//! Circuit-level prover with Pauli noise, tracked exactly on the two branches.

use core::f64::consts::FRAC_PI_4;
use std::sync::Arc;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::angle::optimal_theta;
use super::ideal::{ideal_round2, no_session, simulator_for, Session, TwoBranchState};
use super::simulate::Simulator;
use super::{Prover, ProverError};
use crate::bits::BitString;
use crate::circuits::{self, Circuit, CircuitKind, Gate};
use crate::protocol::{qubit_state_with_phase, Basis, GarbageReport, ImageMsg, QubitState};
use crate::tcf::numtheory::{half_ceil, random_below};
use crate::tcf::{Image, ImageCheck, PublicKey};

const RESAMPLE_LIMIT: u32 = 10_000;

/// Circuit fidelity `F` spread evenly over the `N_g` gates of the unlifted circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub circuit_fidelity: f64,
    pub per_gate_fidelity: f64,
    pub gate_count: u64,
}

impl NoiseModel {
    pub fn new(circuit_fidelity: f64, gate_count: u64) -> Result<Self, ProverError> {
        if !(circuit_fidelity > 0.0 && circuit_fidelity <= 1.0) {
            return Err(ProverError::Unsupported(format!("fidelity {circuit_fidelity} outside (0, 1]")));
        }
        let per_gate_fidelity = circuit_fidelity.powf(1.0 / gate_count.max(1) as f64);
        Ok(Self { circuit_fidelity, per_gate_fidelity, gate_count })
    }

    pub fn error_rate(&self) -> f64 {
        1.0 - self.per_gate_fidelity
    }
}

/// Gates that can fail: X, CNOT and Toffoli.
pub fn noisy_gate_count(c: &Circuit) -> u64 {
    c.gates.iter().filter(|g| matches!(g, Gate::X(_) | Gate::Cnot(..) | Gate::Toffoli(..))).count() as u64
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoisyRun {
    pub y: Image,
    pub state: TwoBranchState,
    /// Hadamard outcomes of the discarded garbage.
    pub h: BitString,
    /// The branches produced different `y` and the measurement picked one.
    pub divergent: bool,
    pub errors: u64,
}

/// One noisy evaluation of `circuit` on a claw drawn from the base domain.
pub fn noisy_round1<R: Rng + ?Sized>(
    sim: &Simulator,
    key: &PublicKey,
    circuit: &Circuit,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<NoisyRun, ProverError> {
    let PublicKey::Rabin(pk) = key else {
        return Err(ProverError::Unsupported("noisy circuits exist only for the Rabin family".into()));
    };
    let k = pk.k();
    let base_width = circuit.x_reg.len();
    let half = half_ceil(&pk.n);
    let (x0, x1) = (0..RESAMPLE_LIMIT)
        .find_map(|_| {
            let x = random_below(&half, rng);
            let lifted = &x * &k;
            let y = key.eval(&lifted).ok()?;
            sim.partner(&lifted, &y).map(|p| (x, p / &k))
        })
        .ok_or_else(|| ProverError::Unsupported("no claw found in the domain".into()))?;
    let run = circuits::run_two_branch(
        circuit,
        &BitString::from_biguint(&x0, base_width),
        &BitString::from_biguint(&x1, base_width),
        noise.error_rate(),
        rng,
    )
    .map_err(|e| ProverError::Unsupported(e.to_string()))?;
    // Undo the Montgomery factor: y = y_meas * R mod N'.
    let modulus = &circuit.meta.modulus;
    let r_mont = (BigUint::one() << modulus.bits()) % modulus;
    let ys: Vec<BigUint> = run.y.iter().map(|y| y.to_biguint() * &r_mont % modulus).collect();
    let divergent = ys[0] != ys[1];
    let collapsed = if divergent {
        Some(rng.random::<bool>())
    } else if run.merged {
        Some(false)
    } else {
        None
    };
    let pick = usize::from(collapsed == Some(true));
    let [a, b] = run.x_out;
    let state = TwoBranchState { x0: a, x1: b, rel_phase: run.phase, y: Image::Rabin(ys[pick].clone()), collapsed };
    Ok(NoisyRun { y: state.y.clone(), state, h: run.h, divergent, errors: run.errors })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisyConfig {
    pub fidelity: f64,
    pub circuit: CircuitKind,
    /// Expected key lift; the key's own lift is used when unset.
    pub lift: Option<u32>,
    /// Measurement angle; calibrated against the prover's own noise when unset.
    pub theta: Option<f64>,
    /// Re-run the circuit while `y` is not a multiple of `k^2`.
    pub postselect: bool,
    pub max_attempts: u32,
    pub calibration_runs: u32,
}

impl NoisyConfig {
    pub fn new(fidelity: f64, circuit: CircuitKind) -> Self {
        Self {
            fidelity,
            circuit,
            lift: None,
            theta: None,
            postselect: true,
            max_attempts: 10_000,
            calibration_runs: 256,
        }
    }
}

/// Counters across all iterations of one prover.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NoisyStats {
    pub iterations: u64,
    pub circuit_runs: u64,
    /// Runs thrown away by the prover's own validity check.
    pub prover_discards: u64,
    pub divergent: u64,
    pub errors: u64,
}

struct Prepared {
    key: PublicKey,
    circuit: Arc<Circuit>,
    noise: NoiseModel,
    theta: f64,
    base_gates: u64,
    lifted_gates: u64,
}

pub struct NoisyProver {
    cfg: NoisyConfig,
    rng: ChaCha8Rng,
    sim: Option<Simulator>,
    prepared: Option<Prepared>,
    session: Option<Session>,
    stats: NoisyStats,
}

/// `|<a|b>|^2` for two of the four round-3 states.
fn overlap(a: QubitState, b: QubitState) -> f64 {
    if a == b {
        1.0
    } else if a.is_computational() == b.is_computational() {
        0.0
    } else {
        0.5
    }
}

impl NoisyProver {
    pub fn new(cfg: NoisyConfig, seed: u64) -> Self {
        Self {
            cfg,
            rng: ChaCha8Rng::seed_from_u64(seed),
            sim: None,
            prepared: None,
            session: None,
            stats: NoisyStats::default(),
        }
    }

    pub fn with_simulator(cfg: NoisyConfig, sim: Simulator, seed: u64) -> Self {
        Self { sim: Some(sim), ..Self::new(cfg, seed) }
    }

    pub fn stats(&self) -> NoisyStats {
        self.stats
    }

    /// Measurement angle in use for the current key.
    pub fn theta(&self) -> Option<f64> {
        self.prepared.as_ref().map(|p| p.theta)
    }

    /// Noise-relevant gate counts `(unlifted, lifted)` for the current key.
    pub fn gate_counts(&self) -> Option<(u64, u64)> {
        self.prepared.as_ref().map(|p| (p.base_gates, p.lifted_gates))
    }

    /// Builds circuits for `key` and calibrates the angle; `round1` does this on demand.
    pub fn prepare(&mut self, key: &PublicKey) -> Result<(), ProverError> {
        if self.prepared.as_ref().is_some_and(|p| &p.key == key) {
            return Ok(());
        }
        let PublicKey::Rabin(pk) = key else {
            return Err(ProverError::Unsupported("noisy circuits exist only for the Rabin family".into()));
        };
        if let Some(m) = self.cfg.lift {
            if m != pk.lift {
                return Err(ProverError::Unsupported(format!("prover expects lift {m}, key has lift {}", pk.lift)));
            }
        }
        let base = circuits::build_for_modulus(self.cfg.circuit, &pk.n, 0);
        let base_gates = noisy_gate_count(&base);
        let circuit = if pk.lift == 0 { base } else { circuits::build_for_modulus(self.cfg.circuit, &pk.n, pk.lift) };
        debug_assert_eq!(circuit.x_reg.len(), key.domain_bits());
        let lifted_gates = noisy_gate_count(&circuit);
        let noise = NoiseModel::new(self.cfg.fidelity, base_gates)?;
        let circuit = Arc::new(circuit);
        simulator_for(&mut self.sim, key)?;
        let theta = match self.cfg.theta {
            Some(t) => t,
            None => self.calibrate(key, &circuit, &noise)?,
        };
        self.prepared = Some(Prepared { key: key.clone(), circuit, noise, theta, base_gates, lifted_gates });
        Ok(())
    }

    /// Estimates the state fidelities for computational and diagonal round-3 states on
    /// simulated runs, then picks the optimal angle.
    fn calibrate(&mut self, key: &PublicKey, circuit: &Circuit, noise: &NoiseModel) -> Result<f64, ProverError> {
        let sim = self.sim.as_ref().expect("prepared");
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng.random());
        let mut acc = FidelityTally::default();
        for _ in 0..self.cfg.calibration_runs {
            let run = noisy_round1(sim, key, circuit, noise, &mut rng)?;
            if let Some(a) = assess_run(sim, key, circuit, &run, 1, &mut rng)? {
                acc.add(&a);
            }
        }
        Ok(acc.fidelities().and_then(|(par, perp)| optimal_theta(par, perp).ok()).unwrap_or(FRAC_PI_4))
    }
}

/// How one noisy run would fare against the verifier, judged from its final state.
#[derive(Debug, Clone, PartialEq)]
pub struct RunAssessment {
    /// Probability that the preimage answer is accepted.
    pub p_preimage: f64,
    /// One entry per sampled challenge: whether the expected round-3 state is
    /// computational, and its overlap with the state the prover holds.
    pub overlaps: Vec<(bool, f64)>,
}

/// Compares a run's branches and phase with what the verifier expects for its `y`.
/// `None` when the verifier would discard `y`.
pub fn assess_run<R: Rng + ?Sized>(
    sim: &Simulator,
    key: &PublicKey,
    circuit: &Circuit,
    run: &NoisyRun,
    challenges: usize,
    rng: &mut R,
) -> Result<Option<RunAssessment>, ProverError> {
    let PublicKey::Rabin(pk) = key else {
        return Err(ProverError::Unsupported("noisy circuits exist only for the Rabin family".into()));
    };
    let width = key.domain_bits();
    let st = &run.state;
    let (x0, x1, flip) = match sim.invert(&run.y) {
        ImageCheck::Invalid => return Ok(None),
        ImageCheck::Single(x) => {
            let x = BitString::from_biguint(&x, width);
            (x.clone(), x, false)
        }
        ImageCheck::Claw(c) => {
            let k = pk.k();
            let garbage = |x: &BigUint| {
                circuits::evaluate_classical(circuit, &BitString::from_biguint(&(x / &k), circuit.x_reg.len()))
                    .map(|e| e.garbage)
                    .map_err(|e| ProverError::Unsupported(e.to_string()))
            };
            let flip = run.h.dot(&garbage(&c.x0)?.xor(&garbage(&c.x1)?));
            (BitString::from_biguint(&c.x0, width), BitString::from_biguint(&c.x1, width), flip)
        }
    };
    let ok = |x: &BitString| f64::from(u8::from(*x == x0 || *x == x1));
    let p_preimage = match st.collapsed {
        Some(b) => ok(st.branch(b)),
        None => (ok(&st.x0) + ok(&st.x1)) / 2.0,
    };
    let overlaps = (0..challenges)
        .map(|_| {
            let r = BitString::random(width, rng);
            let d = ideal_round2(st, &r, rng);
            let want = qubit_state_with_phase(&x0, &x1, &r, &d, flip);
            (want.is_computational(), overlap(want, st.qubit_state(&r, &d)))
        })
        .collect();
    Ok(Some(RunAssessment { p_preimage, overlaps }))
}

/// Running sums of round-3 state overlaps, split by the kind of expected state.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FidelityTally {
    pub par: f64,
    pub n_par: u64,
    pub perp: f64,
    pub n_perp: u64,
}

impl FidelityTally {
    pub fn add(&mut self, a: &RunAssessment) {
        for &(computational, ov) in &a.overlaps {
            if computational {
                self.par += ov;
                self.n_par += 1;
            } else {
                self.perp += ov;
                self.n_perp += 1;
            }
        }
    }

    /// `(f_par, f_perp)`, once both kinds have been seen.
    pub fn fidelities(&self) -> Option<(f64, f64)> {
        (self.n_par > 0 && self.n_perp > 0).then(|| (self.par / self.n_par as f64, self.perp / self.n_perp as f64))
    }
}

fn is_multiple(y: &Image, k2: &BigUint) -> bool {
    match y {
        Image::Rabin(v) => v.is_multiple_of(k2) || v.is_zero(),
        Image::Ddh(_) => true,
    }
}

impl Prover for NoisyProver {
    fn round1(&mut self, key: &PublicKey) -> Result<ImageMsg, ProverError> {
        self.prepare(key)?;
        let tape: u64 = self.rng.random();
        let mut rng = ChaCha8Rng::seed_from_u64(tape);
        let p = self.prepared.as_ref().expect("prepared");
        let sim = self.sim.as_ref().expect("prepared");
        let k2 = match key {
            PublicKey::Rabin(pk) => pk.k().pow(2),
            PublicKey::Ddh(_) => BigUint::one(),
        };
        self.stats.iterations += 1;
        let mut attempts = 0;
        let run = loop {
            let run = noisy_round1(sim, key, &p.circuit, &p.noise, &mut rng)?;
            self.stats.circuit_runs += 1;
            self.stats.errors += run.errors;
            self.stats.divergent += u64::from(run.divergent);
            attempts += 1;
            if !self.cfg.postselect || is_multiple(&run.y, &k2) || attempts >= self.cfg.max_attempts {
                break run;
            }
            self.stats.prover_discards += 1;
        };
        let msg = ImageMsg { y: run.y, garbage: Some(GarbageReport { circuit: self.cfg.circuit, h: run.h }) };
        self.session = Some(Session::new(tape, run.state));
        Ok(msg)
    }

    fn answer_preimage(&mut self) -> Result<BigUint, ProverError> {
        self.session.as_mut().ok_or_else(no_session)?.preimage()
    }

    fn round2(&mut self, r: &BitString) -> Result<BitString, ProverError> {
        self.session.as_mut().ok_or_else(no_session)?.round2(r)
    }

    fn round3(&mut self, basis: Basis) -> Result<bool, ProverError> {
        let theta = self.prepared.as_ref().map_or(FRAC_PI_4, |p| p.theta);
        self.session.as_mut().ok_or_else(no_session)?.round3(basis, theta)
    }

    fn reset(&mut self) -> Result<(), ProverError> {
        self.session.as_mut().ok_or_else(no_session)?.reset();
        Ok(())
    }
}
