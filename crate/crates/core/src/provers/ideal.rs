//! Exact honest prover: the post-round-1 state is the two-branch superposition
//! `|x0> + (-1)^phase |x1>`, and rounds 2 and 3 sample the Born rule on it.

use core::f64::consts::FRAC_PI_4;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::angle::optimal_theta;
use super::simulate::Simulator;
use super::{derive_seed, splitmix, Prover, ProverError};
use crate::bits::BitString;
use crate::protocol::{qubit_state_with_phase, single_state, Basis, ImageMsg, QubitState};
use crate::tcf::{Image, PublicKey};

/// Attempts at drawing an `x0` whose image has two preimages.
const RESAMPLE_LIMIT: u32 = 10_000;
const PREIMAGE_TAG: u64 = 0x5052_4549_4d41_4745;

/// Prover state after round 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoBranchState {
    pub x0: BitString,
    pub x1: BitString,
    /// Branch `x1` carries amplitude sign `-1`.
    pub rel_phase: bool,
    pub y: Image,
    /// Only this branch survived a measurement that told the branches apart.
    pub collapsed: Option<bool>,
}

impl TwoBranchState {
    pub fn branch(&self, b: bool) -> &BitString {
        if b {
            &self.x1
        } else {
            &self.x0
        }
    }

    /// Single-qubit state after computing `r.x` and measuring `d`.
    pub fn qubit_state(&self, r: &BitString, d: &BitString) -> QubitState {
        match self.collapsed {
            Some(b) => single_state(self.branch(b), r),
            None => qubit_state_with_phase(&self.x0, &self.x1, r, d, self.rel_phase),
        }
    }
}

/// Draws `x0`, evaluates `y`, and asks the simulator for the partner `x1`.
pub fn ideal_round1<R: Rng + ?Sized>(
    sim: &Simulator,
    key: &PublicKey,
    rng: &mut R,
) -> Result<(Image, TwoBranchState), ProverError> {
    if !sim.inverts(key) {
        return Err(ProverError::Unsupported("simulator was built for a different key".into()));
    }
    let width = key.domain_bits();
    for _ in 0..RESAMPLE_LIMIT {
        let x0 = key.sample_domain(rng);
        let Ok(y) = key.eval(&x0) else { continue };
        if let Some(x1) = sim.partner(&x0, &y) {
            let state = TwoBranchState {
                x0: BitString::from_biguint(&x0, width),
                x1: BitString::from_biguint(&x1, width),
                rel_phase: false,
                y: y.clone(),
                collapsed: None,
            };
            return Ok((y, state));
        }
    }
    Err(ProverError::Unsupported("no claw found in the domain".into()))
}

/// Hadamard-basis measurement of the `x` register.
pub fn ideal_round2<R: Rng + ?Sized>(state: &TwoBranchState, r: &BitString, rng: &mut R) -> BitString {
    let mut d = BitString::random(state.x0.len(), rng);
    if state.collapsed.is_none() && r.dot(&state.x0) == r.dot(&state.x1) {
        // Only the parity class d.(x0 ^ x1) = phase survives interference.
        let delta = state.x0.xor(&state.x1);
        if d.dot(&delta) != state.rel_phase {
            let i = delta.iter().position(|b| b).expect("branches differ");
            d.flip(i);
        }
    }
    d
}

/// Measures the round-3 qubit along angle `theta`.
pub fn ideal_round3<R: Rng + ?Sized>(
    state: &TwoBranchState,
    r: &BitString,
    d: &BitString,
    theta: f64,
    rng: &mut R,
) -> bool {
    let p0 = state.qubit_state(r, d).prob_zero(theta);
    rng.random::<f64>() >= p0
}

struct Round2 {
    rng: ChaCha8Rng,
    r: BitString,
    d: BitString,
    answered: bool,
}

/// One iteration's rewindable state. Randomness after round 1 is a function of the
/// iteration tape and the challenge, so replaying a challenge replays the answer.
pub(crate) struct Session {
    tape: u64,
    pub state: TwoBranchState,
    measured: bool,
    round2: Option<Round2>,
}

impl Session {
    pub fn new(tape: u64, state: TwoBranchState) -> Self {
        Self { tape, state, measured: false, round2: None }
    }

    pub fn preimage(&mut self) -> Result<BigUint, ProverError> {
        if self.round2.is_some() {
            return Err(ProverError::OutOfOrder("preimage requested after round 2".into()));
        }
        let b = match self.state.collapsed {
            Some(b) => b,
            None => splitmix(self.tape ^ PREIMAGE_TAG) & 1 == 1,
        };
        self.measured = true;
        Ok(self.state.branch(b).to_biguint())
    }

    pub fn round2(&mut self, r: &BitString) -> Result<BitString, ProverError> {
        if self.measured {
            return Err(ProverError::CollapsedState);
        }
        if self.round2.is_some() {
            return Err(ProverError::OutOfOrder("round 2 repeated without reset".into()));
        }
        if r.len() != self.state.x0.len() {
            return Err(ProverError::Violation(format!("r has {} bits, expected {}", r.len(), self.state.x0.len())));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.tape, r));
        let d = ideal_round2(&self.state, r, &mut rng);
        self.round2 = Some(Round2 { rng, r: r.clone(), d: d.clone(), answered: false });
        Ok(d)
    }

    pub fn round3(&mut self, basis: Basis, theta: f64) -> Result<bool, ProverError> {
        let r2 = self.round2.as_mut().ok_or_else(|| ProverError::OutOfOrder("round 3 before round 2".into()))?;
        if r2.answered {
            return Err(ProverError::OutOfOrder("round 3 repeated without reset".into()));
        }
        r2.answered = true;
        let angle = match basis {
            Basis::Plus => theta,
            Basis::Minus => -theta,
        };
        Ok(ideal_round3(&self.state, &r2.r, &r2.d, angle, &mut r2.rng))
    }

    pub fn reset(&mut self) {
        self.measured = false;
        self.round2 = None;
    }
}

pub(crate) fn no_session() -> ProverError {
    ProverError::OutOfOrder("no round 1 yet".into())
}

/// Noise-free prover. Optionally corrupts only the relative phase and measures at a
/// different angle, which isolates the angle-adaptation effect.
pub struct IdealProver {
    rng: ChaCha8Rng,
    sim: Option<Simulator>,
    theta: f64,
    phase_error: f64,
    session: Option<Session>,
}

impl IdealProver {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), sim: None, theta: FRAC_PI_4, phase_error: 0.0, session: None }
    }

    pub fn with_simulator(sim: Simulator, seed: u64) -> Self {
        Self { sim: Some(sim), ..Self::new(seed) }
    }

    /// Relative phase correct with probability `1/2 + delta`; measures at `+-theta`,
    /// by default the optimal angle for that phase fidelity.
    pub fn phase_noise(delta: f64, theta: Option<f64>, seed: u64) -> Result<Self, ProverError> {
        if !(0.0..=0.5).contains(&delta) {
            return Err(ProverError::Unsupported(format!("delta {delta} outside [0, 1/2]")));
        }
        let theta = match theta {
            Some(t) => t,
            None => optimal_theta(1.0, 0.5 + delta).map_err(|e| ProverError::Unsupported(e.to_string()))?,
        };
        Ok(Self { theta, phase_error: 0.5 - delta, ..Self::new(seed) })
    }

    pub fn set_simulator(&mut self, sim: Simulator) {
        self.sim = Some(sim);
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// State of the current iteration, if any.
    pub fn state(&self) -> Option<&TwoBranchState> {
        self.session.as_ref().map(|s| &s.state)
    }
}

/// Reuses a cached simulator when it matches `key`, otherwise cracks the key.
pub(crate) fn simulator_for<'a>(
    slot: &'a mut Option<Simulator>,
    key: &PublicKey,
) -> Result<&'a Simulator, ProverError> {
    if !slot.as_ref().is_some_and(|s| s.inverts(key)) {
        *slot = Some(Simulator::crack(key)?);
    }
    Ok(slot.as_ref().expect("just set"))
}

impl Prover for IdealProver {
    fn round1(&mut self, key: &PublicKey) -> Result<ImageMsg, ProverError> {
        let tape: u64 = self.rng.random();
        let mut rng = ChaCha8Rng::seed_from_u64(tape);
        let sim = simulator_for(&mut self.sim, key)?;
        let (y, mut state) = ideal_round1(sim, key, &mut rng)?;
        if self.phase_error > 0.0 && rng.random_bool(self.phase_error) {
            state.rel_phase = !state.rel_phase;
        }
        self.session = Some(Session::new(tape, state));
        Ok(ImageMsg::plain(y))
    }

    fn answer_preimage(&mut self) -> Result<BigUint, ProverError> {
        self.session.as_mut().ok_or_else(no_session)?.preimage()
    }

    fn round2(&mut self, r: &BitString) -> Result<BitString, ProverError> {
        self.session.as_mut().ok_or_else(no_session)?.round2(r)
    }

    fn round3(&mut self, basis: Basis) -> Result<bool, ProverError> {
        let theta = self.theta;
        self.session.as_mut().ok_or_else(no_session)?.round3(basis, theta)
    }

    fn reset(&mut self) -> Result<(), ProverError> {
        self.session.as_mut().ok_or_else(no_session)?.reset();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use crate::protocol::expected_bit;
    use crate::tcf::{RabinKeyPair, VerifierKey};

    fn n77() -> (VerifierKey, PublicKey, Simulator) {
        let vk = VerifierKey::rabin(RabinKeyPair::from_factors(7u32.into(), 11u32.into()).unwrap());
        let pk = vk.public();
        (vk.clone(), pk, Simulator::from_trapdoor(vk))
    }

    fn bs(v: u64, w: usize) -> BitString {
        BitString::from_u64(v, w)
    }

    fn state(x0: u64, x1: u64, w: usize, phase: bool) -> TwoBranchState {
        TwoBranchState {
            x0: bs(x0, w),
            x1: bs(x1, w),
            rel_phase: phase,
            y: Image::Rabin(BigUint::from(0u32)),
            collapsed: None,
        }
    }

    #[test]
    fn round1_distribution_follows_claw_counts() {
        let (_, pk, sim) = n77();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen: HashMap<u64, u64> = HashMap::new();
        let draws = 10_000;
        for _ in 0..draws {
            let (y, st) = ideal_round1(&sim, &pk, &mut rng).unwrap();
            assert!(!st.rel_phase);
            let (a, b) = (st.x0.to_biguint(), st.x1.to_biguint());
            assert_ne!(a, b);
            assert_eq!(pk.eval(&a).unwrap(), y);
            assert_eq!(pk.eval(&b).unwrap(), y);
            *seen.entry(y.to_u64().unwrap()).or_default() += 1;
        }
        // Enumerate: each y with a claw in [0, 39) receives 2/(#claw x) of the mass.
        let mut claws: HashMap<u64, u64> = HashMap::new();
        for x in 0..39u64 {
            *claws.entry(x * x % 77).or_default() += 1;
        }
        let paired: u64 = claws.values().filter(|&&c| c == 2).sum();
        for (y, c) in claws {
            let got = seen.get(&y).copied().unwrap_or(0) as f64 / draws as f64;
            let want = if c == 2 { 2.0 / paired as f64 } else { 0.0 };
            assert!((got - want).abs() < 0.015, "y={y}: {got} vs {want}");
        }
    }

    #[test]
    fn n77_example_state() {
        let (_, pk, sim) = n77();
        // Find the draw that lands on x0 = 9 to check its partner.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let st = loop {
            let (y, st) = ideal_round1(&sim, &pk, &mut rng).unwrap();
            if y == Image::Rabin(4u32.into()) {
                break st;
            }
        };
        let mut pair = [st.x0.to_biguint(), st.x1.to_biguint()];
        pair.sort();
        assert_eq!(pair, [BigUint::from(2u32), BigUint::from(9u32)]);
    }

    #[test]
    fn round2_parity_classes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // x0 ^ x1 = 01011 (binary), r orthogonal to both.
        let x0 = 0b00100;
        let x1 = x0 ^ 0b01011;
        let r = bs(0b10000, 5);
        assert_eq!(r.dot(&bs(x0, 5)), r.dot(&bs(x1, 5)));
        let delta = bs(0b01011, 5);
        for phase in [false, true] {
            let st = state(x0, x1, 5, phase);
            for _ in 0..1000 {
                assert_eq!(ideal_round2(&st, &r, &mut rng).dot(&delta), phase);
            }
        }
    }

    #[test]
    fn round2_uniform_when_parities_differ() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let st = state(0b00100, 0b01111, 5, false);
        let r = bs(0b00001, 5);
        let mut counts = [0u32; 32];
        let draws = 32_000;
        for _ in 0..draws {
            counts[ideal_round2(&st, &r, &mut rng).words()[0] as usize] += 1;
        }
        let e = f64::from(draws) / 32.0;
        let chi2: f64 = counts.iter().map(|&c| (f64::from(c) - e).powi(2) / e).sum();
        // 31 degrees of freedom; the 0.999 quantile is about 61.1.
        assert!(chi2 < 61.1, "chi2 = {chi2}");
    }

    #[test]
    fn round3_acceptance_rate() {
        let (_, pk, sim) = n77();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let trials = 100_000;
        let mut ok = 0;
        for _ in 0..trials {
            let (_, st) = ideal_round1(&sim, &pk, &mut rng).unwrap();
            let r = BitString::random(st.x0.len(), &mut rng);
            let d = ideal_round2(&st, &r, &mut rng);
            let basis = if rng.random() { Basis::Plus } else { Basis::Minus };
            let bit = ideal_round3(&st, &r, &d, basis.angle::<f64>(), &mut rng);
            ok += u32::from(bit == expected_bit(st.qubit_state(&r, &d), basis));
        }
        let p = f64::from(ok) / f64::from(trials);
        assert!((p - 0.8536).abs() < 0.004, "p_m = {p}");
        // Zero state at angle 0 always yields 0.
        let st = state(0, 0, 3, false);
        let z = bs(0, 3);
        assert!((0..100).all(|_| !ideal_round3(&st, &z, &z, 0.0, &mut rng)));
    }

    #[test]
    fn rewinding_replays_answers() {
        let (_, pk, sim) = n77();
        let mut p = IdealProver::with_simulator(sim, 9);
        p.round1(&pk).unwrap();
        let x = p.answer_preimage().unwrap();
        assert_eq!(p.round2(&bs(3, 6)), Err(ProverError::CollapsedState));
        p.reset().unwrap();
        assert_eq!(p.answer_preimage().unwrap(), x);
        p.reset().unwrap();
        let r = bs(0b101101, 6);
        let d = p.round2(&r).unwrap();
        let b = p.round3(Basis::Plus).unwrap();
        assert!(p.round3(Basis::Plus).is_err());
        for _ in 0..5 {
            p.reset().unwrap();
            assert_eq!(p.round2(&r).unwrap(), d);
            assert_eq!(p.round3(Basis::Plus).unwrap(), b);
        }
    }
}
