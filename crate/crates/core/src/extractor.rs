//! Claw extraction from a rewindable prover by Goldreich-Levin list decoding.
//!
//! A classical prover can be rewound between rounds. Asking it for the round-3 bit in
//! both bases for the same `r` pins down the single-qubit state it claims to hold, and
//! with it `r.x1` once `x0` is known. That is a noisy Hadamard-code oracle for `x1`.

use std::collections::HashMap;

use num_bigint::BigUint;
use rand::Rng;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::bits::BitString;
use crate::protocol::{Basis, QubitState};
use crate::provers::{splitmix, Prover, ProverError};
use crate::tcf::{Claw, Image, PublicKey};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExtractError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("invalid list-decoding parameters: {0}")]
    BadParams(String),
    #[error("list of {needed} candidates exceeds the budget of {max}")]
    BudgetExceeded { needed: u64, max: u64 },
    #[error("extraction failed at the {stage} stage after {queries_used} queries")]
    ExtractionFailed { stage: &'static str, queries_used: u64 },
}

/// List-decoding parameters: `2^t` candidates from `2^t - 1` probe combinations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GlParams {
    pub t: u32,
    /// Advantage over 1/2 the oracle is assumed to have.
    pub mu: f64,
    pub max_candidates: u64,
}

impl GlParams {
    pub const DEFAULT_MU: f64 = 0.25;
    pub const DEFAULT_MAX_CANDIDATES: u64 = 1 << 16;

    pub fn new(t: u32, mu: f64, max_candidates: u64) -> Result<Self, ExtractError> {
        if t == 0 || t > 40 {
            return Err(ExtractError::BadParams(format!("t = {t} must lie in 1..=40")));
        }
        if !(mu > 0.0 && mu < 0.5) {
            return Err(ExtractError::BadParams(format!("mu = {mu} must lie in (0, 1/2)")));
        }
        Ok(Self { t, mu, max_candidates })
    }

    /// Majority votes needed per bit: `ceil(8 ln(4n) / mu^2)`.
    pub fn samples_per_bit(n: usize, mu: f64) -> u64 {
        (8.0 * (4.0 * n as f64).ln() / (mu * mu)).ceil() as u64
    }

    /// Smallest `t` whose `2^t - 1` combinations cover the per-bit sample count.
    pub fn for_width(n: usize, mu: f64) -> Result<Self, ExtractError> {
        if !(mu > 0.0 && mu < 0.5) {
            return Err(ExtractError::BadParams(format!("mu = {mu} must lie in (0, 1/2)")));
        }
        let samples = Self::samples_per_bit(n.max(1), mu);
        let t = 64 - samples.leading_zeros();
        Self::new(t, mu, Self::DEFAULT_MAX_CANDIDATES)
    }

    pub fn candidates(&self) -> u64 {
        1u64 << self.t
    }
}

/// `max(0, 1 - 2 eps - 2 mu)`: lower bound on the fraction of images whose own noise
/// rate stays below `1/2 - mu` when the overall rate is `eps`.
pub fn lemma1_bound(epsilon: f64, mu: f64) -> f64 {
    (1.0 - 2.0 * epsilon - 2.0 * mu).max(0.0)
}

/// Noisy access to `r -> r.x` for a hidden `x`.
pub trait ParityOracle {
    fn width(&self) -> usize;
    fn query(&mut self, r: &BitString) -> Result<bool, ExtractError>;
    /// Distinct queries forwarded to the underlying source.
    fn queries(&self) -> u64;
}

/// Single-qubit state consistent with the round-3 answers in the `+pi/4` and `-pi/4` bases.
pub fn infer_state(plus: bool, minus: bool) -> QubitState {
    match (plus, minus) {
        (false, false) => QubitState::Zero,
        (true, true) => QubitState::One,
        (false, true) => QubitState::Plus,
        (true, false) => QubitState::Minus,
    }
}

fn transport(e: ProverError) -> ExtractError {
    match e {
        ProverError::Transport(m) => ExtractError::Transport(m),
        other => ExtractError::Transport(other.to_string()),
    }
}

/// Runs rounds 2 and 3 twice for the same `r`, rewinding in between, and converts the
/// pair of answers into a guess for `r.x1`. `None` when the prover declines to answer.
pub fn parity_guess<P: Prover + ?Sized>(
    prover: &mut P,
    x0: &BitString,
    r: &BitString,
) -> Result<Option<bool>, ExtractError> {
    let mut bits = [false; 2];
    for (slot, basis) in bits.iter_mut().zip([Basis::Plus, Basis::Minus]) {
        prover.reset().map_err(transport)?;
        let answer = prover.round2(r).and_then(|_| prover.round3(basis));
        match answer {
            Ok(b) => *slot = b,
            Err(ProverError::Transport(m)) => return Err(ExtractError::Transport(m)),
            Err(_) => return Ok(None),
        }
    }
    let differ = !infer_state(bits[0], bits[1]).is_computational();
    Ok(Some(r.dot(x0) ^ differ))
}

/// Prover with one fixed image, queried through [`parity_guess`] with answers cached per `r`.
pub struct RewindableOracle<'a, P: Prover + ?Sized> {
    prover: &'a mut P,
    x0: BitString,
    cache: HashMap<BitString, bool>,
}

impl<'a, P: Prover + ?Sized> RewindableOracle<'a, P> {
    /// The prover must have completed round 1 for the image `x0` belongs to.
    pub fn new(prover: &'a mut P, x0: BitString) -> Self {
        Self { prover, x0, cache: HashMap::new() }
    }
}

impl<P: Prover + ?Sized> ParityOracle for RewindableOracle<'_, P> {
    fn width(&self) -> usize {
        self.x0.len()
    }

    fn query(&mut self, r: &BitString) -> Result<bool, ExtractError> {
        if let Some(&b) = self.cache.get(r) {
            return Ok(b);
        }
        let b = parity_guess(&mut *self.prover, &self.x0, r)?.unwrap_or(false);
        self.cache.insert(r.clone(), b);
        Ok(b)
    }

    fn queries(&self) -> u64 {
        self.cache.len() as u64
    }
}

/// Hadamard-code oracle for `secret` whose errors are a fixed pseudorandom set of `r`
/// with density `1 - accuracy`.
#[derive(Debug, Clone)]
pub struct SyntheticOracle {
    secret: BitString,
    accuracy: f64,
    seed: u64,
    queries: u64,
}

impl SyntheticOracle {
    pub fn new(secret: BitString, accuracy: f64, seed: u64) -> Self {
        Self { secret, accuracy, seed, queries: 0 }
    }

    pub fn secret(&self) -> &BitString {
        &self.secret
    }

    /// Answer without counting the query.
    pub fn answer(&self, r: &BitString) -> bool {
        let h = r.words().iter().fold(splitmix(self.seed), |h, &w| splitmix(h ^ w));
        let u = (h >> 11) as f64 / (1u64 << 53) as f64;
        r.dot(&self.secret) ^ (u >= self.accuracy)
    }

    /// Exact fraction of wrong answers over all `r`; only for small widths.
    pub fn exact_noise_rate(&self) -> f64 {
        let n = self.secret.len();
        assert!(n <= 20, "exhaustive noise rate needs a small width");
        let wrong = (0..1u64 << n)
            .filter(|&v| {
                let r = BitString::from_u64(v, n);
                self.answer(&r) != r.dot(&self.secret)
            })
            .count();
        wrong as f64 / (1u64 << n) as f64
    }
}

impl ParityOracle for SyntheticOracle {
    fn width(&self) -> usize {
        self.secret.len()
    }

    fn query(&mut self, r: &BitString) -> Result<bool, ExtractError> {
        self.queries += 1;
        Ok(self.answer(r))
    }

    fn queries(&self) -> u64 {
        self.queries
    }
}

/// In-place Walsh-Hadamard transform.
fn walsh_hadamard(v: &mut [i64]) {
    let mut h = 1;
    while h < v.len() {
        for block in v.chunks_mut(2 * h) {
            let (a, b) = block.split_at_mut(h);
            for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                let (s, d) = (*x + *y, *x - *y);
                *x = s;
                *y = d;
            }
        }
        h *= 2;
    }
}

/// Goldreich-Levin list decoding with `t` random probes.
///
/// For every nonempty subset `J` of the probes and every bit `i` the oracle is asked
/// for `r_J xor e_i`. A guess `sigma` of the probe parities fixes `r_J.x`, and bit `i` is
/// the majority of `oracle(r_J xor e_i) xor r_J.x` over `J`. All `2^t` guesses are scored
/// at once with a Walsh-Hadamard transform.
pub fn gl_list_decode<O, R>(
    oracle: &mut O,
    n: usize,
    params: &GlParams,
    rng: &mut R,
) -> Result<Vec<BitString>, ExtractError>
where
    O: ParityOracle + ?Sized,
    R: Rng + ?Sized,
{
    let params = GlParams::new(params.t, params.mu, params.max_candidates)?;
    if params.candidates() > params.max_candidates {
        return Err(ExtractError::BudgetExceeded { needed: params.candidates(), max: params.max_candidates });
    }
    if oracle.width() != n {
        return Err(ExtractError::BadParams(format!("oracle width {} differs from n = {n}", oracle.width())));
    }
    let size = params.candidates() as usize;
    let probes: Vec<BitString> = (0..params.t).map(|_| BitString::random(n, rng)).collect();
    let mut combos = vec![BitString::zeros(n); size];
    for mask in 1..size {
        let low = mask.trailing_zeros() as usize;
        combos[mask] = combos[mask & (mask - 1)].xor(&probes[low]);
    }
    let mut out = vec![BitString::zeros(n); size];
    let mut votes = vec![0i64; size];
    for i in 0..n {
        votes[0] = 0;
        for (mask, r) in combos.iter().enumerate().skip(1) {
            let mut q = r.clone();
            q.flip(i);
            votes[mask] = if oracle.query(&q)? { -1 } else { 1 };
        }
        walsh_hadamard(&mut votes);
        for (cand, &v) in out.iter_mut().zip(&votes) {
            if v < 0 {
                cand.set(i, true);
            }
        }
    }
    Ok(out)
}

/// Result of one extraction attempt. `claw` is present only if factoring (or, for
/// families without factors, the claw check) succeeded.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionReport {
    pub y: Image,
    pub x0: BigUint,
    pub x1: Option<BigUint>,
    pub claw: Option<Claw<BigUint, Image>>,
    pub factors: Option<(BigUint, BigUint)>,
    pub candidates: u64,
    pub queries_used: u64,
}

impl Serialize for ExtractionReport {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let dec = |v: &Option<BigUint>| v.as_ref().map(|v| v.to_string());
        let mut st = s.serialize_struct("ExtractionReport", 6)?;
        st.serialize_field("y", &self.y)?;
        st.serialize_field("x0", &self.x0.to_string())?;
        st.serialize_field("x1", &dec(&self.x1))?;
        st.serialize_field("factors", &self.factors.as_ref().map(|(p, q)| [p.to_string(), q.to_string()]))?;
        st.serialize_field("candidates", &self.candidates)?;
        st.serialize_field("queries_used", &self.queries_used)?;
        st.end()
    }
}

/// Obtains `y` and `x0`, rewinds, list-decodes `x1` and factors the modulus from the claw.
pub fn extract_and_factor<P, R>(
    prover: &mut P,
    key: &PublicKey,
    params: &GlParams,
    rng: &mut R,
) -> Result<ExtractionReport, ExtractError>
where
    P: Prover + ?Sized,
    R: Rng + ?Sized,
{
    let failed = |stage, queries_used| ExtractError::ExtractionFailed { stage, queries_used };
    let y = match prover.round1(key) {
        Ok(m) => m.y,
        Err(ProverError::Transport(m)) => return Err(ExtractError::Transport(m)),
        Err(_) => return Err(failed("image", 0)),
    };
    let x0 = match prover.answer_preimage() {
        Ok(x) if key.check_preimage(&x, &y) => x,
        Ok(_) => return Err(failed("preimage", 0)),
        Err(ProverError::Transport(m)) => return Err(ExtractError::Transport(m)),
        Err(_) => return Err(failed("preimage", 0)),
    };
    let n = key.domain_bits();
    let mut oracle = RewindableOracle::new(prover, BitString::from_biguint(&x0, n));
    let list = gl_list_decode(&mut oracle, n, params, rng)?;
    let queries_used = oracle.queries();
    let x1 = list.iter().map(BitString::to_biguint).find(|c| c != &x0 && key.check_preimage(c, &y));
    let Some(x1) = x1 else {
        return Err(failed("list decoding", queries_used));
    };
    let claw = Claw { x0: x0.clone(), x1: x1.clone(), y: y.clone() };
    let factors = key.factor(&claw);
    let claw = (factors.is_some() || matches!(key, PublicKey::Ddh(_))).then_some(claw);
    Ok(ExtractionReport { y, x0, x1: Some(x1), claw, factors, candidates: list.len() as u64, queries_used })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::protocol::expected_bit;

    #[test]
    fn state_inference_inverts_expected_bits() {
        let mut seen = Vec::new();
        for s in QubitState::ALL {
            let pair = (expected_bit(s, Basis::Plus), expected_bit(s, Basis::Minus));
            assert_eq!(infer_state(pair.0, pair.1), s);
            assert!(!seen.contains(&pair));
            seen.push(pair);
        }
    }

    #[test]
    fn lemma1_examples() {
        assert!((lemma1_bound(0.1, 0.05) - 0.7).abs() < 1e-12);
        assert!((lemma1_bound(0.0, 1e-12) - 1.0).abs() < 1e-9);
        assert_eq!(lemma1_bound(0.5, 0.1), 0.0);
    }

    #[test]
    fn params_follow_sample_rule() {
        assert_eq!(GlParams::samples_per_bit(32, 0.25), 622);
        let p = GlParams::for_width(32, 0.25).unwrap();
        assert_eq!(p.t, 10);
        assert!((1u64 << p.t) - 1 >= 622 && (1u64 << (p.t - 1)) - 1 < 622);
        assert!(GlParams::new(0, 0.2, 16).is_err());
        assert!(GlParams::new(4, 0.5, 16).is_err());
    }

    #[test]
    fn budget_is_enforced() {
        let mut o = SyntheticOracle::new(BitString::zeros(8), 1.0, 0);
        let p = GlParams::new(6, 0.2, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = gl_list_decode(&mut o, 8, &p, &mut rng).unwrap_err();
        assert_eq!(err, ExtractError::BudgetExceeded { needed: 64, max: 32 });
        assert_eq!(o.queries(), 0);
    }

    #[test]
    fn walsh_hadamard_matches_direct_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v: Vec<i64> = (0..16).map(|_| rng.random_range(-3..=3)).collect();
        let mut w = v.clone();
        walsh_hadamard(&mut w);
        for (s, &ws) in w.iter().enumerate() {
            let direct: i64 =
                v.iter().enumerate().map(|(j, &x)| if (s & j).count_ones() % 2 == 0 { x } else { -x }).sum();
            assert_eq!(ws, direct);
        }
    }

    #[test]
    fn noise_free_oracle_is_always_listed() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = GlParams::new(4, 0.25, 1 << 10).unwrap();
        for trial in 0..20 {
            let secret = BitString::random(16, &mut rng);
            let mut o = SyntheticOracle::new(secret.clone(), 1.0, trial);
            let list = gl_list_decode(&mut o, 16, &p, &mut rng).unwrap();
            assert_eq!(list.len(), 16);
            assert!(list.contains(&secret));
            assert_eq!(o.queries(), 16 * 15);
        }
    }

    fn recovery_count(accuracy: f64, t: u32, trials: u64, seed: u64) -> u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = GlParams::new(t, 0.2, 1 << 12).unwrap();
        (0..trials)
            .filter(|&trial| {
                let secret = BitString::random(16, &mut rng);
                let mut o = SyntheticOracle::new(secret.clone(), accuracy, seed ^ (trial << 20));
                gl_list_decode(&mut o, 16, &p, &mut rng).unwrap().contains(&secret)
            })
            .count() as u64
    }

    #[test]
    fn noisy_oracle_recovery_rates() {
        assert!(recovery_count(0.95, 6, 100, 11) >= 90);
        assert!(recovery_count(0.5, 6, 100, 12) <= 5);
    }

    #[test]
    fn synthetic_noise_rate_is_near_planted() {
        let o = SyntheticOracle::new(BitString::from_u64(0b1011_0110, 12), 0.8, 9);
        assert!((o.exact_noise_rate() - 0.2).abs() < 0.03);
    }
}
