//! The best classical strategy: keep one preimage and pretend the qubit is `|r.x0>`.

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ideal::no_session;
use super::{derive_seed, Prover, ProverError};
use crate::bits::BitString;
use crate::protocol::{expected_bit, single_state, Basis, ImageMsg};
use crate::tcf::PublicKey;

struct CheatSession {
    tape: u64,
    x0: BitString,
    r: Option<BitString>,
}

/// Always answers the preimage challenge; wins round 3 for computational states and
/// half of the diagonal ones.
pub struct Cheater {
    rng: ChaCha8Rng,
    session: Option<CheatSession>,
}

impl Cheater {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), session: None }
    }
}

impl Prover for Cheater {
    fn round1(&mut self, key: &PublicKey) -> Result<ImageMsg, ProverError> {
        let tape: u64 = self.rng.random();
        let mut rng = ChaCha8Rng::seed_from_u64(tape);
        let (x0, y) = loop {
            let x = key.sample_domain(&mut rng);
            if let Ok(y) = key.eval(&x) {
                break (x, y);
            }
        };
        self.session = Some(CheatSession { tape, x0: BitString::from_biguint(&x0, key.domain_bits()), r: None });
        Ok(ImageMsg::plain(y))
    }

    fn answer_preimage(&mut self) -> Result<BigUint, ProverError> {
        Ok(self.session.as_ref().ok_or_else(no_session)?.x0.to_biguint())
    }

    fn round2(&mut self, r: &BitString) -> Result<BitString, ProverError> {
        let s = self.session.as_mut().ok_or_else(no_session)?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(s.tape, r));
        s.r = Some(r.clone());
        Ok(BitString::random(s.x0.len(), &mut rng))
    }

    fn round3(&mut self, basis: Basis) -> Result<bool, ProverError> {
        let s = self.session.as_ref().ok_or_else(no_session)?;
        let r = s.r.as_ref().ok_or_else(|| ProverError::OutOfOrder("round 3 before round 2".into()))?;
        Ok(expected_bit(single_state(&s.x0, r), basis))
    }

    fn reset(&mut self) -> Result<(), ProverError> {
        self.session.as_mut().ok_or_else(no_session)?.r = None;
        Ok(())
    }
}
