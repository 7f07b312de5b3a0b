//! Prover implementations behind one rewindable interface.

mod angle;
mod cheater;
mod ideal;
mod noisy;
mod simulate;
mod spec;

pub use angle::{optimal_theta, pm_of_theta, AngleModel, ModelError};
pub use cheater::Cheater;
pub use ideal::{ideal_round1, ideal_round2, ideal_round3, IdealProver, TwoBranchState};
pub use noisy::{
    assess_run, noisy_gate_count, noisy_round1, FidelityTally, NoiseModel, NoisyConfig, NoisyProver, NoisyRun,
    NoisyStats, RunAssessment,
};
pub use simulate::Simulator;
pub use spec::ProverSpec;

use num_bigint::BigUint;

use crate::bits::BitString;
use crate::protocol::{Basis, ImageMsg};
use crate::tcf::PublicKey;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProverError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("protocol violation: {0}")]
    Violation(String),
    #[error("the x register was already measured")]
    CollapsedState,
    #[error("out of order: {0}")]
    OutOfOrder(String),
    #[error("prover declined to answer")]
    Refused,
    #[error("unsupported: {0}")]
    Unsupported(String),
}

/// One prover session. Each `round1` starts a fresh iteration; `reset` rewinds to the
/// state right after the last `round1` so the remaining rounds can be replayed.
pub trait Prover {
    fn round1(&mut self, key: &PublicKey) -> Result<ImageMsg, ProverError>;
    fn answer_preimage(&mut self) -> Result<BigUint, ProverError>;
    fn round2(&mut self, r: &BitString) -> Result<BitString, ProverError>;
    fn round3(&mut self, basis: Basis) -> Result<bool, ProverError>;
    fn reset(&mut self) -> Result<(), ProverError>;
}

impl<P: Prover + ?Sized> Prover for Box<P> {
    fn round1(&mut self, key: &PublicKey) -> Result<ImageMsg, ProverError> {
        (**self).round1(key)
    }

    fn answer_preimage(&mut self) -> Result<BigUint, ProverError> {
        (**self).answer_preimage()
    }

    fn round2(&mut self, r: &BitString) -> Result<BitString, ProverError> {
        (**self).round2(r)
    }

    fn round3(&mut self, basis: Basis) -> Result<bool, ProverError> {
        (**self).round3(basis)
    }

    fn reset(&mut self) -> Result<(), ProverError> {
        (**self).reset()
    }
}

pub fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for randomness that depends only on the iteration tape and a query.
pub(crate) fn derive_seed(tape: u64, r: &BitString) -> u64 {
    r.words().iter().fold(splitmix(tape ^ r.len() as u64), |h, &w| splitmix(h ^ w))
}
