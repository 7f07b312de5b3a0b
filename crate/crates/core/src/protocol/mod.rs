//! The three-round verifier, its message set and the score statistic.

pub mod messages;
pub mod qubit;
pub mod score;
pub mod verifier;

pub use messages::{Basis, Challenge, GarbageReport, ImageMsg, RoundMessage};
pub use qubit::{compute_qubit_state, expected_bit, qubit_state_with_phase, single_state, QubitState};
pub use score::{score, Exact, ScoreReport, Tally};
pub use verifier::{
    check_preimage, choose_challenge, run_iteration, verifier_check_image, Outcome, Transcript, Verifier,
    VerifierConfig,
};

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("challenge ratio must lie in (0, 1], got {0}")]
    BadRatio(f64),
    #[error("not enough scored iterations (preimage: {trials_x}, measurement: {trials_m})")]
    InsufficientData { trials_x: u64, trials_m: u64 },
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("prover failed in round 1: {0}")]
    Prover(String),
    #[error("protocol violation: {0}")]
    Violation(String),
}
