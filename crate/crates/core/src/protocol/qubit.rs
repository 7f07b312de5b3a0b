//! The single-qubit state the honest prover holds after round 2, and Born probabilities.

use serde::{Deserialize, Serialize};

use super::messages::Basis;
use crate::bits::BitString;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QubitState {
    Zero,
    One,
    Plus,
    Minus,
}

impl QubitState {
    pub const ALL: [QubitState; 4] = [Self::Zero, Self::One, Self::Plus, Self::Minus];

    pub fn is_computational(self) -> bool {
        matches!(self, Self::Zero | Self::One)
    }

    /// Probability of outcome 0 when measuring along `cos(t/2)|0> + sin(t/2)|1>`.
    pub fn prob_zero<T: Real>(self, theta: T) -> T {
        let half = T::lit(0.5);
        let c = (theta * half).cos();
        let s = (theta * half).sin();
        match self {
            Self::Zero => c * c,
            Self::One => s * s,
            Self::Plus => (T::one() + theta.sin()) * half,
            Self::Minus => (T::one() - theta.sin()) * half,
        }
    }
}

/// State from the claw `(x0, x1)`, the equation `d` and an extra phase flip on `x1`.
pub fn qubit_state_with_phase(
    x0: &BitString,
    x1: &BitString,
    r: &BitString,
    d: &BitString,
    phase_flip: bool,
) -> QubitState {
    let b0 = r.dot(x0);
    if b0 == r.dot(x1) {
        return if b0 { QubitState::One } else { QubitState::Zero };
    }
    // Amplitude signs are (-1)^{d.x0} on |b0> and (-1)^{d.x1 + phase} on |b1>; only
    // their ratio matters, and it is the same whichever branch carries |0>.
    let odd = d.dot(&x0.xor(x1)) ^ phase_flip;
    if odd {
        QubitState::Minus
    } else {
        QubitState::Plus
    }
}

/// State assuming no extra phase, as the verifier computes it.
pub fn compute_qubit_state(x0: &BitString, x1: &BitString, r: &BitString, d: &BitString) -> QubitState {
    qubit_state_with_phase(x0, x1, r, d, false)
}

/// Deterministic state `|r.x>` for a single preimage.
pub fn single_state(x: &BitString, r: &BitString) -> QubitState {
    if r.dot(x) {
        QubitState::One
    } else {
        QubitState::Zero
    }
}

/// The more likely outcome for `state` in `basis`.
pub fn expected_bit(state: QubitState, basis: Basis) -> bool {
    match (state, basis) {
        (QubitState::Zero, _) => false,
        (QubitState::One, _) => true,
        (QubitState::Plus, Basis::Plus) => false,
        (QubitState::Plus, Basis::Minus) => true,
        (QubitState::Minus, Basis::Plus) => true,
        (QubitState::Minus, Basis::Minus) => false,
    }
}
