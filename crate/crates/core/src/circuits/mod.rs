//! Circuits for `x^2 mod N`: gate IR, builders, evaluators and resource counts.

mod arith;
mod builder;
mod eval;
mod gate;
pub mod phase;
mod resources;
pub mod statevec;
mod text;

pub use arith::{build_for_modulus, build_karatsuba, build_mul3_inplace, build_schoolbook, montgomery_stage};
pub use eval::{evaluate_classical, run_two_branch, BranchRun, Evaluation, Pauli};
pub use gate::{Circuit, CircuitKind, CircuitMeta, Gate, Qubit};
pub use resources::{count_gates, count_resources, CostBasis, ResourceCounter, ResourceReport};
pub use text::{parse_circuit, write_circuit};

use crate::bits::BitString;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CircuitError {
    #[error("malformed circuit at gate {gate}: {reason}")]
    Malformed { gate: usize, reason: String },
    #[error("gate {gate} is not classical")]
    NotClassical { gate: usize },
    #[error("input does not fit the {width}-qubit register")]
    InputTooWide { width: usize },
    #[error("error rate {0} is not a probability")]
    BadNoise(f64),
    #[error("unknown circuit builder {0:?}")]
    UnknownBuilder(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Hadamard outcomes of the discarded qubits and their values on each branch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GarbageRecord {
    pub h: BitString,
    pub g0: BitString,
    pub g1: BitString,
}

/// Relative sign the discards impose between branches: `(-1)^{h . (g0 xor g1)}`.
pub fn discard_phase(record: &GarbageRecord) -> i8 {
    assert!(record.h.len() == record.g0.len() && record.g0.len() == record.g1.len(), "garbage record lengths differ");
    if record.h.dot(&record.g0.xor(&record.g1)) {
        -1
    } else {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn discard_phase_examples() {
        let zero = GarbageRecord { h: bs("000"), g0: bs("101"), g1: bs("011") };
        assert_eq!(discard_phase(&zero), 1);
        let same = GarbageRecord { h: bs("111"), g0: bs("101"), g1: bs("101") };
        assert_eq!(discard_phase(&same), 1);
        // h = 101 (binary), g0 xor g1 = 100 (binary); written bit 0 first.
        let odd = GarbageRecord { h: bs("101"), g0: bs("001"), g1: bs("000") };
        assert_eq!(discard_phase(&odd), -1);
    }
}

#[cfg(test)]
pub(crate) use eval::two_branch_core as two_branch_for_tests;
