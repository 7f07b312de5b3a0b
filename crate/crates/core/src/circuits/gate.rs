//! Gate-level intermediate representation.

use core::fmt;
use core::str::FromStr;

use num_bigint::BigUint;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::CircuitError;

pub type Qubit = u32;

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    X(Qubit),
    Cnot(Qubit, Qubit),
    Toffoli(Qubit, Qubit, Qubit),
    H(Qubit),
    CPhase {
        controls: Vec<Qubit>,
        target: Qubit,
        angle: f64,
    },
    /// Brings a fresh `|0>` qubit into use.
    AllocAncilla(Qubit),
    /// Measures the listed qubits in the Hadamard basis and drops them.
    DiscardGarbage(Vec<Qubit>),
    MeasureY(Vec<Qubit>),
}

impl Gate {
    /// Qubits the gate touches, in operand order.
    pub fn qubits(&self) -> Vec<Qubit> {
        match self {
            Self::X(q) | Self::H(q) | Self::AllocAncilla(q) => vec![*q],
            Self::Cnot(c, t) => vec![*c, *t],
            Self::Toffoli(a, b, t) => vec![*a, *b, *t],
            Self::CPhase { controls, target, .. } => {
                let mut v = controls.clone();
                v.push(*target);
                v
            }
            Self::DiscardGarbage(qs) | Self::MeasureY(qs) => qs.clone(),
        }
    }

    /// True for unitary gates, false for allocation, discard and measurement.
    pub fn is_unitary(&self) -> bool {
        !matches!(self, Self::AllocAncilla(_) | Self::DiscardGarbage(_) | Self::MeasureY(_))
    }
}

/// Which squaring construction a circuit uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CircuitKind {
    Schoolbook,
    Karatsuba { cutoff: u32 },
}

impl CircuitKind {
    pub const DEFAULT_KARATSUBA_CUTOFF: u32 = 16;

    pub fn karatsuba() -> Self {
        Self::Karatsuba { cutoff: Self::DEFAULT_KARATSUBA_CUTOFF }
    }

    pub fn builder_name(&self) -> &'static str {
        match self {
            Self::Schoolbook => "schoolbook",
            Self::Karatsuba { .. } => "karatsuba",
        }
    }
}

impl fmt::Display for CircuitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Schoolbook => f.write_str("schoolbook"),
            Self::Karatsuba { cutoff } if *cutoff == Self::DEFAULT_KARATSUBA_CUTOFF => f.write_str("karatsuba"),
            Self::Karatsuba { cutoff } => write!(f, "karatsuba:{cutoff}"),
        }
    }
}

impl FromStr for CircuitKind {
    type Err = CircuitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "schoolbook" => Ok(Self::Schoolbook),
            None if s == "karatsuba" => Ok(Self::karatsuba()),
            Some(("karatsuba", c)) => {
                let cutoff: u32 = c.parse().map_err(|_| CircuitError::UnknownBuilder(s.into()))?;
                if cutoff < 8 {
                    return Err(CircuitError::UnknownBuilder(format!("{s}: cutoff must be at least 8")));
                }
                Ok(Self::Karatsuba { cutoff })
            }
            _ => Err(CircuitError::UnknownBuilder(s.into())),
        }
    }
}

impl Serialize for CircuitKind {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CircuitKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Builder provenance and the constants needed to post-process outputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CircuitMeta {
    pub builder: String,
    /// Bit length of the base modulus.
    pub n: u32,
    /// Modulus the circuit reduces by (lifted when `lift > 0`).
    pub modulus: BigUint,
    /// Montgomery factor: outputs equal `value * r_prime mod modulus`.
    pub r_prime: BigUint,
    pub lift: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub n_qubits: u32,
    pub gates: Vec<Gate>,
    /// Input register, live from the start, little-endian.
    pub x_reg: Vec<Qubit>,
    /// Output register read by `MeasureY`, little-endian.
    pub y_reg: Vec<Qubit>,
    pub meta: CircuitMeta,
}

impl Circuit {
    /// Number of qubits measured away as garbage.
    pub fn garbage_len(&self) -> usize {
        self.gates.iter().map(|g| if let Gate::DiscardGarbage(qs) = g { qs.len() } else { 0 }).sum()
    }

    /// Structural check: liveness, operand distinctness and a single final `MeasureY`.
    pub fn validate(&self) -> Result<(), CircuitError> {
        let n = self.n_qubits as usize;
        let mut live = vec![false; n];
        let bad = |i: usize, msg: String| Err(CircuitError::Malformed { gate: i, reason: msg });
        for &q in &self.x_reg {
            if q as usize >= n || live[q as usize] {
                return bad(0, format!("bad input qubit {q}"));
            }
            live[q as usize] = true;
        }
        let mut measured = false;
        for (i, g) in self.gates.iter().enumerate() {
            if measured {
                return bad(i, "gate after MeasureY".into());
            }
            let qs = g.qubits();
            if let Some(q) = qs.iter().find(|&&q| q as usize >= n) {
                return bad(i, format!("qubit {q} out of range"));
            }
            let mut sorted = qs.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return bad(i, "repeated operand".into());
            }
            match g {
                Gate::AllocAncilla(q) => {
                    if live[*q as usize] {
                        return bad(i, format!("allocating live qubit {q}"));
                    }
                    live[*q as usize] = true;
                }
                _ => {
                    if let Some(q) = qs.iter().find(|&&q| !live[q as usize]) {
                        return bad(i, format!("qubit {q} is not live"));
                    }
                    if let Gate::DiscardGarbage(qs) = g {
                        for &q in qs {
                            live[q as usize] = false;
                        }
                    }
                    if let Gate::MeasureY(qs) = g {
                        if qs.as_slice() != self.y_reg.as_slice() {
                            return bad(i, "MeasureY does not match the y register".into());
                        }
                        measured = true;
                    }
                }
            }
        }
        if !measured {
            return Err(CircuitError::Malformed { gate: self.gates.len(), reason: "no MeasureY".into() });
        }
        Ok(())
    }
}
