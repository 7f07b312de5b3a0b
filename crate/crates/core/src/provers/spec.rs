//! Prover selection strings: `ideal`, `cheater`,
//! `noisy:F=<f>,circuit=<builder>[,m=<lift>][,theta=<rad>]`, `phase:delta=<d>[,theta=<rad>]`.

use core::fmt;
use core::str::FromStr;

use super::{Cheater, IdealProver, NoisyConfig, NoisyProver, Prover, ProverError, Simulator};
use crate::circuits::CircuitKind;
use crate::tcf::VerifierKey;

#[derive(Debug, Clone, PartialEq)]
pub enum ProverSpec {
    Ideal,
    Cheater,
    Noisy { fidelity: f64, circuit: CircuitKind, lift: Option<u32>, theta: Option<f64> },
    Phase { delta: f64, theta: Option<f64> },
}

fn bad(s: &str, why: &str) -> ProverError {
    ProverError::Unsupported(format!("prover spec {s:?}: {why}"))
}

impl FromStr for ProverSpec {
    type Err = ProverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let mut fields = std::collections::BTreeMap::new();
        for kv in args.split(',').filter(|kv| !kv.is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| bad(s, "expected key=value"))?;
            if fields.insert(k, v).is_some() {
                return Err(bad(s, "repeated key"));
            }
        }
        let mut take = |k: &str| fields.remove(k);
        let real = |v: Option<&str>, k: &str| -> Result<Option<f64>, ProverError> {
            v.map(|v| v.parse::<f64>().map_err(|_| bad(s, &format!("{k} is not a number")))).transpose()
        };
        let spec = match name {
            "ideal" => Self::Ideal,
            "cheater" => Self::Cheater,
            "noisy" => {
                let fidelity = real(take("F"), "F")?.ok_or_else(|| bad(s, "missing F"))?;
                let circuit = match take("circuit") {
                    Some(c) => c.parse().map_err(|e: crate::circuits::CircuitError| bad(s, &e.to_string()))?,
                    None => CircuitKind::karatsuba(),
                };
                let lift =
                    take("m").map(|v| v.parse::<u32>().map_err(|_| bad(s, "m is not an integer"))).transpose()?;
                let theta = real(take("theta"), "theta")?;
                if !(fidelity > 0.0 && fidelity <= 1.0) {
                    return Err(bad(s, "F must lie in (0, 1]"));
                }
                Self::Noisy { fidelity, circuit, lift, theta }
            }
            "phase" => {
                let delta = real(take("delta"), "delta")?.ok_or_else(|| bad(s, "missing delta"))?;
                if !(0.0..=0.5).contains(&delta) {
                    return Err(bad(s, "delta must lie in [0, 1/2]"));
                }
                Self::Phase { delta, theta: real(take("theta"), "theta")? }
            }
            _ => return Err(bad(s, "unknown prover")),
        };
        if let Some(k) = fields.keys().next() {
            return Err(bad(s, &format!("unknown key {k}")));
        }
        Ok(spec)
    }
}

impl fmt::Display for ProverSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Ideal => f.write_str("ideal"),
            Self::Cheater => f.write_str("cheater"),
            Self::Noisy { fidelity, circuit, lift, theta } => {
                write!(f, "noisy:F={fidelity},circuit={circuit}")?;
                if let Some(m) = lift {
                    write!(f, ",m={m}")?;
                }
                if let Some(t) = theta {
                    write!(f, ",theta={t}")?;
                }
                Ok(())
            }
            Self::Phase { delta, theta } => {
                write!(f, "phase:delta={delta}")?;
                if let Some(t) = theta {
                    write!(f, ",theta={t}")?;
                }
                Ok(())
            }
        }
    }
}

impl ProverSpec {
    /// Key lift the prover expects, if it fixes one.
    pub fn lift(&self) -> Option<u32> {
        match self {
            Self::Noisy { lift, .. } => *lift,
            _ => None,
        }
    }

    /// Instantiates the prover. A trapdoor, when given, only feeds the simulator that
    /// stands in for quantum superposition; without one the simulator cracks the key.
    pub fn build(&self, seed: u64, trapdoor: Option<&VerifierKey>) -> Result<Box<dyn Prover + Send>, ProverError> {
        let sim = trapdoor.map(|k| Simulator::from_trapdoor(k.clone()));
        Ok(match self {
            Self::Ideal => {
                let mut p = IdealProver::new(seed);
                if let Some(s) = sim {
                    p.set_simulator(s);
                }
                Box::new(p)
            }
            Self::Cheater => Box::new(Cheater::new(seed)),
            Self::Noisy { fidelity, circuit, lift, theta } => {
                let cfg = NoisyConfig { lift: *lift, theta: *theta, ..NoisyConfig::new(*fidelity, *circuit) };
                Box::new(match sim {
                    Some(s) => NoisyProver::with_simulator(cfg, s, seed),
                    None => NoisyProver::new(cfg, seed),
                })
            }
            Self::Phase { delta, theta } => {
                let mut p = IdealProver::phase_noise(*delta, *theta, seed)?;
                if let Some(s) = sim {
                    p.set_simulator(s);
                }
                Box::new(p)
            }
        })
    }
}
