//! Line-oriented circuit format: a header of `# key=value` lines, then one gate per line.
//!
//! ```text
//! # n=7 N=77 builder=schoolbook Rprime=52 lift=0
//! # qubits=41 x=0,1,2,3,4,5 y=30,31,32,33,34,35,36
//! ALLOC 6
//! TOFFOLI 0 1 6
//! CPHASE 0.04081 ctrl=2,4 tgt=7
//! DISCARD 12 13
//! MEASURE 30 31 32 33 34 35 36
//! ```

use std::fmt::Write as _;

use num_bigint::BigUint;

use super::gate::{Circuit, CircuitMeta, Gate, Qubit};
use super::CircuitError;

fn join(qs: &[Qubit], sep: &str) -> String {
    qs.iter().map(u32::to_string).collect::<Vec<_>>().join(sep)
}

pub fn write_circuit(c: &Circuit) -> String {
    let m = &c.meta;
    let mut out = format!(
        "# n={} N={} builder={} Rprime={} lift={}\n# qubits={} x={} y={}\n",
        m.n,
        m.modulus,
        m.builder,
        m.r_prime,
        m.lift,
        c.n_qubits,
        join(&c.x_reg, ","),
        join(&c.y_reg, ",")
    );
    for g in &c.gates {
        let _ = match g {
            Gate::X(q) => writeln!(out, "X {q}"),
            Gate::Cnot(a, b) => writeln!(out, "CNOT {a} {b}"),
            Gate::Toffoli(a, b, t) => writeln!(out, "TOFFOLI {a} {b} {t}"),
            Gate::H(q) => writeln!(out, "H {q}"),
            Gate::CPhase { controls, target, angle } => {
                writeln!(out, "CPHASE {angle:?} ctrl={} tgt={target}", join(controls, ","))
            }
            Gate::AllocAncilla(q) => writeln!(out, "ALLOC {q}"),
            Gate::DiscardGarbage(qs) => writeln!(out, "DISCARD {}", join(qs, " ")),
            Gate::MeasureY(qs) => writeln!(out, "MEASURE {}", join(qs, " ")),
        };
    }
    out
}

fn perr(line: usize, reason: impl Into<String>) -> CircuitError {
    CircuitError::Parse { line, reason: reason.into() }
}

fn qubit(line: usize, s: &str) -> Result<Qubit, CircuitError> {
    s.parse().map_err(|_| perr(line, format!("bad qubit index {s:?}")))
}

fn qubit_list(line: usize, s: &str, sep: char) -> Result<Vec<Qubit>, CircuitError> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(sep).map(|t| qubit(line, t)).collect()
}

pub fn parse_circuit(text: &str) -> Result<Circuit, CircuitError> {
    let mut header = std::collections::HashMap::new();
    let mut gates = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        if let Some(rest) = raw.strip_prefix('#') {
            for kv in rest.split_whitespace() {
                if let Some((k, v)) = kv.split_once('=') {
                    header.insert(k.to_string(), v.to_string());
                }
            }
            continue;
        }
        let mut words = raw.split_whitespace();
        let op = words.next().unwrap_or_default();
        let args: Vec<&str> = words.collect();
        let fixed = |k: usize| -> Result<Vec<Qubit>, CircuitError> {
            if args.len() != k {
                return Err(perr(line, format!("{op} takes {k} operands")));
            }
            args.iter().map(|a| qubit(line, a)).collect()
        };
        let g = match op {
            "X" => Gate::X(fixed(1)?[0]),
            "H" => Gate::H(fixed(1)?[0]),
            "ALLOC" => Gate::AllocAncilla(fixed(1)?[0]),
            "CNOT" => {
                let q = fixed(2)?;
                Gate::Cnot(q[0], q[1])
            }
            "TOFFOLI" => {
                let q = fixed(3)?;
                Gate::Toffoli(q[0], q[1], q[2])
            }
            "DISCARD" | "MEASURE" => {
                let qs = args.iter().map(|a| qubit(line, a)).collect::<Result<Vec<_>, _>>()?;
                if op == "DISCARD" {
                    Gate::DiscardGarbage(qs)
                } else {
                    Gate::MeasureY(qs)
                }
            }
            "CPHASE" => {
                let [angle, ctrl, tgt] = args[..] else {
                    return Err(perr(line, "CPHASE takes an angle, ctrl= and tgt="));
                };
                let angle: f64 = angle.parse().map_err(|_| perr(line, "bad angle"))?;
                let ctrl = ctrl.strip_prefix("ctrl=").ok_or_else(|| perr(line, "expected ctrl="))?;
                let tgt = tgt.strip_prefix("tgt=").ok_or_else(|| perr(line, "expected tgt="))?;
                Gate::CPhase { controls: qubit_list(line, ctrl, ',')?, target: qubit(line, tgt)?, angle }
            }
            other => return Err(perr(line, format!("unknown gate {other:?}"))),
        };
        gates.push(g);
    }
    let get = |k: &str| header.get(k).ok_or_else(|| perr(0, format!("missing header field {k}")));
    let num = |k: &str| -> Result<BigUint, CircuitError> {
        get(k)?.parse().map_err(|_| perr(0, format!("bad header field {k}")))
    };
    let small = |k: &str| -> Result<u32, CircuitError> {
        get(k)?.parse().map_err(|_| perr(0, format!("bad header field {k}")))
    };
    let circuit = Circuit {
        n_qubits: small("qubits")?,
        gates,
        x_reg: qubit_list(0, get("x")?, ',')?,
        y_reg: qubit_list(0, get("y")?, ',')?,
        meta: CircuitMeta {
            builder: get("builder")?.clone(),
            n: small("n")?,
            modulus: num("N")?,
            r_prime: num("Rprime")?,
            lift: header.get("lift").map_or(Ok(0), |_| small("lift"))?,
        },
    };
    circuit.validate()?;
    Ok(circuit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{build_schoolbook, CircuitKind};

    #[test]
    fn round_trip() {
        let c = build_schoolbook(7, &BigUint::from(77u32));
        let text = write_circuit(&c);
        assert!(text.starts_with("# n=7 N=77 builder=schoolbook"));
        assert_eq!(parse_circuit(&text).unwrap(), c);
        let k = crate::circuits::build_for_modulus(CircuitKind::Karatsuba { cutoff: 8 }, &BigUint::from(1003u32), 1);
        assert_eq!(parse_circuit(&write_circuit(&k)).unwrap(), k);
    }

    #[test]
    fn cphase_line() {
        let text =
            "# n=0 N=0 builder=t Rprime=1 qubits=8 x=0,1,2,3,4,5,6,7 y=7\nCPHASE 0.04081 ctrl=2,4 tgt=7\nMEASURE 7\n";
        let c = parse_circuit(text).unwrap();
        assert_eq!(c.gates[0], Gate::CPhase { controls: vec![2, 4], target: 7, angle: 0.04081 });
        assert_eq!(parse_circuit(&write_circuit(&c)).unwrap(), c);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_circuit("# n=1\nX 0\nFOO 1\n").unwrap_err();
        assert_eq!(err, CircuitError::Parse { line: 3, reason: "unknown gate \"FOO\"".into() });
    }
}
