//! Phase-estimation circuits for `x^2 mod N`.
//!
//! Both imprint `exp(2 pi i x^2 z / N)` on an `m = n + 2` qubit register `z` prepared in
//! `|+>^m`; an inverse Fourier transform on `z` then yields `j ~ 2^m (x^2 mod N) / N`.
//! The per-term angle `2 pi 2^{i+j+k} / N` depends only on the exponent sum.
//!
//! Variant 1 handles one output qubit at a time with a single ancilla. Variant 2 groups
//! the cross terms `x_i x_j` with equal `i + j` into a small Fourier-basis counter.

use core::f64::consts::PI;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use super::gate::{Gate, Qubit};
use super::resources::{CostBasis, ResourceCounter, ResourceReport};
use super::CircuitError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhaseVariant {
    /// Single ancilla per term, one output qubit at a time: about `n^3 / 2` gates.
    Ancilla = 1,
    /// Fourier counter over terms with equal exponent sum: `O(n^2 log n)` gates.
    Counter = 2,
}

impl TryFrom<u8> for PhaseVariant {
    type Error = CircuitError;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Self::Ancilla),
            2 => Ok(Self::Counter),
            _ => Err(CircuitError::Precondition(format!("phase circuit variant {v} (expected 1 or 2)"))),
        }
    }
}

/// `2 pi 2^s / N mod 2 pi`, exact up to the final division.
pub fn phase_angle(modulus: &BigUint, s: u64) -> f64 {
    let r = BigUint::from(2u32).modpow(&BigUint::from(s), modulus);
    let (num, den) = (r.to_f64().unwrap_or(0.0), modulus.to_f64().unwrap_or(f64::INFINITY));
    2.0 * PI * num / den
}

/// Qubits of the counter register needed to count up to `n / 2` pairs.
fn counter_width(n: u32) -> u32 {
    (u32::BITS - (n / 2).leading_zeros()).max(1)
}

/// Output precision used by both variants.
pub fn output_bits(n: u32) -> u32 {
    n + 2
}

fn qft(reg: &[Qubit], sign: f64, emit: &mut impl FnMut(Gate)) {
    let mut gates = Vec::new();
    for p in (0..reg.len()).rev() {
        gates.push(Gate::H(reg[p]));
        for q in 0..p {
            gates.push(Gate::CPhase { controls: vec![reg[q]], target: reg[p], angle: PI / 2f64.powi((p - q) as i32) });
        }
    }
    if sign < 0.0 {
        for g in gates.into_iter().rev() {
            emit(match g {
                Gate::CPhase { controls, target, angle } => Gate::CPhase { controls, target, angle: -angle },
                g => g,
            });
        }
    } else {
        gates.into_iter().for_each(emit);
    }
}

/// Register layout of an unrolled phase circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCircuit {
    pub variant: PhaseVariant,
    pub n: u32,
    pub n_qubits: u32,
    pub x_reg: Vec<Qubit>,
    /// Qubits to read after the final gate, little-endian `j`.
    pub readout: Vec<Qubit>,
    pub gates: Vec<Gate>,
}

impl PhaseCircuit {
    /// `round(j N / 2^m) mod N` for an outcome `j`.
    pub fn decode(&self, modulus: &BigUint, j: u64) -> BigUint {
        let m = self.readout.len();
        let v = (BigUint::from(j) * modulus + (BigUint::from(1u32) << (m - 1))) >> m;
        v % modulus
    }
}

/// Emits the full gate schedule with `m` distinct output qubits and a final inverse QFT.
fn emit_unrolled(
    variant: PhaseVariant,
    modulus: &BigUint,
    emit: &mut impl FnMut(Gate),
) -> (u32, Vec<Qubit>, Vec<Qubit>) {
    let n = modulus.bits() as u32;
    let m = output_bits(n);
    let x: Vec<Qubit> = (0..n).collect();
    let z: Vec<Qubit> = (n..n + m).collect();
    let mut next = n + m;
    for &q in &z {
        emit(Gate::H(q));
    }
    match variant {
        PhaseVariant::Ancilla => {
            let anc = next;
            next += 1;
            for (k, &zk) in z.iter().enumerate() {
                ancilla_round(modulus, &x, zk, k as u64, anc, emit);
            }
        }
        PhaseVariant::Counter => {
            let c: Vec<Qubit> = (next..next + counter_width(n)).collect();
            next += c.len() as u32;
            counter_rounds(modulus, &x, &z, &c, emit);
        }
    }
    let rev: Vec<Qubit> = z.iter().rev().copied().collect();
    qft(&rev, -1.0, emit);
    (next, x, rev)
}

/// Terms `x_i x_j z_k` for one output qubit `z_k`.
fn ancilla_round(modulus: &BigUint, x: &[Qubit], zk: Qubit, k: u64, anc: Qubit, emit: &mut impl FnMut(Gate)) {
    for (i, &xi) in x.iter().enumerate() {
        let i = i as u64;
        emit(Gate::Toffoli(xi, zk, anc));
        emit(Gate::CPhase { controls: vec![], target: anc, angle: phase_angle(modulus, 2 * i + k) });
        for (j, &xj) in x.iter().enumerate().skip(i as usize + 1) {
            let angle = phase_angle(modulus, i + j as u64 + k + 1);
            emit(Gate::CPhase { controls: vec![anc], target: xj, angle });
        }
        emit(Gate::Toffoli(xi, zk, anc));
    }
}

fn counter_rounds(modulus: &BigUint, x: &[Qubit], z: &[Qubit], c: &[Qubit], emit: &mut impl FnMut(Gate)) {
    let n = x.len();
    for (i, &xi) in x.iter().enumerate() {
        for (k, &zk) in z.iter().enumerate() {
            emit(Gate::CPhase { controls: vec![xi], target: zk, angle: phase_angle(modulus, (2 * i + k) as u64) });
        }
    }
    let incr = |sign: f64, pairs: &[(usize, usize)], emit: &mut dyn FnMut(Gate)| {
        for &(i, j) in pairs {
            for (p, &cp) in c.iter().enumerate() {
                let angle = sign * PI / 2f64.powi(p as i32);
                emit(Gate::CPhase { controls: vec![x[i], x[j]], target: cp, angle });
            }
        }
    };
    for s in 1..(2 * n).saturating_sub(2) {
        let pairs: Vec<(usize, usize)> = (0..n).filter_map(|i| (s > 2 * i && s - i < n).then(|| (i, s - i))).collect();
        if pairs.is_empty() {
            continue;
        }
        for &q in c {
            emit(Gate::H(q));
        }
        incr(1.0, &pairs, emit);
        qft(c, -1.0, emit);
        for (l, &cl) in c.iter().enumerate() {
            for (k, &zk) in z.iter().enumerate() {
                let angle = phase_angle(modulus, (s + k + l + 1) as u64);
                emit(Gate::CPhase { controls: vec![cl], target: zk, angle });
            }
        }
        qft(c, 1.0, emit);
        incr(-1.0, &pairs, emit);
        for &q in c {
            emit(Gate::H(q));
        }
    }
}

/// Unrolled circuit for state-vector checks.
pub fn phase_circuit(variant: PhaseVariant, modulus: &BigUint) -> PhaseCircuit {
    let mut gates = Vec::new();
    let (n_qubits, x_reg, readout) = emit_unrolled(variant, modulus, &mut |g| gates.push(g));
    PhaseCircuit { variant, n: modulus.bits() as u32, n_qubits, x_reg, readout, gates }
}

/// Resource schedule: variant 1 recycles one output qubit measured in the Hadamard basis
/// each round (semiclassical inverse QFT); variant 2 is the unrolled circuit.
fn emit_resource_schedule(variant: PhaseVariant, modulus: &BigUint, emit: &mut impl FnMut(Gate)) {
    let n = modulus.bits() as u32;
    match variant {
        PhaseVariant::Ancilla => {
            let x: Vec<Qubit> = (0..n).collect();
            let (z, anc) = (n, n + 1);
            emit(Gate::AllocAncilla(anc));
            for k in 0..output_bits(n) {
                emit(Gate::AllocAncilla(z));
                emit(Gate::H(z));
                ancilla_round(modulus, &x, z, u64::from(k), anc, emit);
                // Correction from earlier outcomes; its angle is set at run time.
                emit(Gate::CPhase { controls: vec![], target: z, angle: 0.0 });
                emit(Gate::DiscardGarbage(vec![z]));
            }
        }
        PhaseVariant::Counter => {
            emit_unrolled(variant, modulus, emit);
        }
    }
}

/// Resources of a phase circuit at bit length `n`, all gates weighted equally.
pub fn phase_circuit_resources(variant: PhaseVariant, n: u32) -> Result<ResourceReport, CircuitError> {
    if n < 8 {
        return Err(CircuitError::Precondition(format!("phase circuits need n >= 8, got {n}")));
    }
    // Counts do not depend on the odd modulus, only on its length.
    let modulus = (BigUint::from(1u32) << n) - 1u32;
    let mut counter = ResourceCounter::new(CostBasis::Native);
    counter.declare(0..n);
    emit_resource_schedule(variant, &modulus, &mut |g| counter.push(&g));
    Ok(counter.finish())
}

/// Closed-form `(qubits, gates, toffolis)` for the resource schedules.
pub fn phase_circuit_formula(variant: PhaseVariant, n: u32) -> (u64, u64, u64) {
    let (n64, m) = (u64::from(n), u64::from(output_bits(n)));
    match variant {
        PhaseVariant::Ancilla => {
            let per_round = 3 * n64 + n64 * (n64 - 1) / 2 + 2;
            (n64 + 2, m * per_round, 2 * n64 * m)
        }
        PhaseVariant::Counter => {
            let b = u64::from(counter_width(n));
            let qft = b * (b + 1) / 2;
            let mut gates = m + n64 * m + m * (m + 1) / 2;
            let mut total_pairs = 0;
            for s in 1..(2 * n64).saturating_sub(2) {
                let pairs = (0..n64).filter(|&i| s > 2 * i && s - i < n64).count() as u64;
                if pairs > 0 {
                    total_pairs += pairs;
                    gates += 2 * b + 2 * qft + 2 * pairs * b + m * b;
                }
            }
            debug_assert_eq!(total_pairs, n64 * (n64 - 1) / 2);
            (n64 + m + b, gates, 0)
        }
    }
}
