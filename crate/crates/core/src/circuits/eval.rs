//! Classical evaluation, one branch or two branches with Pauli noise.

use rand::Rng;
use rand_distr::{Distribution, Geometric};

use super::gate::{Circuit, Gate, Qubit};
use super::CircuitError;
use crate::bits::BitString;

/// Output of a noise-free run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluation {
    pub output: BitString,
    /// Values of discarded qubits, in discard order.
    pub garbage: BitString,
    /// Final contents of the input register.
    pub x_out: BitString,
}

fn malformed(gate: usize, reason: impl Into<String>) -> CircuitError {
    CircuitError::Malformed { gate, reason: reason.into() }
}

struct Bits {
    vals: Vec<bool>,
    live: Vec<bool>,
}

impl Bits {
    fn get(&self, i: usize, q: Qubit) -> Result<bool, CircuitError> {
        let q = q as usize;
        match self.live.get(q) {
            Some(true) => Ok(self.vals[q]),
            Some(false) => Err(malformed(i, format!("qubit {q} read while not live"))),
            None => Err(malformed(i, format!("qubit {q} out of range"))),
        }
    }

    fn flip_if(&mut self, i: usize, t: Qubit, cond: bool) -> Result<(), CircuitError> {
        self.get(i, t)?;
        self.vals[t as usize] ^= cond;
        Ok(())
    }
}

/// Runs gates from the given initial live qubits; returns every qubit's final value.
#[cfg(test)]
pub(crate) fn run_bits(n_qubits: u32, gates: &[Gate], init: &[(Qubit, bool)]) -> Result<Vec<bool>, CircuitError> {
    let mut st = Bits { vals: vec![false; n_qubits as usize], live: vec![false; n_qubits as usize] };
    for &(q, v) in init {
        st.vals[q as usize] = v;
        st.live[q as usize] = true;
    }
    let mut garbage = Vec::new();
    step_all(&mut st, gates, &mut garbage, &mut None)?;
    Ok(st.vals)
}

fn step_all(
    st: &mut Bits,
    gates: &[Gate],
    garbage: &mut Vec<bool>,
    output: &mut Option<Vec<bool>>,
) -> Result<(), CircuitError> {
    for (i, g) in gates.iter().enumerate() {
        if output.is_some() {
            return Err(malformed(i, "gate after MeasureY"));
        }
        match g {
            Gate::X(t) => st.flip_if(i, *t, true)?,
            Gate::Cnot(c, t) => {
                if c == t {
                    return Err(malformed(i, "control equals target"));
                }
                let v = st.get(i, *c)?;
                st.flip_if(i, *t, v)?;
            }
            Gate::Toffoli(a, b, t) => {
                if a == b || a == t || b == t {
                    return Err(malformed(i, "repeated Toffoli operand"));
                }
                let v = st.get(i, *a)? && st.get(i, *b)?;
                st.flip_if(i, *t, v)?;
            }
            Gate::CPhase { controls, target, .. } => {
                for q in controls.iter().chain([target]) {
                    st.get(i, *q)?;
                }
            }
            Gate::H(_) => return Err(CircuitError::NotClassical { gate: i }),
            Gate::AllocAncilla(q) => {
                let qi = *q as usize;
                if qi >= st.live.len() || st.live[qi] {
                    return Err(malformed(i, format!("cannot allocate qubit {q}")));
                }
                st.live[qi] = true;
                st.vals[qi] = false;
            }
            Gate::DiscardGarbage(qs) => {
                for q in qs {
                    garbage.push(st.get(i, *q)?);
                    st.live[*q as usize] = false;
                    st.vals[*q as usize] = false;
                }
            }
            Gate::MeasureY(qs) => {
                *output = Some(qs.iter().map(|q| st.get(i, *q)).collect::<Result<_, _>>()?);
            }
        }
    }
    Ok(())
}

/// Deterministic evaluation on input `x`, recording garbage at every discard.
pub fn evaluate_classical(circuit: &Circuit, x: &BitString) -> Result<Evaluation, CircuitError> {
    if x.len() > circuit.x_reg.len() && x.iter().skip(circuit.x_reg.len()).any(|b| b) {
        return Err(CircuitError::InputTooWide { width: circuit.x_reg.len() });
    }
    let n = circuit.n_qubits as usize;
    let mut st = Bits { vals: vec![false; n], live: vec![false; n] };
    for (i, &q) in circuit.x_reg.iter().enumerate() {
        let qi = q as usize;
        if qi >= n {
            return Err(malformed(0, format!("input qubit {q} out of range")));
        }
        st.live[qi] = true;
        st.vals[qi] = i < x.len() && x.get(i);
    }
    let mut garbage = Vec::with_capacity(circuit.garbage_len());
    let mut output = None;
    step_all(&mut st, &circuit.gates, &mut garbage, &mut output)?;
    let output = output.ok_or_else(|| malformed(circuit.gates.len(), "no MeasureY"))?;
    let x_out: Vec<bool> = circuit.x_reg.iter().map(|&q| st.vals[q as usize]).collect();
    Ok(Evaluation {
        output: BitString::from_bits(&output),
        garbage: BitString::from_bits(&garbage),
        x_out: BitString::from_bits(&x_out),
    })
}

/// Result of running a circuit on the superposition of two inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchRun {
    pub x_out: [BitString; 2],
    pub y: [BitString; 2],
    /// Relative phase of branch 1 is `-1` when set.
    pub phase: bool,
    /// Hadamard-basis outcomes of all discards.
    pub h: BitString,
    /// The branches interfered into one at a discard.
    pub merged: bool,
    pub errors: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

/// Exact two-branch simulation with one shared Pauli-error realization.
///
/// Each qubit stores two bits (bit 0: branch 0, bit 1: branch 1). After each
/// X/CNOT/Toffoli an error strikes with probability `error_rate`, on a uniformly chosen
/// operand of that gate, as a uniformly chosen Pauli.
pub fn run_two_branch<R: Rng + ?Sized>(
    circuit: &Circuit,
    x0: &BitString,
    x1: &BitString,
    error_rate: f64,
    rng: &mut R,
) -> Result<BranchRun, CircuitError> {
    if !(0.0..=1.0).contains(&error_rate) {
        return Err(CircuitError::BadNoise(error_rate));
    }
    let geo = if error_rate > 0.0 {
        Some(Geometric::new(error_rate).map_err(|_| CircuitError::BadNoise(error_rate))?)
    } else {
        None
    };
    let rng = std::cell::RefCell::new(rng);
    let mut countdown = geo.as_ref().map_or(u64::MAX, |g| g.sample(&mut **rng.borrow_mut()));
    let mut inject = |_: usize, g: &Gate| -> Option<(Qubit, Pauli)> {
        let geo = geo.as_ref()?;
        if countdown > 0 {
            countdown -= 1;
            return None;
        }
        let rng = &mut **rng.borrow_mut();
        countdown = geo.sample(rng);
        let ops = g.qubits();
        let q = ops[rng.random_range(0..ops.len())];
        let pauli = match rng.random_range(0..3) {
            0 => Pauli::X,
            1 => Pauli::Y,
            _ => Pauli::Z,
        };
        Some((q, pauli))
    };
    let mut coin = || rng.borrow_mut().random::<bool>();
    two_branch_core(circuit, x0, x1, &mut inject, &mut coin).map(|(run, _)| run)
}

/// Two-branch run with caller-supplied error placements and discard outcomes.
/// Also returns every qubit's final two-bit value.
pub(crate) fn two_branch_core(
    circuit: &Circuit,
    x0: &BitString,
    x1: &BitString,
    inject: &mut dyn FnMut(usize, &Gate) -> Option<(Qubit, Pauli)>,
    coin: &mut dyn FnMut() -> bool,
) -> Result<(BranchRun, Vec<u8>), CircuitError> {
    let mut sim = TwoBranch::new(circuit, x0, x1);
    let mut h = Vec::with_capacity(circuit.garbage_len());
    let mut y = None;
    for (i, g) in circuit.gates.iter().enumerate() {
        match g {
            Gate::X(t) => sim.v[*t as usize] ^= 3,
            Gate::Cnot(c, t) => {
                let m = sim.v[*c as usize];
                sim.xor_into(*t, m);
            }
            Gate::Toffoli(a, b, t) => {
                let m = sim.v[*a as usize] & sim.v[*b as usize];
                sim.xor_into(*t, m);
            }
            Gate::AllocAncilla(q) => {
                sim.set(*q, 0);
                continue;
            }
            Gate::DiscardGarbage(qs) => {
                sim.discard(qs, &mut h, coin);
                continue;
            }
            Gate::MeasureY(qs) => {
                y = Some(sim.read(qs));
                continue;
            }
            Gate::H(_) | Gate::CPhase { .. } => return Err(CircuitError::NotClassical { gate: i }),
        }
        if let Some((q, pauli)) = inject(i, g) {
            sim.apply_pauli(q, pauli);
            sim.errors += 1;
        }
    }
    let y = y.ok_or_else(|| malformed(circuit.gates.len(), "no MeasureY"))?;
    let x_out = sim.read(&circuit.x_reg);
    let run = BranchRun {
        x_out,
        y,
        phase: sim.phase && !sim.merged,
        h: BitString::from_bits(&h),
        merged: sim.merged,
        errors: sim.errors,
    };
    Ok((run, sim.v))
}

struct TwoBranch {
    v: Vec<u8>,
    diff: usize,
    phase: bool,
    merged: bool,
    errors: u64,
}

impl TwoBranch {
    fn new(circuit: &Circuit, x0: &BitString, x1: &BitString) -> Self {
        let mut v = vec![0u8; circuit.n_qubits as usize];
        let mut diff = 0;
        for (i, &q) in circuit.x_reg.iter().enumerate() {
            let b0 = i < x0.len() && x0.get(i);
            let b1 = i < x1.len() && x1.get(i);
            v[q as usize] = u8::from(b0) | (u8::from(b1) << 1);
            diff += usize::from(b0 != b1);
        }
        Self { v, diff, phase: false, merged: diff == 0, errors: 0 }
    }

    fn set(&mut self, q: Qubit, val: u8) {
        let old = self.v[q as usize];
        self.diff = self.diff + usize::from(val == 1 || val == 2) - usize::from(old == 1 || old == 2);
        self.v[q as usize] = val;
    }

    fn xor_into(&mut self, t: Qubit, m: u8) {
        let val = self.v[t as usize] ^ m;
        self.set(t, val);
    }

    fn apply_pauli(&mut self, q: Qubit, p: Pauli) {
        let v = self.v[q as usize];
        if matches!(p, Pauli::Z | Pauli::Y) && (v == 1 || v == 2) {
            self.phase ^= true;
        }
        if matches!(p, Pauli::X | Pauli::Y) {
            self.v[q as usize] ^= 3;
        }
    }

    fn discard(&mut self, qs: &[Qubit], h: &mut Vec<bool>, coin: &mut dyn FnMut() -> bool) {
        let start = h.len();
        let mut differing = None;
        for &q in qs {
            let v = self.v[q as usize];
            let bit = coin();
            let differs = v == 1 || v == 2;
            if differs {
                differing = Some(h.len());
                self.phase ^= bit;
            }
            h.push(bit);
            self.set(q, 0);
        }
        if !self.merged && self.diff == 0 {
            // Identical remainders interfere; only outcomes with even total phase survive,
            // and flipping one outcome on a differing qubit maps the odd half onto the even half.
            if self.phase {
                let j = differing.expect("branches differed before this discard");
                debug_assert!(j >= start);
                h[j] ^= true;
                self.phase = false;
            }
            self.merged = true;
        }
    }

    fn read(&self, qs: &[Qubit]) -> [BitString; 2] {
        let b0: Vec<bool> = qs.iter().map(|&q| self.v[q as usize] & 1 == 1).collect();
        let b1: Vec<bool> = qs.iter().map(|&q| self.v[q as usize] & 2 == 2).collect();
        [BitString::from_bits(&b0), BitString::from_bits(&b1)]
    }
}

#[cfg(test)]
mod tests {
    use num_complex::Complex64;
    use rand::seq::IndexedRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::circuits::gate::CircuitMeta;
    use crate::circuits::statevec::StateVector;

    const MAX_QUBITS: u32 = 6;

    fn random_circuit(rng: &mut ChaCha8Rng) -> Circuit {
        let width = rng.random_range(1..=3u32);
        let x_reg: Vec<Qubit> = (0..width).collect();
        let mut live: Vec<Qubit> = x_reg.clone();
        let mut free: Vec<Qubit> = (width..MAX_QUBITS).collect();
        let mut gates = Vec::new();
        for _ in 0..rng.random_range(4..30) {
            match rng.random_range(0..10) {
                0 | 1 if !free.is_empty() => {
                    let q = free.swap_remove(rng.random_range(0..free.len()));
                    gates.push(Gate::AllocAncilla(q));
                    live.push(q);
                }
                2 => {
                    let anc: Vec<usize> = (0..live.len()).filter(|&i| !x_reg.contains(&live[i])).collect();
                    if let Some(&i) = anc.choose(rng) {
                        let q = live.swap_remove(i);
                        gates.push(Gate::DiscardGarbage(vec![q]));
                        free.push(q);
                    }
                }
                3 => gates.push(Gate::X(*live.choose(rng).unwrap())),
                4..=6 if live.len() >= 2 => {
                    let qs: Vec<Qubit> = live.choose_multiple(rng, 2).copied().collect();
                    gates.push(Gate::Cnot(qs[0], qs[1]));
                }
                _ if live.len() >= 3 => {
                    let qs: Vec<Qubit> = live.choose_multiple(rng, 3).copied().collect();
                    gates.push(Gate::Toffoli(qs[0], qs[1], qs[2]));
                }
                _ => {}
            }
        }
        let y_reg: Vec<Qubit> = live.iter().copied().filter(|q| !x_reg.contains(q)).collect();
        gates.push(Gate::MeasureY(y_reg.clone()));
        Circuit {
            n_qubits: MAX_QUBITS,
            gates,
            x_reg,
            y_reg,
            meta: CircuitMeta {
                builder: "random".into(),
                n: 0,
                modulus: Default::default(),
                r_prime: Default::default(),
                lift: 0,
            },
        }
    }

    fn index_of(v: &[u8], bit: u8) -> usize {
        v.iter().enumerate().fold(0, |acc, (q, &b)| acc | (usize::from(b & bit != 0) << q))
    }

    #[test]
    fn two_branch_matches_state_vector_under_random_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (mut merged, mut flipped, mut errors) = (0, 0, 0);
        for trial in 0..100 {
            let c = random_circuit(&mut rng);
            c.validate().unwrap();
            let w = c.x_reg.len();
            let x0 = BitString::random(w, &mut rng);
            let mut x1 = BitString::random(w, &mut rng);
            if x1 == x0 {
                x1.flip(0);
            }
            let mut placed: Vec<(usize, Qubit, Pauli)> = Vec::new();
            let mut err_rng = ChaCha8Rng::seed_from_u64(1000 + trial);
            let mut inject = |i: usize, g: &Gate| {
                if !err_rng.random_bool(0.3) {
                    return None;
                }
                let q = *g.qubits().choose(&mut err_rng).unwrap();
                let p = *[Pauli::X, Pauli::Y, Pauli::Z].choose(&mut err_rng).unwrap();
                placed.push((i, q, p));
                Some((q, p))
            };
            let mut coin_rng = ChaCha8Rng::seed_from_u64(2000 + trial);
            let mut coin = || coin_rng.random::<bool>();
            let (run, v) = two_branch_core(&c, &x0, &x1, &mut inject, &mut coin).unwrap();

            let i0 = x0.words().first().copied().unwrap_or(0) as usize;
            let i1 = x1.words().first().copied().unwrap_or(0) as usize;
            let amp = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            let mut s = StateVector::basis(MAX_QUBITS, i0);
            s.set_amplitude(i0, amp);
            s.set_amplitude(i1, amp);
            let mut h_iter = run.h.iter();
            let mut errs = placed.iter().peekable();
            for (i, g) in c.gates.iter().enumerate() {
                match g {
                    Gate::DiscardGarbage(qs) => {
                        for &q in qs {
                            let p = s.measure_x_and_reset(q, h_iter.next().unwrap());
                            assert!(p > 1e-9, "trial {trial}: impossible discard outcome");
                        }
                    }
                    Gate::MeasureY(_) => {}
                    g => s.apply(g).unwrap(),
                }
                while let Some(&&(j, q, p)) = errs.peek() {
                    if j != i {
                        break;
                    }
                    errs.next();
                    if matches!(p, Pauli::Z | Pauli::Y) {
                        s.pauli_z(q);
                    }
                    if matches!(p, Pauli::X | Pauli::Y) {
                        s.apply(&Gate::X(q)).unwrap();
                    }
                }
            }
            merged += usize::from(run.merged);
            flipped += usize::from(run.phase);
            errors += run.errors;
            let amps = s.amplitudes();
            let (b0, b1) = (index_of(&v, 1), index_of(&v, 2));
            if run.merged {
                assert_eq!(b0, b1);
                assert!((amps[b0].norm() - 1.0).abs() < 1e-9, "trial {trial}: merged state");
            } else {
                assert_ne!(b0, b1);
                let (a0, a1) = (amps[b0], amps[b1]);
                assert!((a0.norm_sqr() - 0.5).abs() < 1e-9 && (a1.norm_sqr() - 0.5).abs() < 1e-9, "trial {trial}");
                let rel = a1 / a0;
                let want = if run.phase { -1.0 } else { 1.0 };
                assert!((rel - Complex64::new(want, 0.0)).norm() < 1e-9, "trial {trial}: phase {rel}");
            }
        }
        assert!(merged > 0 && flipped > 0 && errors > 100, "{merged} {flipped} {errors}");
    }
}
