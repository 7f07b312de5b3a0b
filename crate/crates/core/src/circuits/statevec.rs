//! Dense state-vector simulator for toy sizes.

use num_complex::Complex64;

use super::gate::{Gate, Qubit};
use super::CircuitError;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: u32,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|index>` on `n` qubits; qubit `q` is bit `q` of the index.
    pub fn basis(n: u32, index: usize) -> Self {
        assert!(n <= 26, "state vector too large");
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[index] = Complex64::new(1.0, 0.0);
        Self { n, amps }
    }

    /// Overwrites one amplitude; the caller keeps the state normalized.
    pub fn set_amplitude(&mut self, index: usize, a: Complex64) {
        self.amps[index] = a;
    }

    pub fn n_qubits(&self) -> u32 {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    fn mask(&self, q: Qubit) -> usize {
        assert!(q < self.n, "qubit {q} out of range");
        1 << q
    }

    fn permute(&mut self, controls: usize, target: usize) {
        for i in 0..self.amps.len() {
            if i & controls == controls && i & target == 0 {
                self.amps.swap(i, i | target);
            }
        }
    }

    pub fn h(&mut self, q: Qubit) {
        let m = self.mask(q);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..self.amps.len() {
            if i & m == 0 {
                let (a, b) = (self.amps[i], self.amps[i | m]);
                self.amps[i] = (a + b) * s;
                self.amps[i | m] = (a - b) * s;
            }
        }
    }

    /// Multiplies by `e^{i angle}` every basis state with all listed qubits set.
    pub fn phase(&mut self, qubits: &[Qubit], angle: f64) {
        let m = qubits.iter().fold(0, |acc, &q| acc | self.mask(q));
        let w = Complex64::from_polar(1.0, angle);
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & m == m {
                *a *= w;
            }
        }
    }

    pub fn pauli_z(&mut self, q: Qubit) {
        self.phase(&[q], std::f64::consts::PI);
    }

    /// Projects qubit `q` on `|+>` (`outcome = false`) or `|->`, then resets it to `|0>`.
    /// Returns the probability of the outcome; the state is renormalized when it is nonzero.
    pub fn measure_x_and_reset(&mut self, q: Qubit, outcome: bool) -> f64 {
        let m = self.mask(q);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let sign = if outcome { -1.0 } else { 1.0 };
        for i in 0..self.amps.len() {
            if i & m == 0 {
                let (a, b) = (self.amps[i], self.amps[i | m]);
                self.amps[i] = (a + b * sign) * s;
                self.amps[i | m] = Complex64::new(0.0, 0.0);
            }
        }
        let p: f64 = self.amps.iter().map(|a| a.norm_sqr()).sum();
        if p > 0.0 {
            let k = p.sqrt().recip();
            self.amps.iter_mut().for_each(|a| *a *= k);
        }
        p
    }

    /// Applies a unitary gate; allocation is a no-op (qubits start and reset to `|0>`).
    pub fn apply(&mut self, g: &Gate) -> Result<(), CircuitError> {
        match g {
            Gate::X(t) => self.permute(0, self.mask(*t)),
            Gate::Cnot(c, t) => self.permute(self.mask(*c), self.mask(*t)),
            Gate::Toffoli(a, b, t) => self.permute(self.mask(*a) | self.mask(*b), self.mask(*t)),
            Gate::H(q) => self.h(*q),
            Gate::CPhase { controls, target, angle } => {
                let mut qs = controls.clone();
                qs.push(*target);
                self.phase(&qs, *angle);
            }
            Gate::AllocAncilla(_) => {}
            Gate::DiscardGarbage(_) | Gate::MeasureY(_) => {
                return Err(CircuitError::Precondition("measurements need an explicit outcome".into()))
            }
        }
        Ok(())
    }

    /// Outcome distribution of the listed qubits, read little-endian.
    pub fn marginal(&self, qubits: &[Qubit]) -> Vec<f64> {
        let mut out = vec![0.0; 1 << qubits.len()];
        for (i, a) in self.amps.iter().enumerate() {
            let j = qubits.iter().enumerate().fold(0, |acc, (k, &q)| acc | (((i >> q) & 1) << k));
            out[j] += a.norm_sqr();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bell_pair_and_phase() {
        let mut s = StateVector::basis(2, 0);
        s.apply(&Gate::H(0)).unwrap();
        s.apply(&Gate::Cnot(0, 1)).unwrap();
        let p = s.marginal(&[0, 1]);
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[3] - 0.5).abs() < 1e-12);
        s.pauli_z(1);
        // (|00> - |11>)/sqrt2: an X-basis measurement of qubit 0 gives |-> paired with ...
        let prob = s.measure_x_and_reset(0, false);
        assert!((prob - 0.5).abs() < 1e-12);
        let p = s.marginal(&[0, 1]);
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[2] - 0.5).abs() < 1e-12);
    }
}
