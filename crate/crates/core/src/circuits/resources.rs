//! Gate, qubit and depth accounting.

use serde::{Deserialize, Serialize};

use super::gate::{Circuit, Gate, Qubit};

/// How unitary gates are weighted in gate and depth totals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostBasis {
    /// Every gate counts once.
    Native,
    /// Toffoli counts as its standard 15-gate, depth-12 Clifford+T expansion.
    #[default]
    CliffordT,
}

impl CostBasis {
    fn weight(self, g: &Gate) -> (u64, u64) {
        match (self, g) {
            (Self::CliffordT, Gate::Toffoli(..)) => (15, 12),
            _ => (1, 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ResourceReport {
    pub qubits: u64,
    pub total_gates: u64,
    pub toffoli_count: u64,
    pub depth: u64,
}

/// Streaming counter; feed gates in program order.
#[derive(Debug, Clone, Default)]
pub struct ResourceCounter {
    basis: CostBasis,
    layer: Vec<u64>,
    live: Vec<bool>,
    live_now: u64,
    peak: u64,
    report: ResourceReport,
}

impl ResourceCounter {
    pub fn new(basis: CostBasis) -> Self {
        Self { basis, ..Self::default() }
    }

    fn touch(&mut self, q: Qubit) {
        let q = q as usize;
        if q >= self.layer.len() {
            self.layer.resize(q + 1, 0);
            self.live.resize(q + 1, false);
        }
        if !self.live[q] {
            self.live[q] = true;
            self.live_now += 1;
            self.peak = self.peak.max(self.live_now);
        }
    }

    /// Marks qubits live before the first gate (input registers).
    pub fn declare(&mut self, qs: impl IntoIterator<Item = Qubit>) {
        for q in qs {
            self.touch(q);
        }
    }

    pub fn push(&mut self, g: &Gate) {
        match g {
            Gate::AllocAncilla(q) => self.touch(*q),
            Gate::DiscardGarbage(qs) => {
                for &q in qs {
                    self.touch(q);
                    self.live[q as usize] = false;
                    self.live_now -= 1;
                }
            }
            Gate::MeasureY(qs) => {
                for &q in qs {
                    self.touch(q);
                }
            }
            _ => {
                let (w, d) = self.basis.weight(g);
                let qs = g.qubits();
                let start = qs.iter().map(|&q| {
                    self.touch(q);
                    self.layer[q as usize]
                });
                let end = start.max().unwrap_or(0) + d;
                for &q in &qs {
                    self.layer[q as usize] = end;
                }
                self.report.total_gates += w;
                self.report.toffoli_count += u64::from(matches!(g, Gate::Toffoli(..)));
                self.report.depth = self.report.depth.max(end);
            }
        }
    }

    /// Peak number of simultaneously live qubits, plus gate and depth totals.
    pub fn finish(&self) -> ResourceReport {
        ResourceReport { qubits: self.peak, ..self.report }
    }
}

/// Resources of a whole circuit, with Toffolis weighted by their Clifford+T expansion.
pub fn count_resources(circuit: &Circuit) -> ResourceReport {
    count_gates(circuit, CostBasis::CliffordT)
}

pub fn count_gates(circuit: &Circuit, basis: CostBasis) -> ResourceReport {
    let mut c = ResourceCounter::new(basis);
    c.declare(circuit.x_reg.iter().copied());
    for g in &circuit.gates {
        c.push(g);
    }
    c.finish()
}
