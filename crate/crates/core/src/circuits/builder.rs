//! Gate emitter with a LIFO qubit pool, and irreversible ripple adders.
//!
//! Accumulators are `Vec<Option<Qubit>>`: `None` marks a bit known to be zero, so
//! fresh high bits cost nothing until a carry lands in them. Every adder preserves
//! borrowed operands and measures away carries as soon as they are spent.

use num_bigint::BigUint;

use super::gate::{Gate, Qubit};

/// One addend bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Bit {
    Zero,
    /// Read-only; left untouched.
    Borrowed(Qubit),
    /// Consumed by the addition: moved into the accumulator or discarded.
    Owned(Qubit),
}

impl Bit {
    fn qubit(self) -> Option<Qubit> {
        match self {
            Self::Zero => None,
            Self::Borrowed(q) | Self::Owned(q) => Some(q),
        }
    }

    pub(crate) fn borrowed(q: Option<Qubit>) -> Self {
        q.map_or(Self::Zero, Self::Borrowed)
    }

    pub(crate) fn owned(q: Option<Qubit>) -> Self {
        q.map_or(Self::Zero, Self::Owned)
    }
}

pub(crate) type Acc = Vec<Option<Qubit>>;

#[derive(Debug, Default)]
pub(crate) struct Builder {
    pub gates: Vec<Gate>,
    free: Vec<Qubit>,
    next: Qubit,
}

impl Builder {
    pub fn new() -> Self {
        Self::default()
    }

    /// High-water mark of qubit indices.
    pub fn n_qubits(&self) -> u32 {
        self.next
    }

    /// Register that is live from the start (no allocation gate).
    pub fn input_register(&mut self, width: usize) -> Vec<Qubit> {
        let start = self.next;
        self.next += width as Qubit;
        (start..self.next).collect()
    }

    pub fn alloc(&mut self) -> Qubit {
        let q = self.free.pop().unwrap_or_else(|| {
            self.next += 1;
            self.next - 1
        });
        self.gates.push(Gate::AllocAncilla(q));
        q
    }

    pub fn discard(&mut self, q: Qubit) {
        self.gates.push(Gate::DiscardGarbage(vec![q]));
        self.free.push(q);
    }

    /// Qubits currently in use, ascending.
    pub fn live(&self) -> Vec<Qubit> {
        let mut free = self.free.clone();
        free.sort_unstable();
        (0..self.next).filter(|q| free.binary_search(q).is_err()).collect()
    }

    pub fn discard_all(&mut self, qs: impl IntoIterator<Item = Qubit>) {
        for q in qs {
            self.discard(q);
        }
    }

    pub fn x(&mut self, q: Qubit) {
        self.gates.push(Gate::X(q));
    }

    pub fn cnot(&mut self, c: Qubit, t: Qubit) {
        self.gates.push(Gate::Cnot(c, t));
    }

    pub fn toffoli(&mut self, a: Qubit, b: Qubit, t: Qubit) {
        self.gates.push(Gate::Toffoli(a, b, t));
    }

    pub fn measure(&mut self, qs: Vec<Qubit>) {
        self.gates.push(Gate::MeasureY(qs));
    }

    /// Replaces known-zero positions below `len` with fresh qubits.
    pub fn materialize(&mut self, acc: &mut Acc, len: usize) {
        if acc.len() < len {
            acc.resize(len, None);
        }
        for slot in acc.iter_mut().take(len) {
            if slot.is_none() {
                *slot = Some(self.alloc());
            }
        }
    }

    /// `acc += addend << offset (mod 2^cap)`.
    pub fn add_into(&mut self, acc: &mut Acc, addend: &[Bit], offset: usize, cap: usize) {
        let mut carry: Option<Qubit> = None;
        let mut i = 0;
        while offset + i < cap && (i < addend.len() || carry.is_some()) {
            let p = offset + i;
            if acc.len() <= p {
                acc.resize(p + 1, None);
            }
            let last = p + 1 == cap;
            let b = addend.get(i).copied().unwrap_or(Bit::Zero);
            let mut consumed = false;
            match (acc[p], b.qubit(), carry) {
                (Some(a), Some(bq), Some(c)) => {
                    if last {
                        self.cnot(bq, a);
                        self.cnot(c, a);
                        carry = None;
                    } else {
                        let g = self.alloc();
                        self.toffoli(a, bq, g);
                        self.cnot(bq, a);
                        self.toffoli(a, c, g);
                        self.cnot(c, a);
                        carry = Some(g);
                    }
                    self.discard(c);
                }
                (Some(a), Some(bq), None) => {
                    if !last {
                        let g = self.alloc();
                        self.toffoli(a, bq, g);
                        carry = Some(g);
                    }
                    self.cnot(bq, a);
                }
                (Some(a), None, Some(c)) => {
                    carry = None;
                    if !last {
                        let g = self.alloc();
                        self.toffoli(a, c, g);
                        carry = Some(g);
                    }
                    self.cnot(c, a);
                    self.discard(c);
                }
                (None, Some(bq), Some(c)) => {
                    carry = None;
                    if matches!(b, Bit::Owned(_)) {
                        if !last {
                            let g = self.alloc();
                            self.toffoli(bq, c, g);
                            carry = Some(g);
                        }
                        self.cnot(c, bq);
                        self.discard(c);
                        acc[p] = Some(bq);
                        consumed = true;
                    } else {
                        if !last {
                            let g = self.alloc();
                            self.toffoli(bq, c, g);
                            carry = Some(g);
                        }
                        self.cnot(bq, c);
                        acc[p] = Some(c);
                    }
                }
                (None, Some(bq), None) => {
                    if matches!(b, Bit::Owned(_)) {
                        acc[p] = Some(bq);
                        consumed = true;
                    } else {
                        let t = self.alloc();
                        self.cnot(bq, t);
                        acc[p] = Some(t);
                    }
                }
                (None, None, Some(c)) => {
                    acc[p] = Some(c);
                    carry = None;
                }
                (_, None, None) => {}
            }
            if let (Bit::Owned(q), false) = (b, consumed) {
                self.discard(q);
            }
            i += 1;
        }
        if let Some(c) = carry {
            self.discard(c);
        }
        for b in addend.iter().skip(i) {
            if let Bit::Owned(q) = b {
                self.discard(*q);
            }
        }
    }

    /// `acc -= addend << offset (mod 2^cap)` via `~(~acc + addend)` on bits `[offset, cap)`.
    pub fn sub_into(&mut self, acc: &mut Acc, addend: &[Bit], offset: usize, cap: usize) {
        self.materialize(acc, cap);
        for p in offset..cap {
            self.x(acc[p].expect("materialized"));
        }
        self.add_into(acc, addend, offset, cap);
        for p in offset..cap {
            self.x(acc[p].expect("materialized"));
        }
    }

    /// `acc += c (mod 2^cap)` for a classical constant.
    pub fn add_const(&mut self, acc: &mut Acc, c: &BigUint, cap: usize) {
        let c_bits = c.bits() as usize;
        let mut carry: Option<Qubit> = None;
        let mut p = 0;
        while p < cap && (p < c_bits || carry.is_some()) {
            if acc.len() <= p {
                acc.resize(p + 1, None);
            }
            let last = p + 1 == cap;
            let one = c.bit(p as u64);
            match (acc[p], one, carry) {
                (Some(a), true, Some(cq)) => {
                    carry = None;
                    if !last {
                        // a OR c = a xor c xor ac.
                        let g = self.alloc();
                        self.cnot(a, g);
                        self.cnot(cq, g);
                        self.toffoli(a, cq, g);
                        carry = Some(g);
                    }
                    self.cnot(cq, a);
                    self.x(a);
                    self.discard(cq);
                }
                (Some(a), true, None) => {
                    if !last {
                        let g = self.alloc();
                        self.cnot(a, g);
                        carry = Some(g);
                    }
                    self.x(a);
                }
                (Some(a), false, Some(cq)) => {
                    carry = None;
                    if !last {
                        let g = self.alloc();
                        self.toffoli(a, cq, g);
                        carry = Some(g);
                    }
                    self.cnot(cq, a);
                    self.discard(cq);
                }
                (None, true, Some(cq)) => {
                    // sum = not c, carry = c.
                    if last {
                        self.x(cq);
                        acc[p] = Some(cq);
                        carry = None;
                    } else {
                        let t = self.alloc();
                        self.cnot(cq, t);
                        self.x(t);
                        acc[p] = Some(t);
                    }
                }
                (None, true, None) => {
                    let t = self.alloc();
                    self.x(t);
                    acc[p] = Some(t);
                }
                (None, false, Some(cq)) => {
                    acc[p] = Some(cq);
                    carry = None;
                }
                (_, false, None) => {}
            }
            p += 1;
        }
        if let Some(cq) = carry {
            self.discard(cq);
        }
    }
}
