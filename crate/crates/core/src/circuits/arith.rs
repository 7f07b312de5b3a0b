//! Squaring circuits for `x^2 mod N`: schoolbook or Karatsuba products, in-place
//! tripling for lifted keys, and a Montgomery reduction stage.

use num_bigint::BigUint;
use num_traits::{One, Zero};

use super::builder::{Acc, Bit, Builder};
use super::gate::{Circuit, CircuitKind, CircuitMeta, Qubit};
use crate::tcf::numtheory::{half_ceil, mod_inverse};

/// `x^2` of an operand whose `None` bits are known zero; result width `2 * x.len()`.
fn square_schoolbook(b: &mut Builder, x: &[Option<Qubit>]) -> Acc {
    let w = x.len();
    let cap = 2 * w;
    let mut acc = Acc::new();
    for i in 0..w {
        let Some(xi) = x[i] else { continue };
        let mut row = vec![Bit::Borrowed(xi), Bit::Zero];
        for xj in &x[i + 1..] {
            row.push(match xj {
                Some(xj) => {
                    let p = b.alloc();
                    b.toffoli(xi, *xj, p);
                    Bit::Owned(p)
                }
                None => Bit::Zero,
            });
        }
        while row.last() == Some(&Bit::Zero) {
            row.pop();
        }
        b.add_into(&mut acc, &row, 2 * i, cap);
    }
    acc
}

/// Karatsuba squaring: `(a 2^h + b)^2 = a^2 2^{2h} + ((a+b)^2 - a^2 - b^2) 2^h + b^2`.
fn square_karatsuba(b: &mut Builder, x: &[Option<Qubit>], cutoff: usize) -> Acc {
    let mut w = x.len();
    while w > 0 && x[w - 1].is_none() {
        w -= 1;
    }
    let x = &x[..w];
    if w <= cutoff {
        return square_schoolbook(b, x);
    }
    let h = w / 2;
    let (lo_in, hi_in) = x.split_at(h);
    let lo = square_karatsuba(b, lo_in, cutoff);
    let hi = square_karatsuba(b, hi_in, cutoff);

    let s_cap = hi_in.len() + 1;
    let mut s = Acc::new();
    let lo_bits: Vec<Bit> = lo_in.iter().map(|&q| Bit::borrowed(q)).collect();
    let hi_bits: Vec<Bit> = hi_in.iter().map(|&q| Bit::borrowed(q)).collect();
    b.add_into(&mut s, &lo_bits, 0, s_cap);
    b.add_into(&mut s, &hi_bits, 0, s_cap);
    let mut mid = square_karatsuba(b, &s, cutoff);
    b.discard_all(s.into_iter().flatten());

    let mid_cap = 2 * s_cap;
    let lo_sub: Vec<Bit> = lo.iter().map(|&q| Bit::borrowed(q)).collect();
    let hi_sub: Vec<Bit> = hi.iter().map(|&q| Bit::borrowed(q)).collect();
    b.sub_into(&mut mid, &lo_sub, 0, mid_cap);
    b.sub_into(&mut mid, &hi_sub, 0, mid_cap);

    let mut out = lo;
    out.resize(2 * h, None);
    out.extend(hi);
    let mid_bits: Vec<Bit> = mid.into_iter().map(Bit::owned).collect();
    b.add_into(&mut out, &mid_bits, h, 2 * w);
    out
}

/// `x <- 3x` in place; the caller guarantees `3x` fits the register.
fn mul3_inplace(b: &mut Builder, x: &[Qubit]) {
    let w = x.len();
    let mut addend = vec![Bit::Zero];
    for &q in &x[..w.saturating_sub(1)] {
        let c = b.alloc();
        b.cnot(q, c);
        addend.push(Bit::Owned(c));
    }
    let mut acc: Acc = x.iter().map(|&q| Some(q)).collect();
    b.add_into(&mut acc, &addend, 0, w);
    debug_assert!(acc.iter().zip(x).all(|(a, q)| *a == Some(*q)));
}

/// Montgomery reduction of `t < R N` with `R = 2^{bits(N)}`: returns `t R^{-1} mod N`
/// as a register of `bits(N)` qubits. Uses two constant multiplications and one addition.
fn montgomery_reduce(b: &mut Builder, mut t: Acc, modulus: &BigUint) -> Vec<Qubit> {
    let nb = modulus.bits() as usize;
    let r = BigUint::one() << nb;
    let n_neg_inv = &r - mod_inverse(modulus, &r).expect("odd modulus");
    let t_cap = 2 * nb + 1;
    t.resize(t.len().max(t_cap), None);
    t.truncate(t_cap);

    // m = (t mod R) * (-N^{-1}) mod R
    let mut m = Acc::new();
    for j in 0..nb {
        if n_neg_inv.bit(j as u64) {
            let row: Vec<Bit> = t[..nb - j].iter().map(|&q| Bit::borrowed(q)).collect();
            b.add_into(&mut m, &row, j, nb);
        }
    }
    // P = m * N, then t += P.
    let mut prod = Acc::new();
    for j in 0..nb {
        if modulus.bit(j as u64) {
            let row: Vec<Bit> = m.iter().map(|&q| Bit::borrowed(q)).collect();
            b.add_into(&mut prod, &row, j, 2 * nb);
        }
    }
    b.discard_all(m.into_iter().flatten());
    let prod_bits: Vec<Bit> = prod.into_iter().map(Bit::owned).collect();
    b.add_into(&mut t, &prod_bits, 0, t_cap);

    // The low half is now zero; the high half holds u = (t + mN) / R < 2N.
    let mut u: Acc = t.split_off(nb);
    b.discard_all(t.into_iter().flatten());
    u.truncate(nb + 1);
    let two_comp = (BigUint::one() << (nb + 1)) - modulus;
    b.add_const(&mut u, &two_comp, nb + 1);
    let borrow = u.pop().flatten().expect("sign bit is materialized");
    let addback: Vec<Bit> =
        (0..nb).map(|j| if modulus.bit(j as u64) { Bit::Borrowed(borrow) } else { Bit::Zero }).collect();
    b.add_into(&mut u, &addback, 0, nb);
    b.discard(borrow);
    b.materialize(&mut u, nb);
    u.into_iter().map(|q| q.expect("materialized")).collect()
}

/// Circuit computing `(k x)^2 R' mod k^2 N` with `k = 3^lift`, input `x < ceil(N/2)`.
pub fn build_for_modulus(kind: CircuitKind, n: &BigUint, lift: u32) -> Circuit {
    assert!(n.bit(0) && n > &BigUint::from(2u32), "modulus must be odd and > 2");
    let k = BigUint::from(3u32).pow(lift);
    let modulus = &k * &k * n;
    let width = (((half_ceil(n) - 1u32) * &k).bits() as usize).max(1);
    let mut b = Builder::new();
    let x = b.input_register(width);
    for _ in 0..lift {
        mul3_inplace(&mut b, &x);
    }
    let xs: Vec<Option<Qubit>> = x.iter().map(|&q| Some(q)).collect();
    let sq = match kind {
        CircuitKind::Schoolbook => square_schoolbook(&mut b, &xs),
        CircuitKind::Karatsuba { cutoff } => square_karatsuba(&mut b, &xs, cutoff as usize),
    };
    let y = montgomery_reduce(&mut b, sq, &modulus);
    let leftover: Vec<Qubit> = b.live().into_iter().filter(|q| !x.contains(q) && !y.contains(q)).collect();
    debug_assert!(leftover.is_empty(), "live ancillas before measurement: {leftover:?}");
    b.discard_all(leftover);
    b.measure(y.clone());
    let r = BigUint::one() << modulus.bits();
    let r_prime = mod_inverse(&(r % &modulus), &modulus).expect("odd modulus");
    Circuit {
        n_qubits: b.n_qubits(),
        gates: b.gates,
        x_reg: x,
        y_reg: y,
        meta: CircuitMeta { builder: kind.to_string(), n: n.bits() as u32, modulus, r_prime, lift },
    }
}

fn check_size(n: u32, modulus: &BigUint) {
    assert!(modulus.bits() == u64::from(n), "modulus {modulus} must satisfy 2^(n-1) <= N < 2^n for n={n}");
}

pub fn build_schoolbook(n: u32, modulus: &BigUint) -> Circuit {
    check_size(n, modulus);
    build_for_modulus(CircuitKind::Schoolbook, modulus, 0)
}

pub fn build_karatsuba(n: u32, modulus: &BigUint, cutoff: u32) -> Circuit {
    check_size(n, modulus);
    assert!(cutoff >= 8, "Karatsuba cutoff must be at least 8");
    build_for_modulus(CircuitKind::Karatsuba { cutoff }, modulus, 0)
}

/// Reduction stage alone: input register holds `t < 2^{2n}` with `t < R N`.
pub fn montgomery_stage(n: u32, modulus: &BigUint) -> Circuit {
    check_size(n, modulus);
    let mut b = Builder::new();
    let t = b.input_register(2 * n as usize);
    let acc: Acc = t.iter().map(|&q| Some(q)).collect();
    // The stage consumes its input, so the preserved input register is the empty prefix.
    let y = montgomery_reduce(&mut b, acc, modulus);
    b.measure(y.clone());
    let r = BigUint::one() << n;
    let r_prime = mod_inverse(&(r % modulus), modulus).expect("odd modulus");
    Circuit {
        n_qubits: b.n_qubits(),
        gates: b.gates,
        x_reg: t,
        y_reg: y,
        meta: CircuitMeta { builder: "montgomery".into(), n, modulus: modulus.clone(), r_prime, lift: 0 },
    }
}

/// In-place tripling of an `n`-qubit register, measured at the end.
pub fn build_mul3_inplace(n: u32) -> Circuit {
    let mut b = Builder::new();
    let x = b.input_register(n as usize);
    mul3_inplace(&mut b, &x);
    b.measure(x.clone());
    Circuit {
        n_qubits: b.n_qubits(),
        gates: b.gates,
        x_reg: x.clone(),
        y_reg: x,
        meta: CircuitMeta { builder: "mul3".into(), n, modulus: BigUint::zero(), r_prime: BigUint::one(), lift: 1 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::BitString;
    use crate::circuits::eval::evaluate_classical;
    use crate::tcf::numtheory::is_prime_u64;

    fn eval_u64(c: &Circuit, x: u64) -> u64 {
        let e = evaluate_classical(c, &BitString::from_u64(x, c.x_reg.len())).unwrap();
        e.output.to_biguint().try_into().unwrap()
    }

    fn blum_up_to(limit: u64) -> Vec<u64> {
        let primes: Vec<u64> = (3..limit).filter(|&p| p % 4 == 3 && is_prime_u64(p)).collect();
        let mut out = Vec::new();
        for (i, &p) in primes.iter().enumerate() {
            for &q in &primes[i + 1..] {
                if p * q <= limit {
                    out.push(p * q);
                }
            }
        }
        out.sort_unstable();
        out
    }

    fn check_all(kind: CircuitKind, n: u64, lift: u32) {
        let big_n = BigUint::from(n);
        let c = build_for_modulus(kind, &big_n, lift);
        c.validate().unwrap();
        let k = 3u64.pow(lift);
        let modulus = k * k * n;
        let rp: u64 = (&c.meta.r_prime).try_into().unwrap();
        for x in 0..n.div_ceil(2) {
            let kx = (k * x) as u128;
            let want = ((kx * kx % modulus as u128) * rp as u128 % modulus as u128) as u64;
            assert_eq!(eval_u64(&c, x), want, "{kind} N={n} lift={lift} x={x}");
        }
    }

    #[test]
    fn worked_example_n77() {
        let c = build_schoolbook(7, &BigUint::from(77u32));
        let rp: u64 = (&c.meta.r_prime).try_into().unwrap();
        // R = 128, R' = 128^{-1} mod 77.
        assert_eq!(rp * 128 % 77, 1);
        assert_eq!(eval_u64(&c, 9), 4 * rp % 77);
        assert_eq!(eval_u64(&c, 0), 0);
        assert_eq!(eval_u64(&c, 1), rp);
        assert!(c.n_qubits <= 60, "{} qubits", c.n_qubits);
    }

    #[test]
    fn schoolbook_matches_integers_for_small_blum_moduli() {
        for n in blum_up_to(250) {
            check_all(CircuitKind::Schoolbook, n, 0);
        }
    }

    #[test]
    fn karatsuba_matches_integers_for_small_blum_moduli() {
        for n in blum_up_to(250) {
            check_all(CircuitKind::Karatsuba { cutoff: 8 }, n, 0);
        }
    }

    #[test]
    fn karatsuba_recursion_at_wider_inputs() {
        // Width 20 with cutoff 8 recurses twice.
        let n = 1_046_527u64;
        let big_n = BigUint::from(n);
        let c = build_for_modulus(CircuitKind::Karatsuba { cutoff: 8 }, &big_n, 0);
        let rp: u128 = u128::try_from(&c.meta.r_prime).unwrap();
        for x in [0u64, 1, 2, 12345, 262_143, 500_000, n / 2] {
            let want = ((x as u128 * x as u128) % n as u128 * rp % n as u128) as u64;
            assert_eq!(eval_u64(&c, x), want, "x={x}");
        }
    }

    #[test]
    fn lifted_circuits_match() {
        for n in [21u64, 33, 57, 77] {
            for lift in 1..=2 {
                check_all(CircuitKind::Schoolbook, n, lift);
                check_all(CircuitKind::Karatsuba { cutoff: 8 }, n, lift);
            }
        }
    }

    #[test]
    fn mul3_exhaustive() {
        let c = build_mul3_inplace(12);
        c.validate().unwrap();
        for x in 0..(1u64 << 10) {
            assert_eq!(eval_u64(&c, x), 3 * x);
        }
        assert_eq!(eval_u64(&c, 5), 15);
    }

    #[test]
    fn montgomery_stage_alone() {
        let big_n = BigUint::from(77u32);
        let c = montgomery_stage(7, &big_n);
        c.validate().unwrap();
        let rp: u64 = (&c.meta.r_prime).try_into().unwrap();
        assert_eq!(eval_u64(&c, 0), 0);
        for x in 0..39u64 {
            let y = eval_u64(&c, x * x);
            let r_mod = 128 % 77;
            assert_eq!(y * r_mod % 77, x * x % 77, "x={x}");
            assert_eq!(y, x * x % 77 * rp % 77);
        }
    }
}
