//! Number-theory helpers over `BigUint`: sampling, primality, inverses.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::Rng;

const MR_ROUNDS: usize = 40;

/// Uniform integer with at most `bits` bits.
pub fn random_bits<R: Rng + ?Sized>(bits: u64, rng: &mut R) -> BigUint {
    if bits == 0 {
        return BigUint::zero();
    }
    let n_bytes = bits.div_ceil(8) as usize;
    let mut bytes = vec![0u8; n_bytes];
    rng.fill_bytes(&mut bytes);
    let extra = (n_bytes as u64) * 8 - bits;
    if extra > 0 {
        let last = bytes.last_mut().expect("nonempty");
        *last &= 0xffu8 >> extra;
    }
    BigUint::from_bytes_le(&bytes)
}

/// Uniform integer in `[0, bound)` by rejection. `bound` must be positive.
pub fn random_below<R: Rng + ?Sized>(bound: &BigUint, rng: &mut R) -> BigUint {
    assert!(!bound.is_zero(), "empty sampling range");
    let bits = bound.bits();
    loop {
        let c = random_bits(bits, rng);
        if &c < bound {
            return c;
        }
    }
}

/// Uniform integer in `[lo, hi)`.
pub fn random_range<R: Rng + ?Sized>(lo: &BigUint, hi: &BigUint, rng: &mut R) -> BigUint {
    assert!(lo < hi, "empty sampling range");
    lo + random_below(&(hi - lo), rng)
}

const SMALL_PRIMES: [u32; 25] =
    [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97];

/// Miller-Rabin with 40 random bases after trial division.
pub fn is_probable_prime<R: Rng + ?Sized>(n: &BigUint, rng: &mut R) -> bool {
    let two = BigUint::from(2u32);
    if n < &two {
        return false;
    }
    for &p in &SMALL_PRIMES {
        let p = BigUint::from(p);
        if n == &p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }
    let n_minus_1 = n - 1u32;
    let s = n_minus_1.trailing_zeros().expect("n > 2");
    let d = &n_minus_1 >> s;
    'witness: for _ in 0..MR_ROUNDS {
        let a = random_range(&two, &n_minus_1, rng);
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = (&x * &x) % n;
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Deterministic primality for small values, used by exhaustive tests.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Inverse of `a` modulo `m`, if it exists.
pub fn mod_inverse(a: &BigUint, m: &BigUint) -> Option<BigUint> {
    if m.is_one() {
        return Some(BigUint::zero());
    }
    a.modinv(m)
}

/// `a - b mod m` for residues `a, b < m`.
pub fn mod_sub(a: &BigUint, b: &BigUint, m: &BigUint) -> BigUint {
    if a >= b {
        (a - b) % m
    } else {
        (m - ((b - a) % m)) % m
    }
}

pub fn gcd(a: &BigUint, b: &BigUint) -> BigUint {
    a.gcd(b)
}

/// `ceil(n / 2)`.
pub fn half_ceil(n: &BigUint) -> BigUint {
    (n + 1u32) >> 1
}
