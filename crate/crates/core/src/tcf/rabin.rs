//! Rabin's function `x^2 mod N` restricted to `[0, ceil(N/2))`.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::numtheory::{gcd, half_ceil, is_prime_u64, is_probable_prime, mod_inverse, random_bits};
use super::{Claw, SecurityParams, TcfError};

/// Below this size the generator enumerates all Blum pairs instead of sampling.
const ENUMERATE_BELOW_BITS: u32 = 16;

/// Public modulus with its secret factorization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RabinKeyPair {
    pub n: BigUint,
    pub p: BigUint,
    pub q: BigUint,
}

pub type RabinClaw = Claw<BigUint, BigUint>;

impl RabinKeyPair {
    /// Builds a key pair from known factors, checking the Blum conditions.
    pub fn from_factors(p: BigUint, q: BigUint) -> Result<Self, TcfError> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let four = BigUint::from(4u32);
        for f in [&p, &q] {
            if f % &four != BigUint::from(3u32) {
                return Err(TcfError::Precondition(format!("factor {f} is not 3 mod 4")));
            }
            if !is_probable_prime(f, &mut rng) {
                return Err(TcfError::Precondition(format!("factor {f} is not prime")));
            }
        }
        if p == q {
            return Err(TcfError::Precondition("factors must differ".into()));
        }
        let (p, q) = if p < q { (p, q) } else { (q, p) };
        Ok(Self { n: &p * &q, p, q })
    }

    /// Number of domain elements, `ceil(N/2)`.
    pub fn domain_size(&self) -> BigUint {
        half_ceil(&self.n)
    }
}

/// Samples a Blum semiprime with `n_bits` bits (small sizes may land on `n_bits ± 1`).
pub fn rabin_gen(params: SecurityParams) -> Result<RabinKeyPair, TcfError> {
    if params.n_bits < 6 {
        return Err(TcfError::Precondition(format!("n_bits must be at least 6, got {}", params.n_bits)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    if params.n_bits < ENUMERATE_BELOW_BITS {
        return Ok(small_blum(params.n_bits, &mut rng));
    }
    let p_bits = u64::from(params.n_bits.div_ceil(2));
    let q_bits = u64::from(params.n_bits) - p_bits;
    loop {
        let p = blum_prime(p_bits, &mut rng);
        let q = blum_prime(q_bits, &mut rng);
        if p == q {
            continue;
        }
        let n = &p * &q;
        debug_assert_eq!(n.bits(), u64::from(params.n_bits));
        let (p, q) = if p < q { (p, q) } else { (q, p) };
        return Ok(RabinKeyPair { n, p, q });
    }
}

/// Prime of exactly `bits` bits with the top two bits set and `p = 3 mod 4`.
fn blum_prime(bits: u64, rng: &mut ChaCha8Rng) -> BigUint {
    assert!(bits >= 4);
    let top = BigUint::from(3u32) << (bits - 2);
    loop {
        let mut c = random_bits(bits, rng) | &top;
        c |= BigUint::from(3u32);
        if is_probable_prime(&c, rng) {
            return c;
        }
    }
}

fn small_blum(n_bits: u32, rng: &mut ChaCha8Rng) -> RabinKeyPair {
    let limit = 1u64 << (n_bits + 1);
    let primes: Vec<u64> = (3..limit / 3).filter(|&v| v % 4 == 3 && is_prime_u64(v)).collect();
    let pairs_with = |lo: u32, hi: u32| -> Vec<(u64, u64)> {
        let mut out = Vec::new();
        for (i, &p) in primes.iter().enumerate() {
            for &q in &primes[i + 1..] {
                let bits = 64 - (p * q).leading_zeros();
                if (lo..=hi).contains(&bits) {
                    out.push((p, q));
                }
            }
        }
        out
    };
    let mut pairs = pairs_with(n_bits, n_bits);
    if pairs.is_empty() {
        pairs = pairs_with(n_bits - 1, n_bits + 1);
    }
    let &(p, q) = pairs.choose(rng).expect("Blum pairs exist for n_bits >= 6");
    RabinKeyPair { n: BigUint::from(p * q), p: BigUint::from(p), q: BigUint::from(q) }
}

/// `x^2 mod N` for `x` in `[0, ceil(N/2))`.
pub fn rabin_eval(n: &BigUint, x: &BigUint) -> Result<BigUint, TcfError> {
    if x >= &half_ceil(n) {
        return Err(TcfError::Domain(format!("x={x} is not below ceil(N/2) for N={n}")));
    }
    Ok((x * x) % n)
}

/// All domain elements squaring to `y`, sorted ascending; empty if none.
pub fn rabin_invert(keys: &RabinKeyPair, y: &BigUint) -> Vec<BigUint> {
    let n = &keys.n;
    if y >= n {
        return Vec::new();
    }
    let (p, q) = (&keys.p, &keys.q);
    let a = y.modpow(&((p + 1u32) >> 2), p);
    let b = y.modpow(&((q + 1u32) >> 2), q);
    if (&a * &a) % p != y % p || (&b * &b) % q != y % q {
        return Vec::new();
    }
    let cp = q * mod_inverse(q, p).expect("distinct primes");
    let cq = p * mod_inverse(p, q).expect("distinct primes");
    let u = (&a * &cp) % n;
    let v = (&b * &cq) % n;
    let neg = |t: &BigUint| (n - t) % n;
    let half = half_ceil(n);
    let mut roots: Vec<BigUint> = [(&u + &v) % n, (&u + neg(&v)) % n, (neg(&u) + &v) % n, (neg(&u) + neg(&v)) % n]
        .into_iter()
        .filter(|r| r < &half && (r * r) % n == *y)
        .collect();
    roots.sort();
    roots.dedup();
    roots
}

/// Recovers the factors of `N` from a claw; the result is ordered `(small, large)`.
pub fn factor_from_claw(n: &BigUint, claw: &RabinClaw) -> Result<(BigUint, BigUint), TcfError> {
    let sum = &claw.x0 + &claw.x1;
    let diff = if claw.x0 >= claw.x1 { &claw.x0 - &claw.x1 } else { &claw.x1 - &claw.x0 };
    for c in [sum, diff] {
        let g = gcd(&c, n);
        if !g.is_one() && &g != n && !g.is_zero() {
            let other = n / &g;
            return Ok(if g < other { (g, other) } else { (other, g) });
        }
    }
    Err(TcfError::NotAClaw)
}
