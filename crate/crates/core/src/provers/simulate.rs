//! Classical stand-in for the superposition: given `y`, produce the partner preimage.
//!
//! A quantum prover obtains `x1` physically; a simulator has to compute it. Without a
//! trapdoor we recover one by brute cryptanalysis, which only works at toy sizes.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use std::collections::HashMap;

use super::ProverError;
use crate::tcf::ddh::{mat_inverse, DdhKeyPair, DdhPublicKey};
use crate::tcf::{Image, ImageCheck, PublicKey, RabinKeyPair, VerifierKey};

#[derive(Debug, Clone)]
pub struct Simulator {
    key: VerifierKey,
    public: PublicKey,
}

/// Largest group order accepted for baby-step giant-step.
const BSGS_LIMIT_BITS: u64 = 44;
/// Iteration cap for Pollard rho on multi-word moduli.
const RHO_LIMIT: u64 = 1 << 24;

impl Simulator {
    pub fn from_trapdoor(key: VerifierKey) -> Self {
        let public = key.public();
        Self { key, public }
    }

    /// Recovers a trapdoor from the public key alone.
    pub fn crack(public: &PublicKey) -> Result<Self, ProverError> {
        let key = match public {
            PublicKey::Rabin(pk) => {
                let p = factor(&pk.n)
                    .ok_or_else(|| ProverError::Unsupported(format!("cannot factor a {}-bit modulus", pk.n.bits())))?;
                let q = &pk.n / &p;
                let keys = RabinKeyPair::from_factors(p, q).map_err(|e| ProverError::Unsupported(e.to_string()))?;
                VerifierKey::Rabin { keys, lift: pk.lift }
            }
            PublicKey::Ddh(pk) => VerifierKey::Ddh(crack_ddh(pk)?),
        };
        Ok(Self::from_trapdoor(key))
    }

    pub fn public(&self) -> &PublicKey {
        &self.public
    }

    pub fn inverts(&self, key: &PublicKey) -> bool {
        &self.public == key
    }

    pub fn invert(&self, y: &Image) -> ImageCheck {
        self.key.invert(y)
    }

    /// The other preimage of `f(x)`, if `x` is half of a claw.
    pub fn partner(&self, x: &BigUint, y: &Image) -> Option<BigUint> {
        match self.invert(y) {
            ImageCheck::Claw(c) if &c.x0 == x => Some(c.x1),
            ImageCheck::Claw(c) if &c.x1 == x => Some(c.x0),
            _ => None,
        }
    }
}

fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

/// Brent's variant of Pollard rho on a word-sized composite.
fn rho_u64(n: u64) -> Option<u64> {
    if n % 2 == 0 {
        return Some(2);
    }
    for c in 1..64u64 {
        let f = |x: u64| (mulmod(x, x, n) + c) % n;
        let (mut y, mut r, mut q) = (2u64, 1u64, 1u64);
        let mut g = 1;
        let mut x = y;
        let mut ys = y;
        while g == 1 {
            x = y;
            for _ in 0..r {
                y = f(y);
            }
            let mut k = 0;
            while k < r && g == 1 {
                ys = y;
                for _ in 0..(r - k).min(128) {
                    y = f(y);
                    q = mulmod(q, x.abs_diff(y), n);
                }
                g = q.gcd(&n);
                k += 128;
            }
            r *= 2;
        }
        if g == n {
            loop {
                ys = f(ys);
                g = x.abs_diff(ys).gcd(&n);
                if g > 1 {
                    break;
                }
            }
        }
        if g != n {
            return Some(g);
        }
    }
    None
}

fn rho_big(n: &BigUint) -> Option<BigUint> {
    for c in 1..8u32 {
        let c = BigUint::from(c);
        let f = |x: &BigUint| (x * x + &c) % n;
        let (mut x, mut y) = (BigUint::from(2u32), BigUint::from(2u32));
        for _ in 0..RHO_LIMIT {
            x = f(&x);
            y = f(&f(&y));
            let diff = if x > y { &x - &y } else { &y - &x };
            let g = diff.gcd(n);
            if g == *n {
                break;
            }
            if !g.is_one() {
                return Some(g);
            }
        }
    }
    None
}

/// Some nontrivial factor of `n`.
fn factor(n: &BigUint) -> Option<BigUint> {
    match n.to_u64() {
        Some(v) => rho_u64(v).filter(|&p| p > 1 && p < v).map(BigUint::from),
        None => rho_big(n),
    }
}

/// Discrete log of `h` to base `g` in a group of order `q`, or `None`.
fn bsgs(g: &BigUint, h: &BigUint, q: &BigUint, p: &BigUint) -> Option<BigUint> {
    let q64 = q.to_u64()?;
    let m = (q64 as f64).sqrt().ceil() as u64 + 1;
    let mut baby = HashMap::with_capacity(m as usize);
    let mut e = BigUint::one();
    for j in 0..m {
        baby.entry(e.clone()).or_insert(j);
        e = e * g % p;
    }
    let factor = g.modpow(&(q - BigUint::from(m % q64)), p);
    let mut gamma = h.clone();
    for i in 0..m {
        if let Some(&j) = baby.get(&gamma) {
            return Some(BigUint::from((i * m + j) % q64));
        }
        gamma = gamma * &factor % p;
    }
    None
}

fn crack_ddh(pk: &DdhPublicKey) -> Result<DdhKeyPair, ProverError> {
    if pk.group_order.bits() > BSGS_LIMIT_BITS {
        return Err(ProverError::Unsupported(format!("group order of {} bits", pk.group_order.bits())));
    }
    let q = &pk.group_order;
    let dlog = |h: &BigUint| {
        bsgs(&pk.g, h, q, &pk.group_prime).ok_or_else(|| ProverError::Unsupported("element outside the group".into()))
    };
    let matrix = pk.gm.iter().map(|row| row.iter().map(dlog).collect()).collect::<Result<Vec<Vec<_>>, _>>()?;
    let ms = pk.gms.iter().map(dlog).collect::<Result<Vec<_>, _>>()?;
    let inv = mat_inverse(&matrix, q).ok_or_else(|| ProverError::Unsupported("singular matrix".into()))?;
    let s = inv
        .iter()
        .map(|row| {
            let v = row.iter().zip(&ms).fold(BigUint::zero(), |acc, (a, b)| (acc + a * b) % q);
            if v.is_zero() {
                Ok(false)
            } else if v.is_one() {
                Ok(true)
            } else {
                Err(ProverError::Unsupported("secret vector is not binary".into()))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let keys = DdhKeyPair::from_parts(pk.group_prime.clone(), q.clone(), pk.g.clone(), matrix, s);
    if &keys.public != pk {
        return Err(ProverError::Unsupported("recovered key does not match".into()));
    }
    Ok(keys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tcf::{ddh_gen, rabin_gen, SecurityParams};

    #[test]
    fn cracks_word_sized_rabin_keys() {
        for seed in 0..5 {
            let keys = rabin_gen(SecurityParams { n_bits: 48, rng_seed: seed }).unwrap();
            let sim = Simulator::crack(&VerifierKey::rabin(keys.clone()).public()).unwrap();
            assert_eq!(sim.key, VerifierKey::rabin(keys));
        }
    }

    #[test]
    fn cracks_multiword_rabin_with_small_factors() {
        let big = (3u64..1 << 61).rev().find(|&p| p % 4 == 3 && crate::tcf::numtheory::is_prime_u64(p)).unwrap();
        let keys = RabinKeyPair::from_factors(BigUint::from(1_000_003u32), BigUint::from(big)).unwrap();
        let sim = Simulator::crack(&VerifierKey::rabin(keys.clone()).public()).unwrap();
        assert_eq!(sim.key, VerifierKey::rabin(keys));
    }

    #[test]
    fn cracks_small_ddh_keys() {
        let keys = ddh_gen(2, 20, 3).unwrap();
        let sim = Simulator::crack(&PublicKey::Ddh(keys.public.clone())).unwrap();
        assert_eq!(sim.key, VerifierKey::Ddh(keys));
    }
}
