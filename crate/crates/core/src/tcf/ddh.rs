//! Matrix-DDH claw-free family: `f_b(x) = g^{M(x + b s)}` over a prime-order subgroup.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::numtheory::{is_probable_prime, mod_inverse, mod_sub, random_below, random_bits, random_range};
use super::TcfError;

/// Largest `m^k` that `unpaired_fraction` will enumerate.
pub const ENUMERATION_BUDGET: u64 = 1_000_000;

/// Public description of one DDH instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DdhPublicKey {
    /// Modulus of the ambient group.
    pub group_prime: BigUint,
    /// Prime order of the subgroup generated by `g`.
    pub group_order: BigUint,
    pub g: BigUint,
    pub k: usize,
    /// Range of each input coordinate; a power of two.
    pub m: u64,
    pub gm: Vec<Vec<BigUint>>,
    pub gms: Vec<BigUint>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DdhKeyPair {
    pub public: DdhPublicKey,
    pub matrix: Vec<Vec<BigUint>>,
    pub s: Vec<bool>,
}

/// One input `(b, x)` with `x` in `Z_m^k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DdhInput {
    pub b: bool,
    pub x: Vec<u64>,
}

/// Result of trapdoor inversion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DdhPreimages {
    /// `first` has `b = 0`, `second` has `b = 1`.
    Claw(DdhInput, DdhInput),
    Single(DdhInput),
}

/// Smallest power of two that is at least `max(k^2, 2)`.
pub fn range_for(k: usize) -> u64 {
    ((k * k) as u64).max(2).next_power_of_two()
}

/// Generates a key with `group_bits`-bit group prime and `k`-dimensional inputs.
pub fn ddh_gen(k: usize, group_bits: u32, seed: u64) -> Result<DdhKeyPair, TcfError> {
    if k == 0 {
        return Err(TcfError::Precondition("k must be at least 1".into()));
    }
    let m = range_for(k);
    let m_bits = 64 - m.leading_zeros();
    if group_bits < m_bits + 3 {
        return Err(TcfError::Precondition(format!(
            "group_bits={group_bits} too small for subgroup order above m={m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q_bits = u64::from((group_bits - 2).max(m_bits + 1));
    let (group_prime, q) = loop {
        let q = random_bits(q_bits, &mut rng) | (BigUint::one() << (q_bits - 1)) | BigUint::one();
        if q <= BigUint::from(m) || !is_probable_prime(&q, &mut rng) {
            continue;
        }
        let found = (1u32..=2000).map(|j| &q * (2 * j) + 1u32).find(|p| is_probable_prime(p, &mut rng));
        if let Some(p) = found {
            break (p, q);
        }
    };
    let cofactor = (&group_prime - 1u32) / &q;
    let g = loop {
        let h = random_range(&BigUint::from(2u32), &(&group_prime - 1u32), &mut rng);
        let g = h.modpow(&cofactor, &group_prime);
        if !g.is_one() {
            break g;
        }
    };
    let matrix = loop {
        let cand: Vec<Vec<BigUint>> = (0..k).map(|_| (0..k).map(|_| random_below(&q, &mut rng)).collect()).collect();
        if mat_inverse(&cand, &q).is_some() {
            break cand;
        }
    };
    let s: Vec<bool> = (0..k).map(|_| rng.random()).collect();
    Ok(DdhKeyPair::from_parts(group_prime, q, g, matrix, s))
}

impl DdhKeyPair {
    /// Assembles a key from explicit secrets; `m` follows `range_for(k)`.
    pub fn from_parts(
        group_prime: BigUint,
        group_order: BigUint,
        g: BigUint,
        matrix: Vec<Vec<BigUint>>,
        s: Vec<bool>,
    ) -> Self {
        let k = s.len();
        let gm = matrix.iter().map(|row| row.iter().map(|e| g.modpow(e, &group_prime)).collect()).collect();
        let ms = mat_vec(&matrix, &s.iter().map(|&b| u64::from(b)).collect::<Vec<_>>(), &group_order);
        let gms = ms.iter().map(|e| g.modpow(e, &group_prime)).collect();
        Self { public: DdhPublicKey { group_prime, group_order, g, k, m: range_for(k), gm, gms }, matrix, s }
    }

    /// Checks every structural invariant of the key.
    pub fn validate(&self) -> Result<(), TcfError> {
        let pk = &self.public;
        let bad = |msg: &str| Err(TcfError::Precondition(msg.into()));
        if pk.g.is_one() || !pk.g.modpow(&pk.group_order, &pk.group_prime).is_one() {
            return bad("g does not have order q");
        }
        if pk.group_order <= BigUint::from(pk.m) {
            return bad("group order must exceed m");
        }
        if self.matrix.len() != pk.k || self.s.len() != pk.k {
            return bad("dimension mismatch");
        }
        if mat_inverse(&self.matrix, &pk.group_order).is_none() {
            return bad("M is singular mod q");
        }
        let rebuilt = Self::from_parts(
            pk.group_prime.clone(),
            pk.group_order.clone(),
            pk.g.clone(),
            self.matrix.clone(),
            self.s.clone(),
        );
        if rebuilt.public != *pk {
            return bad("public data does not match secrets");
        }
        Ok(())
    }
}

/// `out_i = prod_j gM[i][j]^{x_j} * gMs[i]^b mod P`.
pub fn ddh_eval(pk: &DdhPublicKey, b: bool, x: &[u64]) -> Result<Vec<BigUint>, TcfError> {
    if x.len() != pk.k {
        return Err(TcfError::Domain(format!("expected {} coordinates, got {}", pk.k, x.len())));
    }
    if let Some(v) = x.iter().find(|&&v| v >= pk.m) {
        return Err(TcfError::Domain(format!("coordinate {v} is not below m={}", pk.m)));
    }
    let p = &pk.group_prime;
    Ok((0..pk.k)
        .map(|i| {
            let mut acc = if b { pk.gms[i].clone() } else { BigUint::one() };
            for (j, &xj) in x.iter().enumerate() {
                if xj != 0 {
                    acc = acc * pk.gm[i][j].modpow(&BigUint::from(xj), p) % p;
                }
            }
            acc
        })
        .collect())
}

/// Trapdoor inversion by exponent recombination and bounded discrete logs.
pub fn ddh_invert(keys: &DdhKeyPair, y: &[BigUint]) -> Result<DdhPreimages, TcfError> {
    let pk = &keys.public;
    if y.len() != pk.k {
        return Err(TcfError::NotInImage);
    }
    let p = &pk.group_prime;
    let q = &pk.group_order;
    let inv = mat_inverse(&keys.matrix, q).expect("validated key has invertible M");
    // v = x + b s lies in [0, m], so logs are searched over that closed range.
    let mut table = HashMap::with_capacity(pk.m as usize + 1);
    let mut acc = BigUint::one();
    for e in 0..=pk.m {
        table.entry(acc.clone()).or_insert(e);
        acc = acc * &pk.g % p;
    }
    let mut v = Vec::with_capacity(pk.k);
    for row in &inv {
        let mut w = BigUint::one();
        for (yj, e) in y.iter().zip(row) {
            if !e.is_zero() {
                w = w * yj.modpow(e, p) % p;
            }
        }
        v.push(*table.get(&w).ok_or(TcfError::NotInImage)?);
    }
    let zero_branch = v.iter().all(|&vi| vi < pk.m).then(|| DdhInput { b: false, x: v.clone() });
    let one_branch = v
        .iter()
        .zip(&keys.s)
        .map(|(&vi, &si)| vi.checked_sub(u64::from(si)).filter(|&d| d < pk.m))
        .collect::<Option<Vec<u64>>>()
        .map(|x| DdhInput { b: true, x });
    let out = match (zero_branch, one_branch) {
        (Some(a), Some(b)) => DdhPreimages::Claw(a, b),
        (Some(a), None) | (None, Some(a)) => DdhPreimages::Single(a),
        (None, None) => return Err(TcfError::NotInImage),
    };
    let witness = match &out {
        DdhPreimages::Claw(a, _) | DdhPreimages::Single(a) => a,
    };
    if ddh_eval(pk, witness.b, &witness.x)? != y {
        return Err(TcfError::NotInImage);
    }
    Ok(out)
}

/// Exact fraction of the `2 m^k` inputs that have no colliding partner.
pub fn unpaired_fraction(k: usize, m: u64, s: &[bool]) -> Result<Ratio<u64>, TcfError> {
    if m < 2 {
        return Err(TcfError::Precondition("m must be at least 2".into()));
    }
    if s.len() != k {
        return Err(TcfError::Precondition("s must have length k".into()));
    }
    let total = u32::try_from(k)
        .ok()
        .and_then(|k| m.checked_pow(k))
        .filter(|&t| t <= ENUMERATION_BUDGET)
        .ok_or(TcfError::TooLarge(u128::from(m).saturating_pow(k as u32)))?;
    let mut orphans = 0u64;
    let mut x = vec![0u64; k];
    for _ in 0..total {
        // A b=0 input pairs with (1, x - s); a b=1 input pairs with (0, x + s).
        if x.iter().zip(s).any(|(&xi, &si)| si && xi == 0) {
            orphans += 1;
        }
        if x.iter().zip(s).any(|(&xi, &si)| si && xi == m - 1) {
            orphans += 1;
        }
        for xi in x.iter_mut() {
            *xi += 1;
            if *xi < m {
                break;
            }
            *xi = 0;
        }
    }
    Ok(Ratio::new(orphans, 2 * total))
}

fn mat_vec(a: &[Vec<BigUint>], v: &[u64], q: &BigUint) -> Vec<BigUint> {
    a.iter().map(|row| row.iter().zip(v).fold(BigUint::zero(), |acc, (e, &x)| (acc + e * x) % q)).collect()
}

/// Gauss-Jordan inverse modulo a prime; `None` when singular.
pub fn mat_inverse(a: &[Vec<BigUint>], q: &BigUint) -> Option<Vec<Vec<BigUint>>> {
    let k = a.len();
    let mut aug: Vec<Vec<BigUint>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r: Vec<BigUint> = row.iter().map(|e| e % q).collect();
            r.extend((0..k).map(|j| if i == j { BigUint::one() } else { BigUint::zero() }));
            r
        })
        .collect();
    for col in 0..k {
        let pivot = (col..k).find(|&r| !aug[r][col].is_zero())?;
        aug.swap(col, pivot);
        let inv = mod_inverse(&aug[col][col], q)?;
        for e in aug[col].iter_mut() {
            *e = &*e * &inv % q;
        }
        for r in 0..k {
            if r != col && !aug[r][col].is_zero() {
                let factor = aug[r][col].clone();
                for c in 0..2 * k {
                    let sub = &factor * &aug[col][c] % q;
                    aug[r][c] = mod_sub(&aug[r][c], &sub, q);
                }
            }
        }
    }
    Some(aug.into_iter().map(|r| r[k..].to_vec()).collect())
}

/// Packs `(b, x)` into an integer: bit 0 is `b`, then `log2 m` bits per coordinate.
pub fn pack_input(pk: &DdhPublicKey, input: &DdhInput) -> BigUint {
    let w = pk.m.trailing_zeros() as usize;
    let mut out = BigUint::from(u8::from(input.b));
    for (i, &xi) in input.x.iter().enumerate() {
        out |= BigUint::from(xi) << (1 + i * w);
    }
    out
}

/// Inverse of [`pack_input`]; `None` when the value has bits beyond the domain.
pub fn unpack_input(pk: &DdhPublicKey, v: &BigUint) -> Option<DdhInput> {
    let w = pk.m.trailing_zeros() as usize;
    if v.bits() > (1 + pk.k * w) as u64 {
        return None;
    }
    let mask = BigUint::from(pk.m - 1);
    let x = (0..pk.k).map(|i| ((v >> (1 + i * w)) & &mask).to_u64().expect("masked")).collect();
    Some(DdhInput { b: v.bit(0), x })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    fn example() -> DdhKeyPair {
        let matrix = vec![vec![big(1), big(2)], vec![big(3), big(4)]];
        DdhKeyPair::from_parts(big(23), big(11), big(2), matrix, vec![true, false])
    }

    #[test]
    fn example_group_is_valid() {
        let k = example();
        assert_eq!(big(2).modpow(&big(11), &big(23)), big(1));
        k.validate().unwrap();
        assert_eq!(k.public.m, 4);
    }

    #[test]
    fn eval_examples() {
        let k = example();
        assert_eq!(ddh_eval(&k.public, false, &[1, 1]).unwrap(), vec![big(8), big(13)]);
        assert_eq!(ddh_eval(&k.public, false, &[0, 0]).unwrap(), vec![big(1), big(1)]);
        assert_eq!(ddh_eval(&k.public, true, &[0, 1]).unwrap(), vec![big(8), big(13)]);
        assert!(matches!(ddh_eval(&k.public, false, &[4, 0]), Err(TcfError::Domain(_))));
    }

    #[test]
    fn inverse_matrix_example() {
        let k = example();
        let inv = mat_inverse(&k.matrix, &big(11)).unwrap();
        assert_eq!(inv, vec![vec![big(9), big(1)], vec![big(7), big(5)]]);
    }

    #[test]
    fn invert_examples() {
        let k = example();
        assert_eq!(
            ddh_invert(&k, &[big(8), big(13)]).unwrap(),
            DdhPreimages::Claw(DdhInput { b: false, x: vec![1, 1] }, DdhInput { b: true, x: vec![0, 1] })
        );
        assert_eq!(
            ddh_invert(&k, &[big(1), big(1)]).unwrap(),
            DdhPreimages::Single(DdhInput { b: false, x: vec![0, 0] })
        );
        // 5 is not a power of 2 mod 23 inside the order-11 subgroup.
        assert_eq!(ddh_invert(&k, &[big(5), big(1)]), Err(TcfError::NotInImage));
    }

    #[test]
    fn top_boundary_has_single_preimage() {
        let k = example();
        // x = (3, 0) with b = 1 gives v = (4, 0), outside the b = 0 range.
        let y = ddh_eval(&k.public, true, &[3, 0]).unwrap();
        assert_eq!(ddh_invert(&k, &y).unwrap(), DdhPreimages::Single(DdhInput { b: true, x: vec![3, 0] }));
    }

    #[test]
    fn gen_rejects_zero_dimension() {
        assert!(matches!(ddh_gen(0, 16, 1), Err(TcfError::Precondition(_))));
    }

    #[test]
    fn generated_keys_are_valid() {
        for (k, bits) in [(1, 8), (2, 10), (3, 16), (4, 24)] {
            for seed in 0..3 {
                let key = ddh_gen(k, bits, seed).unwrap();
                key.validate().unwrap();
                assert_eq!(key.public.m, range_for(k));
            }
        }
    }

    #[test]
    fn unpaired_examples() {
        assert_eq!(unpaired_fraction(1, 4, &[true]).unwrap(), Ratio::new(1, 4));
        assert_eq!(unpaired_fraction(2, 4, &[false, false]).unwrap(), Ratio::new(0, 1));
        assert_eq!(unpaired_fraction(1, 2, &[true]).unwrap(), Ratio::new(1, 2));
        assert!(matches!(unpaired_fraction(4, 64, &[true; 4]), Err(TcfError::TooLarge(_))));
    }

    #[test]
    fn pack_round_trip() {
        let k = ddh_gen(3, 16, 4).unwrap();
        let input = DdhInput { b: true, x: vec![5, 0, 15] };
        let packed = pack_input(&k.public, &input);
        assert_eq!(unpack_input(&k.public, &packed), Some(input));
        assert_eq!(unpack_input(&k.public, &(BigUint::one() << 13)), None);
    }
}
