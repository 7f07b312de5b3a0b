//! Family-independent view of a claw-free instance, with inputs packed into integers.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ddh::{ddh_eval, ddh_invert, pack_input, unpack_input, DdhKeyPair, DdhPreimages, DdhPublicKey};
use super::numtheory::{half_ceil, random_below, random_bits};
use super::rabin::{factor_from_claw, rabin_invert, RabinKeyPair};
use super::{Claw, TcfError};

/// Rabin modulus, optionally lifted to `(k x)^2 mod k^2 N` with `k = 3^lift`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RabinPublic {
    pub n: BigUint,
    pub lift: u32,
}

impl RabinPublic {
    pub fn k(&self) -> BigUint {
        BigUint::from(3u32).pow(self.lift)
    }

    /// Modulus the lifted function reduces by, `k^2 N`.
    pub fn modulus(&self) -> BigUint {
        let k = self.k();
        &k * &k * &self.n
    }
}

/// Public function index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PublicKey {
    Rabin(RabinPublic),
    Ddh(DdhPublicKey),
}

/// Function index plus trapdoor, held only by the verifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerifierKey {
    Rabin { keys: RabinKeyPair, lift: u32 },
    Ddh(DdhKeyPair),
}

/// Range element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Image {
    #[serde(with = "crate::serde_dec::single")]
    Rabin(BigUint),
    #[serde(with = "crate::serde_dec::vec")]
    Ddh(Vec<BigUint>),
}

/// Outcome of trapdoor inversion of one image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImageCheck {
    Claw(Claw<BigUint, Image>),
    Single(BigUint),
    Invalid,
}

impl PublicKey {
    pub fn family(&self) -> &'static str {
        match self {
            Self::Rabin(_) => "rabin",
            Self::Ddh(_) => "ddh",
        }
    }

    /// Width of the input register: bit length of the largest domain element.
    pub fn domain_bits(&self) -> usize {
        match self {
            Self::Rabin(pk) => {
                let top = (half_ceil(&pk.n) - 1u32) * pk.k();
                (top.bits() as usize).max(1)
            }
            Self::Ddh(pk) => 1 + pk.k * pk.m.trailing_zeros() as usize,
        }
    }

    pub fn in_domain(&self, x: &BigUint) -> bool {
        match self {
            Self::Rabin(pk) => {
                let (base, rem) = x.div_rem(&pk.k());
                rem.is_zero() && base < half_ceil(&pk.n)
            }
            Self::Ddh(pk) => unpack_input(pk, x).is_some(),
        }
    }

    pub fn eval(&self, x: &BigUint) -> Result<Image, TcfError> {
        if !self.in_domain(x) {
            return Err(TcfError::Domain(format!("{x} is outside the {} domain", self.family())));
        }
        match self {
            Self::Rabin(pk) => Ok(Image::Rabin(x * x % pk.modulus())),
            Self::Ddh(pk) => {
                let input = unpack_input(pk, x).expect("checked");
                Ok(Image::Ddh(ddh_eval(pk, input.b, &input.x)?))
            }
        }
    }

    /// Uniform domain element.
    pub fn sample_domain<R: Rng + ?Sized>(&self, rng: &mut R) -> BigUint {
        match self {
            Self::Rabin(pk) => random_below(&half_ceil(&pk.n), rng) * pk.k(),
            Self::Ddh(_) => random_bits(self.domain_bits() as u64, rng),
        }
    }

    /// True iff `x` is in the domain and maps to `y`.
    pub fn check_preimage(&self, x: &BigUint, y: &Image) -> bool {
        self.eval(x).is_ok_and(|fx| &fx == y)
    }

    /// Factors hidden by a claw; only the Rabin family has them.
    pub fn factor(&self, claw: &Claw<BigUint, Image>) -> Option<(BigUint, BigUint)> {
        match (self, &claw.y) {
            (Self::Rabin(pk), Image::Rabin(y)) => {
                let k = pk.k();
                let base = Claw { x0: &claw.x0 / &k, x1: &claw.x1 / &k, y: y.clone() };
                factor_from_claw(&pk.n, &base).ok()
            }
            _ => None,
        }
    }

    pub fn lift(&self) -> u32 {
        match self {
            Self::Rabin(pk) => pk.lift,
            Self::Ddh(_) => 0,
        }
    }
}

impl VerifierKey {
    pub fn rabin(keys: RabinKeyPair) -> Self {
        Self::Rabin { keys, lift: 0 }
    }

    pub fn public(&self) -> PublicKey {
        match self {
            Self::Rabin { keys, lift } => PublicKey::Rabin(RabinPublic { n: keys.n.clone(), lift: *lift }),
            Self::Ddh(keys) => PublicKey::Ddh(keys.public.clone()),
        }
    }

    /// Same trapdoor, lifted by `k = 3^lift`. DDH keys are returned unchanged.
    pub fn with_lift(&self, lift: u32) -> Self {
        match self {
            Self::Rabin { keys, .. } => Self::Rabin { keys: keys.clone(), lift },
            Self::Ddh(_) => self.clone(),
        }
    }

    /// Trapdoor inversion of `y`.
    pub fn invert(&self, y: &Image) -> ImageCheck {
        match (self, y) {
            (Self::Rabin { keys, lift }, Image::Rabin(v)) => {
                let pk = RabinPublic { n: keys.n.clone(), lift: *lift };
                let k = pk.k();
                let k2 = &k * &k;
                if v >= &pk.modulus() {
                    return ImageCheck::Invalid;
                }
                let (base, rem) = v.div_rem(&k2);
                if !rem.is_zero() {
                    return ImageCheck::Invalid;
                }
                let roots: Vec<BigUint> = rabin_invert(keys, &base).into_iter().map(|r| r * &k).collect();
                match roots.as_slice() {
                    [] => ImageCheck::Invalid,
                    [x] => ImageCheck::Single(x.clone()),
                    [a, b] => ImageCheck::Claw(Claw { x0: a.clone(), x1: b.clone(), y: y.clone() }),
                    _ => unreachable!("at most two roots below N/2"),
                }
            }
            (Self::Ddh(keys), Image::Ddh(v)) => match ddh_invert(keys, v) {
                Ok(DdhPreimages::Claw(a, b)) => ImageCheck::Claw(Claw {
                    x0: pack_input(&keys.public, &a),
                    x1: pack_input(&keys.public, &b),
                    y: y.clone(),
                }),
                Ok(DdhPreimages::Single(a)) => ImageCheck::Single(pack_input(&keys.public, &a)),
                Err(_) => ImageCheck::Invalid,
            },
            _ => ImageCheck::Invalid,
        }
    }

    /// Bit length of the base modulus, or of the group prime for DDH.
    pub fn size_bits(&self) -> u64 {
        match self {
            Self::Rabin { keys, .. } => keys.n.bits(),
            Self::Ddh(keys) => keys.public.group_prime.bits(),
        }
    }

    pub fn lift(&self) -> u32 {
        match self {
            Self::Rabin { lift, .. } => *lift,
            Self::Ddh(_) => 0,
        }
    }
}

impl Image {
    /// The Rabin residue, if this is a Rabin image.
    pub fn as_rabin(&self) -> Option<&BigUint> {
        match self {
            Self::Rabin(v) => Some(v),
            Self::Ddh(_) => None,
        }
    }

    pub fn to_u64(&self) -> Option<u64> {
        self.as_rabin().and_then(|v| v.to_u64())
    }
}
