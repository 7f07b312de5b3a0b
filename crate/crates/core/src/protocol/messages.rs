//! Typed round messages exchanged between verifier and prover.

use num_bigint::BigUint;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bits::BitString;
use crate::circuits::CircuitKind;
use crate::scalar::Real;
use crate::serde_dec::Dec;
use crate::tcf::keyfile::KeyFile;
use crate::tcf::{Image, PublicKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Challenge {
    Preimage,
    Continue,
}

/// Round-3 measurement angle, `+pi/4` or `-pi/4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    #[serde(rename = "+pi/4")]
    Plus,
    #[serde(rename = "-pi/4")]
    Minus,
}

impl Basis {
    pub fn angle<T: Real>(self) -> T {
        match self {
            Self::Plus => T::FRAC_PI_4(),
            Self::Minus => -T::FRAC_PI_4(),
        }
    }
}

/// Hadamard-basis outcomes on the qubits a circuit discarded, in discard order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GarbageReport {
    pub circuit: CircuitKind,
    pub h: BitString,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageMsg {
    pub y: Image,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub garbage: Option<GarbageReport>,
}

impl ImageMsg {
    pub fn plain(y: Image) -> Self {
        Self { y, garbage: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Tagged", into = "Tagged")]
pub enum RoundMessage {
    Key(PublicKey),
    Image(ImageMsg),
    Challenge(Challenge),
    Preimage(BigUint),
    Vector(BitString),
    Equation(BitString),
    Basis(Basis),
    Result(u8),
}

/// Wire shape of [`RoundMessage`]: `{"tag": ..., "payload": ...}`.
#[derive(Serialize, Deserialize)]
#[serde(tag = "tag", content = "payload")]
enum Tagged {
    Key(PublicKey),
    Image(ImageMsg),
    Challenge(Challenge),
    Preimage(Dec),
    Vector(BitString),
    Equation(BitString),
    Basis(Basis),
    Result(u8),
}

impl From<Tagged> for RoundMessage {
    fn from(t: Tagged) -> Self {
        match t {
            Tagged::Key(k) => Self::Key(k),
            Tagged::Image(m) => Self::Image(m),
            Tagged::Challenge(c) => Self::Challenge(c),
            Tagged::Preimage(x) => Self::Preimage(x.0),
            Tagged::Vector(r) => Self::Vector(r),
            Tagged::Equation(d) => Self::Equation(d),
            Tagged::Basis(b) => Self::Basis(b),
            Tagged::Result(b) => Self::Result(b),
        }
    }
}

impl From<RoundMessage> for Tagged {
    fn from(m: RoundMessage) -> Self {
        match m {
            RoundMessage::Key(k) => Self::Key(k),
            RoundMessage::Image(m) => Self::Image(m),
            RoundMessage::Challenge(c) => Self::Challenge(c),
            RoundMessage::Preimage(x) => Self::Preimage(Dec(x)),
            RoundMessage::Vector(r) => Self::Vector(r),
            RoundMessage::Equation(d) => Self::Equation(d),
            RoundMessage::Basis(b) => Self::Basis(b),
            RoundMessage::Result(b) => Self::Result(b),
        }
    }
}

impl Serialize for PublicKey {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        KeyFile::Public(self.clone()).repr().serialize(s)
    }
}

impl<'de> Deserialize<'de> for PublicKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match KeyFile::from_repr(Deserialize::deserialize(d)?) {
            Ok(KeyFile::Public(pk)) => Ok(pk),
            Ok(KeyFile::Secret(_)) => Err(serde::de::Error::custom("key message must not carry trapdoor fields")),
            Err(e) => Err(serde::de::Error::custom(e)),
        }
    }
}
