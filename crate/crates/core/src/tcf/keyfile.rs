//! Canonical JSON key files. Secret fields are present only in the verifier's copy.

use serde::{Deserialize, Serialize};

use super::ddh::DdhKeyPair;
use super::instance::{PublicKey, RabinPublic, VerifierKey};
use super::rabin::RabinKeyPair;
use crate::serde_dec::Dec;

#[derive(Debug, thiserror::Error)]
pub enum KeyFileError {
    #[error("malformed key file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("inconsistent key file: {0}")]
    Invalid(String),
    #[error("key file holds only public data but a trapdoor is required")]
    MissingSecret,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub(crate) enum Repr {
    Rabin {
        #[serde(rename = "N")]
        n: Dec,
        /// Exponent of the lift `k = 3^lift`; absent in key files.
        #[serde(default, skip_serializing_if = "is_zero")]
        lift: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<Dec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q: Option<Dec>,
    },
    Ddh {
        #[serde(rename = "P")]
        group_prime: Dec,
        q: Dec,
        g: Dec,
        k: usize,
        m: u64,
        #[serde(rename = "gM")]
        gm: Vec<Vec<Dec>>,
        #[serde(rename = "gMs")]
        gms: Vec<Dec>,
        #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
        matrix: Option<Vec<Vec<Dec>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        s: Option<Vec<u8>>,
    },
}

/// Parsed key file: either the public index alone or the full verifier key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KeyFile {
    Public(PublicKey),
    Secret(VerifierKey),
}

fn is_zero(v: &u32) -> bool {
    *v == 0
}

fn decs(v: &[num_bigint::BigUint]) -> Vec<Dec> {
    v.iter().cloned().map(Dec).collect()
}

fn undecs(v: Vec<Dec>) -> Vec<num_bigint::BigUint> {
    v.into_iter().map(|d| d.0).collect()
}

impl KeyFile {
    pub fn public(&self) -> PublicKey {
        match self {
            Self::Public(pk) => pk.clone(),
            Self::Secret(vk) => vk.public(),
        }
    }

    pub fn secret(&self) -> Result<&VerifierKey, KeyFileError> {
        match self {
            Self::Secret(vk) => Ok(vk),
            Self::Public(_) => Err(KeyFileError::MissingSecret),
        }
    }

    /// Copy with every trapdoor field removed.
    pub fn to_public(&self) -> Self {
        Self::Public(self.public())
    }

    pub(crate) fn repr(&self) -> Repr {
        let (pk, secret) = match self {
            Self::Public(pk) => (pk.clone(), None),
            Self::Secret(vk) => (vk.public(), Some(vk)),
        };
        match pk {
            PublicKey::Rabin(r) => {
                let (p, q) = match secret {
                    Some(VerifierKey::Rabin { keys, .. }) => (Some(Dec(keys.p.clone())), Some(Dec(keys.q.clone()))),
                    _ => (None, None),
                };
                Repr::Rabin { n: Dec(r.n), lift: r.lift, p, q }
            }
            PublicKey::Ddh(pk) => {
                let (matrix, s) = match secret {
                    Some(VerifierKey::Ddh(keys)) => (
                        Some(keys.matrix.iter().map(|row| decs(row)).collect()),
                        Some(keys.s.iter().map(|&b| u8::from(b)).collect()),
                    ),
                    _ => (None, None),
                };
                Repr::Ddh {
                    group_prime: Dec(pk.group_prime),
                    q: Dec(pk.group_order),
                    g: Dec(pk.g),
                    k: pk.k,
                    m: pk.m,
                    gm: pk.gm.iter().map(|row| decs(row)).collect(),
                    gms: decs(&pk.gms),
                    matrix,
                    s,
                }
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.repr()).expect("key serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, KeyFileError> {
        Self::from_repr(serde_json::from_str(text)?)
    }

    pub(crate) fn from_repr(repr: Repr) -> Result<Self, KeyFileError> {
        let invalid = |m: &str| KeyFileError::Invalid(m.to_string());
        match repr {
            Repr::Rabin { n, lift, p: None, q: None } => {
                Ok(Self::Public(PublicKey::Rabin(RabinPublic { n: n.0, lift })))
            }
            Repr::Rabin { n, lift, p: Some(p), q: Some(q) } => {
                let keys = RabinKeyPair::from_factors(p.0, q.0).map_err(|e| KeyFileError::Invalid(e.to_string()))?;
                if keys.n != n.0 {
                    return Err(invalid("N differs from p*q"));
                }
                Ok(Self::Secret(VerifierKey::Rabin { keys, lift }))
            }
            Repr::Rabin { .. } => Err(invalid("p and q must be given together")),
            Repr::Ddh { group_prime, q, g, k, m, gm, gms, matrix, s } => {
                if gm.len() != k || gm.iter().any(|row| row.len() != k) || gms.len() != k {
                    return Err(invalid("gM must be k x k and gMs must have k entries"));
                }
                if m != super::ddh::range_for(k) {
                    return Err(invalid("m must be the smallest power of two >= k^2"));
                }
                let public = super::ddh::DdhPublicKey {
                    group_prime: group_prime.0,
                    group_order: q.0,
                    g: g.0,
                    k,
                    m,
                    gm: gm.into_iter().map(undecs).collect(),
                    gms: undecs(gms),
                };
                match (matrix, s) {
                    (None, None) => Ok(Self::Public(PublicKey::Ddh(public))),
                    (Some(matrix), Some(s)) => {
                        if s.iter().any(|&b| b > 1) {
                            return Err(invalid("s entries must be 0 or 1"));
                        }
                        let keys = DdhKeyPair {
                            public,
                            matrix: matrix.into_iter().map(undecs).collect(),
                            s: s.into_iter().map(|b| b == 1).collect(),
                        };
                        keys.validate().map_err(|e| KeyFileError::Invalid(e.to_string()))?;
                        Ok(Self::Secret(VerifierKey::Ddh(keys)))
                    }
                    _ => Err(invalid("M and s must be given together")),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tcf::{ddh_gen, rabin_gen, SecurityParams};

    #[test]
    fn rabin_round_trip_and_public_form() {
        let vk = VerifierKey::rabin(rabin_gen(SecurityParams { n_bits: 32, rng_seed: 1 }).unwrap());
        let file = KeyFile::Secret(vk.clone());
        let text = file.to_json();
        assert_eq!(KeyFile::from_json(&text).unwrap(), file);
        let public = file.to_public().to_json();
        let v: serde_json::Value = serde_json::from_str(&public).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys, vec!["N".to_string(), "family".to_string()]);
        assert!(v["N"].is_string());
        assert_eq!(KeyFile::from_json(&public).unwrap().public(), vk.public());
    }

    #[test]
    fn ddh_round_trip_and_public_form() {
        let vk = VerifierKey::Ddh(ddh_gen(2, 16, 3).unwrap());
        let file = KeyFile::Secret(vk);
        assert_eq!(KeyFile::from_json(&file.to_json()).unwrap(), file);
        let public = file.to_public().to_json();
        assert!(!public.contains("\"M\"") && !public.contains("\"s\""));
        assert!(matches!(KeyFile::from_json(&public).unwrap(), KeyFile::Public(_)));
    }

    #[test]
    fn rejects_bad_files() {
        for bad in [
            r#"{"family":"rabin","N":"77","p":"7"}"#,
            r#"{"family":"rabin","N":"78","p":"7","q":"11"}"#,
            r#"{"family":"rabin","N":77}"#,
            r#"{"family":"rabin","N":"77","extra":"1"}"#,
            r#"{"family":"lwe","N":"77"}"#,
            r#"not json"#,
        ] {
            assert!(KeyFile::from_json(bad).is_err(), "{bad}");
        }
    }
}
