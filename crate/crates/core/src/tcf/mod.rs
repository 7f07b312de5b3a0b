//! Trapdoor claw-free function families and the helpers they need.

pub mod ddh;
mod instance;
pub mod keyfile;
pub mod numtheory;
pub mod rabin;

pub use ddh::{ddh_eval, ddh_gen, ddh_invert, unpaired_fraction, DdhInput, DdhKeyPair, DdhPreimages, DdhPublicKey};
pub use instance::{Image, ImageCheck, PublicKey, RabinPublic, VerifierKey};
pub use keyfile::{KeyFile, KeyFileError};
pub use rabin::{factor_from_claw, rabin_eval, rabin_gen, rabin_invert, RabinClaw, RabinKeyPair};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TcfError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("both gcds are trivial; the pair is not a claw")]
    NotAClaw,
    #[error("value is not in the image of the function")]
    NotInImage,
    #[error("enumeration of {0} points exceeds the budget")]
    TooLarge(u128),
}

/// Key-generation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecurityParams {
    pub n_bits: u32,
    pub rng_seed: u64,
}

/// Two distinct inputs with a common image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claw<D, Y> {
    pub x0: D,
    pub x1: D,
    pub y: Y,
}
