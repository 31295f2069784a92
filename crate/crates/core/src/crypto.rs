//! Hashes, addresses and Ed25519 keys, with their bit-exact hex renderings.

use std::fmt;
use std::str::FromStr;

use ed25519_dalek::{Signer, SigningKey, VerifyingKey};
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HexError {
    #[error("expected {expected} hex chars, got {got}")]
    Length { expected: usize, got: usize },
    #[error("invalid character {0:?} (lowercase hex only)")]
    Char(char),
    #[error("missing 0x prefix")]
    Prefix,
}

/// Strict lowercase hex decoding; uppercase is rejected so every value has
/// exactly one textual form.
pub fn decode_hex_exact<const N: usize>(s: &str) -> Result<[u8; N], HexError> {
    if s.len() != 2 * N {
        return Err(HexError::Length { expected: 2 * N, got: s.len() });
    }
    if let Some(c) = s.chars().find(|c| !matches!(c, '0'..='9' | 'a'..='f')) {
        return Err(HexError::Char(c));
    }
    let mut out = [0u8; N];
    hex::decode_to_slice(s, &mut out).expect("validated above");
    Ok(out)
}

macro_rules! hex_bytes {
    ($name:ident, $len:expr, $prefix:expr) => {
        impl $name {
            pub const LEN: usize = $len;

            pub fn as_bytes(&self) -> &[u8; $len] {
                &self.0
            }

            pub fn to_hex(&self) -> String {
                format!("{}{}", $prefix, hex::encode(self.0))
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str($prefix)?;
                for b in &self.0 {
                    write!(f, "{b:02x}")?;
                }
                Ok(())
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), self)
            }
        }

        impl FromStr for $name {
            type Err = HexError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let body = if $prefix.is_empty() {
                    s
                } else {
                    s.strip_prefix($prefix).ok_or(HexError::Prefix)?
                };
                decode_hex_exact::<$len>(body).map($name)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

/// SHA-256 digest.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Hash(pub [u8; 32]);
hex_bytes!(Hash, 32, "");

impl Hash {
    pub const ZERO: Hash = Hash([0; 32]);
}

/// Account and validator identifier: the first 20 bytes of the public key hash.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Address(pub [u8; 20]);
hex_bytes!(Address, 20, "0x");

impl Address {
    pub const ZERO: Address = Address([0; 20]);
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PublicKey(pub [u8; 32]);
hex_bytes!(PublicKey, 32, "");

impl PublicKey {
    pub fn address(&self) -> Address {
        derive_address(&self.0)
    }

    /// Verifies `sig` over `msg`. Malformed keys and non-canonical signatures
    /// simply fail.
    pub fn verify(&self, msg: &[u8], sig: &Signature) -> bool {
        let Ok(key) = VerifyingKey::from_bytes(&self.0) else {
            return false;
        };
        let sig = ed25519_dalek::Signature::from_bytes(&sig.0);
        key.verify_strict(msg, &sig).is_ok()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature(pub [u8; 64]);
hex_bytes!(Signature, 64, "");

impl Signature {
    pub const ZERO: Signature = Signature([0; 64]);
}

pub fn hash(data: &[u8]) -> Hash {
    Hash(Sha256::digest(data).into())
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("public key must be 32 bytes, got {0}")]
pub struct KeyLengthError(pub usize);

/// Derives an address from raw public key bytes.
pub fn derive_address(pubkey: &[u8]) -> Address {
    try_derive_address(pubkey).expect("public key must be 32 bytes")
}

pub fn try_derive_address(pubkey: &[u8]) -> Result<Address, KeyLengthError> {
    if pubkey.len() != 32 {
        return Err(KeyLengthError(pubkey.len()));
    }
    let digest = hash(pubkey);
    let mut out = [0u8; 20];
    out.copy_from_slice(&digest.0[..20]);
    Ok(Address(out))
}

/// An Ed25519 signing key together with its public half.
#[derive(Clone)]
pub struct Keypair {
    signing: SigningKey,
}

impl Keypair {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        Keypair { signing: SigningKey::generate(rng) }
    }

    pub fn from_secret(secret: [u8; 32]) -> Self {
        Keypair { signing: SigningKey::from_bytes(&secret) }
    }

    pub fn secret(&self) -> [u8; 32] {
        self.signing.to_bytes()
    }

    pub fn public(&self) -> PublicKey {
        PublicKey(self.signing.verifying_key().to_bytes())
    }

    pub fn address(&self) -> Address {
        self.public().address()
    }

    pub fn sign(&self, msg: &[u8]) -> Signature {
        Signature(self.signing.sign(msg).to_bytes())
    }
}

impl fmt::Debug for Keypair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Keypair").field("public", &self.public()).finish_non_exhaustive()
    }
}

/// On-disk keypair file: `{"pubkey_hex": .., "secret_hex": ..}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyFile {
    pub pubkey_hex: String,
    pub secret_hex: String,
}

#[derive(Debug, Error)]
pub enum KeyFileError {
    #[error("bad hex in key file: {0}")]
    Hex(#[from] HexError),
    #[error("secret does not match public key")]
    Mismatch,
}

impl KeyFile {
    pub fn from_keypair(kp: &Keypair) -> Self {
        KeyFile { pubkey_hex: kp.public().to_hex(), secret_hex: hex::encode(kp.secret()) }
    }

    pub fn to_keypair(&self) -> Result<Keypair, KeyFileError> {
        let kp = Keypair::from_secret(decode_hex_exact::<32>(&self.secret_hex)?);
        let public: PublicKey = self.pubkey_hex.parse()?;
        if kp.public() != public {
            return Err(KeyFileError::Mismatch);
        }
        Ok(kp)
    }
}
