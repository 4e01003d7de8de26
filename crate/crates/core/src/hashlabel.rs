//! Configurable hash primitives shared by the digest-auth, integrity-tag,
//! and runtime-MAC code paths.
//!
//! The label strings appear in carrier and defense configuration blocks.
//! The default everywhere is `sha-256`; the legacy labels exist so a
//! scenario can opt into weaker primitives for comparison runs.

use hmac::{EagerHash, Hmac, KeyInit, Mac};
use md5::Md5;
use sha1::Sha1;
use sha2::{Digest, Sha256};
use std::fmt;
use std::str::FromStr;

/// Hash algorithm selector used wherever a configuration block names one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HashLabel {
    #[default]
    Sha256,
    Sha1,
    Md5,
}

impl HashLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            HashLabel::Sha256 => "sha-256",
            HashLabel::Sha1 => "sha-1",
            HashLabel::Md5 => "md5",
        }
    }

    /// Plain digest of `data`.
    pub fn digest(&self, data: &[u8]) -> Vec<u8> {
        match self {
            HashLabel::Sha256 => Sha256::digest(data).to_vec(),
            HashLabel::Sha1 => Sha1::digest(data).to_vec(),
            HashLabel::Md5 => Md5::digest(data).to_vec(),
        }
    }

    /// Keyed hash (HMAC) of `msg` under `key`.
    pub fn keyed(&self, key: &[u8], msg: &[u8]) -> Vec<u8> {
        match self {
            HashLabel::Sha256 => hmac_bytes::<Sha256>(key, msg),
            HashLabel::Sha1 => hmac_bytes::<Sha1>(key, msg),
            HashLabel::Md5 => hmac_bytes::<Md5>(key, msg),
        }
    }
}

fn hmac_bytes<D: EagerHash>(key: &[u8], msg: &[u8]) -> Vec<u8> {
    let mut mac =
        <Hmac<D> as KeyInit>::new_from_slice(key).expect("hmac accepts keys of any length");
    Mac::update(&mut mac, msg);
    mac.finalize().into_bytes().to_vec()
}

impl fmt::Display for HashLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HashLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sha-256" | "sha256" => Ok(HashLabel::Sha256),
            "sha-1" | "sha1" => Ok(HashLabel::Sha1),
            "md5" | "md-5" => Ok(HashLabel::Md5),
            other => Err(format!("unknown hash label: {other}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_lengths() {
        assert_eq!(HashLabel::Sha256.digest(b"x").len(), 32);
        assert_eq!(HashLabel::Sha1.digest(b"x").len(), 20);
        assert_eq!(HashLabel::Md5.digest(b"x").len(), 16);
    }

    #[test]
    fn keyed_is_deterministic_and_key_sensitive() {
        let a = HashLabel::Sha256.keyed(b"k1", b"msg");
        let b = HashLabel::Sha256.keyed(b"k1", b"msg");
        let c = HashLabel::Sha256.keyed(b"k2", b"msg");
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn labels_roundtrip() {
        for l in [HashLabel::Sha256, HashLabel::Sha1, HashLabel::Md5] {
            assert_eq!(l.as_str().parse::<HashLabel>().unwrap(), l);
        }
        assert!("whirlpool".parse::<HashLabel>().is_err());
    }
}
