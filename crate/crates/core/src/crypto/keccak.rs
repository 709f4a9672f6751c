use std::fmt;
use std::str::FromStr;

use sha3::{Digest as _, Keccak256};

use super::CryptoError;

/// A 32-byte Keccak-256 output.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Digest32(pub [u8; 32]);

impl Digest32 {
    pub const fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    /// Interprets the digest as 256 bits, most significant bit of byte 0 first.
    pub fn bit(&self, index: usize) -> bool {
        (self.0[index / 8] >> (7 - index % 8)) & 1 == 1
    }
}

impl fmt::Display for Digest32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl fmt::Debug for Digest32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest32({})", self)
    }
}

impl FromStr for Digest32 {
    type Err = CryptoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let raw = decode_hex(s)?;
        let bytes: [u8; 32] = raw.as_slice().try_into().map_err(|_| CryptoError::BadLength {
            what: "digest",
            expected: 32,
            got: raw.len(),
        })?;
        Ok(Digest32(bytes))
    }
}

/// A 20-byte account address.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Address(pub [u8; 20]);

impl Address {
    pub const ZERO: Address = Address([0; 20]);

    pub const fn as_bytes(&self) -> &[u8; 20] {
        &self.0
    }

    /// Address of a system contract, derived from a domain label.
    pub fn for_label(label: &str) -> Address {
        Address::from_digest(&keccak256(label.as_bytes()))
    }

    /// Last 20 bytes of a digest.
    pub fn from_digest(digest: &Digest32) -> Address {
        let mut out = [0u8; 20];
        out.copy_from_slice(&digest.0[12..]);
        Address(out)
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Address({})", self)
    }
}

impl FromStr for Address {
    type Err = CryptoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let raw = decode_hex(s)?;
        let bytes: [u8; 20] = raw.as_slice().try_into().map_err(|_| CryptoError::BadLength {
            what: "address",
            expected: 20,
            got: raw.len(),
        })?;
        Ok(Address(bytes))
    }
}

pub(crate) fn decode_hex(s: &str) -> Result<Vec<u8>, CryptoError> {
    let s = s.strip_prefix("0x").unwrap_or(s);
    hex::decode(s).map_err(|e| CryptoError::Hex(e.to_string()))
}

/// Keccak-256 with the original (pre-FIPS) padding, as used for EVM hashing.
pub fn keccak256(data: &[u8]) -> Digest32 {
    Digest32(Keccak256::digest(data).into())
}

/// Hash of the concatenation of `parts`, without building the joined buffer.
pub fn keccak256_concat(parts: &[&[u8]]) -> Digest32 {
    let mut hasher = Keccak256::new();
    for part in parts {
        hasher.update(part);
    }
    Digest32(hasher.finalize().into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_digest() {
        assert_eq!(
            keccak256(b"").to_string(),
            "c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470"
        );
    }

    #[test]
    fn concat_matches_joined() {
        assert_eq!(keccak256_concat(&[b"ab", b"", b"c"]), keccak256(b"abc"));
    }

    #[test]
    fn hex_round_trips() {
        let a: Address = "0x00000000000000000000000000000000000000ff".parse().unwrap();
        assert_eq!(a.0[19], 0xff);
        assert_eq!(a.to_string().parse::<Address>().unwrap(), a);
        assert!("0x1234".parse::<Address>().is_err());
        let d = keccak256(b"x");
        assert_eq!(d.to_string().parse::<Digest32>().unwrap(), d);
    }

    #[test]
    fn bit_order_is_msb_first() {
        let mut raw = [0u8; 32];
        raw[0] = 0b1000_0001;
        let d = Digest32(raw);
        assert!(d.bit(0));
        assert!(!d.bit(1));
        assert!(d.bit(7));
        assert!(!d.bit(8));
    }
}
