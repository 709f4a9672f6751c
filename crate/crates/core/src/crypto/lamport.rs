//! Lamport one-time signatures over Keccak-256.
//!
//! The private key is 256 pairs of random 32-byte preimages; the public key is
//! their hashes. Signing a digest reveals, for each digest bit, the preimage
//! selected by that bit, so a key must never sign twice.

use std::fmt;

use super::keccak::{keccak256, keccak256_concat, Digest32};
use super::CryptoError;

const BITS: usize = 256;

#[derive(Clone, PartialEq, Eq)]
pub struct PqPublicKey {
    hashes: Vec<[Digest32; 2]>,
}

impl PqPublicKey {
    /// Short identifier: keccak256 over all 512 public hashes.
    pub fn id(&self) -> Digest32 {
        let parts: Vec<&[u8]> = self
            .hashes
            .iter()
            .flat_map(|pair| [pair[0].as_bytes().as_slice(), pair[1].as_bytes().as_slice()])
            .collect();
        keccak256_concat(&parts)
    }
}

impl fmt::Debug for PqPublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PqPublicKey({})", self.id())
    }
}

pub struct PqKeyPair {
    private: Vec<[[u8; 32]; 2]>,
    public: PqPublicKey,
    uses_remaining: u8,
}

impl PqKeyPair {
    pub fn generate<R: rand::RngCore>(rng: &mut R) -> Self {
        let private: Vec<[[u8; 32]; 2]> = (0..BITS)
            .map(|_| {
                let mut pair = [[0u8; 32]; 2];
                rng.fill_bytes(&mut pair[0]);
                rng.fill_bytes(&mut pair[1]);
                pair
            })
            .collect();
        let hashes = private
            .iter()
            .map(|pair| [keccak256(&pair[0]), keccak256(&pair[1])])
            .collect();
        PqKeyPair {
            private,
            public: PqPublicKey { hashes },
            uses_remaining: 1,
        }
    }

    pub fn public(&self) -> &PqPublicKey {
        &self.public
    }

    pub fn uses_remaining(&self) -> u8 {
        self.uses_remaining
    }
}

impl fmt::Debug for PqKeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PqKeyPair")
            .field("public", &self.public)
            .field("uses_remaining", &self.uses_remaining)
            .finish_non_exhaustive()
    }
}

/// 256 revealed preimages, 8192 bytes serialized.
#[derive(Clone, PartialEq, Eq)]
pub struct PqSignature {
    revealed: Vec<[u8; 32]>,
}

impl PqSignature {
    pub const LEN: usize = BITS * 32;

    pub fn to_bytes(&self) -> Vec<u8> {
        self.revealed.concat()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() != Self::LEN {
            return Err(CryptoError::BadLength {
                what: "lamport signature",
                expected: Self::LEN,
                got: bytes.len(),
            });
        }
        let revealed = bytes
            .chunks_exact(32)
            .map(|c| c.try_into().expect("chunk is 32 bytes"))
            .collect();
        Ok(PqSignature { revealed })
    }
}

impl fmt::Debug for PqSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PqSignature({} preimages)", self.revealed.len())
    }
}

pub fn pq_sign(key: &mut PqKeyPair, digest: &Digest32) -> Result<PqSignature, CryptoError> {
    if key.uses_remaining == 0 {
        return Err(CryptoError::KeyExhausted);
    }
    key.uses_remaining -= 1;
    let revealed = (0..BITS).map(|i| key.private[i][digest.bit(i) as usize]).collect();
    Ok(PqSignature { revealed })
}

pub fn pq_verify(public: &PqPublicKey, digest: &Digest32, sig: &PqSignature) -> bool {
    sig.revealed.len() == BITS
        && (0..BITS).all(|i| keccak256(&sig.revealed[i]) == public.hashes[i][digest.bit(i) as usize])
}
