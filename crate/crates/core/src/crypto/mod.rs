//! Hashing, recoverable ECDSA over secp256k1, a Lamport one-time signature
//! used as the quantum-resilient stand-in, and the simulated quantum attacker.

mod ecdsa;
mod keccak;
mod lamport;
mod oracle;

pub use self::ecdsa::{derive_address, recover_signer, sign, KeyPair, RecoverableSignature};
pub use self::keccak::{keccak256, keccak256_concat, Address, Digest32};
pub use self::lamport::{pq_sign, pq_verify, PqKeyPair, PqPublicKey, PqSignature};
pub use self::oracle::{Denied, QuantumOracle};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("private scalar is zero or not below the group order")]
    InvalidPrivateKey,
    #[error("signature recovery failed: {0}")]
    Recovery(&'static str),
    #[error("one-time key already used")]
    KeyExhausted,
    #[error("malformed {what}: expected {expected} bytes, got {got}")]
    BadLength {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid hex: {0}")]
    Hex(String),
}
