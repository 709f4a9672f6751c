use std::fmt;
use std::str::FromStr;

use k256::ecdsa::{RecoveryId, Signature, SigningKey, VerifyingKey};

use super::keccak::{decode_hex, keccak256, Address, Digest32};
use super::CryptoError;

/// A secp256k1 key pair with its uncompressed public key and derived address.
#[derive(Clone)]
pub struct KeyPair {
    signing: SigningKey,
    public: [u8; 64],
    address: Address,
}

impl KeyPair {
    /// Builds a key pair from a raw 32-byte scalar, which must lie in `[1, n-1]`.
    pub fn from_private(bytes: [u8; 32]) -> Result<Self, CryptoError> {
        let signing = SigningKey::from_bytes(&bytes.into()).map_err(|_| CryptoError::InvalidPrivateKey)?;
        let public = uncompressed(signing.verifying_key());
        Ok(KeyPair {
            address: derive_address(&public),
            signing,
            public,
        })
    }

    /// Deterministic key generation from an RNG; out-of-range scalars are redrawn.
    pub fn generate<R: rand::RngCore>(rng: &mut R) -> Self {
        loop {
            let mut bytes = [0u8; 32];
            rng.fill_bytes(&mut bytes);
            if let Ok(key) = KeyPair::from_private(bytes) {
                return key;
            }
        }
    }

    pub fn private_bytes(&self) -> [u8; 32] {
        self.signing.to_bytes().into()
    }

    pub fn public(&self) -> &[u8; 64] {
        &self.public
    }

    pub fn address(&self) -> Address {
        self.address
    }
}

impl PartialEq for KeyPair {
    fn eq(&self, other: &Self) -> bool {
        self.public == other.public
    }
}

impl Eq for KeyPair {}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("address", &self.address)
            .finish_non_exhaustive()
    }
}

fn uncompressed(key: &VerifyingKey) -> [u8; 64] {
    let point = key.to_encoded_point(false);
    let mut out = [0u8; 64];
    out.copy_from_slice(&point.as_bytes()[1..]);
    out
}

/// Last 20 bytes of keccak256 over the 64-byte uncompressed public key.
pub fn derive_address(public: &[u8; 64]) -> Address {
    Address::from_digest(&keccak256(public))
}

/// ECDSA signature with recovery id, serialized as `r || s || v` (65 bytes).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RecoverableSignature {
    pub r: [u8; 32],
    pub s: [u8; 32],
    pub v: u8,
}

impl RecoverableSignature {
    pub const LEN: usize = 65;

    pub fn to_bytes(&self) -> [u8; 65] {
        let mut out = [0u8; 65];
        out[..32].copy_from_slice(&self.r);
        out[32..64].copy_from_slice(&self.s);
        out[64] = self.v;
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() != Self::LEN {
            return Err(CryptoError::BadLength {
                what: "recoverable signature",
                expected: Self::LEN,
                got: bytes.len(),
            });
        }
        let mut r = [0u8; 32];
        let mut s = [0u8; 32];
        r.copy_from_slice(&bytes[..32]);
        s.copy_from_slice(&bytes[32..64]);
        Ok(RecoverableSignature { r, s, v: bytes[64] })
    }
}

impl fmt::Display for RecoverableSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.to_bytes()))
    }
}

impl fmt::Debug for RecoverableSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RecoverableSignature({})", self)
    }
}

impl FromStr for RecoverableSignature {
    type Err = CryptoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RecoverableSignature::from_bytes(&decode_hex(s)?)
    }
}

/// Signs a prehashed digest. Nonces follow RFC 6979, so the result is a pure
/// function of `(key, digest)`. Output is always in low-s form.
pub fn sign(key: &KeyPair, digest: &Digest32) -> RecoverableSignature {
    let (sig, recid) = key
        .signing
        .sign_prehash_recoverable(digest.as_bytes())
        .expect("prehash of field size is always signable");
    let (sig, recid) = match sig.normalize_s() {
        Some(low) => (low, RecoveryId::new(!recid.is_y_odd(), recid.is_x_reduced())),
        None => (sig, recid),
    };
    let (r, s) = sig.split_bytes();
    RecoverableSignature {
        r: r.into(),
        s: s.into(),
        v: recid.to_byte(),
    }
}

/// Recovers the signer address. High-s signatures and recovery ids outside
/// `{0, 1}` are rejected.
pub fn recover_signer(digest: &Digest32, sig: &RecoverableSignature) -> Result<Address, CryptoError> {
    if sig.v > 1 {
        return Err(CryptoError::Recovery("recovery id must be 0 or 1"));
    }
    let parsed = Signature::from_scalars(sig.r, sig.s).map_err(|_| CryptoError::Recovery("r or s out of range"))?;
    if parsed.normalize_s().is_some() {
        return Err(CryptoError::Recovery("non-canonical high-s signature"));
    }
    let recid = RecoveryId::from_byte(sig.v).ok_or(CryptoError::Recovery("bad recovery id"))?;
    let key = VerifyingKey::recover_from_prehash(digest.as_bytes(), &parsed, recid)
        .map_err(|_| CryptoError::Recovery("no curve point for signature"))?;
    Ok(derive_address(&uncompressed(&key)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(byte: u8) -> KeyPair {
        KeyPair::from_private([byte; 32]).unwrap()
    }

    #[test]
    fn rejects_out_of_range_scalars() {
        assert_eq!(
            KeyPair::from_private([0; 32]).unwrap_err(),
            CryptoError::InvalidPrivateKey
        );
        assert_eq!(
            KeyPair::from_private([0xff; 32]).unwrap_err(),
            CryptoError::InvalidPrivateKey
        );
    }

    #[test]
    fn known_address_for_private_key_one() {
        let mut one = [0u8; 32];
        one[31] = 1;
        // address of the generator point G
        assert_eq!(
            KeyPair::from_private(one).unwrap().address().to_string(),
            "0x7e5f4552091a69125d5dfcb7b8c2659029395bdf"
        );
    }

    #[test]
    fn sign_recover_round_trip() {
        let k = key(7);
        let d = keccak256(b"payload");
        let sig = sign(&k, &d);
        assert!(sig.v <= 1);
        assert_eq!(recover_signer(&d, &sig).unwrap(), k.address());
        assert_eq!(sign(&k, &d), sig);
    }

    #[test]
    fn distinct_keys_recover_distinct_addresses() {
        let d = keccak256(b"payload");
        let sig = sign(&key(7), &d);
        assert_ne!(recover_signer(&d, &sig).unwrap(), key(8).address());
    }

    #[test]
    fn tampered_r_never_yields_signer() {
        let k = key(9);
        let d = keccak256(b"tamper");
        let mut sig = sign(&k, &d);
        sig.r[5] ^= 0x40;
        match recover_signer(&d, &sig) {
            Ok(addr) => assert_ne!(addr, k.address()),
            Err(CryptoError::Recovery(_)) => {}
            Err(e) => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn high_s_is_rejected() {
        let k = key(3);
        let d = keccak256(b"malleable");
        let sig = sign(&k, &d);
        let parsed = Signature::from_scalars(sig.r, sig.s).unwrap();
        let high_s = -*parsed.s();
        let flipped = RecoverableSignature {
            r: sig.r,
            s: high_s.to_bytes().into(),
            v: sig.v ^ 1,
        };
        assert!(matches!(recover_signer(&d, &flipped), Err(CryptoError::Recovery(_))));
    }

    #[test]
    fn serialization_is_65_bytes() {
        let sig = sign(&key(4), &keccak256(b"s"));
        let bytes = sig.to_bytes();
        assert_eq!(bytes.len(), 65);
        assert_eq!(RecoverableSignature::from_bytes(&bytes).unwrap(), sig);
        assert_eq!(sig.to_string().parse::<RecoverableSignature>().unwrap(), sig);
        assert!(RecoverableSignature::from_bytes(&bytes[..64]).is_err());
    }
}
