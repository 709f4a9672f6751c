//! Capability model of an attacker with a cryptographically relevant quantum
//! computer. It only exists inside the simulation: it holds the ground-truth
//! key directory and hands out a private key once the inflection height has
//! been reached and the target's public key is on record.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::ecdsa::{recover_signer, KeyPair, RecoverableSignature};
use super::keccak::{Address, Digest32};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum Denied {
    #[error("quantum inflection point not reached")]
    BeforeInflection,
    #[error("public key of target has never been revealed")]
    NotRevealed,
    #[error("no key material exists for target")]
    UnknownTarget,
}

#[derive(Debug, Default, Clone)]
pub struct QuantumOracle {
    directory: BTreeMap<Address, KeyPair>,
    revealed: BTreeSet<Address>,
    inflection: Option<u64>,
    derived: BTreeMap<Address, KeyPair>,
}

impl QuantumOracle {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers simulation key material. Registration alone reveals nothing.
    pub fn register_key(&mut self, key: &KeyPair) {
        self.directory.insert(key.address(), key.clone());
    }

    /// Records that `signer` produced an on-chain signature.
    pub fn observe_signer(&mut self, signer: Address) {
        self.revealed.insert(signer);
    }

    /// Records a raw signature published off the transaction path.
    pub fn observe_raw_signature(&mut self, digest: &Digest32, sig: &RecoverableSignature) {
        if let Ok(signer) = recover_signer(digest, sig) {
            self.revealed.insert(signer);
        }
    }

    pub fn activate(&mut self, inflection_height: u64) {
        self.inflection.get_or_insert(inflection_height);
    }

    pub fn inflection(&self) -> Option<u64> {
        self.inflection
    }

    pub fn is_revealed(&self, addr: &Address) -> bool {
        self.revealed.contains(addr)
    }

    pub fn derive_private(&mut self, target: Address, current_height: u64) -> Result<KeyPair, Denied> {
        if let Some(key) = self.derived.get(&target) {
            return Ok(key.clone());
        }
        match self.inflection {
            Some(h) if current_height >= h => {}
            _ => return Err(Denied::BeforeInflection),
        }
        if !self.revealed.contains(&target) {
            return Err(Denied::NotRevealed);
        }
        let key = self.directory.get(&target).cloned().ok_or(Denied::UnknownTarget)?;
        self.derived.insert(target, key.clone());
        Ok(key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{keccak256, sign};

    fn setup() -> (QuantumOracle, KeyPair) {
        let key = KeyPair::from_private([5; 32]).unwrap();
        let mut oracle = QuantumOracle::new();
        oracle.register_key(&key);
        (oracle, key)
    }

    #[test]
    fn denied_before_inflection() {
        let (mut oracle, key) = setup();
        oracle.observe_signer(key.address());
        assert_eq!(oracle.derive_private(key.address(), 100), Err(Denied::BeforeInflection));
        oracle.activate(50);
        assert_eq!(oracle.derive_private(key.address(), 49), Err(Denied::BeforeInflection));
    }

    #[test]
    fn revealed_address_is_broken_after_inflection() {
        let (mut oracle, key) = setup();
        oracle.observe_signer(key.address());
        oracle.activate(50);
        assert_eq!(oracle.derive_private(key.address(), 50).unwrap(), key);
    }

    #[test]
    fn unrevealed_address_is_safe() {
        let (mut oracle, key) = setup();
        oracle.activate(1);
        assert_eq!(oracle.derive_private(key.address(), 10), Err(Denied::NotRevealed));
    }

    #[test]
    fn raw_signature_reveals() {
        let (mut oracle, key) = setup();
        let d = keccak256(b"intent");
        oracle.observe_raw_signature(&d, &sign(&key, &d));
        oracle.activate(1);
        assert_eq!(oracle.derive_private(key.address(), 1).unwrap(), key);
    }

    #[test]
    fn derivation_is_sticky() {
        let (mut oracle, key) = setup();
        oracle.observe_signer(key.address());
        oracle.activate(3);
        let first = oracle.derive_private(key.address(), 3).unwrap();
        for h in [0, 3, 1000] {
            assert_eq!(oracle.derive_private(key.address(), h).unwrap(), first);
        }
    }

    #[test]
    fn activation_happens_once() {
        let mut oracle = QuantumOracle::new();
        oracle.activate(10);
        oracle.activate(5);
        assert_eq!(oracle.inflection(), Some(10));
    }
}
