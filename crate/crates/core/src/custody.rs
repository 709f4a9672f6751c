//! Key custody for the automated services. Interceptor and balancer keys sit
//! behind this interface; the simulation keeps them in memory.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::crypto::{sign, Address, Digest32, KeyPair, RecoverableSignature};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CustodianRole {
    Interceptor,
    Balancer,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CustodyError {
    #[error("no key available for role {0:?}")]
    Unavailable(CustodianRole),
}

pub trait KeyCustodian {
    fn address_of(&self, role: CustodianRole) -> Result<Address, CustodyError>;
    fn sign_as(&self, role: CustodianRole, digest: &Digest32) -> Result<RecoverableSignature, CustodyError>;
}

#[derive(Debug, Clone, Default)]
pub struct InMemoryCustodian {
    keys: BTreeMap<CustodianRole, KeyPair>,
    offline: bool,
}

impl InMemoryCustodian {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_key(mut self, role: CustodianRole, key: KeyPair) -> Self {
        self.keys.insert(role, key);
        self
    }

    /// Simulates an enclave outage.
    pub fn set_online(&mut self, online: bool) {
        self.offline = !online;
    }

    fn key(&self, role: CustodianRole) -> Result<&KeyPair, CustodyError> {
        if self.offline {
            return Err(CustodyError::Unavailable(role));
        }
        self.keys.get(&role).ok_or(CustodyError::Unavailable(role))
    }
}

impl KeyCustodian for InMemoryCustodian {
    fn address_of(&self, role: CustodianRole) -> Result<Address, CustodyError> {
        self.key(role).map(KeyPair::address)
    }

    fn sign_as(&self, role: CustodianRole, digest: &Digest32) -> Result<RecoverableSignature, CustodyError> {
        self.key(role).map(|k| sign(k, digest))
    }
}
