use std::collections::BTreeSet;

use super::LedgerError;
use crate::codec::Encoder;
use crate::crypto::{recover_signer, Address, Digest32, RecoverableSignature};

/// Opt-in list of addresses whose private relay submissions are refused.
#[derive(Debug, Clone, Default)]
pub struct ExceptionsList {
    members: BTreeSet<Address>,
}

impl ExceptionsList {
    /// Message an owner signs to place its own address on the list.
    pub fn registration_digest(addr: &Address) -> Digest32 {
        Encoder::new().tag("failsafe:exceptions-list").address(addr).finish()
    }

    /// Adds `addr` if `sig` was produced by its key. Returns `Ok(false)` if
    /// the address was already listed.
    pub fn register(&mut self, addr: Address, sig: &RecoverableSignature) -> Result<bool, LedgerError> {
        match recover_signer(&Self::registration_digest(&addr), sig) {
            Ok(signer) if signer == addr => Ok(self.members.insert(addr)),
            _ => Err(LedgerError::BadSignature),
        }
    }

    pub fn contains(&self, addr: &Address) -> bool {
        self.members.contains(addr)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}
