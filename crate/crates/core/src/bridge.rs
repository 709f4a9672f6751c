//! Lock-and-mint bridge from the ECDSA chain to a ledger that only accepts
//! hash-based signatures. After the inflection point every request must
//! carry a pre-registered transfer intent and stay within the source's
//! permitted amount.

use std::collections::BTreeMap;

use rand::RngCore;
use thiserror::Error;

use crate::codec::Encoder;
use crate::crypto::{pq_sign, pq_verify, Address, Digest32, PqKeyPair, PqPublicKey, PqSignature, RecoverableSignature};
use crate::ledger::{Amount, Asset, Chain, EventKind};
use crate::qmig::{permitted_amount, QMigError, TransferIntentSource, VerifyError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BridgeTransfer {
    pub source: TransferIntentSource,
    pub asset: Asset,
    pub amount: Amount,
    pub intent_sig: RecoverableSignature,
    pub requested_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BridgeError {
    #[error("amount must be positive")]
    ZeroAmount,
    #[error("intent chain ids do not match the bridged ledgers")]
    ChainMismatch,
    #[error("inflection point not set or not yet reached")]
    InflectionUnset,
    #[error("transfer intent signature does not recover to the source address")]
    SignerMismatch,
    #[error("no registered intent matches the signature")]
    IntentNotFound,
    #[error("Intent to transfer registered after the quantum inflection point!")]
    LateIntent,
    #[error("requested {requested} with {bridged} already bridged exceeds permitted {permitted}")]
    ExceedsPermitted {
        requested: Amount,
        bridged: Amount,
        permitted: Amount,
    },
    #[error("insufficient balance on the source ledger")]
    InsufficientBalance,
    #[error("destination ledger rejected the mint")]
    MintRejected,
}

impl BridgeError {
    pub fn code(&self) -> &'static str {
        match self {
            BridgeError::ZeroAmount => "ZeroAmount",
            BridgeError::ChainMismatch => "ChainMismatch",
            BridgeError::InflectionUnset => "InflectionUnset",
            BridgeError::SignerMismatch => "SignerMismatch",
            BridgeError::IntentNotFound => "IntentNotFound",
            BridgeError::LateIntent => "LateIntent",
            BridgeError::ExceedsPermitted { .. } => "ExceedsPermitted",
            BridgeError::InsufficientBalance => "InsufficientBalance",
            BridgeError::MintRejected => "MintRejected",
        }
    }
}

impl From<VerifyError> for BridgeError {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::SignerMismatch => BridgeError::SignerMismatch,
            VerifyError::IntentNotFound => BridgeError::IntentNotFound,
            VerifyError::LateIntent { .. } => BridgeError::LateIntent,
        }
    }
}

impl From<QMigError> for BridgeError {
    fn from(e: QMigError) -> Self {
        match e {
            QMigError::Verify(v) => v.into(),
            QMigError::SignerMismatch => BridgeError::SignerMismatch,
            _ => BridgeError::InflectionUnset,
        }
    }
}

/// Cross-ledger accounting.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BridgeBook {
    pub locked_on_source: BTreeMap<Asset, Amount>,
    pub minted_on_dest: BTreeMap<(Address, Asset), Amount>,
    pub cumulative_bridged: BTreeMap<(Address, Asset), Amount>,
}

impl BridgeBook {
    pub fn bridged(&self, source: &Address, asset: &Asset) -> Amount {
        self.cumulative_bridged
            .get(&(*source, asset.clone()))
            .copied()
            .unwrap_or(0)
    }

    /// Locked total equals minted total for every asset.
    pub fn is_conserved(&self) -> bool {
        let mut minted: BTreeMap<&Asset, Amount> = BTreeMap::new();
        for ((_, asset), amount) in &self.minted_on_dest {
            *minted.entry(asset).or_default() += amount;
        }
        minted.len() == self.locked_on_source.len()
            && self
                .locked_on_source
                .iter()
                .all(|(a, locked)| minted.get(a) == Some(locked))
    }
}

/// A mint order on the destination ledger. Each minter key signs exactly
/// once and names its successor.
#[derive(Debug, Clone)]
pub struct MintTx {
    pub to: Address,
    pub asset: Asset,
    pub amount: Amount,
    pub next_minter: PqPublicKey,
    pub signature: PqSignature,
}

impl MintTx {
    pub fn digest(to: &Address, asset: &Asset, amount: Amount, next_minter: &PqPublicKey) -> Digest32 {
        Encoder::new()
            .tag("qsafe:mint")
            .address(to)
            .str(&asset.to_string())
            .u128(amount)
            .digest(&next_minter.id())
            .finish()
    }
}

/// Destination ledger: balances plus a rotating hash-based minter key.
#[derive(Debug, Clone)]
pub struct QuantumSafeLedger {
    chain_id: u64,
    minter: PqPublicKey,
    balances: BTreeMap<(Address, Asset), Amount>,
    mints: u64,
}

impl QuantumSafeLedger {
    pub fn new(chain_id: u64, minter: PqPublicKey) -> Self {
        QuantumSafeLedger {
            chain_id,
            minter,
            balances: BTreeMap::new(),
            mints: 0,
        }
    }

    pub fn chain_id(&self) -> u64 {
        self.chain_id
    }

    pub fn balance(&self, addr: &Address, asset: &Asset) -> Amount {
        self.balances.get(&(*addr, asset.clone())).copied().unwrap_or(0)
    }

    pub fn mints(&self) -> u64 {
        self.mints
    }

    /// Accepts the mint only under the current minter key, then rotates.
    pub fn apply_mint(&mut self, tx: MintTx) -> bool {
        let digest = MintTx::digest(&tx.to, &tx.asset, tx.amount, &tx.next_minter);
        if !pq_verify(&self.minter, &digest, &tx.signature) {
            return false;
        }
        *self.balances.entry((tx.to, tx.asset)).or_default() += tx.amount;
        self.minter = tx.next_minter;
        self.mints += 1;
        true
    }
}

pub struct Bridge<R: RngCore> {
    escrow: Address,
    minter: PqKeyPair,
    rng: R,
    dest: QuantumSafeLedger,
    book: BridgeBook,
}

impl<R: RngCore> Bridge<R> {
    pub fn new(dest_chain_id: u64, mut rng: R) -> Self {
        let minter = PqKeyPair::generate(&mut rng);
        let dest = QuantumSafeLedger::new(dest_chain_id, minter.public().clone());
        Bridge {
            escrow: Address::for_label("bridge:escrow"),
            minter,
            rng,
            dest,
            book: BridgeBook::default(),
        }
    }

    pub fn escrow(&self) -> Address {
        self.escrow
    }

    pub fn dest(&self) -> &QuantumSafeLedger {
        &self.dest
    }

    pub fn book(&self) -> &BridgeBook {
        &self.book
    }

    /// Verifies, locks on the source chain and mints on the destination.
    /// Every request, accepted or not, leaves a `Bridge` event.
    pub fn bridge_transfer(&mut self, chain: &mut Chain, req: &BridgeTransfer) -> Result<(), BridgeError> {
        let result = self.try_bridge(chain, req);
        chain.record(EventKind::Bridge {
            source: req.source.from_address,
            dest: req.source.dest_address,
            asset: req.asset.clone(),
            amount: req.amount,
            outcome: result.as_ref().map(|_| ()).map_err(BridgeError::code),
        });
        result
    }

    fn try_bridge(&mut self, chain: &mut Chain, req: &BridgeTransfer) -> Result<(), BridgeError> {
        if req.amount == 0 {
            return Err(BridgeError::ZeroAmount);
        }
        if req.source.from_chain_id != chain.chain_id() || req.source.dest_chain_id != self.dest.chain_id {
            return Err(BridgeError::ChainMismatch);
        }
        let inflection = chain.qmig().inflection().ok_or(BridgeError::InflectionUnset)?;
        if inflection > chain.height() {
            return Err(BridgeError::InflectionUnset);
        }
        chain.qmig_mut().disclose(&req.source, &req.intent_sig)?;

        let source = req.source.from_address;
        let permitted = permitted_amount(chain, &source, &req.asset)?;
        let bridged = self.book.bridged(&source, &req.asset);
        if bridged.saturating_add(req.amount) > permitted {
            return Err(BridgeError::ExceedsPermitted {
                requested: req.amount,
                bridged,
                permitted,
            });
        }

        chain
            .bridge_lock(source, self.escrow, &req.asset, req.amount)
            .map_err(|_| BridgeError::InsufficientBalance)?;

        let next = PqKeyPair::generate(&mut self.rng);
        let to = req.source.dest_address;
        let digest = MintTx::digest(&to, &req.asset, req.amount, next.public());
        let signature = pq_sign(&mut self.minter, &digest).map_err(|_| BridgeError::MintRejected)?;
        let mint = MintTx {
            to,
            asset: req.asset.clone(),
            amount: req.amount,
            next_minter: next.public().clone(),
            signature,
        };
        if !self.dest.apply_mint(mint) {
            return Err(BridgeError::MintRejected);
        }
        self.minter = next;

        *self.book.locked_on_source.entry(req.asset.clone()).or_default() += req.amount;
        *self.book.minted_on_dest.entry((to, req.asset.clone())).or_default() += req.amount;
        *self
            .book
            .cumulative_bridged
            .entry((source, req.asset.clone()))
            .or_default() += req.amount;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    use super::*;

    #[test]
    fn destination_rejects_replayed_and_foreign_mints() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let mut minter = PqKeyPair::generate(&mut rng);
        let mut ledger = QuantumSafeLedger::new(2, minter.public().clone());
        let next = PqKeyPair::generate(&mut rng);
        let to = Address([7; 20]);
        let d = MintTx::digest(&to, &Asset::Native, 5, next.public());
        let sig = pq_sign(&mut minter, &d).unwrap();
        let mint = MintTx {
            to,
            asset: Asset::Native,
            amount: 5,
            next_minter: next.public().clone(),
            signature: sig,
        };
        assert!(ledger.apply_mint(mint.clone()));
        assert_eq!(ledger.balance(&to, &Asset::Native), 5);
        // the old key has been rotated out
        assert!(!ledger.apply_mint(mint));
        assert_eq!(ledger.mints(), 1);
    }

    #[test]
    fn conservation_check() {
        let mut book = BridgeBook::default();
        assert!(book.is_conserved());
        book.locked_on_source.insert(Asset::Native, 5);
        assert!(!book.is_conserved());
        book.minted_on_dest.insert((Address([1; 20]), Asset::Native), 2);
        book.minted_on_dest.insert((Address([2; 20]), Asset::Native), 3);
        assert!(book.is_conserved());
    }
}
