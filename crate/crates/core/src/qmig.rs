//! Quantum migration registry.
//!
//! Before the inflection point a user signs a [`TransferIntentSource`] with
//! the source EOA key and registers only `keccak256(signature)`, so the
//! registry never exposes the public key. After the inflection point the
//! bridge presents the raw signature; the registry recovers the signer,
//! finds the digest and checks it predates the inflection height.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::crypto::{
    keccak256, pq_verify, recover_signer, sign, Address, Digest32, KeyPair, PqPublicKey, PqSignature,
    RecoverableSignature,
};
use crate::ledger::{Amount, Asset, Chain, ContractCall, GasPrice, LedgerError, Payload, Transaction, TxId};

pub const LATE_INTENT_MESSAGE: &str = "Intent to transfer registered after the quantum inflection point!";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("transfer intent signature does not recover to the source address")]
    SignerMismatch,
    #[error("no registered intent matches the signature")]
    IntentNotFound,
    #[error("Intent to transfer registered after the quantum inflection point!")]
    LateIntent { registered_at: u64, inflection: u64 },
}

impl VerifyError {
    pub fn code(&self) -> &'static str {
        match self {
            VerifyError::SignerMismatch => "SignerMismatch",
            VerifyError::IntentNotFound => "IntentNotFound",
            VerifyError::LateIntent { .. } => "LateIntent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QMigError {
    #[error("signing key does not control the intent source address")]
    SignerMismatch,
    #[error("inflection point must be authorized by the admin's quantum-resilient key")]
    BadPqSignature,
    #[error("inflection point already set")]
    AlreadySet,
    #[error("inflection point not set or not yet reached")]
    InflectionUnset,
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

/// `fromChainId || fromAddress || destChainId || destAddress`, 56 bytes,
/// chain ids big-endian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TransferIntentSource {
    pub from_chain_id: u64,
    pub from_address: Address,
    pub dest_chain_id: u64,
    pub dest_address: Address,
}

impl TransferIntentSource {
    pub const LEN: usize = 56;

    pub fn to_bytes(&self) -> [u8; 56] {
        let mut out = [0u8; 56];
        out[..8].copy_from_slice(&self.from_chain_id.to_be_bytes());
        out[8..28].copy_from_slice(self.from_address.as_bytes());
        out[28..36].copy_from_slice(&self.dest_chain_id.to_be_bytes());
        out[36..].copy_from_slice(self.dest_address.as_bytes());
        out
    }

    /// The message the source key signs.
    pub fn digest(&self) -> Digest32 {
        keccak256(&self.to_bytes())
    }
}

impl fmt::Display for TransferIntentSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}:{}",
            self.from_chain_id, self.from_address, self.dest_chain_id, self.dest_address
        )
    }
}

impl FromStr for TransferIntentSource {
    type Err = String;

    /// Parses `fromChainId:fromAddress:destChainId:destAddress`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [fc, fa, dc, da] = parts.as_slice() else {
            return Err(format!("expected 4 ':'-separated fields, got {}", parts.len()));
        };
        let chain = |v: &str| v.parse::<u64>().map_err(|e| format!("chain id {v:?}: {e}"));
        let addr = |v: &str| v.parse::<Address>().map_err(|e| format!("address {v:?}: {e}"));
        Ok(TransferIntentSource {
            from_chain_id: chain(fc)?,
            from_address: addr(fa)?,
            dest_chain_id: chain(dc)?,
            dest_address: addr(da)?,
        })
    }
}

/// What the registry stores per intent: nothing but the digest and height.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IncognitoIntent {
    pub digest: Digest32,
    pub registered_at: u64,
}

impl IncognitoIntent {
    pub const RECORD_LEN: usize = 40;

    pub fn to_record_bytes(&self) -> [u8; 40] {
        let mut out = [0u8; 40];
        out[..32].copy_from_slice(self.digest.as_bytes());
        out[32..].copy_from_slice(&self.registered_at.to_be_bytes());
        out
    }
}

/// keccak256 over the 65-byte `r || s || v` encoding.
pub fn incognito_digest(sig: &RecoverableSignature) -> Digest32 {
    keccak256(&sig.to_bytes())
}

/// Client side: sign the intent with the source EOA key and derive the
/// incognito digest to register.
pub fn build_intent_digest(
    source: &TransferIntentSource,
    signer: &KeyPair,
) -> Result<(RecoverableSignature, Digest32), QMigError> {
    if signer.address() != source.from_address {
        return Err(QMigError::SignerMismatch);
    }
    let sig = sign(signer, &source.digest());
    let incognito = incognito_digest(&sig);
    Ok((sig, incognito))
}

/// Message the admin's one-time key signs to set the inflection point.
pub fn inflection_message(height: u64) -> Digest32 {
    keccak256(&height.to_be_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InflectionPoint {
    pub height: u64,
    /// Identifier of the quantum-resilient key that authorized it.
    pub set_by: Digest32,
}

/// An intent whose signature was presented and verified post-inflection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DisclosedIntent {
    pub source: TransferIntentSource,
    pub registered_at: u64,
}

#[derive(Debug, Clone, Default)]
pub struct QMigRegistry {
    records: BTreeMap<Digest32, u64>,
    contract_intents: BTreeMap<Digest32, u64>,
    disclosed: Vec<DisclosedIntent>,
    admin: Option<PqPublicKey>,
    inflection: Option<InflectionPoint>,
}

impl QMigRegistry {
    pub fn new(admin: Option<PqPublicKey>) -> Self {
        QMigRegistry {
            admin,
            ..Self::default()
        }
    }

    /// Address of the registry contract on the ledger.
    pub fn address() -> Address {
        Address::for_label("qmig:registry")
    }

    /// Stores `incognito` at `height`; an existing earlier height is kept.
    pub fn register(&mut self, incognito: Digest32, height: u64) -> u64 {
        *self
            .records
            .entry(incognito)
            .and_modify(|h| *h = (*h).min(height))
            .or_insert(height)
    }

    /// Intent originated by a FailSafe contract. Contracts have no ECDSA key
    /// to hide, so the digest is that of the source structure itself. Only
    /// reachable from contract execution, never from a user transaction.
    pub(crate) fn register_contract_intent(&mut self, source: &TransferIntentSource, height: u64) -> Digest32 {
        let digest = source.digest();
        self.contract_intents
            .entry(digest)
            .and_modify(|h| *h = (*h).min(height))
            .or_insert(height);
        digest
    }

    pub fn lookup(&self, incognito: &Digest32) -> Option<u64> {
        self.records.get(incognito).copied()
    }

    /// Every stored record, user and contract intents alike.
    pub fn records(&self) -> Vec<IncognitoIntent> {
        self.records
            .iter()
            .chain(&self.contract_intents)
            .map(|(d, h)| IncognitoIntent {
                digest: *d,
                registered_at: *h,
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.records.len() + self.contract_intents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn inflection(&self) -> Option<u64> {
        self.inflection.map(|p| p.height)
    }

    pub fn inflection_point(&self) -> Option<InflectionPoint> {
        self.inflection
    }

    /// `pq_sig` is the serialized Lamport signature over
    /// [`inflection_message`]; anything else is rejected.
    pub fn set_inflection_point(&mut self, height: u64, pq_sig: &[u8]) -> Result<(), QMigError> {
        if self.inflection.is_some() {
            return Err(QMigError::AlreadySet);
        }
        let admin = self.admin.as_ref().ok_or(QMigError::BadPqSignature)?;
        let sig = PqSignature::from_bytes(pq_sig).map_err(|_| QMigError::BadPqSignature)?;
        if !pq_verify(admin, &inflection_message(height), &sig) {
            return Err(QMigError::BadPqSignature);
        }
        self.inflection = Some(InflectionPoint {
            height,
            set_by: admin.id(),
        });
        Ok(())
    }

    pub fn verify_transfer_intent(
        &self,
        source: &TransferIntentSource,
        sig: &RecoverableSignature,
        inflection: u64,
    ) -> Result<(), VerifyError> {
        match recover_signer(&source.digest(), sig) {
            Ok(signer) if signer == source.from_address => {}
            _ => return Err(VerifyError::SignerMismatch),
        }
        let registered_at = self.lookup(&incognito_digest(sig)).ok_or(VerifyError::IntentNotFound)?;
        if registered_at >= inflection {
            return Err(VerifyError::LateIntent {
                registered_at,
                inflection,
            });
        }
        Ok(())
    }

    /// Verifies against the recorded inflection and remembers the now-public
    /// intent so it can authorize inflows to its destination.
    pub fn disclose(&mut self, source: &TransferIntentSource, sig: &RecoverableSignature) -> Result<(), QMigError> {
        let inflection = self.inflection().ok_or(QMigError::InflectionUnset)?;
        self.verify_transfer_intent(source, sig, inflection)?;
        let registered_at = self.lookup(&incognito_digest(sig)).expect("verified above");
        let record = DisclosedIntent {
            source: *source,
            registered_at,
        };
        if !self.disclosed.contains(&record) {
            self.disclosed.push(record);
        }
        Ok(())
    }

    pub fn disclosed(&self) -> &[DisclosedIntent] {
        &self.disclosed
    }

    /// Whether `sender` authorized transfers to `dest` before `inflection`,
    /// through a contract intent or a disclosed user intent.
    pub fn authorizes(&self, chain_id: u64, sender: &Address, dest: &Address, inflection: u64) -> bool {
        let contract_source = TransferIntentSource {
            from_chain_id: chain_id,
            from_address: *sender,
            dest_chain_id: chain_id,
            dest_address: *dest,
        };
        let by_contract = self
            .contract_intents
            .get(&contract_source.digest())
            .is_some_and(|h| *h < inflection);
        by_contract
            || self.disclosed.iter().any(|d| {
                d.source.from_address == *sender && d.source.dest_address == *dest && d.registered_at < inflection
            })
    }

    /// Audit dump: one `digest=<hex> height=<n>` line per record.
    pub fn dump(&self) -> String {
        let mut lines: Vec<String> = self
            .records()
            .iter()
            .map(|r| format!("digest={} height={}", r.digest, r.registered_at))
            .collect();
        lines.sort();
        let mut out = lines.join("\n");
        if !out.is_empty() {
            out.push('\n');
        }
        out
    }

    /// Rebuilds a verification-only registry from [`QMigRegistry::dump`] output.
    pub fn from_dump(text: &str) -> Result<Self, DumpParseError> {
        let mut reg = QMigRegistry::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: &str| DumpParseError {
                line: i + 1,
                message: msg.to_string(),
            };
            let mut digest = None;
            let mut height = None;
            for field in line.split_whitespace() {
                match field.split_once('=') {
                    Some(("digest", v)) => digest = Some(v.parse::<Digest32>().map_err(|e| err(&e.to_string()))?),
                    Some(("height", v)) => height = Some(v.parse::<u64>().map_err(|e| err(&e.to_string()))?),
                    _ => return Err(err(&format!("unexpected field {field:?}"))),
                }
            }
            match (digest, height) {
                (Some(d), Some(h)) => {
                    reg.register(d, h);
                }
                _ => return Err(err("record needs digest= and height=")),
            }
        }
        Ok(reg)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("registry dump line {line}: {message}")]
pub struct DumpParseError {
    pub line: usize,
    pub message: String,
}

/// Maximum total an address may bridge after the inflection point:
/// its balance at the inflection height minus withdrawals since, plus
/// inflows from senders that authorized it before the inflection, capped by
/// what it actually holds (counting amounts it already moved into bridge
/// escrow).
pub fn permitted_amount(chain: &Chain, source: &Address, asset: &Asset) -> Result<Amount, QMigError> {
    let inflection = chain.qmig().inflection().ok_or(QMigError::InflectionUnset)?;
    if inflection > chain.height() {
        return Err(QMigError::InflectionUnset);
    }
    let at_inflection = chain.balance_at(source, asset, inflection)?;
    let withdrawn = chain.withdrawals_since(source, asset, inflection)?;
    let base = at_inflection.saturating_sub(withdrawn);
    let authorized_inflows: Amount = chain
        .inflows_since(source, asset, inflection)?
        .into_iter()
        .filter(|(sender, _)| chain.qmig().authorizes(chain.chain_id(), sender, source, inflection))
        .map(|(_, amount)| amount)
        .sum();
    let holdings = chain.balance(source, asset) + chain.bridge_locked(source, asset);
    Ok((base + authorized_inflows).min(holdings))
}

/// A submitted intent registration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntentSubmission {
    pub tx: TxId,
    /// The submitting wallet is the intent's source EOA, so its public key
    /// becomes visible on-chain.
    pub warned: bool,
}

/// Client helper: registers `incognito` through a transaction from
/// `submitter`. Using the source EOA itself works but is flagged.
pub fn submit_intent_registration(
    chain: &mut Chain,
    submitter: &KeyPair,
    source: &TransferIntentSource,
    incognito: Digest32,
    gas_price: GasPrice,
) -> Result<IntentSubmission, LedgerError> {
    let tx = Transaction::signed(
        submitter,
        chain.next_nonce(&submitter.address()),
        gas_price,
        Payload::ContractCall {
            contract: QMigRegistry::address(),
            call: ContractCall::RegisterTransferIntent { incognito },
        },
    );
    let id = chain.submit_transaction(tx)?;
    let warned = submitter.address() == source.from_address;
    if warned {
        chain.note_intent_warning(submitter.address());
    }
    Ok(IntentSubmission { tx: id, warned })
}
