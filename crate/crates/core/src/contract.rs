//! Per-user multi-signature FailSafe contract and its factory.
//!
//! Each operation kind has its own signature threshold. Intercept and
//! rebalance only shuffle assets between the user's hot wallet and the
//! contract, so they default to a single signature; withdrawals and policy
//! updates need several independently held keys.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::Encoder;
use crate::crypto::{recover_signer, Address, Digest32, RecoverableSignature};
use crate::ledger::{Allowance, Amount, Asset, EventKind, ExecContext, NftId, Outcome, RevertReason, TokenId};
use crate::qmig::TransferIntentSource;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FailSafeError {
    #[error("thresholds must lie in 1..=signers for every operation")]
    InvalidThresholds,
    #[error("invalid policy: {0}")]
    InvalidPolicy(&'static str),
    #[error("contract or wallet already enrolled")]
    AlreadyEnrolled,
    #[error("contract has no enrolled wallet")]
    NotEnrolled,
    #[error("{have} distinct valid signatures, {need} required")]
    InsufficientSignatures { have: usize, need: usize },
    #[error("signature from an address outside the signer set")]
    UnknownSigner,
    #[error("authorization already used")]
    ReplayedAuthorization,
    #[error("token is not protected by this contract")]
    UnprotectedToken,
}

impl FailSafeError {
    pub fn code(&self) -> &'static str {
        match self {
            FailSafeError::InvalidThresholds => "InvalidThresholds",
            FailSafeError::InvalidPolicy(_) => "InvalidPolicy",
            FailSafeError::AlreadyEnrolled => "AlreadyEnrolled",
            FailSafeError::NotEnrolled => "NotEnrolled",
            FailSafeError::InsufficientSignatures { .. } => "InsufficientSignatures",
            FailSafeError::UnknownSigner => "UnknownSigner",
            FailSafeError::ReplayedAuthorization => "ReplayedAuthorization",
            FailSafeError::UnprotectedToken => "UnprotectedToken",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperationKind {
    Intercept,
    Rebalance,
    Withdraw,
    UpdateConfig,
}

impl OperationKind {
    pub const ALL: [OperationKind; 4] = [
        OperationKind::Intercept,
        OperationKind::Rebalance,
        OperationKind::Withdraw,
        OperationKind::UpdateConfig,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            OperationKind::Intercept => "intercept",
            OperationKind::Rebalance => "rebalance",
            OperationKind::Withdraw => "withdraw",
            OperationKind::UpdateConfig => "updateConfig",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub intercept: usize,
    pub rebalance: usize,
    pub withdraw: usize,
    pub update_config: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            intercept: 1,
            rebalance: 1,
            withdraw: 2,
            update_config: 2,
        }
    }
}

impl Thresholds {
    pub fn get(&self, op: OperationKind) -> usize {
        match op {
            OperationKind::Intercept => self.intercept,
            OperationKind::Rebalance => self.rebalance,
            OperationKind::Withdraw => self.withdraw,
            OperationKind::UpdateConfig => self.update_config,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultisigConfig {
    signers: Vec<Address>,
    thresholds: Thresholds,
}

impl MultisigConfig {
    /// Duplicate signers are collapsed, keeping first-seen order.
    pub fn new(signers: Vec<Address>, thresholds: Thresholds) -> Result<Self, FailSafeError> {
        let mut seen = BTreeSet::new();
        let signers: Vec<Address> = signers.into_iter().filter(|s| seen.insert(*s)).collect();
        let n = signers.len();
        if OperationKind::ALL
            .iter()
            .any(|op| !(1..=n).contains(&thresholds.get(*op)))
        {
            return Err(FailSafeError::InvalidThresholds);
        }
        Ok(MultisigConfig { signers, thresholds })
    }

    pub fn signers(&self) -> &[Address] {
        &self.signers
    }

    pub fn threshold(&self, op: OperationKind) -> usize {
        self.thresholds.get(op)
    }
}

/// Hot/cold split and outflow cap chosen by the user.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyConfig {
    pub hot_fraction_target: Ratio<u128>,
    pub hot_fraction_tolerance: Ratio<u128>,
    pub max_value_per_window: Amount,
    pub window_length: u64,
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<(), FailSafeError> {
        if self.hot_fraction_target > Ratio::from_integer(1) {
            return Err(FailSafeError::InvalidPolicy("hot fraction target above 1"));
        }
        if self.window_length == 0 {
            return Err(FailSafeError::InvalidPolicy("window length must be at least one block"));
        }
        Ok(())
    }

    fn encode(&self, enc: &mut Encoder) {
        enc.u128(*self.hot_fraction_target.numer())
            .u128(*self.hot_fraction_target.denom())
            .u128(*self.hot_fraction_tolerance.numer())
            .u128(*self.hot_fraction_tolerance.denom())
            .u128(self.max_value_per_window)
            .u64(self.window_length);
    }
}

/// One asset position moved by an operation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum AssetMove {
    Fungible { token: TokenId, amount: Amount },
    Nft { token: TokenId, token_id: NftId },
}

impl AssetMove {
    pub fn token(&self) -> &TokenId {
        match self {
            AssetMove::Fungible { token, .. } | AssetMove::Nft { token, .. } => token,
        }
    }

    /// Units this move represents: the amount, or 1 for an NFT.
    pub fn units(&self) -> Amount {
        match self {
            AssetMove::Fungible { amount, .. } => *amount,
            AssetMove::Nft { .. } => 1,
        }
    }

    fn encode(&self, enc: &mut Encoder) {
        match self {
            AssetMove::Fungible { token, amount } => enc.u8(0).str(token.as_str()).u128(*amount),
            AssetMove::Nft { token, token_id } => enc.u8(1).str(token.as_str()).u64(*token_id),
        };
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RebalanceDirection {
    HotToContract,
    ContractToHot,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Operation {
    /// Pull at-risk assets from the hot wallet into the contract.
    Intercept {
        assets: Vec<AssetMove>,
    },
    Rebalance {
        token: TokenId,
        direction: RebalanceDirection,
        amount: Amount,
    },
    /// Return assets from the contract to the hot wallet.
    Withdraw {
        asset: AssetMove,
    },
    UpdateConfig {
        policy: PolicyConfig,
    },
}

impl Operation {
    pub fn kind(&self) -> OperationKind {
        match self {
            Operation::Intercept { .. } => OperationKind::Intercept,
            Operation::Rebalance { .. } => OperationKind::Rebalance,
            Operation::Withdraw { .. } => OperationKind::Withdraw,
            Operation::UpdateConfig { .. } => OperationKind::UpdateConfig,
        }
    }

    pub(crate) fn encode(&self, enc: &mut Encoder) {
        enc.str(self.kind().as_str());
        match self {
            Operation::Intercept { assets } => {
                enc.len(assets.len());
                for a in assets {
                    a.encode(enc);
                }
            }
            Operation::Rebalance {
                token,
                direction,
                amount,
            } => {
                let dir = match direction {
                    RebalanceDirection::HotToContract => 0,
                    RebalanceDirection::ContractToHot => 1,
                };
                enc.str(token.as_str()).u8(dir).u128(*amount);
            }
            Operation::Withdraw { asset } => asset.encode(enc),
            Operation::UpdateConfig { policy } => policy.encode(enc),
        }
    }
}

/// Signatures over [`authorization_digest`] for a given nonce.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Authorization {
    pub nonce: u64,
    pub signatures: Vec<RecoverableSignature>,
}

impl Authorization {
    pub(crate) fn encode(&self, enc: &mut Encoder) {
        enc.u64(self.nonce).len(self.signatures.len());
        for s in &self.signatures {
            enc.bytes(&s.to_bytes());
        }
    }
}

/// What signers sign: `(contract, operation, nonce)`.
pub fn authorization_digest(contract: &Address, op: &Operation, nonce: u64) -> Digest32 {
    let mut enc = Encoder::new();
    enc.tag("failsafe:authorize").address(contract);
    op.encode(&mut enc);
    enc.u64(nonce);
    enc.finish()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnrollArgs {
    pub policy: PolicyConfig,
    pub protected_tokens: Vec<TokenId>,
    /// Incognito digest of the hot wallet's own migration intent, built off-chain.
    pub hot_intent: Digest32,
    /// Further user wallets the contract may release funds to after migration.
    pub extra_wallets: Vec<Address>,
}

impl EnrollArgs {
    pub(crate) fn encode(&self, enc: &mut Encoder) {
        self.policy.encode(enc);
        enc.len(self.protected_tokens.len());
        for t in &self.protected_tokens {
            enc.str(t.as_str());
        }
        enc.digest(&self.hot_intent).len(self.extra_wallets.len());
        for w in &self.extra_wallets {
            enc.address(w);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enrollment {
    pub hot_wallet: Address,
    pub policy: PolicyConfig,
    pub protected_tokens: Vec<TokenId>,
    pub wallets: Vec<Address>,
    pub enrolled_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FailSafeAccount {
    pub contract_address: Address,
    pub owner: String,
    pub multisig: MultisigConfig,
    pub enrollment: Option<Enrollment>,
    used_authorizations: BTreeSet<Digest32>,
}

impl FailSafeAccount {
    pub fn hot_wallet(&self) -> Option<Address> {
        self.enrollment.as_ref().map(|e| e.hot_wallet)
    }

    pub fn policy(&self) -> Option<&PolicyConfig> {
        self.enrollment.as_ref().map(|e| &e.policy)
    }

    pub fn protects(&self, token: &TokenId) -> bool {
        self.enrollment
            .as_ref()
            .is_some_and(|e| e.protected_tokens.contains(token))
    }

    /// Checks signatures without executing. Returns the number of distinct
    /// configured signers that signed.
    pub fn authorize(&self, op: &Operation, auth: &Authorization) -> Result<usize, FailSafeError> {
        let digest = authorization_digest(&self.contract_address, op, auth.nonce);
        if self.used_authorizations.contains(&digest) {
            return Err(FailSafeError::ReplayedAuthorization);
        }
        let mut valid = BTreeSet::new();
        let mut stray = false;
        for sig in &auth.signatures {
            match recover_signer(&digest, sig) {
                Ok(addr) if self.multisig.signers.contains(&addr) => {
                    valid.insert(addr);
                }
                _ => stray = true,
            }
        }
        let need = self.multisig.threshold(op.kind());
        match valid.len() {
            have if have >= need => Ok(have),
            _ if stray => Err(FailSafeError::UnknownSigner),
            have => Err(FailSafeError::InsufficientSignatures { have, need }),
        }
    }
}

/// Deploys and hosts every user's FailSafe contract.
#[derive(Debug, Clone, Default)]
pub struct FailSafeFactory {
    accounts: BTreeMap<Address, FailSafeAccount>,
    wallets: BTreeMap<Address, Address>,
    deployed: u64,
}

impl FailSafeFactory {
    pub fn deploy(
        &mut self,
        owner: &str,
        signers: Vec<Address>,
        thresholds: Thresholds,
    ) -> Result<Address, FailSafeError> {
        let multisig = MultisigConfig::new(signers, thresholds)?;
        let contract_address = Address::from_digest(
            &Encoder::new()
                .tag("failsafe:factory")
                .str(owner)
                .u64(self.deployed)
                .finish(),
        );
        self.deployed += 1;
        self.accounts.insert(
            contract_address,
            FailSafeAccount {
                contract_address,
                owner: owner.to_string(),
                multisig,
                enrollment: None,
                used_authorizations: BTreeSet::new(),
            },
        );
        Ok(contract_address)
    }

    pub fn contains(&self, contract: &Address) -> bool {
        self.accounts.contains_key(contract)
    }

    pub fn account(&self, contract: &Address) -> Option<&FailSafeAccount> {
        self.accounts.get(contract)
    }

    /// Account whose enrolled hot wallet is `wallet`.
    pub fn account_for_wallet(&self, wallet: &Address) -> Option<&FailSafeAccount> {
        self.wallets.get(wallet).and_then(|c| self.accounts.get(c))
    }

    pub fn accounts(&self) -> impl Iterator<Item = &FailSafeAccount> {
        self.accounts.values()
    }

    /// Enrollment, called by the hot wallet itself. Grants the contract
    /// unlimited approval on each protected token and records qMig intents:
    /// the client-built hot-wallet intent, plus contract-to-wallet intents.
    pub(crate) fn enroll(
        &mut self,
        ctx: &mut ExecContext<'_>,
        contract: Address,
        args: &EnrollArgs,
    ) -> Result<(), RevertReason> {
        let hot = ctx.caller;
        let account = self.accounts.get_mut(&contract).ok_or(RevertReason::UnknownContract)?;
        if account.enrollment.is_some() || self.wallets.contains_key(&hot) {
            return Err(FailSafeError::AlreadyEnrolled.into());
        }
        args.policy.validate()?;

        for token in &args.protected_tokens {
            ctx.state.approve(token, hot, contract, Allowance::Unlimited)?;
            ctx.events.push(EventKind::Approval {
                owner: hot,
                spender: contract,
                token: token.clone(),
                allowance: Allowance::Unlimited,
                outcome: Outcome::Executed,
            });
        }

        ctx.qmig.register(args.hot_intent, ctx.height);
        ctx.events.push(EventKind::IntentRegistered {
            digest: args.hot_intent,
            submitter: contract,
        });

        let mut wallets = vec![hot];
        wallets.extend(args.extra_wallets.iter().copied().filter(|w| *w != hot));
        for wallet in &wallets {
            let source = TransferIntentSource {
                from_chain_id: ctx.chain_id,
                from_address: contract,
                dest_chain_id: ctx.chain_id,
                dest_address: *wallet,
            };
            let digest = ctx.qmig.register_contract_intent(&source, ctx.height);
            ctx.events.push(EventKind::IntentRegistered {
                digest,
                submitter: contract,
            });
        }

        ctx.events.push(EventKind::Enrolled {
            contract,
            wallet: hot,
            tokens: args.protected_tokens.len(),
        });
        account.enrollment = Some(Enrollment {
            hot_wallet: hot,
            policy: args.policy.clone(),
            protected_tokens: args.protected_tokens.clone(),
            wallets,
            enrolled_at: ctx.height,
        });
        self.wallets.insert(hot, contract);
        Ok(())
    }

    pub(crate) fn execute(
        &mut self,
        ctx: &mut ExecContext<'_>,
        contract: Address,
        op: &Operation,
        auth: &Authorization,
    ) -> Result<(), RevertReason> {
        let account = self.accounts.get_mut(&contract).ok_or(RevertReason::UnknownContract)?;
        let sigs = account.authorize(op, auth)?;
        ctx.events.push(EventKind::MultisigExecuted {
            contract,
            op: op.kind(),
            sigs,
        });

        if let Operation::UpdateConfig { policy } = op {
            policy.validate()?;
            let enrollment = account.enrollment.as_mut().ok_or(FailSafeError::NotEnrolled)?;
            enrollment.policy = policy.clone();
        } else {
            let enrollment = account.enrollment.as_ref().ok_or(FailSafeError::NotEnrolled)?;
            let hot = enrollment.hot_wallet;
            let check_protected = |token: &TokenId| {
                if enrollment.protected_tokens.contains(token) {
                    Ok(())
                } else {
                    Err(FailSafeError::UnprotectedToken)
                }
            };
            match op {
                Operation::Intercept { assets } => {
                    for asset in assets {
                        check_protected(asset.token())?;
                        move_asset(ctx, asset, hot, contract, contract)?;
                    }
                }
                Operation::Rebalance {
                    token,
                    direction,
                    amount,
                } => {
                    check_protected(token)?;
                    let fungible = AssetMove::Fungible {
                        token: token.clone(),
                        amount: *amount,
                    };
                    let delta = *amount as i128;
                    let delta = match direction {
                        RebalanceDirection::HotToContract => {
                            move_asset(ctx, &fungible, hot, contract, contract)?;
                            delta
                        }
                        RebalanceDirection::ContractToHot => {
                            move_asset(ctx, &fungible, contract, hot, contract)?;
                            -delta
                        }
                    };
                    ctx.events.push(EventKind::Rebalance {
                        user: account.owner.clone(),
                        token: token.clone(),
                        delta,
                    });
                }
                Operation::Withdraw { asset } => {
                    move_asset(ctx, asset, contract, hot, contract)?;
                }
                Operation::UpdateConfig { .. } => unreachable!("handled above"),
            }
        }

        let digest = authorization_digest(&contract, op, auth.nonce);
        account.used_authorizations.insert(digest);
        Ok(())
    }
}

/// Moves between hot wallet and contract only. Pulls from the hot wallet go
/// through the enrollment approval with the contract as spender.
fn move_asset(
    ctx: &mut ExecContext<'_>,
    asset: &AssetMove,
    from: Address,
    to: Address,
    contract: Address,
) -> Result<(), RevertReason> {
    match asset {
        AssetMove::Fungible { token, amount } => {
            if from == contract {
                ctx.state.transfer(&Asset::Token(token.clone()), from, to, *amount)?;
            } else {
                ctx.state.transfer_from(token, contract, from, to, *amount)?;
            }
            ctx.events.push(EventKind::Transfer {
                from,
                to,
                asset: Asset::Token(token.clone()),
                amount: *amount,
                outcome: Outcome::Executed,
            });
        }
        AssetMove::Nft { token, token_id } => {
            let holder = ctx
                .state
                .nft_owner(token, *token_id)
                .ok_or(RevertReason::NotTokenOwner)?;
            if holder != from {
                return Err(RevertReason::NotTokenOwner);
            }
            ctx.state.nft_transfer(token, contract, to, *token_id)?;
            ctx.events.push(EventKind::NftTransfer {
                from,
                to,
                token: token.clone(),
                token_id: *token_id,
                outcome: Outcome::Executed,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{sign, KeyPair};

    fn keys(n: u8) -> Vec<KeyPair> {
        (1..=n).map(|b| KeyPair::from_private([b; 32]).unwrap()).collect()
    }

    fn account(signers: &[KeyPair], thresholds: Thresholds) -> FailSafeAccount {
        let mut factory = FailSafeFactory::default();
        let addr = factory
            .deploy("alice", signers.iter().map(KeyPair::address).collect(), thresholds)
            .unwrap();
        factory.account(&addr).unwrap().clone()
    }

    fn withdraw() -> Operation {
        Operation::Withdraw {
            asset: AssetMove::Fungible {
                token: "USDC".into(),
                amount: 10,
            },
        }
    }

    fn auth(acct: &FailSafeAccount, op: &Operation, signers: &[&KeyPair]) -> Authorization {
        let d = authorization_digest(&acct.contract_address, op, 0);
        Authorization {
            nonce: 0,
            signatures: signers.iter().map(|k| sign(k, &d)).collect(),
        }
    }

    fn three_of_three() -> Thresholds {
        Thresholds {
            withdraw: 3,
            ..Thresholds::default()
        }
    }

    #[test]
    fn deploy_validates_thresholds() {
        let ks = keys(3);
        let addrs: Vec<_> = ks.iter().map(KeyPair::address).collect();
        let mut f = FailSafeFactory::default();
        assert!(f.deploy("a", addrs.clone(), three_of_three()).is_ok());
        let zero = Thresholds {
            intercept: 0,
            ..Thresholds::default()
        };
        assert_eq!(
            f.deploy("a", addrs.clone(), zero),
            Err(FailSafeError::InvalidThresholds)
        );
        let four = Thresholds {
            withdraw: 4,
            ..Thresholds::default()
        };
        assert_eq!(
            f.deploy("a", addrs.clone(), four),
            Err(FailSafeError::InvalidThresholds)
        );
        assert_eq!(
            f.deploy("a", vec![], Thresholds::default()),
            Err(FailSafeError::InvalidThresholds)
        );
    }

    #[test]
    fn deployments_get_distinct_addresses() {
        let ks = keys(2);
        let addrs: Vec<_> = ks.iter().map(KeyPair::address).collect();
        let mut f = FailSafeFactory::default();
        let a = f.deploy("a", addrs.clone(), Thresholds::default()).unwrap();
        let b = f.deploy("a", addrs, Thresholds::default()).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn withdraw_needs_three_distinct() {
        let ks = keys(3);
        let acct = account(&ks, three_of_three());
        let op = withdraw();
        assert_eq!(
            acct.authorize(&op, &auth(&acct, &op, &[&ks[0], &ks[1]])),
            Err(FailSafeError::InsufficientSignatures { have: 2, need: 3 })
        );
        assert_eq!(
            acct.authorize(&op, &auth(&acct, &op, &[&ks[0], &ks[1], &ks[1]])),
            Err(FailSafeError::InsufficientSignatures { have: 2, need: 3 })
        );
        assert_eq!(acct.authorize(&op, &auth(&acct, &op, &[&ks[0], &ks[1], &ks[2]])), Ok(3));
    }

    #[test]
    fn single_signature_intercept() {
        let ks = keys(3);
        let acct = account(&ks, three_of_three());
        let op = Operation::Intercept { assets: vec![] };
        assert_eq!(acct.authorize(&op, &auth(&acct, &op, &[&ks[2]])), Ok(1));
    }

    #[test]
    fn duplicate_signature_counts_once() {
        let ks = keys(3);
        let acct = account(&ks, Thresholds::default());
        let op = withdraw();
        assert_eq!(
            acct.authorize(&op, &auth(&acct, &op, &[&ks[0], &ks[0]])),
            Err(FailSafeError::InsufficientSignatures { have: 1, need: 2 })
        );
    }

    #[test]
    fn stranger_signature() {
        let ks = keys(4);
        let acct = account(&ks[..3], Thresholds::default());
        let op = withdraw();
        assert_eq!(
            acct.authorize(&op, &auth(&acct, &op, &[&ks[0], &ks[3]])),
            Err(FailSafeError::UnknownSigner)
        );
        // enough configured signers: the stray one is ignored
        assert_eq!(acct.authorize(&op, &auth(&acct, &op, &[&ks[0], &ks[1], &ks[3]])), Ok(2));
    }

    #[test]
    fn signature_over_other_operation_does_not_count() {
        let ks = keys(2);
        let acct = account(&ks, Thresholds::default());
        let op = withdraw();
        let other = Operation::Withdraw {
            asset: AssetMove::Fungible {
                token: "USDC".into(),
                amount: 11,
            },
        };
        let a = auth(&acct, &other, &[&ks[0], &ks[1]]);
        assert_eq!(acct.authorize(&op, &a), Err(FailSafeError::UnknownSigner));
    }

    #[test]
    fn policy_validation() {
        let mut p = PolicyConfig {
            hot_fraction_target: Ratio::new(1, 5),
            hot_fraction_tolerance: Ratio::new(1, 20),
            max_value_per_window: 100,
            window_length: 1,
        };
        assert!(p.validate().is_ok());
        p.window_length = 0;
        assert!(p.validate().is_err());
        p.window_length = 3;
        p.hot_fraction_target = Ratio::new(6, 5);
        assert!(p.validate().is_err());
    }
}
