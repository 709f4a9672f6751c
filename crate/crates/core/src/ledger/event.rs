use std::fmt;

use thiserror::Error;

use super::state::{TokenKind, WorldState};
use super::tx::{Allowance, Amount, Asset, GasPrice, NftId, TokenId, TxId};
use crate::contract::{FailSafeError, OperationKind};
use crate::crypto::{Address, Digest32};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RevertReason {
    #[error("insufficient balance")]
    InsufficientBalance,
    #[error("insufficient allowance")]
    InsufficientAllowance,
    #[error("caller does not hold or operate the token id")]
    NotTokenOwner,
    #[error("unknown token")]
    UnknownToken,
    #[error("operation does not match token kind")]
    WrongTokenKind,
    #[error("token id already minted")]
    NftExists,
    #[error("no contract at address")]
    UnknownContract,
    #[error(transparent)]
    FailSafe(#[from] FailSafeError),
}

impl RevertReason {
    /// Compact name used in log records.
    pub fn code(&self) -> &'static str {
        match self {
            RevertReason::InsufficientBalance => "InsufficientBalance",
            RevertReason::InsufficientAllowance => "InsufficientAllowance",
            RevertReason::NotTokenOwner => "NotTokenOwner",
            RevertReason::UnknownToken => "UnknownToken",
            RevertReason::WrongTokenKind => "WrongTokenKind",
            RevertReason::NftExists => "NftExists",
            RevertReason::UnknownContract => "UnknownContract",
            RevertReason::FailSafe(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Executed,
    Reverted(RevertReason),
}

impl Outcome {
    pub fn is_executed(&self) -> bool {
        matches!(self, Outcome::Executed)
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Executed => f.write_str("Executed"),
            Outcome::Reverted(r) => write!(f, "Reverted:{}", r.code()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    TokenCreated {
        token: TokenId,
        kind: TokenKind,
    },
    Genesis {
        to: Address,
        asset: Asset,
        amount: Amount,
    },
    GenesisNft {
        to: Address,
        token: TokenId,
        token_id: NftId,
    },
    /// One per included transaction; consumes the sender's nonce.
    TxIncluded {
        tx: TxId,
        from: Address,
        nonce: u64,
        gas_price: GasPrice,
        private: bool,
        outcome: Outcome,
    },
    Transfer {
        from: Address,
        to: Address,
        asset: Asset,
        amount: Amount,
        outcome: Outcome,
    },
    NftTransfer {
        from: Address,
        to: Address,
        token: TokenId,
        token_id: NftId,
        outcome: Outcome,
    },
    Approval {
        owner: Address,
        spender: Address,
        token: TokenId,
        allowance: Allowance,
        outcome: Outcome,
    },
    ContractCall {
        from: Address,
        contract: Address,
        method: &'static str,
        outcome: Outcome,
    },
    Deployed {
        contract: Address,
        owner: String,
    },
    Enrolled {
        contract: Address,
        wallet: Address,
        tokens: usize,
    },
    MultisigExecuted {
        contract: Address,
        op: OperationKind,
        sigs: usize,
    },
    Rebalance {
        user: String,
        token: TokenId,
        delta: i128,
    },
    IntentRegistered {
        digest: Digest32,
        submitter: Address,
    },
    IntentWarning {
        submitter: Address,
    },
    InflectionSet {
        inflection: u64,
    },
    ExceptionListed {
        address: Address,
    },
    PrivateFiltered {
        from: Address,
    },
    BridgeLock {
        source: Address,
        escrow: Address,
        asset: Asset,
        amount: Amount,
    },
    Bridge {
        source: Address,
        dest: Address,
        asset: Asset,
        amount: Amount,
        outcome: Result<(), &'static str>,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::TokenCreated { .. } => "TokenCreated",
            EventKind::Genesis { .. } => "Genesis",
            EventKind::GenesisNft { .. } => "GenesisNft",
            EventKind::TxIncluded { .. } => "TxIncluded",
            EventKind::Transfer { .. } => "Transfer",
            EventKind::NftTransfer { .. } => "NftTransfer",
            EventKind::Approval { .. } => "Approval",
            EventKind::ContractCall { .. } => "ContractCall",
            EventKind::Deployed { .. } => "Deployed",
            EventKind::Enrolled { .. } => "Enrolled",
            EventKind::MultisigExecuted { .. } => "MultisigExecuted",
            EventKind::Rebalance { .. } => "Rebalance",
            EventKind::IntentRegistered { .. } => "IntentRegistered",
            EventKind::IntentWarning { .. } => "IntentWarning",
            EventKind::InflectionSet { .. } => "InflectionSet",
            EventKind::ExceptionListed { .. } => "ExceptionListed",
            EventKind::PrivateFiltered { .. } => "PrivateFiltered",
            EventKind::BridgeLock { .. } => "BridgeLock",
            EventKind::Bridge { .. } => "Bridge",
        }
    }
}

/// Append-only record. `Display` renders the line-delimited log format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerEvent {
    pub height: u64,
    pub kind: EventKind,
}

impl fmt::Display for LedgerEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "height={} kind={}", self.height, self.kind.name())?;
        match &self.kind {
            EventKind::TokenCreated { token, kind } => {
                write!(
                    f,
                    " token={token} type={}",
                    if *kind == TokenKind::Nft { "nft" } else { "fungible" }
                )
            }
            EventKind::Genesis { to, asset, amount } => write!(f, " to={to} token={asset} amount={amount}"),
            EventKind::GenesisNft { to, token, token_id } => write!(f, " to={to} token={token} tokenId={token_id}"),
            EventKind::TxIncluded {
                tx,
                from,
                nonce,
                gas_price,
                private,
                outcome,
            } => write!(
                f,
                " tx={tx} from={from} nonce={nonce} gasPrice={gas_price} route={} outcome={outcome}",
                if *private { "private" } else { "public" }
            ),
            EventKind::Transfer {
                from,
                to,
                asset,
                amount,
                outcome,
            } => write!(
                f,
                " from={from} to={to} token={asset} amount={amount} outcome={outcome}"
            ),
            EventKind::NftTransfer {
                from,
                to,
                token,
                token_id,
                outcome,
            } => write!(
                f,
                " from={from} to={to} token={token} tokenId={token_id} outcome={outcome}"
            ),
            EventKind::Approval {
                owner,
                spender,
                token,
                allowance,
                outcome,
            } => write!(
                f,
                " owner={owner} spender={spender} token={token} allowance={allowance} outcome={outcome}"
            ),
            EventKind::ContractCall {
                from,
                contract,
                method,
                outcome,
            } => write!(f, " from={from} contract={contract} method={method} outcome={outcome}"),
            EventKind::Deployed { contract, owner } => write!(f, " contract={contract} owner={owner}"),
            EventKind::Enrolled {
                contract,
                wallet,
                tokens,
            } => {
                write!(f, " contract={contract} wallet={wallet} tokens={tokens}")
            }
            EventKind::MultisigExecuted { contract, op, sigs } => {
                write!(f, " contract={contract} op={} sigs={sigs}", op.as_str())
            }
            EventKind::Rebalance { user, token, delta } => write!(f, " user={user} token={token} delta={delta}"),
            EventKind::IntentRegistered { digest, submitter } => {
                write!(f, " digest={digest} submitter={submitter}")
            }
            EventKind::IntentWarning { submitter } => {
                write!(f, " submitter={submitter} warning=SubmitterIsSourceEoa")
            }
            EventKind::InflectionSet { inflection } => write!(f, " inflection={inflection}"),
            EventKind::ExceptionListed { address } => write!(f, " address={address}"),
            EventKind::PrivateFiltered { from } => write!(f, " from={from} outcome=FilteredByExceptionsList"),
            EventKind::BridgeLock {
                source,
                escrow,
                asset,
                amount,
            } => write!(f, " source={source} escrow={escrow} token={asset} amount={amount}"),
            EventKind::Bridge {
                source,
                dest,
                asset,
                amount,
                outcome,
            } => {
                write!(f, " source={source} dest={dest} token={asset} amount={amount} outcome=")?;
                match outcome {
                    Ok(()) => f.write_str("ok"),
                    Err(code) => write!(f, "error:{code}"),
                }
            }
        }
    }
}

/// Rebuilds account state by folding events in order, up to and including
/// `max_height` when given. Independent of block execution.
pub fn replay(events: &[LedgerEvent], max_height: Option<u64>) -> WorldState {
    let mut state = WorldState::new();
    for ev in events {
        if max_height.is_some_and(|h| ev.height > h) {
            break;
        }
        apply_event(&mut state, &ev.kind);
    }
    state
}

fn apply_event(state: &mut WorldState, kind: &EventKind) {
    // every event in the log was produced by a successful state change, so
    // the replayed operations cannot fail
    let ok = |r: Result<_, RevertReason>| {
        r.expect("event log describes a valid history");
    };
    match kind {
        EventKind::TokenCreated { token, kind } => state.add_token(token.clone(), *kind),
        EventKind::Genesis { to, asset, amount } => ok(state.credit(asset, *to, *amount)),
        EventKind::GenesisNft { to, token, token_id } => ok(state.mint_nft(token, *to, *token_id)),
        EventKind::TxIncluded { from, .. } => state.bump_nonce(*from),
        EventKind::Transfer {
            from,
            to,
            asset,
            amount,
            outcome: Outcome::Executed,
        } => ok(state.transfer(asset, *from, *to, *amount)),
        EventKind::NftTransfer {
            from,
            to,
            token,
            token_id,
            outcome: Outcome::Executed,
        } => ok(state.nft_transfer(token, *from, *to, *token_id).map(|_| ())),
        EventKind::Approval {
            owner,
            spender,
            token,
            allowance,
            outcome: Outcome::Executed,
        } => ok(state.approve(token, *owner, *spender, *allowance)),
        EventKind::BridgeLock {
            source,
            escrow,
            asset,
            amount,
        } => ok(state.transfer(asset, *source, *escrow, *amount)),
        _ => {}
    }
}
