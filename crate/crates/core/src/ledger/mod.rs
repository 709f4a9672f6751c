//! Event-sourced EVM-like chain: accounts, fungible and NFT tokens, a
//! gas-price-ordered mempool with a private relay, sequential block
//! execution with revert semantics, and balance-at-height replay.

mod event;
mod mempool;
mod relay;
mod state;
mod tx;

pub use self::event::{replay, EventKind, LedgerEvent, Outcome, RevertReason};
pub use self::mempool::{Mempool, PoolEntry};
pub use self::relay::ExceptionsList;
pub use self::state::{TokenKind, TokenState, WorldState};
pub use self::tx::{
    Allowance, Amount, Asset, ContractCall, GasPrice, NftId, Payload, TokenId, Transaction, TxId, UnsignedTransaction,
};

use thiserror::Error;

use crate::contract::{FailSafeError, FailSafeFactory, Thresholds};
use crate::crypto::{Address, PqPublicKey, QuantumOracle, RecoverableSignature};
use crate::qmig::{QMigError, QMigRegistry};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("signature does not recover to the sender")]
    BadSignature,
    #[error("nonce {given} is below account nonce {current}")]
    StaleNonce { given: u64, current: u64 },
    #[error("transaction already pending")]
    DuplicateTransaction,
    #[error("height {requested} is beyond current height {current}")]
    FutureHeight { requested: u64, current: u64 },
}

/// Result of a private relay submission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrivateSubmission {
    Accepted(TxId),
    FilteredByExceptionsList,
}

/// Notification delivered to public mempool subscribers.
#[derive(Debug, Clone)]
pub struct PendingTx {
    pub id: TxId,
    pub tx: Transaction,
    pub arrival_seq: u64,
    /// Height of the last built block when the transaction arrived.
    pub seen_at: u64,
}

#[derive(Debug, Clone)]
pub struct IncludedTx {
    pub id: TxId,
    pub tx: Transaction,
    pub arrival_seq: u64,
    pub private: bool,
    pub outcome: Outcome,
}

#[derive(Debug, Clone)]
pub struct Block {
    pub height: u64,
    pub txs: Vec<IncludedTx>,
}

/// Initial chain contents; becomes block 0.
#[derive(Debug, Clone, Default)]
pub struct Genesis {
    pub chain_id: u64,
    pub tokens: Vec<(TokenId, TokenKind)>,
    pub allocations: Vec<(Address, Asset, Amount)>,
    pub nfts: Vec<(Address, TokenId, NftId)>,
    /// Quantum-resilient key that may set the inflection point.
    pub qmig_admin: Option<PqPublicKey>,
}

/// Mutable view handed to built-in contracts while one transaction executes.
pub struct ExecContext<'a> {
    pub state: &'a mut WorldState,
    pub qmig: &'a mut QMigRegistry,
    pub height: u64,
    pub chain_id: u64,
    pub caller: Address,
    pub events: Vec<EventKind>,
}

pub struct Chain {
    chain_id: u64,
    state: WorldState,
    mempool: Mempool,
    notifications: Vec<PendingTx>,
    blocks: Vec<Block>,
    events: Vec<LedgerEvent>,
    exceptions: ExceptionsList,
    failsafe: FailSafeFactory,
    qmig: QMigRegistry,
    oracle: QuantumOracle,
}

impl Chain {
    pub fn new(genesis: Genesis) -> Result<Self, RevertReason> {
        let mut chain = Chain {
            chain_id: genesis.chain_id,
            state: WorldState::new(),
            mempool: Mempool::default(),
            notifications: Vec::new(),
            blocks: Vec::new(),
            events: Vec::new(),
            exceptions: ExceptionsList::default(),
            failsafe: FailSafeFactory::default(),
            qmig: QMigRegistry::new(genesis.qmig_admin),
            oracle: QuantumOracle::new(),
        };
        for (token, kind) in genesis.tokens {
            chain.state.add_token(token.clone(), kind);
            chain.push_event(0, EventKind::TokenCreated { token, kind });
        }
        for (to, asset, amount) in genesis.allocations {
            chain.state.credit(&asset, to, amount)?;
            chain.push_event(0, EventKind::Genesis { to, asset, amount });
        }
        for (to, token, token_id) in genesis.nfts {
            chain.state.mint_nft(&token, to, token_id)?;
            chain.push_event(0, EventKind::GenesisNft { to, token, token_id });
        }
        chain.blocks.push(Block {
            height: 0,
            txs: Vec::new(),
        });
        Ok(chain)
    }

    pub fn chain_id(&self) -> u64 {
        self.chain_id
    }

    /// Height of the last built block.
    pub fn height(&self) -> u64 {
        self.blocks.len() as u64 - 1
    }

    /// Height the next block will have; out-of-block operations are recorded here.
    pub fn pending_height(&self) -> u64 {
        self.height() + 1
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn events(&self) -> &[LedgerEvent] {
        &self.events
    }

    /// The event log, one record per line.
    pub fn event_log(&self) -> String {
        let mut out = String::new();
        for ev in &self.events {
            out.push_str(&ev.to_string());
            out.push('\n');
        }
        out
    }

    pub fn mempool(&self) -> &Mempool {
        &self.mempool
    }

    pub fn exceptions(&self) -> &ExceptionsList {
        &self.exceptions
    }

    pub fn failsafe(&self) -> &FailSafeFactory {
        &self.failsafe
    }

    pub fn qmig(&self) -> &QMigRegistry {
        &self.qmig
    }

    pub(crate) fn qmig_mut(&mut self) -> &mut QMigRegistry {
        &mut self.qmig
    }

    pub fn oracle(&self) -> &QuantumOracle {
        &self.oracle
    }

    pub fn oracle_mut(&mut self) -> &mut QuantumOracle {
        &mut self.oracle
    }

    pub fn balance(&self, addr: &Address, asset: &Asset) -> Amount {
        self.state.balance(asset, addr)
    }

    pub fn pending_for(&self, addr: &Address) -> Vec<&Transaction> {
        self.mempool.pending_for(addr).map(|e| &e.tx).collect()
    }

    /// Nonce a new transaction from `addr` should use, accounting for pool entries.
    pub fn next_nonce(&self, addr: &Address) -> u64 {
        let pooled = self.mempool.pending_for(addr).map(|e| e.tx.nonce + 1).max();
        pooled.unwrap_or(0).max(self.state.nonce(addr))
    }

    fn push_event(&mut self, height: u64, kind: EventKind) {
        self.events.push(LedgerEvent { height, kind });
    }

    pub(crate) fn record(&mut self, kind: EventKind) {
        let h = self.pending_height();
        self.push_event(h, kind);
    }

    fn admit(&self, tx: &Transaction) -> Result<(), LedgerError> {
        if !tx.signature_valid() {
            return Err(LedgerError::BadSignature);
        }
        let current = self.state.nonce(&tx.from);
        if tx.nonce < current {
            return Err(LedgerError::StaleNonce {
                given: tx.nonce,
                current,
            });
        }
        if self.mempool.contains(&tx.id()) {
            return Err(LedgerError::DuplicateTransaction);
        }
        Ok(())
    }

    /// Public mempool submission. Subscribers see the transaction through
    /// [`Chain::take_notifications`].
    pub fn submit_transaction(&mut self, tx: Transaction) -> Result<TxId, LedgerError> {
        self.admit(&tx)?;
        let entry = self.mempool.insert(tx, false);
        self.notifications.push(PendingTx {
            id: entry.id,
            tx: entry.tx,
            arrival_seq: entry.arrival_seq,
            seen_at: self.height(),
        });
        Ok(entry.id)
    }

    /// Private relay submission: skips the public announcement, unless the
    /// sender opted into the exceptions list, in which case it is dropped.
    pub fn submit_private_transaction(&mut self, tx: Transaction) -> Result<PrivateSubmission, LedgerError> {
        if !tx.signature_valid() {
            return Err(LedgerError::BadSignature);
        }
        if self.exceptions.contains(&tx.from) {
            self.record(EventKind::PrivateFiltered { from: tx.from });
            return Ok(PrivateSubmission::FilteredByExceptionsList);
        }
        self.admit(&tx)?;
        let entry = self.mempool.insert(tx, true);
        Ok(PrivateSubmission::Accepted(entry.id))
    }

    /// Drains public pending-transaction notifications in arrival order.
    pub fn take_notifications(&mut self) -> Vec<PendingTx> {
        std::mem::take(&mut self.notifications)
    }

    pub fn register_exception(&mut self, addr: Address, sig: &RecoverableSignature) -> Result<(), LedgerError> {
        let added = self.exceptions.register(addr, sig)?;
        if added {
            self.record(EventKind::ExceptionListed { address: addr });
        }
        Ok(())
    }

    pub fn deploy_failsafe(
        &mut self,
        owner: &str,
        signers: Vec<Address>,
        thresholds: Thresholds,
    ) -> Result<Address, FailSafeError> {
        let contract = self.failsafe.deploy(owner, signers, thresholds)?;
        self.record(EventKind::Deployed {
            contract,
            owner: owner.to_string(),
        });
        Ok(contract)
    }

    /// Sets the qMig inflection height under the admin's one-time key and
    /// arms the quantum oracle.
    pub fn set_inflection_point(&mut self, inflection: u64, pq_sig: &[u8]) -> Result<(), QMigError> {
        self.qmig.set_inflection_point(inflection, pq_sig)?;
        self.oracle.activate(inflection);
        self.record(EventKind::InflectionSet { inflection });
        Ok(())
    }

    pub(crate) fn note_intent_warning(&mut self, submitter: Address) {
        self.record(EventKind::IntentWarning { submitter });
    }

    /// Bridge escrow: moves `amount` from `source` into `escrow`.
    pub(crate) fn bridge_lock(
        &mut self,
        source: Address,
        escrow: Address,
        asset: &Asset,
        amount: Amount,
    ) -> Result<(), RevertReason> {
        self.state.transfer(asset, source, escrow, amount)?;
        self.record(EventKind::BridgeLock {
            source,
            escrow,
            asset: asset.clone(),
            amount,
        });
        Ok(())
    }

    /// Selects, orders and executes pending transactions; appends the block.
    pub fn build_block(&mut self) -> &Block {
        let height = self.pending_height();
        let mut txs = Vec::new();
        loop {
            let state = &self.state;
            let Some(entry) = self.mempool.take_next(|a| state.nonce(a)) else {
                break;
            };
            let (outcome, effects) = self.execute(&entry.tx, height);
            self.state.bump_nonce(entry.tx.from);
            self.oracle.observe_signer(entry.tx.from);
            self.push_event(
                height,
                EventKind::TxIncluded {
                    tx: entry.id,
                    from: entry.tx.from,
                    nonce: entry.tx.nonce,
                    gas_price: entry.tx.gas_price,
                    private: entry.private,
                    outcome: outcome.clone(),
                },
            );
            for kind in effects {
                self.push_event(height, kind);
            }
            txs.push(IncludedTx {
                id: entry.id,
                tx: entry.tx,
                arrival_seq: entry.arrival_seq,
                private: entry.private,
                outcome,
            });
        }
        self.blocks.push(Block { height, txs });
        self.blocks.last().expect("just pushed")
    }

    fn execute(&mut self, tx: &Transaction, height: u64) -> (Outcome, Vec<EventKind>) {
        let from = tx.from;
        match &tx.payload {
            Payload::NativeTransfer { to, amount } => {
                let r = self.state.transfer(&Asset::Native, from, *to, *amount);
                let outcome = outcome_of(&r);
                let ev = EventKind::Transfer {
                    from,
                    to: *to,
                    asset: Asset::Native,
                    amount: *amount,
                    outcome: outcome.clone(),
                };
                (outcome, vec![ev])
            }
            Payload::TokenTransfer { token, to, amount } => {
                let asset = Asset::Token(token.clone());
                let r = self.state.transfer(&asset, from, *to, *amount);
                let outcome = outcome_of(&r);
                let ev = EventKind::Transfer {
                    from,
                    to: *to,
                    asset,
                    amount: *amount,
                    outcome: outcome.clone(),
                };
                (outcome, vec![ev])
            }
            Payload::TokenTransferFrom {
                token,
                owner,
                to,
                amount,
            } => {
                let r = self.state.transfer_from(token, from, *owner, *to, *amount);
                let outcome = outcome_of(&r);
                let mut evs = vec![EventKind::Transfer {
                    from: *owner,
                    to: *to,
                    asset: Asset::Token(token.clone()),
                    amount: *amount,
                    outcome: outcome.clone(),
                }];
                if let Ok(remaining @ Allowance::Limited(_)) = r {
                    evs.push(EventKind::Approval {
                        owner: *owner,
                        spender: from,
                        token: token.clone(),
                        allowance: remaining,
                        outcome: Outcome::Executed,
                    });
                }
                (outcome, evs)
            }
            Payload::Approve {
                token,
                spender,
                allowance,
            } => {
                let r = self.state.approve(token, from, *spender, *allowance);
                let outcome = outcome_of(&r);
                let ev = EventKind::Approval {
                    owner: from,
                    spender: *spender,
                    token: token.clone(),
                    allowance: *allowance,
                    outcome: outcome.clone(),
                };
                (outcome, vec![ev])
            }
            Payload::NftTransfer { token, to, token_id } => {
                let r = self.state.nft_transfer(token, from, *to, *token_id);
                let outcome = outcome_of(&r);
                let holder = *r.as_ref().unwrap_or(&from);
                let ev = EventKind::NftTransfer {
                    from: holder,
                    to: *to,
                    token: token.clone(),
                    token_id: *token_id,
                    outcome: outcome.clone(),
                };
                (outcome, vec![ev])
            }
            Payload::ContractCall { contract, call } => self.execute_call(from, *contract, call, height),
        }
    }

    fn execute_call(
        &mut self,
        from: Address,
        contract: Address,
        call: &ContractCall,
        height: u64,
    ) -> (Outcome, Vec<EventKind>) {
        let saved = (self.state.clone(), self.failsafe.clone(), self.qmig.clone());
        let mut ctx = ExecContext {
            state: &mut self.state,
            qmig: &mut self.qmig,
            height,
            chain_id: self.chain_id,
            caller: from,
            events: Vec::new(),
        };
        let result = if contract == QMigRegistry::address() {
            match call {
                ContractCall::RegisterTransferIntent { incognito } => {
                    ctx.qmig.register(*incognito, height);
                    ctx.events.push(EventKind::IntentRegistered {
                        digest: *incognito,
                        submitter: from,
                    });
                    Ok(())
                }
                _ => Err(RevertReason::UnknownContract),
            }
        } else if self.failsafe.contains(&contract) {
            match call {
                ContractCall::Enroll(args) => self.failsafe.enroll(&mut ctx, contract, args),
                ContractCall::Execute {
                    operation,
                    authorization,
                } => self.failsafe.execute(&mut ctx, contract, operation, authorization),
                ContractCall::RegisterTransferIntent { .. } => Err(RevertReason::UnknownContract),
            }
        } else {
            Err(RevertReason::UnknownContract)
        };
        let effects = std::mem::take(&mut ctx.events);
        let method = call.method();
        match result {
            Ok(()) => {
                let mut evs = vec![EventKind::ContractCall {
                    from,
                    contract,
                    method,
                    outcome: Outcome::Executed,
                }];
                evs.extend(effects);
                (Outcome::Executed, evs)
            }
            Err(reason) => {
                (self.state, self.failsafe, self.qmig) = saved;
                let outcome = Outcome::Reverted(reason);
                let ev = EventKind::ContractCall {
                    from,
                    contract,
                    method,
                    outcome: outcome.clone(),
                };
                (outcome, vec![ev])
            }
        }
    }

    fn check_height(&self, height: u64) -> Result<(), LedgerError> {
        if height > self.height() {
            return Err(LedgerError::FutureHeight {
                requested: height,
                current: self.height(),
            });
        }
        Ok(())
    }

    /// Balance at the end of block `height`, folded from the event log.
    pub fn balance_at(&self, addr: &Address, asset: &Asset, height: u64) -> Result<Amount, LedgerError> {
        self.check_height(height)?;
        let mut bal: i128 = 0;
        for ev in self.events.iter().take_while(|e| e.height <= height) {
            bal += balance_delta(&ev.kind, addr, asset);
        }
        Ok(u128::try_from(bal).expect("replayed balance is never negative"))
    }

    /// Sum of executed outgoing transfers from `addr` in blocks after `height`.
    pub fn withdrawals_since(&self, addr: &Address, asset: &Asset, height: u64) -> Result<Amount, LedgerError> {
        self.check_height(height)?;
        Ok(self
            .transfers_after(asset, height)
            .filter(|(from, _, _)| from == addr)
            .map(|(_, _, amount)| amount)
            .sum())
    }

    /// Executed incoming transfers to `addr` after `height`, as `(sender, amount)`.
    pub fn inflows_since(
        &self,
        addr: &Address,
        asset: &Asset,
        height: u64,
    ) -> Result<Vec<(Address, Amount)>, LedgerError> {
        self.check_height(height)?;
        Ok(self
            .transfers_after(asset, height)
            .filter(|(_, to, _)| to == addr)
            .map(|(from, _, amount)| (from, amount))
            .collect())
    }

    /// Total moved into bridge escrow by `addr`.
    pub fn bridge_locked(&self, addr: &Address, asset: &Asset) -> Amount {
        self.events
            .iter()
            .filter_map(|e| match &e.kind {
                EventKind::BridgeLock {
                    source,
                    asset: a,
                    amount,
                    ..
                } if source == addr && a == asset => Some(*amount),
                _ => None,
            })
            .sum()
    }

    fn transfers_after<'a>(
        &'a self,
        asset: &'a Asset,
        height: u64,
    ) -> impl Iterator<Item = (Address, Address, Amount)> + 'a {
        self.events
            .iter()
            .filter(move |e| e.height > height && e.height <= self.height())
            .filter_map(move |e| match &e.kind {
                EventKind::Transfer {
                    from,
                    to,
                    asset: a,
                    amount,
                    outcome: Outcome::Executed,
                } if a == asset => Some((*from, *to, *amount)),
                EventKind::NftTransfer {
                    from,
                    to,
                    token,
                    outcome: Outcome::Executed,
                    ..
                } if asset.token_id() == Some(token) => Some((*from, *to, 1)),
                _ => None,
            })
    }
}

fn balance_delta(kind: &EventKind, addr: &Address, asset: &Asset) -> i128 {
    let signed = |from: &Address, to: &Address, amount: Amount| {
        let mut d = 0i128;
        if from == addr {
            d -= amount as i128;
        }
        if to == addr {
            d += amount as i128;
        }
        d
    };
    match kind {
        EventKind::Genesis { to, asset: a, amount } if a == asset && to == addr => *amount as i128,
        EventKind::GenesisNft { to, token, .. } if asset.token_id() == Some(token) && to == addr => 1,
        EventKind::Transfer {
            from,
            to,
            asset: a,
            amount,
            outcome: Outcome::Executed,
        } if a == asset => signed(from, to, *amount),
        EventKind::NftTransfer {
            from,
            to,
            token,
            outcome: Outcome::Executed,
            ..
        } if asset.token_id() == Some(token) => signed(from, to, 1),
        EventKind::BridgeLock {
            source,
            escrow,
            asset: a,
            amount,
        } if a == asset => signed(source, escrow, *amount),
        _ => 0,
    }
}


fn outcome_of<T>(r: &Result<T, RevertReason>) -> Outcome {
    match r {
        Ok(_) => Outcome::Executed,
        Err(e) => Outcome::Reverted(e.clone()),
    }
}
