//! Interceptor service. Watches public pending transactions for ones that
//! touch an enrolled hot wallet and, when the counterparty is risky or the
//! user's outflow policy would be breached, front-runs them with an
//! intercept through the user's FailSafe contract at a higher gas price.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use crate::contract::{authorization_digest, AssetMove, Authorization, Operation};
use crate::crypto::Address;
use crate::custody::{CustodianRole, CustodyError, KeyCustodian};
use crate::fbr::Reconnaissance;
use crate::ledger::{
    Amount, Asset, Chain, ContractCall, EventKind, GasPrice, LedgerError, Outcome, Payload, PendingTx, TokenId,
    TokenKind, Transaction, TxId, UnsignedTransaction,
};

/// Gas price that strictly outbids `attacker`: `max(ceil(1.1 g), g + 1)`.
/// Saturates at the largest representable price.
pub fn intercept_gas_price(attacker: GasPrice) -> GasPrice {
    let tenth = attacker / 10 + GasPrice::from(!attacker.is_multiple_of(10));
    attacker.saturating_add(tenth.max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trigger {
    RiskScore(u8),
    PolicyLimit { window_total: Amount, cap: Amount },
}

impl fmt::Display for Trigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Trigger::RiskScore(s) => write!(f, "RiskScore:{s}"),
            Trigger::PolicyLimit { .. } => f.write_str("PolicyLimit"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterceptPlan {
    pub user: String,
    pub contract: Address,
    pub hot_wallet: Address,
    pub assets: Vec<AssetMove>,
    pub trigger: Trigger,
    pub target_gas_price: GasPrice,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InterceptDecision {
    Ignore,
    Intercept(InterceptPlan),
}

/// Outflows of one hot wallet over the trailing window.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WindowAccumulator {
    window_length: u64,
    ring: VecDeque<(u64, Amount)>,
}

impl WindowAccumulator {
    pub fn new(window_length: u64) -> Self {
        WindowAccumulator {
            window_length,
            ring: VecDeque::new(),
        }
    }

    pub fn set_window_length(&mut self, window_length: u64) {
        self.window_length = window_length;
    }

    pub fn record(&mut self, height: u64, amount: Amount) {
        self.ring.push_back((height, amount));
        self.prune(height);
    }

    fn prune(&mut self, now: u64) {
        while let Some(&(h, _)) = self.ring.front() {
            if h + self.window_length > now {
                break;
            }
            self.ring.pop_front();
        }
    }

    /// Outflow inside the window ending at `now` (blocks `now - len + 1 ..= now`).
    pub fn total(&self, now: u64) -> Amount {
        self.ring
            .iter()
            .filter(|(h, _)| h + self.window_length > now && *h <= now)
            .map(|(_, a)| *a)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alert {
    pub user: String,
    pub trigger: Trigger,
    pub attacker_tx: TxId,
    pub intercept_tx: TxId,
}

impl fmt::Display for Alert {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "user={} trigger={} attackerTx={} interceptTx={}",
            self.user, self.trigger, self.attacker_tx, self.intercept_tx
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FisConfig {
    /// Blocks between seeing a pending transaction and reacting to it.
    pub latency_blocks: u64,
}

#[derive(Debug, Clone)]
struct InFlight {
    tx: TxId,
    nonce: u64,
    gas_price: GasPrice,
    assets: Vec<AssetMove>,
}

/// An intercept that was submitted, for reporting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterceptRecord {
    pub attacker_tx: TxId,
    pub intercept_tx: TxId,
    pub contract: Address,
    pub seen_at: u64,
    pub submitted_at: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum FisError {
    #[error(transparent)]
    Custodian(#[from] CustodyError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

pub struct Interceptor {
    config: FisConfig,
    custodian: Box<dyn KeyCustodian>,
    queue: VecDeque<PendingTx>,
    windows: BTreeMap<Address, WindowAccumulator>,
    in_flight: BTreeMap<(Address, TokenId), InFlight>,
    alerts: BTreeMap<String, Vec<Alert>>,
    alert_log: Vec<Alert>,
    intercepts: Vec<InterceptRecord>,
    event_cursor: usize,
    auth_nonce: u64,
}

impl Interceptor {
    pub fn new(config: FisConfig, custodian: Box<dyn KeyCustodian>) -> Self {
        Interceptor {
            config,
            custodian,
            queue: VecDeque::new(),
            windows: BTreeMap::new(),
            in_flight: BTreeMap::new(),
            alerts: BTreeMap::new(),
            alert_log: Vec::new(),
            intercepts: Vec::new(),
            event_cursor: 0,
            auth_nonce: 0,
        }
    }

    pub fn config(&self) -> &FisConfig {
        &self.config
    }

    pub fn custodian_mut(&mut self) -> &mut dyn KeyCustodian {
        self.custodian.as_mut()
    }

    /// Ingests mempool notifications; they are acted on once due.
    pub fn enqueue(&mut self, pending: impl IntoIterator<Item = PendingTx>) {
        self.queue.extend(pending);
    }

    pub fn window(&self, hot_wallet: &Address) -> Option<&WindowAccumulator> {
        self.windows.get(hot_wallet)
    }

    /// Brings outflow windows and in-flight intercepts up to date with the
    /// chain's event log.
    pub fn observe(&mut self, chain: &Chain) {
        let events = &chain.events()[self.event_cursor..];
        self.event_cursor = chain.events().len();
        for ev in events {
            match &ev.kind {
                EventKind::Transfer {
                    from,
                    to,
                    amount,
                    outcome: Outcome::Executed,
                    ..
                } => {
                    if let Some(account) = chain.failsafe().account_for_wallet(from) {
                        if *to != account.contract_address {
                            if let Some(policy) = account.policy() {
                                let w = self
                                    .windows
                                    .entry(*from)
                                    .or_insert_with(|| WindowAccumulator::new(policy.window_length));
                                w.set_window_length(policy.window_length);
                                w.record(ev.height, *amount);
                            }
                        }
                    }
                }
                EventKind::TxIncluded { tx, .. } => {
                    self.in_flight.retain(|_, f| f.tx != *tx);
                }
                _ => {}
            }
        }
        // Replaced intercepts never make it into a block; drop any whose
        // nonce has been consumed.
        if let Ok(me) = self.custodian.address_of(CustodianRole::Interceptor) {
            let nonce = chain.state().nonce(&me);
            self.in_flight.retain(|_, f| f.nonce >= nonce);
        }
    }

    /// Pure evaluation of one pending transaction.
    pub fn on_pending_tx(&self, chain: &Chain, fbr: Option<&Reconnaissance>, tx: &Transaction) -> InterceptDecision {
        let risk = |addr: &Address| fbr.map(|f| f.risk_score(addr).score).unwrap_or(0);
        let threshold = fbr.map(|f| f.config().intercept_threshold).unwrap_or(70);
        let factory = chain.failsafe();

        // (victim wallet, counterparties, token, outflow amount, nft id)
        let (victim, counterparties, token, outflow, nft): (Address, Vec<Address>, &TokenId, Amount, Option<u64>) =
            match &tx.payload {
                Payload::TokenTransfer { token, to, amount } => {
                    if factory.account_for_wallet(&tx.from).is_some() {
                        (tx.from, vec![*to], token, *amount, None)
                    } else if factory.account_for_wallet(to).is_some() {
                        (*to, vec![tx.from], token, 0, None)
                    } else {
                        return InterceptDecision::Ignore;
                    }
                }
                Payload::TokenTransferFrom {
                    token,
                    owner,
                    to,
                    amount,
                } => {
                    if factory.account_for_wallet(owner).is_some() {
                        let mut cps = vec![tx.from];
                        if to != owner && *to != tx.from {
                            cps.push(*to);
                        }
                        (*owner, cps, token, *amount, None)
                    } else {
                        return InterceptDecision::Ignore;
                    }
                }
                Payload::Approve { token, spender, .. } if factory.account_for_wallet(&tx.from).is_some() => {
                    (tx.from, vec![*spender], token, 0, None)
                }
                Payload::NftTransfer { token, to, token_id } if factory.account_for_wallet(&tx.from).is_some() => {
                    (tx.from, vec![*to], token, 0, Some(*token_id))
                }
                _ => return InterceptDecision::Ignore,
            };
        let account = factory.account_for_wallet(&victim).expect("checked above");
        if counterparties.contains(&account.contract_address) || !account.protects(token) {
            return InterceptDecision::Ignore;
        }

        let worst = counterparties.iter().map(risk).max().unwrap_or(0);
        let trigger = if worst >= threshold {
            Trigger::RiskScore(worst)
        } else {
            let Some(policy) = account.policy().filter(|_| outflow > 0) else {
                return InterceptDecision::Ignore;
            };
            let so_far = self
                .windows
                .get(&victim)
                .map(|w| w.total(chain.pending_height()))
                .unwrap_or(0);
            let projected = so_far.saturating_add(outflow);
            if projected <= policy.max_value_per_window {
                return InterceptDecision::Ignore;
            }
            Trigger::PolicyLimit {
                window_total: projected,
                cap: policy.max_value_per_window,
            }
        };

        let assets = match nft {
            Some(token_id) if chain.state().nft_owner(token, token_id) == Some(victim) => vec![AssetMove::Nft {
                token: token.clone(),
                token_id,
            }],
            Some(_) => Vec::new(),
            None if chain.state().token(token).is_some_and(|t| t.kind == TokenKind::Nft) => chain
                .state()
                .token(token)
                .map(|t| t.nfts_of(&victim))
                .unwrap_or_default()
                .into_iter()
                .map(|token_id| AssetMove::Nft {
                    token: token.clone(),
                    token_id,
                })
                .collect(),
            None => {
                let balance = chain.balance(&victim, &Asset::Token(token.clone()));
                if balance == 0 {
                    Vec::new()
                } else {
                    vec![AssetMove::Fungible {
                        token: token.clone(),
                        amount: balance,
                    }]
                }
            }
        };
        if assets.is_empty() {
            return InterceptDecision::Ignore;
        }
        InterceptDecision::Intercept(InterceptPlan {
            user: account.owner.clone(),
            contract: account.contract_address,
            hot_wallet: victim,
            assets,
            trigger,
            target_gas_price: intercept_gas_price(tx.gas_price),
        })
    }

    /// Signs the intercept: one custodian signature authorizes the contract
    /// operation and the same key sends the transaction. `nonce` overrides
    /// the sender nonce to replace a pending intercept.
    pub fn build_intercept_tx(
        &mut self,
        chain: &Chain,
        plan: &InterceptPlan,
        nonce: Option<u64>,
    ) -> Result<Transaction, CustodyError> {
        let me = self.custodian.address_of(CustodianRole::Interceptor)?;
        let operation = Operation::Intercept {
            assets: plan.assets.clone(),
        };
        self.auth_nonce += 1;
        let digest = authorization_digest(&plan.contract, &operation, self.auth_nonce);
        let approval = self.custodian.sign_as(CustodianRole::Interceptor, &digest)?;
        let unsigned = UnsignedTransaction {
            from: me,
            nonce: nonce.unwrap_or_else(|| chain.next_nonce(&me)),
            gas_price: plan.target_gas_price,
            payload: Payload::ContractCall {
                contract: plan.contract,
                call: ContractCall::Execute {
                    operation,
                    authorization: Authorization {
                        nonce: self.auth_nonce,
                        signatures: vec![approval],
                    },
                },
            },
        };
        let sig = self.custodian.sign_as(CustodianRole::Interceptor, &unsigned.digest())?;
        Ok(unsigned.with_signature(sig))
    }

    pub fn notify_user(&mut self, user: &str, alert: Alert) {
        self.alerts.entry(user.to_string()).or_default().push(alert.clone());
        self.alert_log.push(alert);
    }

    pub fn alerts_for(&self, user: &str) -> &[Alert] {
        self.alerts.get(user).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Every alert in emission order.
    pub fn alert_log(&self) -> &[Alert] {
        &self.alert_log
    }

    pub fn intercepts(&self) -> &[InterceptRecord] {
        &self.intercepts
    }

    /// Handles due notifications and submits intercepts. Returns the
    /// contracts that were defended in this call.
    pub fn process(&mut self, chain: &mut Chain, fbr: Option<&Reconnaissance>) -> Result<Vec<Address>, FisError> {
        let now = chain.height();
        let mut defended = Vec::new();
        while let Some(front) = self.queue.front() {
            if front.seen_at + self.config.latency_blocks > now {
                break;
            }
            let pending = self.queue.pop_front().expect("front exists");
            // Reacting late to a transaction that already landed is pointless.
            if !chain.mempool().contains(&pending.id) {
                continue;
            }
            let InterceptDecision::Intercept(mut plan) = self.on_pending_tx(chain, fbr, &pending.tx) else {
                continue;
            };
            let key = (plan.contract, plan.assets[0].token().clone());
            let mut nonce = None;
            if let Some(prev) = self.in_flight.get(&key) {
                if prev.gas_price >= plan.target_gas_price {
                    continue;
                }
                // Replace the pending intercept with a higher bid on the same nonce.
                nonce = Some(prev.nonce);
                for a in &prev.assets {
                    if !plan.assets.contains(a) {
                        plan.assets.push(a.clone());
                    }
                }
                plan.assets.retain(|a| match a {
                    AssetMove::Nft { token, token_id } => {
                        chain.state().nft_owner(token, *token_id) == Some(plan.hot_wallet)
                    }
                    AssetMove::Fungible { .. } => true,
                });
                plan.assets.sort();
                plan.assets.dedup_by(|a, b| match (a, b) {
                    (AssetMove::Fungible { token: x, .. }, AssetMove::Fungible { token: y, .. }) => x == y,
                    _ => false,
                });
            }
            let tx = self.build_intercept_tx(chain, &plan, nonce)?;
            let intercept_id = chain.submit_transaction(tx.clone())?;
            // Our own submission comes back as a notification; it never
            // touches a hot wallet directly, so it is ignored on evaluation.
            self.in_flight.insert(
                key,
                InFlight {
                    tx: intercept_id,
                    nonce: tx.nonce,
                    gas_price: tx.gas_price,
                    assets: plan.assets.clone(),
                },
            );
            self.intercepts.push(InterceptRecord {
                attacker_tx: pending.id,
                intercept_tx: intercept_id,
                contract: plan.contract,
                seen_at: pending.seen_at,
                submitted_at: now,
            });
            self.notify_user(
                &plan.user,
                Alert {
                    user: plan.user.clone(),
                    trigger: plan.trigger,
                    attacker_tx: pending.id,
                    intercept_tx: intercept_id,
                },
            );
            if !defended.contains(&plan.contract) {
                defended.push(plan.contract);
            }
        }
        Ok(defended)
    }
}
