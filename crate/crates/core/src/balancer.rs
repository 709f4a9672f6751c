//! Hot/cold balancer. After each block it compares every protected token's
//! hot-wallet share against the user's target and moves the difference
//! through the FailSafe contract's single-signature rebalance path.

use std::collections::BTreeSet;

use num_rational::Ratio;
use thiserror::Error;

use crate::contract::{
    authorization_digest, Authorization, FailSafeAccount, Operation, PolicyConfig, RebalanceDirection,
};
use crate::crypto::Address;
use crate::custody::{CustodianRole, CustodyError, KeyCustodian};
use crate::ledger::{
    Amount, Asset, Chain, ContractCall, EventKind, LedgerError, Payload, TokenId, TxId, UnsignedTransaction,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RebalanceAction {
    pub contract: Address,
    pub token: TokenId,
    pub direction: RebalanceDirection,
    pub amount: Amount,
}

#[derive(Debug, Error)]
pub enum BalancerError {
    #[error(transparent)]
    Custodian(#[from] CustodyError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

/// `round(target * total)`, halves rounded up.
pub fn target_hot_amount(target: Ratio<u128>, total: Amount) -> Amount {
    (Ratio::from_integer(total) * target).round().to_integer()
}

/// Core ratio rule on raw balances: `None` inside the tolerance band,
/// otherwise the direction and amount that bring the hot side to
/// `round(target * total)`.
pub fn check_ratio(hot: Amount, cold: Amount, policy: &PolicyConfig) -> Option<(RebalanceDirection, Amount)> {
    let total = hot + cold;
    if total == 0 {
        return None;
    }
    let share = Ratio::new(hot, total);
    let target = policy.hot_fraction_target;
    let deviation = if share > target { share - target } else { target - share };
    if deviation <= policy.hot_fraction_tolerance {
        return None;
    }
    let goal = target_hot_amount(target, total);
    match hot.cmp(&goal) {
        std::cmp::Ordering::Greater => Some((RebalanceDirection::HotToContract, hot - goal)),
        std::cmp::Ordering::Less => Some((RebalanceDirection::ContractToHot, goal - hot)),
        std::cmp::Ordering::Equal => None,
    }
}

/// [`check_ratio`] against an enrolled account's live balances.
pub fn check_account(chain: &Chain, account: &FailSafeAccount, token: &TokenId) -> Option<RebalanceAction> {
    let enrollment = account.enrollment.as_ref()?;
    let asset = Asset::Token(token.clone());
    let hot = chain.balance(&enrollment.hot_wallet, &asset);
    let cold = chain.balance(&account.contract_address, &asset);
    let (direction, amount) = check_ratio(hot, cold, &enrollment.policy)?;
    Some(RebalanceAction {
        contract: account.contract_address,
        token: token.clone(),
        direction,
        amount,
    })
}

pub struct Balancer {
    custodian: Box<dyn KeyCustodian>,
    paused: BTreeSet<Address>,
    pending: BTreeSet<TxId>,
    event_cursor: usize,
    auth_nonce: u64,
}

impl Balancer {
    pub fn new(custodian: Box<dyn KeyCustodian>) -> Self {
        Balancer {
            custodian,
            paused: BTreeSet::new(),
            pending: BTreeSet::new(),
            event_cursor: 0,
            auth_nonce: 0,
        }
    }

    pub fn custodian_mut(&mut self) -> &mut dyn KeyCustodian {
        self.custodian.as_mut()
    }

    /// Stops rebalancing `contract` until [`Balancer::resume`].
    pub fn pause(&mut self, contract: Address) {
        self.paused.insert(contract);
    }

    pub fn resume(&mut self, contract: &Address) {
        self.paused.remove(contract);
    }

    pub fn is_paused(&self, contract: &Address) -> bool {
        self.paused.contains(contract)
    }

    pub fn execute_rebalance(&mut self, chain: &mut Chain, action: &RebalanceAction) -> Result<TxId, BalancerError> {
        let me = self.custodian.address_of(CustodianRole::Balancer)?;
        let operation = Operation::Rebalance {
            token: action.token.clone(),
            direction: action.direction,
            amount: action.amount,
        };
        self.auth_nonce += 1;
        let digest = authorization_digest(&action.contract, &operation, self.auth_nonce);
        let approval = self.custodian.sign_as(CustodianRole::Balancer, &digest)?;
        let unsigned = UnsignedTransaction {
            from: me,
            nonce: chain.next_nonce(&me),
            gas_price: 1,
            payload: Payload::ContractCall {
                contract: action.contract,
                call: ContractCall::Execute {
                    operation,
                    authorization: Authorization {
                        nonce: self.auth_nonce,
                        signatures: vec![approval],
                    },
                },
            },
        };
        let sig = self.custodian.sign_as(CustodianRole::Balancer, &unsigned.digest())?;
        let id = chain.submit_transaction(unsigned.with_signature(sig))?;
        self.pending.insert(id);
        Ok(id)
    }

    /// One pass over every enrolled, unpaused account. Skipped while an
    /// earlier rebalance is still pending, so balances are never stale.
    pub fn tick(&mut self, chain: &mut Chain) -> Result<Vec<TxId>, BalancerError> {
        for ev in &chain.events()[self.event_cursor..] {
            if let EventKind::TxIncluded { tx, .. } = &ev.kind {
                self.pending.remove(tx);
            }
        }
        self.event_cursor = chain.events().len();
        if !self.pending.is_empty() {
            return Ok(Vec::new());
        }
        let actions: Vec<RebalanceAction> = chain
            .failsafe()
            .accounts()
            .filter(|a| !self.paused.contains(&a.contract_address))
            .filter_map(|a| a.enrollment.as_ref().map(|e| (a, e)))
            .flat_map(|(a, e)| e.protected_tokens.iter().filter_map(|t| check_account(chain, a, t)))
            .filter(|action| is_fungible(chain, &action.token))
            .collect();
        actions.iter().map(|a| self.execute_rebalance(chain, a)).collect()
    }
}

fn is_fungible(chain: &Chain, token: &TokenId) -> bool {
    chain
        .state()
        .token(token)
        .is_some_and(|t| t.kind == crate::ledger::TokenKind::Fungible)
}
