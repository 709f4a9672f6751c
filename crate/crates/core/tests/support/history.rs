//! Randomized transfer histories and a brute-force balance oracle that works
//! from the included transactions alone, never from the event log.

use std::collections::BTreeMap;

use failsafe_qmig::crypto::{Address, KeyPair};
use failsafe_qmig::ledger::{Amount, Asset, Chain, Genesis, Outcome, Payload, TokenId, TokenKind, Transaction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub const ACCOUNTS: usize = 5;

pub fn assets() -> [Asset; 2] {
    [Asset::Native, Asset::token("USDC")]
}

pub struct History {
    pub chain: Chain,
    pub addresses: Vec<Address>,
    genesis: Vec<(Address, Asset, Amount)>,
}

/// Builds `blocks` blocks of random transfers between a handful of accounts.
/// Amounts sometimes exceed the sender's balance so reverts show up too.
pub fn random_history(seed: u64, blocks: u64) -> History {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let keys: Vec<KeyPair> = (0..ACCOUNTS).map(|_| KeyPair::generate(&mut rng)).collect();
    let addresses: Vec<Address> = keys.iter().map(KeyPair::address).collect();
    let mut genesis = Vec::new();
    for addr in &addresses {
        for asset in assets() {
            genesis.push((*addr, asset, rng.gen_range(0..500)));
        }
    }
    let mut chain = Chain::new(Genesis {
        chain_id: 1,
        tokens: vec![(TokenId::new("USDC"), TokenKind::Fungible)],
        allocations: genesis.clone(),
        nfts: Vec::new(),
        qmig_admin: None,
    })
    .expect("valid genesis");

    for _ in 0..blocks {
        for _ in 0..rng.gen_range(0..4) {
            let from = &keys[rng.gen_range(0..ACCOUNTS)];
            let to = addresses[rng.gen_range(0..ACCOUNTS)];
            let amount = rng.gen_range(0..200);
            let payload = if rng.gen_bool(0.5) {
                Payload::NativeTransfer { to, amount }
            } else {
                Payload::TokenTransfer {
                    token: TokenId::new("USDC"),
                    to,
                    amount,
                }
            };
            let nonce = chain.next_nonce(&from.address());
            let gas = rng.gen_range(1..50);
            chain
                .submit_transaction(Transaction::signed(from, nonce, gas, payload))
                .expect("well-formed transaction");
        }
        chain.build_block();
    }
    History {
        chain,
        addresses,
        genesis,
    }
}

/// Balances after every block, recomputed by re-executing each included
/// transfer. Reports the first outcome that disagrees with the ledger.
pub struct BruteForce {
    /// `snapshots[h]` holds balances at the end of block `h`.
    pub snapshots: Vec<BTreeMap<(Address, Asset), Amount>>,
    /// `(height, from, asset, amount)` of every executed transfer.
    pub transfers: Vec<(u64, Address, Asset, Amount)>,
}

impl BruteForce {
    pub fn build(history: &History) -> Result<Self, String> {
        let mut balances: BTreeMap<(Address, Asset), Amount> = BTreeMap::new();
        for (addr, asset, amount) in &history.genesis {
            *balances.entry((*addr, asset.clone())).or_default() += amount;
        }
        let mut snapshots = vec![balances.clone()];
        let mut transfers = Vec::new();
        for block in history.chain.blocks().iter().skip(1) {
            for inc in &block.txs {
                let from = inc.tx.from;
                let (asset, to, amount) = match &inc.tx.payload {
                    Payload::NativeTransfer { to, amount } => (Asset::Native, *to, *amount),
                    Payload::TokenTransfer { token, to, amount } => (Asset::Token(token.clone()), *to, *amount),
                    other => return Err(format!("unexpected payload {other:?}")),
                };
                let have = balances.get(&(from, asset.clone())).copied().unwrap_or(0);
                let ok = have >= amount;
                if ok != (inc.outcome == Outcome::Executed) {
                    return Err(format!(
                        "block {}: oracle says executed={ok}, ledger says {}",
                        block.height, inc.outcome
                    ));
                }
                if ok {
                    *balances.entry((from, asset.clone())).or_default() -= amount;
                    *balances.entry((to, asset.clone())).or_default() += amount;
                    transfers.push((block.height, from, asset, amount));
                }
            }
            snapshots.push(balances.clone());
        }
        Ok(BruteForce { snapshots, transfers })
    }

    pub fn balance_at(&self, addr: &Address, asset: &Asset, height: u64) -> Amount {
        self.snapshots[height as usize]
            .get(&(*addr, asset.clone()))
            .copied()
            .unwrap_or(0)
    }

    pub fn withdrawals_since(&self, addr: &Address, asset: &Asset, height: u64) -> Amount {
        self.transfers
            .iter()
            .filter(|(h, from, a, _)| *h > height && from == addr && a == asset)
            .map(|(_, _, _, amount)| amount)
            .sum()
    }
}

/// Queries the ledger at every height for every account and asset.
pub fn check_history(history: &History) -> Result<usize, String> {
    let oracle = BruteForce::build(history)?;
    let chain = &history.chain;
    let mut queries = 0;
    for h in 0..=chain.height() {
        for addr in &history.addresses {
            for asset in assets() {
                let got = chain.balance_at(addr, &asset, h).map_err(|e| e.to_string())?;
                let want = oracle.balance_at(addr, &asset, h);
                if got != want {
                    return Err(format!("balance_at({addr}, {asset}, {h}) = {got}, oracle {want}"));
                }
                let got = chain.withdrawals_since(addr, &asset, h).map_err(|e| e.to_string())?;
                let want = oracle.withdrawals_since(addr, &asset, h);
                if got != want {
                    return Err(format!(
                        "withdrawals_since({addr}, {asset}, {h}) = {got}, oracle {want}"
                    ));
                }
                queries += 2;
            }
        }
    }
    for addr in &history.addresses {
        for asset in assets() {
            if chain.balance(addr, &asset) != oracle.balance_at(addr, &asset, chain.height()) {
                return Err(format!("live balance of {addr} in {asset} disagrees with oracle"));
            }
        }
    }
    Ok(queries)
}
