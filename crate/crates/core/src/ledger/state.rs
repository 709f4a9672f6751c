use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::event::RevertReason;
use super::tx::{Allowance, Amount, Asset, NftId, TokenId};
use crate::crypto::Address;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Fungible,
    Nft,
}

/// Balances, allowances and NFT ownership of one token contract. For NFT
/// contracts `balances` holds the number of ids owned.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenState {
    pub kind: TokenKind,
    balances: BTreeMap<Address, Amount>,
    allowances: BTreeMap<(Address, Address), Allowance>,
    nft_owners: BTreeMap<NftId, Address>,
    operators: BTreeSet<(Address, Address)>,
}

impl TokenState {
    fn new(kind: TokenKind) -> Self {
        TokenState {
            kind,
            balances: BTreeMap::new(),
            allowances: BTreeMap::new(),
            nft_owners: BTreeMap::new(),
            operators: BTreeSet::new(),
        }
    }

    pub fn balance(&self, addr: &Address) -> Amount {
        self.balances.get(addr).copied().unwrap_or(0)
    }

    pub fn balances(&self) -> &BTreeMap<Address, Amount> {
        &self.balances
    }

    pub fn total_supply(&self) -> Amount {
        self.balances.values().sum()
    }

    pub fn allowance(&self, owner: &Address, spender: &Address) -> Allowance {
        self.allowances
            .get(&(*owner, *spender))
            .copied()
            .unwrap_or(Allowance::Limited(0))
    }

    pub fn nft_owner(&self, id: NftId) -> Option<Address> {
        self.nft_owners.get(&id).copied()
    }

    pub fn nfts_of(&self, owner: &Address) -> Vec<NftId> {
        self.nft_owners
            .iter()
            .filter(|(_, o)| *o == owner)
            .map(|(id, _)| *id)
            .collect()
    }

    pub fn is_operator(&self, owner: &Address, operator: &Address) -> bool {
        self.operators.contains(&(*owner, *operator))
    }

    fn add(&mut self, addr: Address, amount: Amount) {
        if amount > 0 {
            *self.balances.entry(addr).or_insert(0) += amount;
        }
    }

    fn sub(&mut self, addr: Address, amount: Amount) -> Result<(), RevertReason> {
        let bal = self.balance(&addr);
        if bal < amount {
            return Err(RevertReason::InsufficientBalance);
        }
        if bal == amount {
            self.balances.remove(&addr);
        } else {
            self.balances.insert(addr, bal - amount);
        }
        Ok(())
    }

    fn set_allowance(&mut self, owner: Address, spender: Address, allowance: Allowance) {
        if allowance == Allowance::Limited(0) {
            self.allowances.remove(&(owner, spender));
        } else {
            self.allowances.insert((owner, spender), allowance);
        }
    }
}

/// Live account state of the chain.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WorldState {
    native: BTreeMap<Address, Amount>,
    tokens: BTreeMap<TokenId, TokenState>,
    nonces: BTreeMap<Address, u64>,
}

impl WorldState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_token(&mut self, id: TokenId, kind: TokenKind) {
        self.tokens.entry(id).or_insert_with(|| TokenState::new(kind));
    }

    pub fn token(&self, id: &TokenId) -> Option<&TokenState> {
        self.tokens.get(id)
    }

    pub fn tokens(&self) -> impl Iterator<Item = (&TokenId, &TokenState)> {
        self.tokens.iter()
    }

    fn token_mut(&mut self, id: &TokenId) -> Result<&mut TokenState, RevertReason> {
        self.tokens.get_mut(id).ok_or(RevertReason::UnknownToken)
    }

    fn fungible_mut(&mut self, id: &TokenId) -> Result<&mut TokenState, RevertReason> {
        let t = self.token_mut(id)?;
        if t.kind != TokenKind::Fungible {
            return Err(RevertReason::WrongTokenKind);
        }
        Ok(t)
    }

    pub fn nonce(&self, addr: &Address) -> u64 {
        self.nonces.get(addr).copied().unwrap_or(0)
    }

    pub(crate) fn bump_nonce(&mut self, addr: Address) {
        *self.nonces.entry(addr).or_insert(0) += 1;
    }

    pub fn balance(&self, asset: &Asset, addr: &Address) -> Amount {
        match asset {
            Asset::Native => self.native.get(addr).copied().unwrap_or(0),
            Asset::Token(t) => self.tokens.get(t).map_or(0, |s| s.balance(addr)),
        }
    }

    pub fn total_supply(&self, asset: &Asset) -> Amount {
        match asset {
            Asset::Native => self.native.values().sum(),
            Asset::Token(t) => self.tokens.get(t).map_or(0, TokenState::total_supply),
        }
    }

    pub fn nft_owner(&self, token: &TokenId, id: NftId) -> Option<Address> {
        self.tokens.get(token).and_then(|t| t.nft_owner(id))
    }

    pub fn allowance(&self, token: &TokenId, owner: &Address, spender: &Address) -> Allowance {
        self.tokens
            .get(token)
            .map_or(Allowance::Limited(0), |t| t.allowance(owner, spender))
    }

    /// Creates units out of nothing. Only genesis and replay use this.
    pub(crate) fn credit(&mut self, asset: &Asset, to: Address, amount: Amount) -> Result<(), RevertReason> {
        match asset {
            Asset::Native => {
                if amount > 0 {
                    *self.native.entry(to).or_insert(0) += amount;
                }
            }
            Asset::Token(t) => self.fungible_mut(t)?.add(to, amount),
        }
        Ok(())
    }

    pub(crate) fn mint_nft(&mut self, token: &TokenId, to: Address, id: NftId) -> Result<(), RevertReason> {
        let t = self.token_mut(token)?;
        if t.kind != TokenKind::Nft {
            return Err(RevertReason::WrongTokenKind);
        }
        if t.nft_owners.contains_key(&id) {
            return Err(RevertReason::NftExists);
        }
        t.nft_owners.insert(id, to);
        t.add(to, 1);
        Ok(())
    }

    pub(crate) fn transfer(
        &mut self,
        asset: &Asset,
        from: Address,
        to: Address,
        amount: Amount,
    ) -> Result<(), RevertReason> {
        match asset {
            Asset::Native => {
                let bal = self.balance(asset, &from);
                if bal < amount {
                    return Err(RevertReason::InsufficientBalance);
                }
                if bal == amount {
                    self.native.remove(&from);
                } else {
                    self.native.insert(from, bal - amount);
                }
                if amount > 0 {
                    *self.native.entry(to).or_insert(0) += amount;
                }
                Ok(())
            }
            Asset::Token(t) => {
                let state = self.fungible_mut(t)?;
                state.sub(from, amount)?;
                state.add(to, amount);
                Ok(())
            }
        }
    }

    /// Spends `owner`'s tokens under `spender`'s allowance. Returns the
    /// allowance left afterwards.
    pub(crate) fn transfer_from(
        &mut self,
        token: &TokenId,
        spender: Address,
        owner: Address,
        to: Address,
        amount: Amount,
    ) -> Result<Allowance, RevertReason> {
        let state = self.fungible_mut(token)?;
        let remaining = match state.allowance(&owner, &spender) {
            Allowance::Unlimited => Allowance::Unlimited,
            Allowance::Limited(a) if a >= amount => Allowance::Limited(a - amount),
            Allowance::Limited(_) => return Err(RevertReason::InsufficientAllowance),
        };
        state.sub(owner, amount)?;
        state.add(to, amount);
        state.set_allowance(owner, spender, remaining);
        Ok(remaining)
    }

    /// Fungible tokens get an allowance; on NFT contracts any nonzero
    /// allowance makes `spender` an operator for all of `owner`'s ids.
    pub(crate) fn approve(
        &mut self,
        token: &TokenId,
        owner: Address,
        spender: Address,
        allowance: Allowance,
    ) -> Result<(), RevertReason> {
        let state = self.token_mut(token)?;
        match state.kind {
            TokenKind::Fungible => state.set_allowance(owner, spender, allowance),
            TokenKind::Nft => {
                if allowance == Allowance::Limited(0) {
                    state.operators.remove(&(owner, spender));
                } else {
                    state.operators.insert((owner, spender));
                }
            }
        }
        Ok(())
    }

    /// Moves an NFT on behalf of `caller`, who must hold it or be an
    /// operator of the holder. Returns the previous holder.
    pub(crate) fn nft_transfer(
        &mut self,
        token: &TokenId,
        caller: Address,
        to: Address,
        id: NftId,
    ) -> Result<Address, RevertReason> {
        let state = self.token_mut(token)?;
        if state.kind != TokenKind::Nft {
            return Err(RevertReason::WrongTokenKind);
        }
        let holder = state.nft_owner(id).ok_or(RevertReason::NotTokenOwner)?;
        if holder != caller && !state.is_operator(&holder, &caller) {
            return Err(RevertReason::NotTokenOwner);
        }
        state.sub(holder, 1)?;
        state.add(to, 1);
        state.nft_owners.insert(id, to);
        Ok(holder)
    }

    /// Balance-only view used to compare against an event replay. Nonces are
    /// excluded because they are derived from block contents, not events.
    pub fn balances_snapshot(&self) -> BTreeMap<(Asset, Address), Amount> {
        let mut out = BTreeMap::new();
        for (addr, amt) in &self.native {
            out.insert((Asset::Native, *addr), *amt);
        }
        for (id, state) in &self.tokens {
            for (addr, amt) in &state.balances {
                out.insert((Asset::Token(id.clone()), *addr), *amt);
            }
        }
        out
    }
}
