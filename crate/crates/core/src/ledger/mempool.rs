use std::cmp::{Ordering, Reverse};

use super::tx::{Transaction, TxId};
use crate::crypto::Address;

#[derive(Debug, Clone)]
pub struct PoolEntry {
    pub id: TxId,
    pub tx: Transaction,
    pub arrival_seq: u64,
    /// Came through the private relay: never announced to subscribers.
    pub private: bool,
}

impl PoolEntry {
    /// Higher gas price first, then earlier arrival.
    pub fn priority_cmp(&self, other: &PoolEntry) -> Ordering {
        (self.tx.gas_price, Reverse(self.arrival_seq)).cmp(&(other.tx.gas_price, Reverse(other.arrival_seq)))
    }
}

/// Pending transactions, public and private, in one pool.
#[derive(Debug, Default, Clone)]
pub struct Mempool {
    entries: Vec<PoolEntry>,
    next_seq: u64,
}

impl Mempool {
    pub fn insert(&mut self, tx: Transaction, private: bool) -> PoolEntry {
        let entry = PoolEntry {
            id: tx.id(),
            tx,
            arrival_seq: self.next_seq,
            private,
        };
        self.next_seq += 1;
        self.entries.push(entry.clone());
        entry
    }

    pub fn contains(&self, id: &TxId) -> bool {
        self.entries.iter().any(|e| e.id == *id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    pub fn pending_for(&self, addr: &Address) -> impl Iterator<Item = &PoolEntry> {
        let addr = *addr;
        self.entries.iter().filter(move |e| e.tx.from == addr)
    }

    /// Removes and returns the best transaction whose nonce equals its
    /// sender's current nonce. Entries whose nonce has already been consumed
    /// are discarded.
    pub fn take_next(&mut self, nonce_of: impl Fn(&Address) -> u64) -> Option<PoolEntry> {
        self.entries.retain(|e| e.tx.nonce >= nonce_of(&e.tx.from));
        let best = self
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.tx.nonce == nonce_of(&e.tx.from))
            .max_by(|(_, a), (_, b)| a.priority_cmp(b))
            .map(|(i, _)| i)?;
        Some(self.entries.remove(best))
    }
}
