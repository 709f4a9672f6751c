//! Counterparty risk scoring: a blacklist of known-bad addresses plus two
//! behavioural heuristics computed from the ledger's event stream.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::Deserialize;
use thiserror::Error;

use crate::codec::de_u128;
use crate::crypto::Address;
use crate::ledger::{Amount, EventKind, LedgerEvent, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(try_from = "String")]
pub enum RiskCategory {
    Clean,
    Sanctioned,
    FraudContract,
    RugPull,
    Anomaly,
}

impl RiskCategory {
    pub fn as_str(&self) -> &'static str {
        match self {
            RiskCategory::Clean => "Clean",
            RiskCategory::Sanctioned => "Sanctioned",
            RiskCategory::FraudContract => "FraudContract",
            RiskCategory::RugPull => "RugPull",
            RiskCategory::Anomaly => "Anomaly",
        }
    }
}

impl fmt::Display for RiskCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RiskCategory {
    type Err = String;

    /// Case-insensitive; `-` and `_` are ignored, so `rug-pull` works.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| *c != '-' && *c != '_')
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "sanctioned" => Ok(RiskCategory::Sanctioned),
            "fraudcontract" | "fraud" => Ok(RiskCategory::FraudContract),
            "rugpull" => Ok(RiskCategory::RugPull),
            "anomaly" => Ok(RiskCategory::Anomaly),
            _ => Err(format!("unknown blacklist category {s:?}")),
        }
    }
}

impl TryFrom<String> for RiskCategory {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RiskVerdict {
    pub score: u8,
    pub category: RiskCategory,
    pub reasons: Vec<String>,
}

impl RiskVerdict {
    pub fn clean() -> Self {
        RiskVerdict {
            score: 0,
            category: RiskCategory::Clean,
            reasons: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlacklistEntry {
    pub address: Address,
    pub category: RiskCategory,
    pub source: String,
    pub added_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FbrError {
    #[error("blacklist line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("event at height {height} arrived after height {last}")]
    OutOfOrderEvent { height: u64, last: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FbrConfig {
    /// Blocks the drain heuristic looks back over.
    pub window_length: u64,
    pub min_distinct_senders: usize,
    /// Share of windowed inflow forwarded onward, as `[numer, denom]`.
    pub forward_ratio: [u64; 2],
    pub drain_score: u8,
    pub young_age: u64,
    #[serde(deserialize_with = "de_u128")]
    pub young_inflow_threshold: Amount,
    pub young_score: u8,
    /// Score at which the interceptor acts.
    pub intercept_threshold: u8,
}

impl Default for FbrConfig {
    fn default() -> Self {
        FbrConfig {
            window_length: 10,
            min_distinct_senders: 3,
            forward_ratio: [9, 10],
            drain_score: 40,
            young_age: 10,
            young_inflow_threshold: 1000,
            young_score: 20,
            intercept_threshold: 70,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Activity {
    first_seen: u64,
    /// `(height, sender, amount)` for executed inbound transfers.
    inflows: Vec<(u64, Address, Amount)>,
    outflows: Vec<(u64, Amount)>,
    total_inflow: Amount,
}

#[derive(Debug, Clone, Default)]
pub struct Reconnaissance {
    config: FbrConfig,
    blacklist: BTreeMap<Address, BTreeMap<RiskCategory, BlacklistEntry>>,
    activity: BTreeMap<Address, Activity>,
    last_height: Option<u64>,
}

impl Reconnaissance {
    pub fn new(config: FbrConfig) -> Self {
        Reconnaissance {
            config,
            ..Self::default()
        }
    }

    pub fn config(&self) -> &FbrConfig {
        &self.config
    }

    /// Returns whether the entry was new for its (address, category).
    pub fn add_entry(&mut self, entry: BlacklistEntry) -> bool {
        let slot = self.blacklist.entry(entry.address).or_default();
        if slot.contains_key(&entry.category) {
            return false;
        }
        slot.insert(entry.category, entry);
        true
    }

    /// Parses `<hex address> <category> <source>` lines and merges them.
    /// Returns the number of new entries.
    pub fn ingest_blacklist(&mut self, text: &str, added_at: u64) -> Result<usize, FbrError> {
        let mut parsed = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| FbrError::Parse { line: i + 1, message };
            let mut fields = line.split_whitespace();
            let (Some(addr), Some(cat)) = (fields.next(), fields.next()) else {
                return Err(err("expected `<address> <category> <source>`".into()));
            };
            let source = fields.collect::<Vec<_>>().join(" ");
            if source.is_empty() {
                return Err(err("missing source".into()));
            }
            parsed.push(BlacklistEntry {
                address: addr.parse().map_err(|e| err(format!("{e}")))?,
                category: cat.parse().map_err(err)?,
                source,
                added_at,
            });
        }
        Ok(parsed.into_iter().filter(|e| self.add_entry(e.clone())).count())
    }

    pub fn blacklist_entries(&self, addr: &Address) -> Vec<&BlacklistEntry> {
        self.blacklist
            .get(addr)
            .map(|m| m.values().collect())
            .unwrap_or_default()
    }

    /// Height of the newest observed event.
    pub fn current_height(&self) -> Option<u64> {
        self.last_height
    }

    pub fn record_observation(&mut self, event: &LedgerEvent) -> Result<(), FbrError> {
        if let Some(last) = self.last_height {
            if event.height < last {
                return Err(FbrError::OutOfOrderEvent {
                    height: event.height,
                    last,
                });
            }
        }
        self.last_height = Some(event.height);
        let h = event.height;
        match &event.kind {
            EventKind::Transfer {
                from,
                to,
                amount,
                outcome: Outcome::Executed,
                ..
            } => self.flow(h, *from, *to, *amount),
            EventKind::NftTransfer {
                from,
                to,
                outcome: Outcome::Executed,
                ..
            } => self.flow(h, *from, *to, 1),
            EventKind::Genesis { to, .. } | EventKind::GenesisNft { to, .. } => {
                self.touch(*to, h);
            }
            EventKind::TxIncluded { from, .. } => {
                self.touch(*from, h);
            }
            _ => {}
        }
        Ok(())
    }

    pub fn observe_all<'a>(&mut self, events: impl IntoIterator<Item = &'a LedgerEvent>) -> Result<(), FbrError> {
        events.into_iter().try_for_each(|e| self.record_observation(e))
    }

    fn touch(&mut self, addr: Address, height: u64) -> &mut Activity {
        self.activity.entry(addr).or_insert_with(|| Activity {
            first_seen: height,
            ..Activity::default()
        })
    }

    fn flow(&mut self, height: u64, from: Address, to: Address, amount: Amount) {
        self.touch(from, height).outflows.push((height, amount));
        let dest = self.touch(to, height);
        dest.inflows.push((height, from, amount));
        dest.total_inflow = dest.total_inflow.saturating_add(amount);
    }

    pub fn risk_score(&self, addr: &Address) -> RiskVerdict {
        if let Some(entries) = self.blacklist.get(addr).filter(|m| !m.is_empty()) {
            let (category, first) = entries.iter().next().expect("non-empty");
            return RiskVerdict {
                score: 100,
                category: *category,
                reasons: entries
                    .values()
                    .map(|e| format!("blacklisted as {} by {}", e.category, e.source))
                    .chain(std::iter::once(format!("first listed at height {}", first.added_at)))
                    .collect(),
            };
        }
        let (Some(act), Some(now)) = (self.activity.get(addr), self.last_height) else {
            return RiskVerdict::clean();
        };
        let cfg = &self.config;
        let in_window = |h: u64| h + cfg.window_length > now;
        let mut score: u32 = 0;
        let mut reasons = Vec::new();

        let senders: BTreeSet<Address> = act
            .inflows
            .iter()
            .filter(|(h, _, _)| in_window(*h))
            .map(|(_, s, _)| *s)
            .collect();
        let inflow: Amount = act.inflows.iter().filter(|(h, _, _)| in_window(*h)).map(|f| f.2).sum();
        let outflow: Amount = act.outflows.iter().filter(|(h, _)| in_window(*h)).map(|f| f.1).sum();
        let [num, den] = cfg.forward_ratio;
        let forwarded =
            inflow > 0 && Ratio::new(outflow, inflow) >= Ratio::new(u128::from(num), u128::from(den.max(1)));
        if senders.len() >= cfg.min_distinct_senders && forwarded {
            score += u32::from(cfg.drain_score);
            reasons.push(format!(
                "aggregated {inflow} from {} senders and forwarded {outflow} within {} blocks",
                senders.len(),
                cfg.window_length
            ));
        }
        let age = now - act.first_seen;
        if age < cfg.young_age && act.total_inflow > cfg.young_inflow_threshold {
            score += u32::from(cfg.young_score);
            reasons.push(format!("{age} blocks old with inflow {}", act.total_inflow));
        }
        let score = score.min(100) as u8;
        RiskVerdict {
            score,
            category: if score > 0 {
                RiskCategory::Anomaly
            } else {
                RiskCategory::Clean
            },
            reasons,
        }
    }

    pub fn should_intercept(&self, verdict: &RiskVerdict) -> bool {
        verdict.score >= self.config.intercept_threshold
    }
}
