//! Scenario file schema (TOML).

use std::collections::BTreeSet;
use std::str::FromStr;

use num_rational::Ratio;
use serde::Deserialize;

use super::ScenarioError;
use crate::codec::de_u128;
use crate::fbr::{FbrConfig, RiskCategory};
use crate::ledger::{Amount, GasPrice, NftId, TokenKind};

/// Non-negative fraction written as `"a/b"` or a decimal such as `"0.2"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(try_from = "String")]
pub struct Fraction(pub Ratio<u128>);

impl FromStr for Fraction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || format!("invalid fraction {s:?}");
        if let Some((n, d)) = s.split_once('/') {
            let n: u128 = n.trim().parse().map_err(|_| bad())?;
            let d: u128 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            return Ok(Fraction(Ratio::new(n, d)));
        }
        let (whole, frac) = s.split_once('.').unwrap_or((s, ""));
        if whole.is_empty() && frac.is_empty() || frac.len() > 30 {
            return Err(bad());
        }
        let digits = format!("{whole}{frac}");
        let n: u128 = digits.parse().map_err(|_| bad())?;
        Ok(Fraction(Ratio::new(n, 10u128.pow(frac.len() as u32))))
    }
}

impl TryFrom<String> for Fraction {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    User,
    Attacker,
    Cosigner,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActorSpec {
    pub name: String,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenSpec {
    pub id: String,
    pub kind: TokenKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Allocation {
    pub actor: String,
    /// Token id, or `native`.
    pub token: String,
    #[serde(default, deserialize_with = "de_u128")]
    pub amount: Amount,
    /// For NFT tokens: ids minted to the actor.
    #[serde(default)]
    pub token_ids: Vec<NftId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlacklistSpec {
    pub actor: String,
    pub category: RiskCategory,
    #[serde(default = "default_source")]
    pub source: String,
}

fn default_source() -> String {
    "scenario".into()
}

/// A user's FailSafe deployment; enrollment is submitted by the hot wallet.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccountSpec {
    pub user: String,
    /// Extra signer actors besides the interceptor and balancer custodians.
    #[serde(default)]
    pub cosigners: Vec<String>,
    #[serde(default)]
    pub thresholds: ThresholdSpec,
    pub protected: Vec<String>,
    pub hot_fraction_target: Fraction,
    pub hot_fraction_tolerance: Fraction,
    #[serde(default = "unbounded", deserialize_with = "de_u128")]
    pub max_value_per_window: Amount,
    #[serde(default = "default_window")]
    pub window_length: u64,
    /// Block in which the enrollment transaction is included.
    #[serde(default = "one")]
    pub enroll_at: u64,
    /// Destination-chain actor for the hot wallet's migration intent.
    pub migrate_to: Option<String>,
}

fn unbounded() -> Amount {
    Amount::MAX
}

fn default_window() -> u64 {
    10
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSpec {
    pub intercept: usize,
    pub rebalance: usize,
    pub withdraw: usize,
    pub update_config: usize,
}

impl Default for ThresholdSpec {
    fn default() -> Self {
        let d = crate::contract::Thresholds::default();
        ThresholdSpec {
            intercept: d.intercept,
            rebalance: d.rebalance,
            withdraw: d.withdraw,
            update_config: d.update_config,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceSpec {
    pub fis: bool,
    pub fbr: bool,
    pub balancer: bool,
    pub fis_latency_blocks: u64,
}

impl Default for ServiceSpec {
    fn default() -> Self {
        ServiceSpec {
            fis: true,
            fbr: true,
            balancer: true,
            fis_latency_blocks: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtRisk {
    pub token: String,
    #[serde(deserialize_with = "de_u128")]
    pub amount: Amount,
}

fn default_gas() -> GasPrice {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct Step {
    /// Block the step's effects land in.
    pub at: u64,
    pub label: Option<String>,
    #[serde(flatten)]
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    Transfer {
        from: String,
        to: String,
        token: String,
        #[serde(deserialize_with = "de_u128")]
        amount: Amount,
        #[serde(default = "default_gas", deserialize_with = "de_u128")]
        gas_price: GasPrice,
        #[serde(default)]
        private: bool,
    },
    TransferFrom {
        spender: String,
        owner: String,
        to: String,
        token: String,
        #[serde(deserialize_with = "de_u128")]
        amount: Amount,
        #[serde(default = "default_gas", deserialize_with = "de_u128")]
        gas_price: GasPrice,
        #[serde(default)]
        private: bool,
    },
    Approve {
        owner: String,
        spender: String,
        token: String,
        #[serde(default, deserialize_with = "de_u128")]
        amount: Amount,
        #[serde(default)]
        unlimited: bool,
        #[serde(default = "default_gas", deserialize_with = "de_u128")]
        gas_price: GasPrice,
    },
    NftTransfer {
        from: String,
        to: String,
        token: String,
        token_id: NftId,
        #[serde(default = "default_gas", deserialize_with = "de_u128")]
        gas_price: GasPrice,
        #[serde(default)]
        private: bool,
    },
    RegisterIntent {
        actor: String,
        /// Destination-chain actor; defaults to `actor`.
        dest: Option<String>,
        /// Wallet that sends the registration; defaults to `actor`.
        submitter: Option<String>,
        #[serde(default = "default_gas", deserialize_with = "de_u128")]
        gas_price: GasPrice,
    },
    JoinExceptionsList {
        actor: String,
    },
    SetInflection {
        height: u64,
    },
    QuantumSteal {
        victim: String,
        to: String,
        token: String,
        #[serde(deserialize_with = "de_u128")]
        amount: Amount,
        #[serde(default = "default_gas", deserialize_with = "de_u128")]
        gas_price: GasPrice,
    },
    Bridge {
        actor: String,
        token: String,
        #[serde(deserialize_with = "de_u128")]
        amount: Amount,
        dest: Option<String>,
        /// Sign a fresh intent with a quantum-derived key instead of using
        /// the registered one.
        #[serde(default)]
        forged: bool,
    },
    Withdraw {
        user: String,
        token: String,
        #[serde(deserialize_with = "de_u128")]
        amount: Amount,
        cosigners: Vec<String>,
        #[serde(default = "default_gas", deserialize_with = "de_u128")]
        gas_price: GasPrice,
    },
    ClearThreat {
        user: String,
    },
}

/// Reference to a balance holder: an actor, `<user>.failsafe` for a user's
/// contract, or `escrow` for the bridge escrow.
pub type Holder = String;

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Assertion {
    Balance {
        holder: Holder,
        token: String,
        #[serde(deserialize_with = "de_u128")]
        equals: Amount,
        #[serde(default)]
        dest_ledger: bool,
    },
    Outcome {
        step: String,
        equals: String,
    },
    AssetsLost {
        #[serde(deserialize_with = "de_u128")]
        equals: Amount,
    },
    AssetsSaved {
        #[serde(deserialize_with = "de_u128")]
        equals: Amount,
    },
    Intercepts {
        equals: usize,
    },
    Permitted {
        actor: String,
        token: String,
        #[serde(deserialize_with = "de_u128")]
        equals: Amount,
    },
    HotFraction {
        user: String,
        token: String,
        /// Allowed deviation from target, in units of `1/T`.
        #[serde(default = "one")]
        max_error_units: u64,
    },
    BridgeConserved,
    IntentWarnings {
        equals: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub seed: u64,
    #[serde(default = "one")]
    pub chain_id: u64,
    #[serde(default = "default_dest_chain")]
    pub dest_chain_id: u64,
    /// Blocks to build; defaults to two past the last step.
    pub blocks: Option<u64>,
    #[serde(default)]
    pub services: ServiceSpec,
    #[serde(default)]
    pub fbr: FbrConfig,
    pub tokens: Vec<TokenSpec>,
    pub actors: Vec<ActorSpec>,
    #[serde(default)]
    pub genesis: Vec<Allocation>,
    #[serde(default)]
    pub blacklist: Vec<BlacklistSpec>,
    #[serde(default)]
    pub accounts: Vec<AccountSpec>,
    #[serde(default)]
    pub at_risk: Vec<AtRisk>,
    #[serde(default)]
    pub steps: Vec<Step>,
    #[serde(default)]
    pub assertions: Vec<Assertion>,
}

fn default_dest_chain() -> u64 {
    2
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn block_count(&self) -> u64 {
        self.blocks
            .unwrap_or_else(|| self.steps.iter().map(|s| s.at).max().unwrap_or(0) + 2)
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        let mut names = BTreeSet::new();
        for a in &self.actors {
            if !names.insert(a.name.as_str()) {
                return Err(ScenarioError::DuplicateActor(a.name.clone()));
            }
        }
        if self.steps.windows(2).any(|w| w[0].at > w[1].at) {
            return Err(ScenarioError::Invalid("steps must be sorted by `at`".into()));
        }
        if let Some(s) = self.steps.iter().find(|s| s.at == 0) {
            return Err(ScenarioError::Invalid(format!(
                "step {:?} at block 0; genesis is fixed",
                s.label
            )));
        }
        let mut labels = BTreeSet::new();
        for l in self.steps.iter().filter_map(|s| s.label.as_deref()) {
            if !labels.insert(l) {
                return Err(ScenarioError::Invalid(format!("duplicate step label {l:?}")));
            }
        }
        let tokens: BTreeSet<&str> = self.tokens.iter().map(|t| t.id.as_str()).collect();
        let known_token = |t: &str| {
            if t == "native" || tokens.contains(t) {
                Ok(())
            } else {
                Err(ScenarioError::UnknownToken(t.to_string()))
            }
        };
        let actor = |n: &str| {
            if names.contains(n) {
                Ok(())
            } else {
                Err(ScenarioError::UnknownActor(n.to_string()))
            }
        };
        let holder = |h: &str| match h.strip_suffix(".failsafe") {
            Some(user) => actor(user),
            None if h == "escrow" => Ok(()),
            None => actor(h),
        };
        for g in &self.genesis {
            actor(&g.actor)?;
            known_token(&g.token)?;
        }
        for b in &self.blacklist {
            actor(&b.actor)?;
        }
        for acc in &self.accounts {
            actor(&acc.user)?;
            acc.cosigners.iter().try_for_each(|c| actor(c))?;
            acc.protected.iter().try_for_each(|t| known_token(t))?;
            if let Some(m) = &acc.migrate_to {
                actor(m)?;
            }
        }
        for r in &self.at_risk {
            known_token(&r.token)?;
        }
        for step in &self.steps {
            match &step.action {
                Action::Transfer { from, to, token, .. } | Action::NftTransfer { from, to, token, .. } => {
                    actor(from)?;
                    actor(to)?;
                    known_token(token)?;
                }
                Action::TransferFrom {
                    spender,
                    owner,
                    to,
                    token,
                    ..
                } => {
                    actor(spender)?;
                    actor(owner)?;
                    actor(to)?;
                    known_token(token)?;
                }
                Action::Approve {
                    owner, spender, token, ..
                } => {
                    actor(owner)?;
                    actor(spender)?;
                    known_token(token)?;
                }
                Action::RegisterIntent {
                    actor: a,
                    dest,
                    submitter,
                    ..
                } => {
                    actor(a)?;
                    dest.iter().chain(submitter).try_for_each(|n| actor(n))?;
                }
                Action::JoinExceptionsList { actor: a } | Action::ClearThreat { user: a } => actor(a)?,
                Action::SetInflection { .. } => {}
                Action::QuantumSteal { victim, to, token, .. } => {
                    actor(victim)?;
                    actor(to)?;
                    known_token(token)?;
                }
                Action::Bridge {
                    actor: a, token, dest, ..
                } => {
                    actor(a)?;
                    known_token(token)?;
                    dest.iter().try_for_each(|n| actor(n))?;
                }
                Action::Withdraw {
                    user, token, cosigners, ..
                } => {
                    actor(user)?;
                    known_token(token)?;
                    cosigners.iter().try_for_each(|n| actor(n))?;
                }
            }
        }
        for a in &self.assertions {
            match a {
                Assertion::Balance { holder: h, token, .. } => {
                    holder(h)?;
                    known_token(token)?;
                }
                Assertion::Outcome { step, .. } if !labels.contains(step.as_str()) => {
                    return Err(ScenarioError::Invalid(format!(
                        "assertion refers to unknown step {step:?}"
                    )));
                }
                Assertion::Permitted { actor: a, token, .. } | Assertion::HotFraction { user: a, token, .. } => {
                    actor(a)?;
                    known_token(token)?;
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractions() {
        assert_eq!("1/5".parse::<Fraction>().unwrap().0, Ratio::new(1, 5));
        assert_eq!("0.2".parse::<Fraction>().unwrap().0, Ratio::new(1, 5));
        assert_eq!("0.05".parse::<Fraction>().unwrap().0, Ratio::new(1, 20));
        assert_eq!("1".parse::<Fraction>().unwrap().0, Ratio::new(1, 1));
        assert!("1/0".parse::<Fraction>().is_err());
        assert!("x".parse::<Fraction>().is_err());
        assert!(".".parse::<Fraction>().is_err());
    }

    const MINIMAL: &str = r#"
name = "t"
seed = 1
tokens = [{ id = "USDC", kind = "fungible" }]
actors = [{ name = "alice", role = "user" }, { name = "bob", role = "other" }]
genesis = [{ actor = "alice", token = "USDC", amount = 10 }]

[[steps]]
at = 1
label = "pay"
action = "transfer"
from = "alice"
to = "bob"
token = "USDC"
amount = 3

[[assertions]]
kind = "balance"
holder = "bob"
token = "USDC"
equals = 3
"#;

    #[test]
    fn parses_minimal() {
        let s = Scenario::from_toml(MINIMAL).unwrap();
        assert_eq!(s.block_count(), 3);
        assert!(matches!(
            s.steps[0].action,
            Action::Transfer {
                amount: 3,
                gas_price: 1,
                ..
            }
        ));
    }

    #[test]
    fn unknown_actor_rejected() {
        let text = MINIMAL.replace("to = \"bob\"", "to = \"carol\"");
        assert_eq!(
            Scenario::from_toml(&text),
            Err(ScenarioError::UnknownActor("carol".into()))
        );
    }

    #[test]
    fn duplicate_actor_rejected() {
        let text = MINIMAL.replace("name = \"bob\"", "name = \"alice\"");
        assert_eq!(
            Scenario::from_toml(&text),
            Err(ScenarioError::DuplicateActor("alice".into()))
        );
    }

    #[test]
    fn parse_errors_are_reported() {
        assert!(matches!(Scenario::from_toml("seed = "), Err(ScenarioError::Parse(_))));
    }
}
