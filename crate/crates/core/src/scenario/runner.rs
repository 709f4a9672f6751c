use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use num_rational::Ratio;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::report::{AssertionResult, RunReport};
use super::schema::{AccountSpec, Action, Assertion, Role, Scenario};
use super::ScenarioError;
use crate::balancer::Balancer;
use crate::bridge::{Bridge, BridgeError, BridgeTransfer};
use crate::codec::Encoder;
use crate::contract::{
    authorization_digest, AssetMove, Authorization, EnrollArgs, Operation, PolicyConfig, Thresholds,
};
use crate::crypto::{pq_sign, sign, Address, Denied, KeyPair, PqKeyPair, RecoverableSignature};
use crate::custody::{CustodianRole, InMemoryCustodian};
use crate::fbr::{BlacklistEntry, Reconnaissance};
use crate::fis::{FisConfig, Interceptor};
use crate::ledger::{
    Allowance, Amount, Asset, Chain, ContractCall, EventKind, ExceptionsList, GasPrice, Genesis, Payload,
    PrivateSubmission, TokenId, Transaction, TxId,
};
use crate::qmig::{
    build_intent_digest, inflection_message, permitted_amount, submit_intent_registration, TransferIntentSource,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Service {
    Fis,
    Fbr,
    Balancer,
}

impl FromStr for Service {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fis" => Ok(Service::Fis),
            "fbr" => Ok(Service::Fbr),
            "balancer" => Ok(Service::Balancer),
            _ => Err(format!("unknown service {s:?} (expected fis, fbr or balancer)")),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub disable: BTreeSet<Service>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepResult {
    Submitted(TxId),
    FilteredByExceptionsList,
    Bridged(Result<(), BridgeError>),
    Denied(Denied),
    Done,
    Failed(String),
}

/// Key for `name` under `seed`, stable across runs.
pub fn derive_actor_key(seed: u64, name: &str) -> KeyPair {
    (0u32..)
        .find_map(|counter| {
            let d = Encoder::new()
                .tag("scenario:actor-key")
                .u64(seed)
                .str(name)
                .u32(counter)
                .finish();
            KeyPair::from_private(d.0).ok()
        })
        .expect("some counter yields a valid scalar")
}

fn asset_of(token: &str) -> Asset {
    if token == "native" {
        Asset::Native
    } else {
        Asset::token(token)
    }
}

/// Everything a finished run leaves behind.
pub struct Run {
    pub scenario: Scenario,
    pub seed: u64,
    pub chain: Chain,
    pub bridge: Bridge<ChaCha20Rng>,
    pub fbr: Reconnaissance,
    pub interceptor: Interceptor,
    pub balancer: Balancer,
    pub keys: BTreeMap<String, KeyPair>,
    pub contracts: BTreeMap<String, Address>,
    pub steps: Vec<(Option<String>, StepResult)>,
    /// Every transfer-intent signature produced during the run.
    pub intent_signatures: Vec<RecoverableSignature>,
    pub report: RunReport,
}

impl Run {
    pub fn event_log(&self) -> String {
        self.chain.event_log()
    }

    pub fn address(&self, actor: &str) -> Option<Address> {
        self.keys.get(actor).map(KeyPair::address)
    }

    pub fn step(&self, label: &str) -> Option<&StepResult> {
        self.steps
            .iter()
            .find(|(l, _)| l.as_deref() == Some(label))
            .map(|(_, r)| r)
    }

    /// Outcome string of a labelled step: `Executed`, `Reverted:<code>`,
    /// `Pending`, `FilteredByExceptionsList`, `ok`, a bridge error code,
    /// `Denied:<reason>` or `Failed:<message>`.
    pub fn outcome_of(&self, label: &str) -> Option<String> {
        self.step(label).map(|r| describe(&self.chain, r))
    }

    fn holder(&self, holder: &str) -> Option<Address> {
        if holder == "escrow" {
            return Some(self.bridge.escrow());
        }
        match holder.strip_suffix(".failsafe") {
            Some(user) => self.contracts.get(user).copied(),
            None => self.address(holder),
        }
    }
}

fn describe(chain: &Chain, r: &StepResult) -> String {
    match r {
        StepResult::Submitted(id) => chain
            .events()
            .iter()
            .find_map(|e| match &e.kind {
                EventKind::TxIncluded { tx, outcome, .. } if tx == id => Some(outcome.to_string()),
                _ => None,
            })
            .unwrap_or_else(|| "Pending".into()),
        StepResult::FilteredByExceptionsList => "FilteredByExceptionsList".into(),
        StepResult::Bridged(Ok(())) | StepResult::Done => "ok".into(),
        StepResult::Bridged(Err(e)) => e.code().into(),
        StepResult::Denied(d) => format!("Denied:{d:?}"),
        StepResult::Failed(m) => format!("Failed:{m}"),
    }
}

struct Runner<'a> {
    scenario: &'a Scenario,
    chain: Chain,
    keys: BTreeMap<String, KeyPair>,
    contracts: BTreeMap<String, Address>,
    intents: BTreeMap<(String, String), RecoverableSignature>,
    intent_signatures: Vec<RecoverableSignature>,
    admin: PqKeyPair,
    bridge: Bridge<ChaCha20Rng>,
    auth_nonce: u64,
}

impl Runner<'_> {
    fn key(&self, actor: &str) -> &KeyPair {
        &self.keys[actor]
    }

    fn addr(&self, actor: &str) -> Address {
        self.keys[actor].address()
    }

    fn submit(&mut self, signer: KeyPair, gas_price: GasPrice, payload: Payload, private: bool) -> StepResult {
        let nonce = self.chain.next_nonce(&signer.address());
        let tx = Transaction::signed(&signer, nonce, gas_price, payload);
        let result = if private {
            self.chain.submit_private_transaction(tx).map(|r| match r {
                PrivateSubmission::Accepted(id) => StepResult::Submitted(id),
                PrivateSubmission::FilteredByExceptionsList => StepResult::FilteredByExceptionsList,
            })
        } else {
            self.chain.submit_transaction(tx).map(StepResult::Submitted)
        };
        result.unwrap_or_else(|e| StepResult::Failed(e.to_string()))
    }

    fn intent_source(&self, actor: &str, dest: &str) -> TransferIntentSource {
        TransferIntentSource {
            from_chain_id: self.chain.chain_id(),
            from_address: self.addr(actor),
            dest_chain_id: self.scenario.dest_chain_id,
            dest_address: self.addr(dest),
        }
    }

    fn enroll(&mut self, acc: &AccountSpec) -> StepResult {
        let dest = acc.migrate_to.clone().unwrap_or_else(|| acc.user.clone());
        let source = self.intent_source(&acc.user, &dest);
        let key = self.key(&acc.user).clone();
        let (sig, hot_intent) = build_intent_digest(&source, &key).expect("source built from this key");
        self.intents.insert((acc.user.clone(), dest), sig);
        self.intent_signatures.push(sig);
        let args = EnrollArgs {
            policy: PolicyConfig {
                hot_fraction_target: acc.hot_fraction_target.0,
                hot_fraction_tolerance: acc.hot_fraction_tolerance.0,
                max_value_per_window: acc.max_value_per_window,
                window_length: acc.window_length,
            },
            protected_tokens: acc.protected.iter().map(TokenId::new).collect(),
            hot_intent,
            extra_wallets: Vec::new(),
        };
        let contract = self.contracts[&acc.user];
        self.submit(
            key,
            1,
            Payload::ContractCall {
                contract,
                call: ContractCall::Enroll(args),
            },
            false,
        )
    }

    fn apply(&mut self, action: &Action) -> StepResult {
        match action {
            Action::Transfer {
                from,
                to,
                token,
                amount,
                gas_price,
                private,
            } => {
                let to = self.addr(to);
                let payload = match asset_of(token) {
                    Asset::Native => Payload::NativeTransfer { to, amount: *amount },
                    Asset::Token(token) => Payload::TokenTransfer {
                        token,
                        to,
                        amount: *amount,
                    },
                };
                self.submit(self.key(from).clone(), *gas_price, payload, *private)
            }
            Action::TransferFrom {
                spender,
                owner,
                to,
                token,
                amount,
                gas_price,
                private,
            } => {
                let payload = Payload::TokenTransferFrom {
                    token: TokenId::new(token),
                    owner: self.addr(owner),
                    to: self.addr(to),
                    amount: *amount,
                };
                self.submit(self.key(spender).clone(), *gas_price, payload, *private)
            }
            Action::Approve {
                owner,
                spender,
                token,
                amount,
                unlimited,
                gas_price,
            } => {
                let payload = Payload::Approve {
                    token: TokenId::new(token),
                    spender: self.addr(spender),
                    allowance: if *unlimited {
                        Allowance::Unlimited
                    } else {
                        Allowance::Limited(*amount)
                    },
                };
                self.submit(self.key(owner).clone(), *gas_price, payload, false)
            }
            Action::NftTransfer {
                from,
                to,
                token,
                token_id,
                gas_price,
                private,
            } => {
                let payload = Payload::NftTransfer {
                    token: TokenId::new(token),
                    to: self.addr(to),
                    token_id: *token_id,
                };
                self.submit(self.key(from).clone(), *gas_price, payload, *private)
            }
            Action::RegisterIntent {
                actor,
                dest,
                submitter,
                gas_price,
            } => {
                let dest = dest.clone().unwrap_or_else(|| actor.clone());
                let source = self.intent_source(actor, &dest);
                let (sig, digest) = build_intent_digest(&source, self.key(actor)).expect("source built from this key");
                self.intents.insert((actor.clone(), dest), sig);
                self.intent_signatures.push(sig);
                let submitter = self.key(submitter.as_deref().unwrap_or(actor)).clone();
                match submit_intent_registration(&mut self.chain, &submitter, &source, digest, *gas_price) {
                    Ok(s) => StepResult::Submitted(s.tx),
                    Err(e) => StepResult::Failed(e.to_string()),
                }
            }
            Action::JoinExceptionsList { actor } => {
                let key = self.key(actor).clone();
                let sig = sign(&key, &ExceptionsList::registration_digest(&key.address()));
                match self.chain.register_exception(key.address(), &sig) {
                    Ok(()) => StepResult::Done,
                    Err(e) => StepResult::Failed(e.to_string()),
                }
            }
            Action::SetInflection { height } => {
                let sig = match pq_sign(&mut self.admin, &inflection_message(*height)) {
                    Ok(sig) => sig,
                    Err(e) => return StepResult::Failed(e.to_string()),
                };
                match self.chain.set_inflection_point(*height, &sig.to_bytes()) {
                    Ok(()) => StepResult::Done,
                    Err(e) => StepResult::Failed(e.to_string()),
                }
            }
            Action::QuantumSteal {
                victim,
                to,
                token,
                amount,
                gas_price,
            } => {
                let height = self.chain.height();
                let target = self.addr(victim);
                let stolen = match self.chain.oracle_mut().derive_private(target, height) {
                    Ok(k) => k,
                    Err(d) => return StepResult::Denied(d),
                };
                let to = self.addr(to);
                let payload = match asset_of(token) {
                    Asset::Native => Payload::NativeTransfer { to, amount: *amount },
                    Asset::Token(token) => Payload::TokenTransfer {
                        token,
                        to,
                        amount: *amount,
                    },
                };
                self.submit(stolen, *gas_price, payload, false)
            }
            Action::Bridge {
                actor,
                token,
                amount,
                dest,
                forged,
            } => {
                let dest = dest.clone().unwrap_or_else(|| actor.clone());
                let source = self.intent_source(actor, &dest);
                let sig = if *forged {
                    let height = self.chain.height();
                    match self.chain.oracle_mut().derive_private(source.from_address, height) {
                        Ok(k) => sign(&k, &source.digest()),
                        Err(d) => return StepResult::Denied(d),
                    }
                } else {
                    match self.intents.get(&(actor.clone(), dest.clone())) {
                        Some(sig) => *sig,
                        None => sign(self.key(actor), &source.digest()),
                    }
                };
                self.intent_signatures.push(sig);
                let req = BridgeTransfer {
                    source,
                    asset: asset_of(token),
                    amount: *amount,
                    intent_sig: sig,
                    requested_at: self.chain.height(),
                };
                let result = self.bridge.bridge_transfer(&mut self.chain, &req);
                // The raw signature is public from here on.
                self.chain.oracle_mut().observe_raw_signature(&source.digest(), &sig);
                StepResult::Bridged(result)
            }
            Action::Withdraw {
                user,
                token,
                amount,
                cosigners,
                gas_price,
            } => {
                let contract = self.contracts[user];
                let operation = Operation::Withdraw {
                    asset: AssetMove::Fungible {
                        token: TokenId::new(token),
                        amount: *amount,
                    },
                };
                self.auth_nonce += 1;
                let digest = authorization_digest(&contract, &operation, self.auth_nonce);
                let signatures = cosigners.iter().map(|c| sign(self.key(c), &digest)).collect();
                let payload = Payload::ContractCall {
                    contract,
                    call: ContractCall::Execute {
                        operation,
                        authorization: Authorization {
                            nonce: self.auth_nonce,
                            signatures,
                        },
                    },
                };
                self.submit(self.key(user).clone(), *gas_price, payload, false)
            }
            Action::ClearThreat { .. } => StepResult::Done,
        }
    }
}

/// Runs `scenario` to completion and evaluates its assertions.
pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<Run, ScenarioError> {
    let seed = opts.seed.unwrap_or(scenario.seed);
    let services = scenario.services;
    let fis_on = services.fis && !opts.disable.contains(&Service::Fis);
    let fbr_on = services.fbr && !opts.disable.contains(&Service::Fbr);
    let balancer_on = services.balancer && !opts.disable.contains(&Service::Balancer);

    let keys: BTreeMap<String, KeyPair> = scenario
        .actors
        .iter()
        .map(|a| (a.name.clone(), derive_actor_key(seed, &a.name)))
        .collect();
    let interceptor_key = derive_actor_key(seed, "service:interceptor");
    let balancer_key = derive_actor_key(seed, "service:balancer");

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let admin = PqKeyPair::generate(&mut rng);
    let bridge = Bridge::new(scenario.dest_chain_id, ChaCha20Rng::seed_from_u64(rng.next_u64()));

    let mut genesis = Genesis {
        chain_id: scenario.chain_id,
        tokens: scenario.tokens.iter().map(|t| (TokenId::new(&t.id), t.kind)).collect(),
        allocations: Vec::new(),
        nfts: Vec::new(),
        qmig_admin: Some(admin.public().clone()),
    };
    for g in &scenario.genesis {
        let to = keys[&g.actor].address();
        if g.amount > 0 {
            genesis.allocations.push((to, asset_of(&g.token), g.amount));
        }
        for id in &g.token_ids {
            genesis.nfts.push((to, TokenId::new(&g.token), *id));
        }
    }
    let mut chain = Chain::new(genesis).map_err(|e| ScenarioError::Setup(format!("genesis: {e}")))?;
    for k in keys.values() {
        chain.oracle_mut().register_key(k);
    }

    let mut fbr = Reconnaissance::new(scenario.fbr.clone());
    for b in &scenario.blacklist {
        fbr.add_entry(BlacklistEntry {
            address: keys[&b.actor].address(),
            category: b.category,
            source: b.source.clone(),
            added_at: 0,
        });
    }

    let mut contracts = BTreeMap::new();
    for acc in &scenario.accounts {
        let mut signers = vec![interceptor_key.address(), balancer_key.address()];
        signers.extend(acc.cosigners.iter().map(|c| keys[c].address()));
        let t = acc.thresholds;
        let thresholds = Thresholds {
            intercept: t.intercept,
            rebalance: t.rebalance,
            withdraw: t.withdraw,
            update_config: t.update_config,
        };
        let contract = chain
            .deploy_failsafe(&acc.user, signers, thresholds)
            .map_err(|e| ScenarioError::Setup(format!("deploy for {}: {e}", acc.user)))?;
        contracts.insert(acc.user.clone(), contract);
    }

    let mut interceptor = Interceptor::new(
        FisConfig {
            latency_blocks: services.fis_latency_blocks,
        },
        Box::new(InMemoryCustodian::new().with_key(CustodianRole::Interceptor, interceptor_key)),
    );
    let mut balancer = Balancer::new(Box::new(
        InMemoryCustodian::new().with_key(CustodianRole::Balancer, balancer_key),
    ));

    let mut runner = Runner {
        scenario,
        chain,
        keys,
        contracts,
        intents: BTreeMap::new(),
        intent_signatures: Vec::new(),
        admin,
        bridge,
        auth_nonce: 0,
    };
    let mut step_results = Vec::new();
    let mut fbr_cursor = 0;
    let mut steps = scenario.steps.iter().peekable();

    for block in 1..=scenario.block_count() {
        for acc in scenario.accounts.iter().filter(|a| a.enroll_at == block) {
            let r = runner.enroll(acc);
            step_results.push((Some(format!("enroll:{}", acc.user)), r));
        }
        while let Some(step) = steps.next_if(|s| s.at == block) {
            if let Action::ClearThreat { user } = &step.action {
                if let Some(c) = runner.contracts.get(user) {
                    balancer.resume(c);
                }
            }
            let r = runner.apply(&step.action);
            step_results.push((step.label.clone(), r));
        }

        let pending = runner.chain.take_notifications();
        if fis_on {
            interceptor.observe(&runner.chain);
            interceptor.enqueue(pending);
            let defended = interceptor
                .process(&mut runner.chain, fbr_on.then_some(&fbr))
                .map_err(|e| ScenarioError::Setup(format!("interceptor: {e}")))?;
            for c in defended {
                balancer.pause(c);
            }
        }
        if balancer_on {
            balancer
                .tick(&mut runner.chain)
                .map_err(|e| ScenarioError::Setup(format!("balancer: {e}")))?;
        }
        observe_fbr(&mut fbr, &runner.chain, &mut fbr_cursor)?;
        runner.chain.build_block();
    }
    interceptor.observe(&runner.chain);
    observe_fbr(&mut fbr, &runner.chain, &mut fbr_cursor)?;

    let Runner {
        chain,
        keys,
        contracts,
        intent_signatures,
        bridge,
        ..
    } = runner;
    let mut run = Run {
        scenario: scenario.clone(),
        seed,
        chain,
        bridge,
        fbr,
        interceptor,
        balancer,
        keys,
        contracts,
        steps: step_results,
        intent_signatures,
        report: RunReport {
            scenario: scenario.name.clone(),
            seed,
            blocks_built: 0,
            assertions: Vec::new(),
            assets_at_risk: 0,
            assets_saved: 0,
            assets_lost: 0,
            intercepts: 0,
            intercept_latency_blocks: None,
            alerts: Vec::new(),
        },
    };
    run.report = build_report(&run);
    Ok(run)
}

fn observe_fbr(fbr: &mut Reconnaissance, chain: &Chain, cursor: &mut usize) -> Result<(), ScenarioError> {
    let events = &chain.events()[*cursor..];
    *cursor = chain.events().len();
    fbr.observe_all(events).map_err(|e| ScenarioError::Setup(e.to_string()))
}

fn inclusion_height(chain: &Chain, id: &TxId) -> Option<u64> {
    chain.events().iter().find_map(|e| match &e.kind {
        EventKind::TxIncluded { tx, .. } if tx == id => Some(e.height),
        _ => None,
    })
}

fn build_report(run: &Run) -> RunReport {
    let scenario = &run.scenario;
    let chain = &run.chain;
    let attackers: Vec<Address> = scenario
        .actors
        .iter()
        .filter(|a| a.role == Role::Attacker)
        .map(|a| run.keys[&a.name].address())
        .collect();

    let mut at_risk = 0;
    let mut lost = 0;
    for r in &scenario.at_risk {
        let asset = asset_of(&r.token);
        let gain: i128 = attackers
            .iter()
            .map(|a| {
                let start = chain.balance_at(a, &asset, 0).unwrap_or(0) as i128;
                let end = chain.balance(a, &asset) + run.bridge.dest().balance(a, &asset);
                end as i128 - start
            })
            .sum();
        at_risk += r.amount;
        lost += (gain.max(0) as Amount).min(r.amount);
    }

    let latency = run
        .interceptor
        .intercepts()
        .iter()
        .filter_map(|rec| inclusion_height(chain, &rec.intercept_tx).map(|h| h.saturating_sub(rec.seen_at + 1)))
        .max();

    let mut report = RunReport {
        scenario: scenario.name.clone(),
        seed: run.seed,
        blocks_built: chain.height(),
        assertions: Vec::new(),
        assets_at_risk: at_risk,
        assets_saved: at_risk - lost,
        assets_lost: lost,
        intercepts: run.interceptor.intercepts().len(),
        intercept_latency_blocks: latency,
        alerts: run.interceptor.alert_log().iter().map(|a| a.to_string()).collect(),
    };
    report.assertions = scenario.assertions.iter().map(|a| evaluate(run, &report, a)).collect();
    report
}

fn check(description: String, expected: impl PartialEq + ToString, got: impl PartialEq + ToString) -> AssertionResult {
    let passed = expected.to_string() == got.to_string();
    AssertionResult {
        description,
        passed,
        detail: Some(got.to_string()),
    }
}

fn evaluate(run: &Run, report: &RunReport, assertion: &Assertion) -> AssertionResult {
    let chain = &run.chain;
    match assertion {
        Assertion::Balance {
            holder,
            token,
            equals,
            dest_ledger,
        } => {
            let where_ = if *dest_ledger { " on destination" } else { "" };
            let desc = format!("balance {holder} {token}{where_} = {equals}");
            let Some(addr) = run.holder(holder) else {
                return fail(desc, "unresolved holder");
            };
            let asset = asset_of(token);
            let got = if *dest_ledger {
                run.bridge.dest().balance(&addr, &asset)
            } else {
                chain.balance(&addr, &asset)
            };
            check(desc, equals, got)
        }
        Assertion::Outcome { step, equals } => {
            let got = run.outcome_of(step).unwrap_or_else(|| "missing".into());
            check(format!("step {step} outcome = {equals}"), equals, got)
        }
        Assertion::AssetsLost { equals } => check(format!("assets_lost = {equals}"), equals, report.assets_lost),
        Assertion::AssetsSaved { equals } => check(format!("assets_saved = {equals}"), equals, report.assets_saved),
        Assertion::Intercepts { equals } => check(format!("intercepts = {equals}"), equals, report.intercepts),
        Assertion::Permitted { actor, token, equals } => {
            let desc = format!("permitted {actor} {token} = {equals}");
            match permitted_amount(chain, &run.keys[actor].address(), &asset_of(token)) {
                Ok(got) => check(desc, equals, got),
                Err(e) => fail(desc, &e.to_string()),
            }
        }
        Assertion::HotFraction {
            user,
            token,
            max_error_units,
        } => {
            let desc = format!("hot fraction of {user} {token} within {max_error_units}/T of target");
            let account = run.contracts.get(user).and_then(|c| chain.failsafe().account(c));
            let Some(policy) = account.and_then(|a| a.policy()) else {
                return fail(desc, "not enrolled");
            };
            let asset = asset_of(token);
            let hot = chain.balance(&run.keys[user].address(), &asset);
            let cold = chain.balance(&run.contracts[user], &asset);
            let total = hot + cold;
            if total == 0 {
                return check(desc, "ok", "ok");
            }
            let share = Ratio::new(hot, total);
            let target = policy.hot_fraction_target;
            let dev = if share > target { share - target } else { target - share };
            let passed = dev <= Ratio::new(u128::from(*max_error_units), total);
            AssertionResult {
                description: desc,
                passed,
                detail: Some(format!("hot={hot} total={total}")),
            }
        }
        Assertion::BridgeConserved => check("bridge conservation".into(), true, run.bridge.book().is_conserved()),
        Assertion::IntentWarnings { equals } => {
            let got = chain
                .events()
                .iter()
                .filter(|e| matches!(e.kind, EventKind::IntentWarning { .. }))
                .count();
            check(format!("intent warnings = {equals}"), equals, got)
        }
    }
}

fn fail(description: String, detail: &str) -> AssertionResult {
    AssertionResult {
        description,
        passed: false,
        detail: Some(detail.to_string()),
    }
}
