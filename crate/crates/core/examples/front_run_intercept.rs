//! A stolen key drains a hot wallet; the interceptor sees the pending
//! transaction, outbids it and moves the funds into the FailSafe contract.

use failsafe_qmig::contract::{EnrollArgs, PolicyConfig, Thresholds};
use failsafe_qmig::crypto::KeyPair;
use failsafe_qmig::custody::{CustodianRole, InMemoryCustodian};
use failsafe_qmig::fbr::{FbrConfig, Reconnaissance};
use failsafe_qmig::fis::{FisConfig, Interceptor};
use failsafe_qmig::ledger::{Asset, Chain, ContractCall, Genesis, Payload, TokenId, TokenKind, Transaction};
use failsafe_qmig::qmig::{build_intent_digest, TransferIntentSource};
use num_rational::Ratio;

fn key(b: u8) -> KeyPair {
    KeyPair::from_private([b; 32]).expect("valid scalar")
}

fn main() {
    let (alice, mallory, service) = (key(1), key(2), key(3));
    let usdc = Asset::token("USDC");
    let mut chain = Chain::new(Genesis {
        chain_id: 1,
        tokens: vec![(TokenId::new("USDC"), TokenKind::Fungible)],
        allocations: vec![(alice.address(), usdc.clone(), 1000)],
        ..Genesis::default()
    })
    .expect("valid genesis");

    let contract = chain
        .deploy_failsafe(
            "alice",
            vec![service.address()],
            Thresholds {
                withdraw: 1,
                update_config: 1,
                ..Thresholds::default()
            },
        )
        .expect("valid thresholds");
    let own_intent = TransferIntentSource {
        from_chain_id: 1,
        from_address: alice.address(),
        dest_chain_id: 2,
        dest_address: alice.address(),
    };
    let (_, hot_intent) = build_intent_digest(&own_intent, &alice).expect("alice's own key");
    let enroll = EnrollArgs {
        policy: PolicyConfig {
            hot_fraction_target: Ratio::from_integer(1),
            hot_fraction_tolerance: Ratio::from_integer(0),
            max_value_per_window: u128::MAX,
            window_length: 10,
        },
        protected_tokens: vec![TokenId::new("USDC")],
        hot_intent,
        extra_wallets: Vec::new(),
    };
    let payload = Payload::ContractCall {
        contract,
        call: ContractCall::Enroll(enroll),
    };
    chain
        .submit_transaction(Transaction::signed(&alice, 0, 1, payload))
        .expect("accepted");
    chain.build_block();

    let mut fbr = Reconnaissance::new(FbrConfig::default());
    fbr.ingest_blacklist(&format!("{} sanctioned ofac\n", mallory.address()), 0)
        .expect("well-formed feed");
    fbr.observe_all(chain.events()).expect("in order");

    // whoever holds alice's seed phrase signs a drain to a sanctioned address
    let drain = Payload::TokenTransfer {
        token: TokenId::new("USDC"),
        to: mallory.address(),
        amount: 1000,
    };
    let drain_id = chain
        .submit_transaction(Transaction::signed(&alice, 1, 100, drain))
        .expect("accepted");

    let custodian = InMemoryCustodian::new().with_key(CustodianRole::Interceptor, service);
    let mut interceptor = Interceptor::new(FisConfig::default(), Box::new(custodian));
    interceptor.observe(&chain);
    interceptor.enqueue(chain.take_notifications());
    let defended = interceptor.process(&mut chain, Some(&fbr)).expect("custodian online");
    println!("defended contracts: {}", defended.len());

    let block = chain.build_block();
    println!("block {}:", block.height);
    for t in &block.txs {
        let who = if t.id == drain_id { "attacker" } else { "intercept" };
        println!("  {who:<9} gas={:<4} {}", t.tx.gas_price, t.outcome);
    }
    println!(
        "hot wallet {} USDC, contract {} USDC, mallory {} USDC",
        chain.balance(&alice.address(), &usdc),
        chain.balance(&contract, &usdc),
        chain.balance(&mallory.address(), &usdc)
    );
    for alert in interceptor.alerts_for("alice") {
        println!("alert: {alert}");
    }
}
