//! Keeping a target share of funds in the hot wallet.

use failsafe_qmig::balancer::{check_ratio, Balancer};
use failsafe_qmig::contract::{EnrollArgs, PolicyConfig, Thresholds};
use failsafe_qmig::crypto::{keccak256, Address, KeyPair};
use failsafe_qmig::custody::{CustodianRole, InMemoryCustodian};
use failsafe_qmig::ledger::{Asset, Chain, ContractCall, Genesis, Payload, TokenId, TokenKind, Transaction};
use num_rational::Ratio;

fn key(b: u8) -> KeyPair {
    KeyPair::from_private([b; 32]).expect("valid scalar")
}

fn show(chain: &Chain, hot: &Address, contract: &Address) {
    let usdc = Asset::token("USDC");
    let (h, c) = (chain.balance(hot, &usdc), chain.balance(contract, &usdc));
    println!(
        "block {}: hot={h} cold={c} hot share={:.3}",
        chain.height(),
        h as f64 / (h + c) as f64
    );
}

fn main() {
    let policy = PolicyConfig {
        hot_fraction_target: Ratio::new(1, 5),
        hot_fraction_tolerance: Ratio::new(1, 20),
        max_value_per_window: u128::MAX,
        window_length: 10,
    };
    println!("pure check, hot 500 / cold 500: {:?}", check_ratio(500, 500, &policy));
    println!("pure check, hot 220 / cold 780: {:?}", check_ratio(220, 780, &policy));

    let (alice, bob, service) = (key(1), key(2), key(3));
    let usdc = Asset::token("USDC");
    let mut chain = Chain::new(Genesis {
        chain_id: 1,
        tokens: vec![(TokenId::new("USDC"), TokenKind::Fungible)],
        allocations: vec![(alice.address(), usdc.clone(), 1000), (bob.address(), usdc, 600)],
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
    let enroll = ContractCall::Enroll(EnrollArgs {
        policy,
        protected_tokens: vec![TokenId::new("USDC")],
        hot_intent: keccak256(b"alice migration intent"),
        extra_wallets: Vec::new(),
    });
    let payload = Payload::ContractCall { contract, call: enroll };
    chain
        .submit_transaction(Transaction::signed(&alice, 0, 1, payload))
        .expect("accepted");
    chain.build_block();
    show(&chain, &alice.address(), &contract);

    let custodian = InMemoryCustodian::new().with_key(CustodianRole::Balancer, service);
    let mut balancer = Balancer::new(Box::new(custodian));
    balancer.tick(&mut chain).expect("custodian online");
    chain.build_block();
    show(&chain, &alice.address(), &contract);

    let inflow = Payload::TokenTransfer {
        token: TokenId::new("USDC"),
        to: alice.address(),
        amount: 600,
    };
    chain
        .submit_transaction(Transaction::signed(&bob, 0, 1, inflow))
        .expect("accepted");
    chain.build_block();
    show(&chain, &alice.address(), &contract);

    balancer.tick(&mut chain).expect("custodian online");
    chain.build_block();
    show(&chain, &alice.address(), &contract);
}
