//! Gas-price ordering, nonce sequencing and the private relay.

use failsafe_qmig::crypto::{sign, KeyPair};
use failsafe_qmig::ledger::{
    Asset, Chain, ExceptionsList, Genesis, Payload, PrivateSubmission, TokenId, TokenKind, Transaction,
};

fn key(b: u8) -> KeyPair {
    KeyPair::from_private([b; 32]).expect("valid scalar")
}

fn pay(from: &KeyPair, nonce: u64, gas: u128, to: &KeyPair) -> Transaction {
    let payload = Payload::TokenTransfer {
        token: TokenId::new("USDC"),
        to: to.address(),
        amount: 1,
    };
    Transaction::signed(from, nonce, gas, payload)
}

fn main() {
    let (a, b, c, sink) = (key(1), key(2), key(3), key(9));
    let mut chain = Chain::new(Genesis {
        chain_id: 1,
        tokens: vec![(TokenId::new("USDC"), TokenKind::Fungible)],
        allocations: [&a, &b, &c]
            .iter()
            .map(|k| (k.address(), Asset::token("USDC"), 100))
            .collect(),
        ..Genesis::default()
    })
    .expect("valid genesis");

    for (k, gas) in [(&a, 5), (&b, 9), (&c, 7)] {
        chain.submit_transaction(pay(k, 0, gas, &sink)).expect("accepted");
    }
    // a's nonce 2 waits for nonce 1
    chain.submit_transaction(pay(&a, 2, 50, &sink)).expect("accepted");
    chain.submit_transaction(pay(&a, 1, 1, &sink)).expect("accepted");

    let block = chain.build_block();
    println!("block {} execution order:", block.height);
    for t in &block.txs {
        println!(
            "  from={} nonce={} gas={} {}",
            t.tx.from, t.tx.nonce, t.tx.gas_price, t.outcome
        );
    }

    // after opting in, the relay refuses private transactions from this address
    let sig = sign(&a, &ExceptionsList::registration_digest(&a.address()));
    chain.register_exception(a.address(), &sig).expect("registered");
    let relayed = chain
        .submit_private_transaction(pay(&a, 3, 10, &sink))
        .expect("well formed");
    println!(
        "private tx from listed address: {}",
        match relayed {
            PrivateSubmission::Accepted(id) => format!("accepted {id}"),
            PrivateSubmission::FilteredByExceptionsList => "FilteredByExceptionsList".to_string(),
        }
    );
    let relayed = chain
        .submit_private_transaction(pay(&b, 1, 10, &sink))
        .expect("well formed");
    println!(
        "private tx from unlisted address accepted: {}",
        matches!(relayed, PrivateSubmission::Accepted(_))
    );
    println!("public announcements pending: {}", chain.take_notifications().len());
}
