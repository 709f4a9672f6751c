//! Blacklist feeds and behavioural heuristics feeding one risk score.

use failsafe_qmig::crypto::KeyPair;
use failsafe_qmig::fbr::{FbrConfig, Reconnaissance};
use failsafe_qmig::ledger::{Asset, Chain, Genesis, Payload, Transaction};

fn key(b: u8) -> KeyPair {
    KeyPair::from_private([b; 32]).expect("valid scalar")
}

fn main() {
    let victims: Vec<KeyPair> = (1..=3).map(key).collect();
    let (collector, exit, listed) = (key(7), key(8), key(9));
    let mut chain = Chain::new(Genesis {
        chain_id: 1,
        allocations: victims.iter().map(|v| (v.address(), Asset::Native, 500)).collect(),
        ..Genesis::default()
    })
    .expect("valid genesis");

    // three wallets pay one fresh address, which forwards nearly everything
    for v in &victims {
        let pay = Payload::NativeTransfer {
            to: collector.address(),
            amount: 400,
        };
        chain
            .submit_transaction(Transaction::signed(v, 0, 1, pay))
            .expect("accepted");
    }
    chain.build_block();
    let forward = Payload::NativeTransfer {
        to: exit.address(),
        amount: 1150,
    };
    chain
        .submit_transaction(Transaction::signed(&collector, 0, 1, forward))
        .expect("accepted");
    chain.build_block();

    let mut fbr = Reconnaissance::new(FbrConfig::default());
    fbr.observe_all(chain.events()).expect("in order");
    let feed = format!("# community feed\n{} fraud_contract chainabuse\n", listed.address());
    let added = fbr.ingest_blacklist(&feed, chain.height()).expect("well-formed feed");
    println!("ingested {added} blacklist entries");

    for (name, addr) in [
        ("collector", collector.address()),
        ("exit", exit.address()),
        ("listed", listed.address()),
        ("victim", victims[0].address()),
    ] {
        let verdict = fbr.risk_score(&addr);
        println!(
            "{name:<9} score={:>3} category={} intercept={}",
            verdict.score,
            verdict.category,
            fbr.should_intercept(&verdict)
        );
        for reason in &verdict.reasons {
            println!("          - {reason}");
        }
    }
}
