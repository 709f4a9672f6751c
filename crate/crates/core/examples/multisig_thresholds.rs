//! Per-operation signature thresholds on a FailSafe contract.

use failsafe_qmig::contract::{authorization_digest, AssetMove, Authorization, Operation, Thresholds};
use failsafe_qmig::crypto::{sign, KeyPair};
use failsafe_qmig::ledger::{Chain, Genesis};

fn main() {
    let signers: Vec<KeyPair> = (10..15)
        .map(|b| KeyPair::from_private([b; 32]).expect("valid"))
        .collect();
    let mut chain = Chain::new(Genesis::default()).expect("valid genesis");
    let thresholds = Thresholds {
        intercept: 1,
        rebalance: 1,
        withdraw: 3,
        update_config: 3,
    };
    let contract = chain
        .deploy_failsafe("alice", signers.iter().map(KeyPair::address).collect(), thresholds)
        .expect("thresholds fit five signers");
    let account = chain.failsafe().account(&contract).expect("deployed");

    let withdraw = Operation::Withdraw {
        asset: AssetMove::Fungible {
            token: "USDC".into(),
            amount: 10,
        },
    };
    let intercept = Operation::Intercept {
        assets: vec![AssetMove::Fungible {
            token: "USDC".into(),
            amount: 10,
        }],
    };
    for (name, op) in [("withdraw", &withdraw), ("intercept", &intercept)] {
        for n in 0..=signers.len() {
            let nonce = n as u64;
            let digest = authorization_digest(&contract, op, nonce);
            let auth = Authorization {
                nonce,
                signatures: signers[..n].iter().map(|k| sign(k, &digest)).collect(),
            };
            match account.authorize(op, &auth) {
                Ok(have) => println!("{name:<9} with {n} signatures: authorized ({have} valid)"),
                Err(e) => println!("{name:<9} with {n} signatures: {e}"),
            }
        }
    }
}
