//! A deployed and enrolled FailSafe contract with five independent signers.

use failsafe_qmig::contract::{
    authorization_digest, AssetMove, Authorization, EnrollArgs, Operation, PolicyConfig, Thresholds,
};
use failsafe_qmig::crypto::{keccak256, sign, Address, KeyPair};
use failsafe_qmig::ledger::{
    Amount, Asset, Chain, ContractCall, Genesis, Outcome, Payload, TokenId, TokenKind, Transaction,
};
use num_rational::Ratio;

pub const SIGNERS: usize = 5;
pub const WITHDRAW_THRESHOLD: usize = 3;
pub const INTERCEPT_THRESHOLD: usize = 1;

pub struct Custody {
    pub chain: Chain,
    pub hot: KeyPair,
    pub relayer: KeyPair,
    pub signers: Vec<KeyPair>,
    pub contract: Address,
    next_auth_nonce: u64,
}

fn key(b: u8) -> KeyPair {
    KeyPair::from_private([b; 32]).expect("valid scalar")
}

pub fn usdc() -> Asset {
    Asset::token("USDC")
}

impl Custody {
    /// `hot` starts with `funds` USDC. Half is moved into the contract with a
    /// single-signature intercept so both directions have something to move.
    pub fn new(funds: Amount) -> Self {
        let hot = key(1);
        let relayer = key(2);
        let signers: Vec<KeyPair> = (10..10 + SIGNERS as u8).map(key).collect();
        let mut chain = Chain::new(Genesis {
            chain_id: 1,
            tokens: vec![(TokenId::new("USDC"), TokenKind::Fungible)],
            allocations: vec![(hot.address(), usdc(), funds)],
            nfts: Vec::new(),
            qmig_admin: None,
        })
        .expect("valid genesis");
        let contract = chain
            .deploy_failsafe(
                "alice",
                signers.iter().map(KeyPair::address).collect(),
                Thresholds {
                    intercept: INTERCEPT_THRESHOLD,
                    rebalance: 1,
                    withdraw: WITHDRAW_THRESHOLD,
                    update_config: WITHDRAW_THRESHOLD,
                },
            )
            .expect("valid thresholds");
        let enroll = ContractCall::Enroll(EnrollArgs {
            policy: PolicyConfig {
                hot_fraction_target: Ratio::from_integer(1),
                hot_fraction_tolerance: Ratio::from_integer(0),
                max_value_per_window: Amount::MAX,
                window_length: 10,
            },
            protected_tokens: vec![TokenId::new("USDC")],
            hot_intent: keccak256(b"hot wallet intent"),
            extra_wallets: Vec::new(),
        });
        chain
            .submit_transaction(Transaction::signed(
                &hot,
                0,
                1,
                Payload::ContractCall { contract, call: enroll },
            ))
            .expect("enroll accepted");
        chain.build_block();
        let mut custody = Custody {
            chain,
            hot,
            relayer,
            signers,
            contract,
            next_auth_nonce: 0,
        };
        let outcome = custody.execute(Self::intercept(funds / 2), &[0]);
        assert_eq!(outcome, Outcome::Executed, "seeding intercept");
        custody
    }

    pub fn withdraw(amount: Amount) -> Operation {
        Operation::Withdraw {
            asset: AssetMove::Fungible {
                token: TokenId::new("USDC"),
                amount,
            },
        }
    }

    pub fn intercept(amount: Amount) -> Operation {
        Operation::Intercept {
            assets: vec![AssetMove::Fungible {
                token: TokenId::new("USDC"),
                amount,
            }],
        }
    }

    /// Signs `op` with the signers at `subset` under a fresh authorization.
    pub fn authorization(&mut self, op: &Operation, subset: &[usize]) -> Authorization {
        self.next_auth_nonce += 1;
        let digest = authorization_digest(&self.contract, op, self.next_auth_nonce);
        Authorization {
            nonce: self.next_auth_nonce,
            signatures: subset.iter().map(|&i| sign(&self.signers[i], &digest)).collect(),
        }
    }

    /// Submits `op` from the relayer in its own block and returns the outcome.
    pub fn execute(&mut self, op: Operation, subset: &[usize]) -> Outcome {
        let authorization = self.authorization(&op, subset);
        self.submit(op, authorization)
    }

    pub fn submit(&mut self, operation: Operation, authorization: Authorization) -> Outcome {
        let nonce = self.chain.next_nonce(&self.relayer.address());
        let tx = Transaction::signed(
            &self.relayer,
            nonce,
            1,
            Payload::ContractCall {
                contract: self.contract,
                call: ContractCall::Execute {
                    operation,
                    authorization,
                },
            },
        );
        let id = self.chain.submit_transaction(tx).expect("accepted");
        let block = self.chain.build_block();
        block
            .txs
            .iter()
            .find(|t| t.id == id)
            .map(|t| t.outcome.clone())
            .expect("included in the next block")
    }

    pub fn hot_balance(&self) -> Amount {
        self.chain.balance(&self.hot.address(), &usdc())
    }

    pub fn contract_balance(&self) -> Amount {
        self.chain.balance(&self.contract, &usdc())
    }
}
