mod support;

use failsafe_qmig::bridge::{BridgeError, BridgeTransfer, MintTx, QuantumSafeLedger};
use failsafe_qmig::crypto::{pq_sign, sign, Address, PqKeyPair};
use failsafe_qmig::ledger::{Amount, Asset};
use failsafe_qmig::qmig::TransferIntentSource;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use support::migration::theft_run;

fn usdc() -> Asset {
    Asset::token("USDC")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Requests succeed exactly while the running total stays within the
    /// permitted amount, and escrow always equals what was minted.
    #[test]
    fn bridging_is_capped_and_conserved(
        carol in 1u64..800,
        requests in proptest::collection::vec((0usize..3, 1u64..400), 1..8),
    ) {
        let actors = ["vic", "carol", "mallory"];
        let bridges: Vec<(&str, u64)> = requests.iter().map(|(a, n)| (actors[*a], *n)).collect();
        let (vic, mallory, stolen) = (500, 40, 300);
        let run = theft_run(vic, carol, mallory, stolen, &bridges);
        let permitted = [vic - stolen, carol, mallory];
        let mut used = [0u64; 3];
        for (i, (a, n)) in requests.iter().enumerate() {
            let outcome = run.outcome_of(&format!("b{i}")).unwrap();
            if used[*a] + n <= permitted[*a] {
                prop_assert_eq!(outcome.as_str(), "ok", "request {} of {} by {}", i, n, actors[*a]);
                used[*a] += n;
            } else {
                prop_assert_eq!(outcome.as_str(), "ExceedsPermitted");
            }
        }
        let book = run.bridge.book();
        prop_assert!(book.is_conserved());
        let mut minted: Amount = 0;
        for (i, actor) in actors.iter().enumerate() {
            let addr = run.address(actor).unwrap();
            let dest = run.bridge.dest().balance(&addr, &usdc());
            prop_assert_eq!(dest, u128::from(used[i]));
            prop_assert_eq!(book.bridged(&addr, &usdc()), dest);
            minted += dest;
        }
        prop_assert_eq!(run.chain.balance(&run.bridge.escrow(), &usdc()), minted);
        let accepted = used.iter().filter(|u| **u > 0).count() as u64;
        prop_assert!(run.bridge.dest().mints() >= accepted);
    }
}

fn request(run: &failsafe_qmig::scenario::Run, actor: &str, amount: Amount) -> BridgeTransfer {
    let addr = run.address(actor).unwrap();
    let source = TransferIntentSource {
        from_chain_id: run.chain.chain_id(),
        from_address: addr,
        dest_chain_id: run.bridge.dest().chain_id(),
        dest_address: addr,
    };
    BridgeTransfer {
        source,
        asset: usdc(),
        amount,
        intent_sig: sign(&run.keys[actor], &source.digest()),
        requested_at: run.chain.height(),
    }
}

#[test]
fn malformed_requests_are_refused() {
    let mut run = theft_run(100, 100, 10, 50, &[]);
    let zero = request(&run, "carol", 0);
    assert_eq!(
        run.bridge.bridge_transfer(&mut run.chain, &zero),
        Err(BridgeError::ZeroAmount)
    );

    let mut wrong_chain = request(&run, "carol", 5);
    wrong_chain.source.dest_chain_id += 1;
    assert_eq!(
        run.bridge.bridge_transfer(&mut run.chain, &wrong_chain),
        Err(BridgeError::ChainMismatch)
    );

    let mut bad_sig = request(&run, "carol", 5);
    bad_sig.intent_sig = request(&run, "vic", 5).intent_sig;
    assert_eq!(
        run.bridge.bridge_transfer(&mut run.chain, &bad_sig),
        Err(BridgeError::SignerMismatch)
    );

    let ok = request(&run, "carol", 100);
    assert_eq!(run.bridge.bridge_transfer(&mut run.chain, &ok), Ok(()));
    assert!(run.event_log().lines().filter(|l| l.contains("kind=Bridge ")).count() >= 4);
}

#[test]
fn destination_accepts_only_the_current_minter() {
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let mut minter = PqKeyPair::generate(&mut rng);
    let mut ledger = QuantumSafeLedger::new(2, minter.public().clone());
    let to = Address::for_label("carol");
    let mint = |key: &mut PqKeyPair, next: &PqKeyPair, amount: Amount| {
        let digest = MintTx::digest(&to, &usdc(), amount, next.public());
        MintTx {
            to,
            asset: usdc(),
            amount,
            next_minter: next.public().clone(),
            signature: pq_sign(key, &digest).unwrap(),
        }
    };

    let mut impostor = PqKeyPair::generate(&mut rng);
    let next = PqKeyPair::generate(&mut rng);
    assert!(!ledger.apply_mint(mint(&mut impostor, &next, 10)));

    let mut second = PqKeyPair::generate(&mut rng);
    let first_mint = mint(&mut minter, &second, 10);
    let mut tampered = first_mint.clone();
    tampered.amount = 1000;
    assert!(!ledger.apply_mint(tampered));
    assert!(ledger.apply_mint(first_mint.clone()));
    // the first key has been retired
    assert!(!ledger.apply_mint(first_mint));
    let third = PqKeyPair::generate(&mut rng);
    assert!(ledger.apply_mint(mint(&mut second, &third, 5)));
    assert_eq!(ledger.balance(&to, &usdc()), 15);
    assert_eq!(ledger.mints(), 2);
}
