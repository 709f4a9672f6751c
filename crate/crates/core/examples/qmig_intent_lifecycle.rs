//! Registering an incognito transfer intent, setting the inflection point
//! and verifying intents on either side of it.

use failsafe_qmig::crypto::{pq_sign, KeyPair, PqKeyPair};
use failsafe_qmig::ledger::{Chain, Genesis};
use failsafe_qmig::qmig::{build_intent_digest, inflection_message, submit_intent_registration, TransferIntentSource};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn source_of(key: &KeyPair) -> TransferIntentSource {
    TransferIntentSource {
        from_chain_id: 1,
        from_address: key.address(),
        dest_chain_id: 2,
        dest_address: key.address(),
    }
}

fn main() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let mut admin = PqKeyPair::generate(&mut rng);
    let mut chain = Chain::new(Genesis {
        chain_id: 1,
        qmig_admin: Some(admin.public().clone()),
        ..Genesis::default()
    })
    .expect("valid genesis");
    let (carol, erin, relayer) = (
        KeyPair::generate(&mut rng),
        KeyPair::generate(&mut rng),
        KeyPair::generate(&mut rng),
    );

    // carol signs off-chain; a relayer submits only the digest of her signature
    let (carol_sig, carol_digest) = build_intent_digest(&source_of(&carol), &carol).expect("own key");
    let sub = submit_intent_registration(&mut chain, &relayer, &source_of(&carol), carol_digest, 1).expect("accepted");
    chain.build_block();
    println!(
        "carol's intent {carol_digest} registered at {:?}, warned={}",
        chain.qmig().lookup(&carol_digest),
        sub.warned
    );

    let inflection = 3;
    let sig = pq_sign(&mut admin, &inflection_message(inflection)).expect("fresh admin key");
    chain
        .set_inflection_point(inflection, &sig.to_bytes())
        .expect("admin signature");
    chain.build_block();
    chain.build_block();

    // erin is late and submits from her own wallet, exposing her public key
    let (erin_sig, erin_digest) = build_intent_digest(&source_of(&erin), &erin).expect("own key");
    let sub = submit_intent_registration(&mut chain, &erin, &source_of(&erin), erin_digest, 1).expect("accepted");
    chain.build_block();
    println!(
        "erin's intent registered at {:?}, warned={}",
        chain.qmig().lookup(&erin_digest),
        sub.warned
    );

    let registry = chain.qmig();
    for (name, key, sig) in [("carol", &carol, &carol_sig), ("erin", &erin, &erin_sig)] {
        match registry.verify_transfer_intent(&source_of(key), sig, inflection) {
            Ok(()) => println!("{name}: verified"),
            Err(e) => println!("{name}: {}: {e}", e.code()),
        }
    }
    println!("registry records:\n{}", registry.dump());
}
