//! Hash-based one-time signatures: a key signs once and is then spent.

use failsafe_qmig::crypto::{keccak256, pq_sign, pq_verify, PqKeyPair};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let mut key = PqKeyPair::generate(&mut rng);
    let public = key.public().clone();
    println!("public key id: {}", public.id());

    let message = keccak256(b"inflection height 1000");
    let sig = pq_sign(&mut key, &message).expect("fresh key");
    println!("signature: {} bytes", sig.to_bytes().len());
    println!("verifies:                 {}", pq_verify(&public, &message, &sig));
    println!(
        "verifies other message:   {}",
        pq_verify(&public, &keccak256(b"height 1"), &sig)
    );

    match pq_sign(&mut key, &keccak256(b"second message")) {
        Ok(_) => println!("second signature produced"),
        Err(e) => println!("second signature refused: {e}"),
    }
}
