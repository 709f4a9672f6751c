//! Hashing, address derivation and signer recovery.

use failsafe_qmig::crypto::{keccak256, recover_signer, sign, KeyPair};

fn main() {
    println!("keccak256(\"\")    = {}", keccak256(b""));
    println!("keccak256(\"abc\") = {}", keccak256(b"abc"));

    let mut private = [0u8; 32];
    private[31] = 1;
    let key = KeyPair::from_private(private).expect("valid scalar");
    println!("address of private key 1 = {}", key.address());

    let digest = keccak256(b"pay bob 10 USDC");
    let sig = sign(&key, &digest);
    println!("signature (r||s||v)      = {sig}");
    let signer = recover_signer(&digest, &sig).expect("recoverable");
    println!("recovered signer         = {signer}");
    assert_eq!(signer, key.address());

    let other = keccak256(b"pay bob 1000 USDC");
    let wrong = recover_signer(&other, &sig).ok();
    println!("same signature, other message recovers {wrong:?}");
}
