#![allow(dead_code)]

pub mod history;
pub mod keccak_ref;
pub mod migration;
pub mod multisig;
