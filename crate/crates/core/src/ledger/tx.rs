use std::fmt;

use serde::{Deserialize, Serialize};

use crate::codec::Encoder;
use crate::contract::{Authorization, EnrollArgs, Operation};
use crate::crypto::{keccak256_concat, recover_signer, sign, Address, Digest32, KeyPair, RecoverableSignature};

pub type Amount = u128;
pub type GasPrice = u128;
pub type NftId = u64;

/// Symbol of a token contract on the ledger.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub String);

impl TokenId {
    pub fn new(id: impl Into<String>) -> Self {
        TokenId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TokenId({})", self.0)
    }
}

impl From<&str> for TokenId {
    fn from(s: &str) -> Self {
        TokenId::new(s)
    }
}

/// Native currency or a token contract.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Asset {
    Native,
    Token(TokenId),
}

impl Asset {
    pub fn token(id: impl Into<String>) -> Self {
        Asset::Token(TokenId::new(id))
    }

    pub fn token_id(&self) -> Option<&TokenId> {
        match self {
            Asset::Native => None,
            Asset::Token(t) => Some(t),
        }
    }
}

impl fmt::Display for Asset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Asset::Native => f.write_str("native"),
            Asset::Token(t) => write!(f, "{t}"),
        }
    }
}

impl From<TokenId> for Asset {
    fn from(t: TokenId) -> Self {
        Asset::Token(t)
    }
}

/// ERC-20 style allowance. `Unlimited` is never decremented.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Allowance {
    Limited(Amount),
    Unlimited,
}

impl fmt::Display for Allowance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Allowance::Limited(a) => write!(f, "{a}"),
            Allowance::Unlimited => f.write_str("unlimited"),
        }
    }
}

/// Calls into the ledger's built-in contracts.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum ContractCall {
    /// FailSafe: enrolls the calling hot wallet.
    Enroll(EnrollArgs),
    /// FailSafe: threshold-authorized operation.
    Execute {
        operation: Operation,
        authorization: Authorization,
    },
    /// qMig: stores an incognito intent digest at the inclusion height.
    RegisterTransferIntent { incognito: Digest32 },
}

impl ContractCall {
    pub fn method(&self) -> &'static str {
        match self {
            ContractCall::Enroll(_) => "enroll",
            ContractCall::Execute { operation, .. } => operation.kind().as_str(),
            ContractCall::RegisterTransferIntent { .. } => "registerTransferIntent",
        }
    }

    fn encode(&self, enc: &mut Encoder) {
        match self {
            ContractCall::Enroll(args) => {
                enc.u8(0);
                args.encode(enc);
            }
            ContractCall::Execute {
                operation,
                authorization,
            } => {
                enc.u8(1);
                operation.encode(enc);
                authorization.encode(enc);
            }
            ContractCall::RegisterTransferIntent { incognito } => {
                enc.u8(2).digest(incognito);
            }
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Payload {
    NativeTransfer {
        to: Address,
        amount: Amount,
    },
    TokenTransfer {
        token: TokenId,
        to: Address,
        amount: Amount,
    },
    TokenTransferFrom {
        token: TokenId,
        owner: Address,
        to: Address,
        amount: Amount,
    },
    Approve {
        token: TokenId,
        spender: Address,
        allowance: Allowance,
    },
    NftTransfer {
        token: TokenId,
        to: Address,
        token_id: NftId,
    },
    ContractCall {
        contract: Address,
        call: ContractCall,
    },
}

impl Payload {
    pub(crate) fn encode(&self, enc: &mut Encoder) {
        match self {
            Payload::NativeTransfer { to, amount } => {
                enc.u8(0).address(to).u128(*amount);
            }
            Payload::TokenTransfer { token, to, amount } => {
                enc.u8(1).str(token.as_str()).address(to).u128(*amount);
            }
            Payload::TokenTransferFrom {
                token,
                owner,
                to,
                amount,
            } => {
                enc.u8(2).str(token.as_str()).address(owner).address(to).u128(*amount);
            }
            Payload::Approve {
                token,
                spender,
                allowance,
            } => {
                enc.u8(3).str(token.as_str()).address(spender);
                match allowance {
                    Allowance::Limited(a) => enc.u8(0).u128(*a),
                    Allowance::Unlimited => enc.u8(1),
                };
            }
            Payload::NftTransfer { token, to, token_id } => {
                enc.u8(4).str(token.as_str()).address(to).u64(*token_id);
            }
            Payload::ContractCall { contract, call } => {
                enc.u8(5).address(contract);
                call.encode(enc);
            }
        }
    }
}

/// Transaction before signing. Its digest covers every field.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct UnsignedTransaction {
    pub from: Address,
    pub nonce: u64,
    pub gas_price: GasPrice,
    pub payload: Payload,
}

impl UnsignedTransaction {
    pub fn digest(&self) -> Digest32 {
        let mut enc = Encoder::new();
        enc.tag("failsafe:tx")
            .address(&self.from)
            .u64(self.nonce)
            .u128(self.gas_price);
        self.payload.encode(&mut enc);
        enc.finish()
    }

    pub fn sign(self, key: &KeyPair) -> Transaction {
        let signature = sign(key, &self.digest());
        self.with_signature(signature)
    }

    pub fn with_signature(self, signature: RecoverableSignature) -> Transaction {
        Transaction {
            from: self.from,
            nonce: self.nonce,
            gas_price: self.gas_price,
            payload: self.payload,
            signature,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Transaction {
    pub from: Address,
    pub nonce: u64,
    pub gas_price: GasPrice,
    pub payload: Payload,
    pub signature: RecoverableSignature,
}

impl Transaction {
    /// Convenience: builds and signs with `key`, using its address as sender.
    pub fn signed(key: &KeyPair, nonce: u64, gas_price: GasPrice, payload: Payload) -> Self {
        UnsignedTransaction {
            from: key.address(),
            nonce,
            gas_price,
            payload,
        }
        .sign(key)
    }

    pub fn unsigned(&self) -> UnsignedTransaction {
        UnsignedTransaction {
            from: self.from,
            nonce: self.nonce,
            gas_price: self.gas_price,
            payload: self.payload.clone(),
        }
    }

    /// Digest over all fields except the signature.
    pub fn digest(&self) -> Digest32 {
        self.unsigned().digest()
    }

    pub fn id(&self) -> TxId {
        TxId(keccak256_concat(&[
            self.digest().as_bytes(),
            &self.signature.to_bytes(),
        ]))
    }

    pub fn signature_valid(&self) -> bool {
        recover_signer(&self.digest(), &self.signature).is_ok_and(|a| a == self.from)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TxId(pub Digest32);

impl fmt::Display for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", self.0)
    }
}

impl fmt::Debug for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TxId({})", self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(b: u8) -> KeyPair {
        KeyPair::from_private([b; 32]).unwrap()
    }

    fn transfer(to: Address, amount: Amount) -> Payload {
        Payload::TokenTransfer {
            token: "USDC".into(),
            to,
            amount,
        }
    }

    #[test]
    fn signed_transaction_validates() {
        let k = key(1);
        let tx = Transaction::signed(&k, 0, 10, transfer(key(2).address(), 5));
        assert!(tx.signature_valid());
    }

    #[test]
    fn digest_binds_every_field() {
        let k = key(1);
        let to = key(2).address();
        let base = Transaction::signed(&k, 0, 10, transfer(to, 5)).digest();
        let variants = [
            Transaction::signed(&k, 1, 10, transfer(to, 5)),
            Transaction::signed(&k, 0, 11, transfer(to, 5)),
            Transaction::signed(&k, 0, 10, transfer(to, 6)),
            Transaction::signed(&k, 0, 10, transfer(k.address(), 5)),
        ];
        for v in variants {
            assert_ne!(v.digest(), base);
        }
    }

    #[test]
    fn forged_sender_is_invalid() {
        let tx = UnsignedTransaction {
            from: key(3).address(),
            nonce: 0,
            gas_price: 1,
            payload: transfer(key(2).address(), 1),
        }
        .sign(&key(1));
        assert!(!tx.signature_valid());
    }

    #[test]
    fn allowance_encoding_differs() {
        let k = key(1);
        let sp = key(2).address();
        let a = Transaction::signed(
            &k,
            0,
            1,
            Payload::Approve {
                token: "T".into(),
                spender: sp,
                allowance: Allowance::Unlimited,
            },
        );
        let b = Transaction::signed(
            &k,
            0,
            1,
            Payload::Approve {
                token: "T".into(),
                spender: sp,
                allowance: Allowance::Limited(u128::MAX),
            },
        );
        assert_ne!(a.digest(), b.digest());
    }
}
