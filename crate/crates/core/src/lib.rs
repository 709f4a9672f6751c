//! FailSafe custody with front-running interception, risk scoring and hot/cold
//! rebalancing, plus a quantum migration registry and bridge, over a
//! deterministic simulated ledger.

pub mod balancer;
pub mod bridge;
mod codec;
pub mod contract;
pub mod crypto;
pub mod custody;
pub mod fbr;
pub mod fis;
pub mod ledger;
pub mod qmig;
pub mod scenario;
