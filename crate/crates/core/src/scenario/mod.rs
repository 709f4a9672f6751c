//! Deterministic scenario runner: a TOML file declares actors, genesis,
//! FailSafe deployments, scripted steps and assertions; the runner drives
//! the chain and services block by block and reports the result.

mod report;
mod runner;
mod schema;

pub use self::report::{AssertionResult, RunReport};
pub use self::runner::{derive_actor_key, run_scenario, Run, RunOptions, Service, StepResult};
pub use self::schema::{
    AccountSpec, Action, ActorSpec, Allocation, Assertion, AtRisk, BlacklistSpec, Fraction, Role, Scenario,
    ServiceSpec, Step, ThresholdSpec, TokenSpec,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("unknown actor {0:?}")]
    UnknownActor(String),
    #[error("actor {0:?} declared twice")]
    DuplicateActor(String),
    #[error("unknown token {0:?}")]
    UnknownToken(String),
    #[error("scenario setup failed: {0}")]
    Setup(String),
}

/// Scenario files shipped with the library, by name.
pub const BUNDLED: &[(&str, &str)] = &[
    (
        "key-theft-intercept",
        include_str!("../../scenarios/key-theft-intercept.toml"),
    ),
    ("approval-phish", include_str!("../../scenarios/approval-phish.toml")),
    (
        "private-tx-bypass",
        include_str!("../../scenarios/private-tx-bypass.toml"),
    ),
    (
        "private-tx-bypass-listed",
        include_str!("../../scenarios/private-tx-bypass-listed.toml"),
    ),
    (
        "policy-limit-trip",
        include_str!("../../scenarios/policy-limit-trip.toml"),
    ),
    ("rebalance-drift", include_str!("../../scenarios/rebalance-drift.toml")),
    (
        "quantum-migration-honest",
        include_str!("../../scenarios/quantum-migration-honest.toml"),
    ),
    (
        "quantum-stolen-funds-rejected",
        include_str!("../../scenarios/quantum-stolen-funds-rejected.toml"),
    ),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_pass() {
        for (name, text) in BUNDLED {
            let scenario = Scenario::from_toml(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(&scenario.name, name);
            let run = run_scenario(&scenario, &RunOptions::default()).unwrap();
            assert!(run.report.success(), "{name}:\n{}", run.report);
        }
    }
}
