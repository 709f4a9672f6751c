//! Parameterised post-inflection theft scenarios.

use std::fmt::Write;

use failsafe_qmig::scenario::{run_scenario, Run, RunOptions, Scenario};

/// vic (revealed by an early payment) and carol (never revealed) register
/// intents at block 2, the inflection is height 4, mallory steals `stolen`
/// from vic at block 5, then each `(actor, amount)` bridge runs at block 6
/// under label `b<i>`.
pub fn theft_run(vic: u64, carol: u64, mallory: u64, stolen: u64, bridges: &[(&str, u64)]) -> Run {
    let intents: String = ["vic", "carol", "mallory"]
        .iter()
        .map(|a| {
            format!("[[steps]]\nat = 2\naction = \"register_intent\"\nactor = \"{a}\"\nsubmitter = \"relayer\"\n\n")
        })
        .collect();
    let mut text = format!(
        r#"
name = "theft"
seed = 41
blocks = 8
tokens = [{{ id = "USDC", kind = "fungible" }}]
actors = [
  {{ name = "vic", role = "user" }},
  {{ name = "carol", role = "user" }},
  {{ name = "mallory", role = "attacker" }},
  {{ name = "relayer", role = "other" }},
  {{ name = "bob", role = "other" }},
]
genesis = [
  {{ actor = "vic", token = "USDC", amount = {} }},
  {{ actor = "carol", token = "USDC", amount = {carol} }},
  {{ actor = "mallory", token = "USDC", amount = {mallory} }},
]

[services]
fis = false
balancer = false

[[steps]]
at = 1
action = "transfer"
from = "vic"
to = "bob"
token = "USDC"
amount = 1

{intents}
[[steps]]
at = 3
action = "set_inflection"
height = 4

[[steps]]
at = 5
label = "steal"
action = "quantum_steal"
victim = "vic"
to = "mallory"
token = "USDC"
amount = {stolen}
"#,
        vic + 1
    );
    for (i, (actor, amount)) in bridges.iter().enumerate() {
        write!(
            text,
            "\n[[steps]]\nat = 6\nlabel = \"b{i}\"\naction = \"bridge\"\nactor = \"{actor}\"\ntoken = \"USDC\"\namount = {amount}\n"
        )
        .unwrap();
    }
    let scenario = Scenario::from_toml(&text).expect("template parses");
    run_scenario(&scenario, &RunOptions::default()).expect("template runs")
}
