//! A quantum attacker steals from a wallet whose public key is exposed, then
//! tries to bridge the loot. Only what it held before the inflection moves.

use failsafe_qmig::ledger::Asset;
use failsafe_qmig::qmig::permitted_amount;
use failsafe_qmig::scenario::{self, run_scenario, RunOptions, Scenario};

fn main() {
    let text = scenario::bundled("quantum-stolen-funds-rejected").expect("bundled");
    let scenario = Scenario::from_toml(text).expect("valid scenario");
    println!("{}\n", scenario.description);
    let run = run_scenario(&scenario, &RunOptions::default()).expect("runs");

    for label in [
        "steal",
        "steal_carol",
        "bridge_loot",
        "bridge_51",
        "bridge_own",
        "forged",
        "vic_rescue",
        "carol_bridges",
    ] {
        println!("{label:<14} {}", run.outcome_of(label).unwrap_or_default());
    }
    let usdc = Asset::token("USDC");
    for actor in ["mallory", "vic", "carol"] {
        let addr = run.address(actor).expect("actor");
        println!(
            "{actor:<8} source={:<5} escrowed={:<5} destination={:<5} permitted={}",
            run.chain.balance(&addr, &usdc),
            run.bridge.book().bridged(&addr, &usdc),
            run.bridge.dest().balance(&addr, &usdc),
            permitted_amount(&run.chain, &addr, &usdc)
                .map(|a| a.to_string())
                .unwrap_or_else(|e| e.to_string()),
        );
    }
    println!("locked equals minted: {}", run.bridge.book().is_conserved());
}
