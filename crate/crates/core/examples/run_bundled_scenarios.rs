//! Runs every bundled scenario and prints its report. Pass a scenario name to
//! also print that run's event log.

use failsafe_qmig::scenario::{self, run_scenario, RunOptions, Scenario};

fn main() {
    let show_log = std::env::args().nth(1);
    let mut failures = 0;
    for (name, text) in scenario::BUNDLED {
        let scenario = Scenario::from_toml(text).expect("bundled scenarios parse");
        let run = run_scenario(&scenario, &RunOptions::default()).expect("bundled scenarios run");
        println!("{}", run.report);
        if !run.report.success() {
            failures += 1;
        }
        if show_log.as_deref() == Some(name) {
            print!("{}", run.event_log());
        }
    }
    println!(
        "{} scenarios, {failures} with failed assertions",
        scenario::BUNDLED.len()
    );
}
