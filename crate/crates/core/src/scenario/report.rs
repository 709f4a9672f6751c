use std::fmt;

use crate::ledger::Amount;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssertionResult {
    pub description: String,
    pub passed: bool,
    /// Observed value when the assertion failed.
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub blocks_built: u64,
    pub assertions: Vec<AssertionResult>,
    pub assets_at_risk: Amount,
    pub assets_saved: Amount,
    pub assets_lost: Amount,
    pub intercepts: usize,
    /// Worst delay between an attacker transaction's first possible block
    /// and the block its intercept landed in.
    pub intercept_latency_blocks: Option<u64>,
    pub alerts: Vec<String>,
}

impl RunReport {
    pub fn assertions_passed(&self) -> usize {
        self.assertions.iter().filter(|a| a.passed).count()
    }

    pub fn assertions_failed(&self) -> usize {
        self.assertions.len() - self.assertions_passed()
    }

    pub fn success(&self) -> bool {
        self.assertions_failed() == 0
    }
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario: {}", self.scenario)?;
        writeln!(f, "seed: {}", self.seed)?;
        writeln!(f, "blocks_built: {}", self.blocks_built)?;
        writeln!(f, "intercepts: {}", self.intercepts)?;
        match self.intercept_latency_blocks {
            Some(l) => writeln!(f, "intercept_latency_blocks: {l}")?,
            None => writeln!(f, "intercept_latency_blocks: none")?,
        }
        writeln!(f, "assets_at_risk: {}", self.assets_at_risk)?;
        writeln!(f, "assets_saved: {}", self.assets_saved)?;
        writeln!(f, "assets_lost: {}", self.assets_lost)?;
        writeln!(
            f,
            "assertions: {} passed, {} failed",
            self.assertions_passed(),
            self.assertions_failed()
        )?;
        for a in &self.assertions {
            let mark = if a.passed { "PASS" } else { "FAIL" };
            match &a.detail {
                Some(d) if !a.passed => writeln!(f, "  {mark} {} (got {d})", a.description)?,
                _ => writeln!(f, "  {mark} {}", a.description)?,
            }
        }
        if !self.alerts.is_empty() {
            writeln!(f, "alerts:")?;
            for a in &self.alerts {
                writeln!(f, "  {a}")?;
            }
        }
        Ok(())
    }
}
