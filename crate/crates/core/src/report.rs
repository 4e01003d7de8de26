//! Scenario reports: deterministic counters, per-scenario verdicts, an
//! optional threat matrix, and the full fabric event log.
//!
//! Identical configuration and seed must produce byte-identical structured
//! output, so everything here keeps stable ordering: counters live in a
//! `BTreeMap` and all remaining fields are vectors filled in a fixed order.

use crate::providers::ThreatAudit;
use serde::Serialize;
use std::collections::BTreeMap;

/// One pass/fail assertion evaluated inside a scenario.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct SimReport {
    pub scenario: String,
    pub seed: u64,
    pub counters: BTreeMap<String, u64>,
    pub verdicts: Vec<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threat_matrix: Option<ThreatAudit>,
    pub event_log: Vec<String>,
}

impl SimReport {
    pub fn new(scenario: &str, seed: u64) -> Self {
        SimReport {
            scenario: scenario.to_string(),
            seed,
            counters: BTreeMap::new(),
            verdicts: Vec::new(),
            threat_matrix: None,
            event_log: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: u64) {
        self.counters.insert(key.to_string(), value);
    }

    pub fn get(&self, key: &str) -> u64 {
        self.counters.get(key).copied().unwrap_or(0)
    }

    pub fn merge_counters(&mut self, prefix: &str, counters: &BTreeMap<String, u64>) {
        for (k, v) in counters {
            self.counters.insert(format!("{prefix}.{k}"), *v);
        }
    }

    pub fn verdict(&mut self, name: &str, pass: bool, detail: String) {
        self.verdicts.push(Verdict { name: name.to_string(), pass, detail });
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    /// Structured output: one JSON document with stable key order.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }

    /// Human-readable output: one table per counter group, then verdicts.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("scenario: {}  seed: {}\n", self.scenario, self.seed));

        let mut groups: BTreeMap<&str, Vec<(&str, u64)>> = BTreeMap::new();
        for (k, v) in &self.counters {
            let (group, rest) = k.split_once('.').unwrap_or(("run", k.as_str()));
            groups.entry(group).or_default().push((rest, *v));
        }
        for (group, rows) in groups {
            out.push_str(&format!("\n[{group}]\n"));
            for (k, v) in rows {
                out.push_str(&format!("  {k:<40} {v}\n"));
            }
        }

        if let Some(audit) = &self.threat_matrix {
            out.push_str(&format!(
                "\n[threat matrix] {} rows, {} ground-truth vulnerable, {} predicted vulnerable, {} matches\n",
                audit.total, audit.ground_truth_vulnerable, audit.predicted_vulnerable, audit.matches
            ));
            for row in &audit.rows {
                out.push_str(&format!(
                    "  {:<30} {:<7} predicted={:<13} truth={:<13} {}{}\n",
                    row.name,
                    row.short_code,
                    row.predicted,
                    row.ground_truth,
                    if row.matches { "match" } else { "MISMATCH" },
                    if row.exception { " (expected exception)" } else { "" },
                ));
            }
        }

        out.push_str("\n[verdicts]\n");
        for v in &self.verdicts {
            out.push_str(&format!(
                "  {} {:<40} {}\n",
                if v.pass { "PASS" } else { "FAIL" },
                v.name,
                v.detail
            ));
        }
        out.push_str(&format!(
            "\nresult: {}\n",
            if self.passed() { "PASS" } else { "FAIL" }
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_output_is_stable() {
        let mut r = SimReport::new("x", 1);
        r.set("b.two", 2);
        r.set("a.one", 1);
        r.verdict("ok", true, "fine".into());
        let a = r.to_json();
        let b = r.to_json();
        assert_eq!(a, b);
        // BTreeMap ordering: a.one before b.two.
        assert!(a.find("a.one").unwrap() < a.find("b.two").unwrap());
    }

    #[test]
    fn text_output_groups_counters() {
        let mut r = SimReport::new("x", 1);
        r.set("carrier.accepted", 3);
        r.set("carrier.rejected", 1);
        r.set("attacker.raw_sent", 4);
        r.verdict("all_good", true, "3 of 3".into());
        let text = r.to_text();
        assert!(text.contains("[carrier]"));
        assert!(text.contains("[attacker]"));
        assert!(text.contains("PASS all_good"));
    }

    #[test]
    fn failed_verdict_flips_result() {
        let mut r = SimReport::new("x", 1);
        r.verdict("bad", false, "0 of 3".into());
        assert!(!r.passed());
        assert!(r.to_text().contains("result: FAIL"));
    }
}
