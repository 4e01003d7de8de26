//! Every named scenario must run green on its default topology and produce
//! a deterministic report.

use smsim::scenario::{list_scenarios, run_scenario, ScenarioConfig};

fn run_and_check(name: &str) {
    let cfg = ScenarioConfig::named(name, 0x5151);
    let report = run_scenario(&cfg).unwrap_or_else(|e| panic!("{name}: {e}"));
    for v in &report.verdicts {
        assert!(v.pass, "{name}: verdict {} failed: {}", v.name, v.detail);
    }
    assert!(!report.verdicts.is_empty(), "{name}: no verdicts");
}

#[test]
fn facebook_individual_passes() {
    run_and_check("facebook_individual");
}

#[test]
fn like_farm_passes() {
    run_and_check("like_farm");
}

#[test]
fn privacy_leak_passes() {
    run_and_check("privacy_leak");
}

#[test]
fn donation_passes() {
    run_and_check("donation");
}

#[test]
fn spam_subscribe_passes() {
    run_and_check("spam_subscribe");
}

#[test]
fn rate_measure_passes() {
    run_and_check("rate_measure");
}

#[test]
fn defense_mac_passes() {
    run_and_check("defense_mac");
}

#[test]
fn defense_440_passes() {
    run_and_check("defense_440");
}

#[test]
fn defense_strict_origin_passes() {
    run_and_check("defense_strict_origin");
}

#[test]
fn table1_audit_passes() {
    run_and_check("table1_audit");
}

#[test]
fn legacy_baseline_passes() {
    run_and_check("legacy_baseline");
}

#[test]
fn every_listed_scenario_runs() {
    for (name, _) in list_scenarios() {
        let report = run_scenario(&ScenarioConfig::named(name, 1)).unwrap();
        assert_eq!(report.scenario, name);
    }
}

#[test]
fn reports_are_deterministic_per_seed() {
    for (name, _) in list_scenarios() {
        let a = run_scenario(&ScenarioConfig::named(name, 42)).unwrap().to_json();
        let b = run_scenario(&ScenarioConfig::named(name, 42)).unwrap().to_json();
        assert_eq!(a, b, "{name}: same seed must give identical bytes");
    }
}

#[test]
fn seed_changes_event_timing_but_not_verdicts() {
    let a = run_scenario(&ScenarioConfig::named("donation", 1)).unwrap();
    let b = run_scenario(&ScenarioConfig::named("donation", 2)).unwrap();
    assert!(a.passed() && b.passed());
}

#[test]
fn victim_count_override_applies() {
    let mut cfg = ScenarioConfig::from_json(
        r#"{"scenario":"like_farm","seed":9,"devices":[
            {"number":"3105551001","carrier":"op-one","role":"honest"},
            {"number":"3105551002","carrier":"op-one","role":"honest"},
            {"number":"3105551003","carrier":"op-one","role":"honest"}
        ]}"#,
    )
    .unwrap();
    cfg.seed = 9;
    let report = run_scenario(&cfg).unwrap();
    assert_eq!(report.get("scenario.victims"), 3);
    assert_eq!(report.get("scenario.page_likes"), 3);
    assert!(report.passed());
}
