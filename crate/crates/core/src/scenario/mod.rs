//! Scenario runner: named end-to-end simulations with machine-checked
//! verdicts.
//!
//! A [`ScenarioConfig`] names one scenario and a seed; everything else is
//! optional and overrides that scenario's default topology. Reports are
//! fully deterministic in (config, seed).

pub mod runs;
pub mod world;

use crate::defenses::{DefenseError, MacConfig};
use crate::hashlabel::HashLabel;
use crate::ims_core::{CarrierPolicy, OriginCheck, RateLimit, SecurityMode};
use crate::providers::CatalogError;
use crate::report::SimReport;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario {0:?} (see `list-scenarios`)")]
    UnknownScenario(String),
    #[error("config: {0}")]
    Config(String),
    #[error("config parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("catalog: {0}")]
    Catalog(#[from] CatalogError),
    #[error("defense config: {0}")]
    Defense(#[from] DefenseError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub seed: u64,
    #[serde(default)]
    pub duration_ms: Option<u64>,
    #[serde(default)]
    pub carriers: Vec<CarrierBlock>,
    #[serde(default)]
    pub devices: Vec<DeviceBlock>,
    #[serde(default)]
    pub providers: Option<ProvidersBlock>,
    #[serde(default)]
    pub defenses: Option<DefenseBlock>,
}

impl ScenarioConfig {
    pub fn named(scenario: &str, seed: u64) -> Self {
        ScenarioConfig {
            scenario: scenario.to_string(),
            seed,
            duration_ms: None,
            carriers: Vec::new(),
            devices: Vec::new(),
            providers: None,
            defenses: None,
        }
    }

    pub fn from_json(json: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(json)?)
    }

    /// Number of honest devices, when the config supplies a device list.
    pub fn honest_count(&self) -> Option<usize> {
        let n = self.devices.iter().filter(|d| d.role == "honest").count();
        (n > 0).then_some(n)
    }

    /// Honest device numbers from the config, or `default` when none given.
    pub fn honest_numbers(&self, default: Vec<String>) -> Vec<String> {
        let nums: Vec<String> = self
            .devices
            .iter()
            .filter(|d| d.role == "honest")
            .map(|d| d.number.clone())
            .collect();
        if nums.is_empty() {
            default
        } else {
            nums
        }
    }

    /// The attacker's number, when the config names one.
    pub fn attacker_number(&self, default: &str) -> String {
        self.devices
            .iter()
            .find(|d| d.role == "attacker")
            .map(|d| d.number.clone())
            .unwrap_or_else(|| default.to_string())
    }

    /// Device-less subscriber numbers declared on a carrier block.
    pub fn carrier_numbers(&self, carrier_id: &str) -> Vec<String> {
        self.carriers
            .iter()
            .filter(|b| b.carrier_id == carrier_id)
            .flat_map(|b| b.numbers.iter().cloned())
            .collect()
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct CarrierBlock {
    pub carrier_id: String,
    #[serde(default)]
    pub security_mode: Option<String>,
    #[serde(default)]
    pub origin_check: Option<String>,
    #[serde(default)]
    pub rate_limit: Option<RateLimitBlock>,
    #[serde(default)]
    pub premium_codes: Vec<String>,
    #[serde(default)]
    pub burst_threshold: Option<u32>,
    #[serde(default)]
    pub numbers: Vec<String>,
    #[serde(default)]
    pub legacy_cs: Option<bool>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct RateLimitBlock {
    pub max_msgs: u32,
    pub window_ms: u64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct DeviceBlock {
    pub number: String,
    pub carrier: String,
    pub role: String,
    #[serde(default)]
    pub approval_policy: Option<String>,
    #[serde(default)]
    pub inbox_enabled: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ProvidersBlock {
    #[serde(default)]
    pub catalog_path: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct DefenseBlock {
    #[serde(default)]
    pub mac: Option<MacBlock>,
    #[serde(default)]
    pub strict_origin: Option<bool>,
    #[serde(default)]
    pub approval_triggers: Option<ApprovalBlock>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct MacBlock {
    #[serde(default = "default_tag_length")]
    pub tag_length: usize,
    #[serde(default)]
    pub hash_label: Option<String>,
}

fn default_tag_length() -> usize {
    20
}

#[derive(Debug, Clone, Deserialize)]
pub struct ApprovalBlock {
    #[serde(default)]
    pub premium_codes: Vec<String>,
    #[serde(default)]
    pub burst_threshold: Option<u32>,
}

pub(crate) fn parse_security_mode(s: &str) -> Result<SecurityMode, ScenarioError> {
    match s {
        "digest-only" => Ok(SecurityMode::DigestOnly),
        "ipsec-3gpp" => Ok(SecurityMode::Ipsec3gpp),
        other => Err(ScenarioError::Config(format!(
            "unknown security_mode {other:?}; the tls, ipsec-ike, and ipsec-main options are not modelled"
        ))),
    }
}

pub(crate) fn parse_origin_check(s: &str) -> Result<OriginCheck, ScenarioError> {
    match s {
        "none" => Ok(OriginCheck::None),
        "carrier-scope" => Ok(OriginCheck::CarrierScope),
        "strict" => Ok(OriginCheck::Strict),
        other => Err(ScenarioError::Config(format!("unknown origin_check {other:?}"))),
    }
}

/// Applies any matching carrier block from the config onto a scenario's
/// default policy.
pub(crate) fn apply_carrier_overrides(
    policy: &mut CarrierPolicy,
    cfg: &ScenarioConfig,
) -> Result<(), ScenarioError> {
    if let Some(block) = cfg.carriers.iter().find(|b| b.carrier_id == policy.carrier_id) {
        if let Some(s) = &block.security_mode {
            policy.security_mode = parse_security_mode(s)?;
        }
        if let Some(s) = &block.origin_check {
            policy.origin_check = parse_origin_check(s)?;
        }
        if let Some(r) = &block.rate_limit {
            policy.rate_limit = Some(RateLimit { max_msgs: r.max_msgs, window_ms: r.window_ms });
        }
        for code in &block.premium_codes {
            policy.approval.premium_codes.insert(code.clone());
        }
        if block.burst_threshold.is_some() {
            policy.approval.burst_threshold = block.burst_threshold;
        }
        if let Some(legacy) = block.legacy_cs {
            policy.legacy_cs = legacy;
        }
    }
    // The defense block applies to every carrier, with or without a
    // matching carrier block.
    if cfg
        .defenses
        .as_ref()
        .and_then(|d| d.strict_origin)
        .unwrap_or(false)
    {
        policy.origin_check = OriginCheck::Strict;
    }
    if let Some(approval) = cfg.defenses.as_ref().and_then(|d| d.approval_triggers.as_ref()) {
        for code in &approval.premium_codes {
            policy.approval.premium_codes.insert(code.clone());
        }
        if approval.burst_threshold.is_some() {
            policy.approval.burst_threshold = approval.burst_threshold;
        }
    }
    Ok(())
}

/// Builds the runtime-MAC configuration from the defense block (or the
/// default 20-byte tag over the 256-bit hash).
pub(crate) fn mac_config_from(cfg: &ScenarioConfig) -> Result<MacConfig, ScenarioError> {
    let block = cfg.defenses.as_ref().and_then(|d| d.mac.clone());
    let (tag_length, label) = match block {
        Some(m) => {
            let label = match m.hash_label.as_deref() {
                Some(s) => s
                    .parse::<HashLabel>()
                    .map_err(ScenarioError::Config)?,
                None => HashLabel::Sha256,
            };
            (m.tag_length, label)
        }
        None => (20, HashLabel::Sha256),
    };
    Ok(MacConfig::new(tag_length, label)?)
}

/// The scenario catalog.
pub fn list_scenarios() -> Vec<(&'static str, &'static str)> {
    vec![
        (
            "facebook_individual",
            "one attacker device spoofs a victim's number to drive the victim's text-command social account: status update, add-a-friend, like-a-page",
        ),
        (
            "like_farm",
            "spoofs many distinct subscribers to collect one like per real account on a chosen page",
        ),
        (
            "privacy_leak",
            "add-a-friend plus a phone-number status trick so the attacker can link numbers to harvested profiles",
        ),
        (
            "donation",
            "pipelined keyword-plus-confirmation texts charge carrier-billed donations to spoofed numbers",
        ),
        (
            "spam_subscribe",
            "spoof-enrolls victims into notification services, then periodic pushes accumulate unsolicited texts",
        ),
        (
            "rate_measure",
            "compares app-path throughput under the OS cap against the raw datagram path, with and without a network rate limit, over 30 virtual minutes",
        ),
        (
            "defense_mac",
            "re-runs the account-abuse and donation attacks with per-message MAC runtime authentication at the providers",
        ),
        (
            "defense_440",
            "user-approval challenges on premium destinations, with strict origin checking, against the donation attack",
        ),
        (
            "defense_strict_origin",
            "re-runs the account-abuse attack with the carrier enforcing From = authenticated identity",
        ),
        (
            "table1_audit",
            "classifies the 64-service catalog and compares predictions against recorded ground truth",
        ),
        (
            "legacy_baseline",
            "circuit-switched baseline: the submission protocol carries no originating address, so every spoof fails",
        ),
    ]
}

/// Runs one named scenario to completion.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SimReport, ScenarioError> {
    match cfg.scenario.as_str() {
        "facebook_individual" => runs::facebook_individual(cfg),
        "like_farm" => runs::like_farm(cfg),
        "privacy_leak" => runs::privacy_leak(cfg),
        "donation" => runs::donation(cfg),
        "spam_subscribe" => runs::spam_subscribe(cfg),
        "rate_measure" => runs::rate_measure(cfg),
        "defense_mac" => runs::defense_mac(cfg),
        "defense_440" => runs::defense_440(cfg),
        "defense_strict_origin" => runs::defense_strict_origin(cfg),
        "table1_audit" => runs::table1_audit(cfg),
        "legacy_baseline" => runs::legacy_baseline(cfg),
        other => Err(ScenarioError::UnknownScenario(other.to_string())),
    }
}
