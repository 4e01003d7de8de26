//! The shipped service catalog and the threat classifier.
//!
//! Sixty-four text-enabled services across 27 industries, transcribed into
//! [`ProviderRecord`]s. Rows whose source material left a field un-inferable
//! carry that field name in `assumed`. Three rows are flagged `exception`:
//! their recorded "not vulnerable" label is not derivable from their own
//! service attributes, and the classifier is expected to disagree there.

use super::enrollment::EnrollmentKind;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ServiceModel {
    ReqResp,
    SubNotif,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuntimeAuth {
    None,
    WeakConfirm,
    Mac,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Threat {
    AccountAbuse,
    Donation,
    SpamLawsuit,
    None,
}

impl Threat {
    pub fn is_vulnerable(&self) -> bool {
        !matches!(self, Threat::None)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Threat::AccountAbuse => "account-abuse",
            Threat::Donation => "donation",
            Threat::SpamLawsuit => "spam-lawsuit",
            Threat::None => "none",
        }
    }
}

/// One catalog row: a mobile service reachable behind a short code.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProviderRecord {
    pub name: String,
    pub industry: String,
    pub short_code: String,
    pub enrollment: EnrollmentKind,
    pub service_model: ServiceModel,
    pub operations: String,
    pub money_involved: bool,
    pub runtime_auth: RuntimeAuth,
    pub enroll_web: bool,
    pub enroll_text: bool,
    /// Enrolled by the carrier on behalf of every subscriber.
    #[serde(default)]
    pub enroll_carrier: bool,
    /// The service executes state-changing commands over text, not just
    /// queries.
    pub non_query_ops: bool,
    pub ground_truth_threat: Threat,
    #[serde(default)]
    pub exception: bool,
    /// Field names whose values were assumed rather than sourced.
    #[serde(default)]
    pub assumed: Vec<String>,
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("catalog violates invariant: {0}")]
    Invariant(String),
}

const SHIPPED_CATALOG: &str = include_str!("../../data/catalog.json");

/// Loads the catalog shipped with the crate.
pub fn default_catalog() -> Vec<ProviderRecord> {
    load_catalog(SHIPPED_CATALOG).expect("shipped catalog is valid")
}

/// Parses a catalog from JSON and checks its structural invariants.
pub fn load_catalog(json: &str) -> Result<Vec<ProviderRecord>, CatalogError> {
    let records: Vec<ProviderRecord> = serde_json::from_str(json)?;
    for r in &records {
        if !(5..=6).contains(&r.short_code.len()) {
            return Err(CatalogError::Invariant(format!(
                "{}: short code {} is not 5-6 digits",
                r.name, r.short_code
            )));
        }
        if r.enrollment == EnrollmentKind::AlwaysOn && !r.money_involved {
            return Err(CatalogError::Invariant(format!(
                "{}: always-on enrollment only ships for money services",
                r.name
            )));
        }
    }
    Ok(records)
}

/// Rule-based threat prediction from a record's service attributes.
///
/// The rules fire in order: carrier-billed money services without real
/// runtime authentication are donation targets; request-response services
/// that execute non-query commands with no runtime check are account-abuse
/// targets; notification services with text-spoofable enrollment are spam
/// (and spam-lawsuit) vectors.
pub fn classify_threat(record: &ProviderRecord) -> Threat {
    if record.money_involved
        && record.enrollment == EnrollmentKind::AlwaysOn
        && matches!(record.runtime_auth, RuntimeAuth::None | RuntimeAuth::WeakConfirm)
    {
        return Threat::Donation;
    }
    if record.service_model == ServiceModel::ReqResp
        && record.runtime_auth == RuntimeAuth::None
        && record.non_query_ops
    {
        return Threat::AccountAbuse;
    }
    if record.service_model == ServiceModel::SubNotif
        && matches!(record.enrollment, EnrollmentKind::OneStep | EnrollmentKind::ThreeStepSimple)
    {
        return Threat::SpamLawsuit;
    }
    Threat::None
}

/// One audited row of predicted versus recorded threat.
#[derive(Debug, Clone, Serialize)]
pub struct ThreatRow {
    pub name: String,
    pub short_code: String,
    pub predicted: String,
    pub ground_truth: String,
    pub exception: bool,
    pub matches: bool,
}

/// Audit summary over a whole catalog.
#[derive(Debug, Clone, Serialize)]
pub struct ThreatAudit {
    pub rows: Vec<ThreatRow>,
    pub total: usize,
    pub ground_truth_vulnerable: usize,
    pub predicted_vulnerable: usize,
    pub matches: usize,
    pub mismatched_names: Vec<String>,
}

pub fn audit_catalog(records: &[ProviderRecord]) -> ThreatAudit {
    let mut rows = Vec::with_capacity(records.len());
    let mut ground_truth_vulnerable = 0;
    let mut predicted_vulnerable = 0;
    let mut matches = 0;
    let mut mismatched_names = Vec::new();
    for r in records {
        let predicted = classify_threat(r);
        if r.ground_truth_threat.is_vulnerable() {
            ground_truth_vulnerable += 1;
        }
        if predicted.is_vulnerable() {
            predicted_vulnerable += 1;
        }
        let ok = predicted == r.ground_truth_threat;
        if ok {
            matches += 1;
        } else {
            mismatched_names.push(r.name.clone());
        }
        rows.push(ThreatRow {
            name: r.name.clone(),
            short_code: r.short_code.clone(),
            predicted: predicted.label().to_string(),
            ground_truth: r.ground_truth_threat.label().to_string(),
            exception: r.exception,
            matches: ok,
        });
    }
    ThreatAudit {
        total: records.len(),
        ground_truth_vulnerable,
        predicted_vulnerable,
        matches,
        mismatched_names,
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_catalog_has_64_rows_and_53_vulnerable() {
        let catalog = default_catalog();
        assert_eq!(catalog.len(), 64);
        let audit = audit_catalog(&catalog);
        assert_eq!(audit.ground_truth_vulnerable, 53);
    }

    #[test]
    fn classifier_matches_61_rows_missing_only_exceptions() {
        let catalog = default_catalog();
        let audit = audit_catalog(&catalog);
        assert_eq!(audit.matches, 61);
        assert_eq!(
            audit.mismatched_names,
            vec!["State Farm".to_string(), "Safeway".to_string(), "Marriot".to_string()]
        );
        for row in &audit.rows {
            assert_eq!(row.matches, !row.exception, "{}", row.name);
        }
    }

    #[test]
    fn classifier_examples() {
        let catalog = default_catalog();
        let by_name = |n: &str| catalog.iter().find(|r| r.name == n).unwrap();
        assert_eq!(classify_threat(by_name("Facebook")), Threat::AccountAbuse);
        assert_eq!(classify_threat(by_name("Red Cross")), Threat::Donation);
        assert_eq!(classify_threat(by_name("Walmart")), Threat::SpamLawsuit);
        assert_eq!(classify_threat(by_name("JP Morgan Chase")), Threat::None);
        // Runtime auth shields a money service with non-query operations.
        assert_eq!(classify_threat(by_name("Wells Fargo")), Threat::None);
        assert!(by_name("Wells Fargo").assumed.contains(&"runtime_auth".to_string()));
    }

    #[test]
    fn always_on_rows_are_money_services() {
        for r in default_catalog() {
            if r.enrollment == EnrollmentKind::AlwaysOn {
                assert!(r.money_involved, "{}", r.name);
                assert!(r.enroll_carrier, "{}", r.name);
            }
        }
    }

    #[test]
    fn shared_short_codes_exist_and_disambiguate_by_content() {
        let catalog = default_catalog();
        let on_20222: Vec<&ProviderRecord> =
            catalog.iter().filter(|r| r.short_code == "20222").collect();
        assert!(on_20222.len() >= 2);
    }

    #[test]
    fn invalid_catalogs_are_rejected() {
        let bad_code = r#"[{"name":"X","industry":"Y","short_code":"1234","enrollment":"OneStep",
            "service_model":"SubNotif","operations":"","money_involved":false,
            "runtime_auth":"None","enroll_web":false,"enroll_text":true,
            "non_query_ops":false,"ground_truth_threat":"None"}]"#;
        assert!(matches!(load_catalog(bad_code), Err(CatalogError::Invariant(_))));

        let bad_always_on = r#"[{"name":"X","industry":"Y","short_code":"12345","enrollment":"AlwaysOn",
            "service_model":"ReqResp","operations":"","money_involved":false,
            "runtime_auth":"WeakConfirm","enroll_web":false,"enroll_text":false,
            "non_query_ops":true,"ground_truth_threat":"Donation"}]"#;
        assert!(matches!(load_catalog(bad_always_on), Err(CatalogError::Invariant(_))));

        assert!(matches!(load_catalog("not json"), Err(CatalogError::Parse(_))));
    }
}
