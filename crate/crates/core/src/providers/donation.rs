//! Carrier-billed donation services.
//!
//! These run always-on: every subscriber is implicitly enrolled. A text
//! carrying a donation keyword opens a pending charge; a fixed confirmation
//! reply inside the window appends the charge to the phone's carrier bill.

use crate::netsim::Millis;
use std::collections::BTreeMap;

/// Units charged per confirmed donation.
pub const DONATION_AMOUNT: u32 = 10;
/// A pending donation expires this long after the keyword text.
pub const PENDING_WINDOW_MS: Millis = 15 * 60 * 1000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Charge {
    pub at: Millis,
    pub keyword: String,
    pub amount: u32,
}

#[derive(Debug, Clone)]
struct Pending {
    keyword: String,
    amount: u32,
    deadline: Millis,
}

/// Ledger and pending state for all donation keywords behind one short code.
pub struct DonationService {
    /// keyword -> charity name
    keywords: BTreeMap<String, String>,
    pending: BTreeMap<String, Pending>,
    charges: BTreeMap<String, Vec<Charge>>,
    pub counters: BTreeMap<String, u64>,
}

impl DonationService {
    pub fn new() -> Self {
        DonationService {
            keywords: BTreeMap::new(),
            pending: BTreeMap::new(),
            charges: BTreeMap::new(),
            counters: BTreeMap::new(),
        }
    }

    pub fn add_keyword(&mut self, keyword: &str, charity: &str) {
        self.keywords.insert(keyword.to_ascii_uppercase(), charity.to_string());
    }

    pub fn charges_for(&self, phone: &str) -> &[Charge] {
        self.charges.get(phone).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn total_charged(&self) -> u64 {
        self.charges
            .values()
            .flat_map(|v| v.iter().map(|c| c.amount as u64))
            .sum()
    }

    pub fn charge_count(&self) -> u64 {
        self.charges.values().map(|v| v.len() as u64).sum()
    }

    fn bump(&mut self, key: &str) {
        *self.counters.entry(key.to_string()).or_insert(0) += 1;
    }

    /// Handles one inbound text; returns reply texts to the sender number.
    pub fn handle_text(&mut self, from_phone: &str, text: &str, now: Millis) -> Vec<String> {
        let token = text.trim().to_ascii_uppercase();

        if let Some(charity) = self.keywords.get(&token).cloned() {
            self.pending.insert(
                from_phone.to_string(),
                Pending {
                    keyword: token.clone(),
                    amount: DONATION_AMOUNT,
                    deadline: now + PENDING_WINDOW_MS,
                },
            );
            self.bump("prompts");
            return vec![format!(
                "To confirm your ${DONATION_AMOUNT} donation to {charity} reply with YES"
            )];
        }

        if token == "YES" {
            match self.pending.remove(from_phone) {
                Some(p) if now <= p.deadline => {
                    self.charges.entry(from_phone.to_string()).or_default().push(Charge {
                        at: now,
                        keyword: p.keyword.clone(),
                        amount: p.amount,
                    });
                    self.bump("charges");
                    return vec![format!("Thank you! ${} was added to your bill.", p.amount)];
                }
                Some(_) => {
                    self.bump("expired_confirmations");
                    return vec![];
                }
                // A stray YES with nothing pending is ignored.
                None => {
                    self.bump("stray_confirmations");
                    return vec![];
                }
            }
        }

        self.bump("unknown_keywords");
        vec!["Text a donation keyword to give, e.g. REDCROSS.".to_string()]
    }
}

impl Default for DonationService {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn service() -> DonationService {
        let mut d = DonationService::new();
        d.add_keyword("REDCROSS", "American Red Cross");
        d
    }

    #[test]
    fn keyword_then_yes_charges_once() {
        let mut d = service();
        let replies = d.handle_text("3105550001", "REDCROSS", 0);
        assert!(replies[0].contains("reply with YES"));
        d.handle_text("3105550001", "YES", 5_000);
        let charges = d.charges_for("3105550001");
        assert_eq!(charges.len(), 1);
        assert_eq!(charges[0].amount, DONATION_AMOUNT);
        assert_eq!(d.total_charged(), 10);
        // A second YES has nothing pending.
        d.handle_text("3105550001", "YES", 6_000);
        assert_eq!(d.charges_for("3105550001").len(), 1);
    }

    #[test]
    fn stray_yes_is_ignored() {
        let mut d = service();
        assert!(d.handle_text("3105550001", "YES", 0).is_empty());
        assert_eq!(d.total_charged(), 0);
    }

    #[test]
    fn pending_expires() {
        let mut d = service();
        d.handle_text("3105550001", "REDCROSS", 0);
        d.handle_text("3105550001", "YES", PENDING_WINDOW_MS + 1);
        assert_eq!(d.total_charged(), 0);
    }

    #[test]
    fn unknown_keyword_gets_help_text() {
        let mut d = service();
        let replies = d.handle_text("3105550001", "GIVEME", 0);
        assert_eq!(replies.len(), 1);
        assert!(replies[0].contains("keyword"));
    }

    #[test]
    fn case_insensitive_keyword() {
        let mut d = service();
        d.handle_text("3105550001", "redcross", 0);
        d.handle_text("3105550001", "yes", 10);
        assert_eq!(d.total_charged(), 10);
    }
}
