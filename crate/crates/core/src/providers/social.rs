//! Text-command social networking service behind a short code.
//!
//! Accounts bind to phone numbers through a four-step flow: a logged-in web
//! session requests the binding, the phone texts the trigger letter, the
//! service texts back a one-time code, and the web session echoes it. After
//! that single authentication the service trusts every text arriving from
//! the bound number; commands run with no further check unless the runtime
//! MAC defense is switched on upstream.

use crate::netsim::Millis;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

/// One-time binding codes die after ten virtual minutes.
const BIND_CODE_TTL_MS: Millis = 10 * 60 * 1000;

pub type AccountId = String;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivityEntry {
    pub at: Millis,
    pub action: String,
    pub detail: String,
    pub origin_phone: String,
}

#[derive(Debug, Clone, Default)]
pub struct SocialAccount {
    pub account_id: AccountId,
    pub display_name: String,
    pub bound_phone: Option<String>,
    pub friends: BTreeSet<AccountId>,
    pub follows: BTreeSet<AccountId>,
    pub likes: BTreeSet<String>,
    pub status_log: Vec<(Millis, String, String)>,
    pub pending_friend_requests: BTreeSet<AccountId>,
    pub activity_log: Vec<ActivityEntry>,
}

#[derive(Debug, Clone)]
struct PendingBind {
    account: AccountId,
}

#[derive(Debug, Clone)]
struct IssuedCode {
    phone: String,
    expires_at: Millis,
    used: bool,
}

/// Effect of one inbound text, for logging and assertions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SocialAction {
    StatusUpdate,
    FriendRequest(AccountId),
    Like(String),
    Follow(AccountId),
    Unfollow(AccountId),
    BindCodeIssued,
    ErrorReply,
}

pub struct SocialService {
    pub short_code: String,
    pub name: String,
    accounts: BTreeMap<AccountId, SocialAccount>,
    by_phone: BTreeMap<String, AccountId>,
    by_name: BTreeMap<String, AccountId>,
    pages: BTreeMap<String, BTreeSet<AccountId>>,
    /// Accounts whose web session pressed "add a phone".
    web_pending: Vec<PendingBind>,
    codes: BTreeMap<String, IssuedCode>,
    pub counters: BTreeMap<String, u64>,
}

impl SocialService {
    pub fn new(name: &str, short_code: &str) -> Self {
        SocialService {
            short_code: short_code.to_string(),
            name: name.to_string(),
            accounts: BTreeMap::new(),
            by_phone: BTreeMap::new(),
            by_name: BTreeMap::new(),
            pages: BTreeMap::new(),
            web_pending: Vec::new(),
            codes: BTreeMap::new(),
            counters: BTreeMap::new(),
        }
    }

    fn bump(&mut self, key: &str) {
        *self.counters.entry(key.to_string()).or_insert(0) += 1;
    }

    pub fn create_account(&mut self, account_id: &str, display_name: &str) {
        self.accounts.insert(
            account_id.to_string(),
            SocialAccount {
                account_id: account_id.to_string(),
                display_name: display_name.to_string(),
                ..SocialAccount::default()
            },
        );
        self.by_name
            .insert(display_name.to_ascii_lowercase(), account_id.to_string());
    }

    pub fn account(&self, id: &str) -> Option<&SocialAccount> {
        self.accounts.get(id)
    }

    pub fn account_by_phone(&self, phone: &str) -> Option<&SocialAccount> {
        self.by_phone.get(phone).and_then(|id| self.accounts.get(id))
    }

    pub fn page_like_count(&self, page: &str) -> usize {
        self.pages.get(page).map(BTreeSet::len).unwrap_or(0)
    }

    /// Directly establishes a binding, for scenario setup where the
    /// four-step flow already happened in the past.
    pub fn bind_direct(&mut self, account_id: &str, phone: &str) {
        assert!(
            !self.by_phone.contains_key(phone),
            "at most one account per bound phone"
        );
        if let Some(acc) = self.accounts.get_mut(account_id) {
            assert!(acc.bound_phone.is_none(), "at most one phone per account");
            acc.bound_phone = Some(phone.to_string());
            self.by_phone.insert(phone.to_string(), account_id.to_string());
        }
    }

    /// Web step 1: a logged-in session asks to add a phone.
    pub fn web_begin_add_phone(&mut self, account_id: &str) {
        if self.accounts.contains_key(account_id) {
            self.web_pending.push(PendingBind { account: account_id.to_string() });
        }
    }

    /// Web step 4: the session echoes the code it received over text.
    /// Codes are single-use and expire; reuse fails.
    pub fn web_enter_code(&mut self, account_id: &str, code: &str, now: Millis) -> bool {
        let Some(issued) = self.codes.get_mut(code) else {
            self.bump("bind_code_rejected");
            return false;
        };
        if issued.used || now >= issued.expires_at {
            self.bump("bind_code_rejected");
            return false;
        }
        let waiting = self
            .web_pending
            .iter()
            .position(|p| p.account == account_id);
        let Some(pos) = waiting else {
            self.bump("bind_code_rejected");
            return false;
        };
        let phone = issued.phone.clone();
        if self.by_phone.contains_key(&phone) {
            self.bump("bind_code_rejected");
            return false;
        }
        let Some(acc) = self.accounts.get_mut(account_id) else {
            return false;
        };
        if acc.bound_phone.is_some() {
            self.bump("bind_code_rejected");
            return false;
        }
        issued.used = true;
        acc.bound_phone = Some(phone.clone());
        self.by_phone.insert(phone, account_id.to_string());
        self.web_pending.remove(pos);
        self.bump("bindings");
        true
    }

    /// Approves a pending friend request from `requester` on `approver`'s
    /// web session.
    pub fn web_accept_friend(&mut self, approver: &str, requester: &str) -> bool {
        let Some(acc) = self.accounts.get_mut(approver) else {
            return false;
        };
        if !acc.pending_friend_requests.remove(requester) {
            return false;
        }
        acc.friends.insert(requester.to_string());
        if let Some(req) = self.accounts.get_mut(requester) {
            req.friends.insert(approver.to_string());
        }
        true
    }

    /// Handles one inbound text from `from_phone`. Returns the action taken
    /// plus any reply texts addressed back to the phone.
    pub fn handle_text(
        &mut self,
        from_phone: &str,
        text: &str,
        now: Millis,
        rng: &mut ChaCha8Rng,
    ) -> (SocialAction, Vec<String>) {
        let trimmed = text.trim();

        // The binding trigger letter works from any phone; the code is
        // useless without a waiting web session.
        if trimmed.eq_ignore_ascii_case("F") {
            let code = format!("{:06}", rng.random_range(0..1_000_000u32));
            self.codes.insert(
                code.clone(),
                IssuedCode { phone: from_phone.to_string(), expires_at: now + BIND_CODE_TTL_MS, used: false },
            );
            self.bump("bind_codes_issued");
            return (
                SocialAction::BindCodeIssued,
                vec![format!("Your {} confirmation code is {code}", self.name)],
            );
        }

        let Some(account_id) = self.by_phone.get(from_phone).cloned() else {
            self.bump("texts_from_unbound");
            return (
                SocialAction::ErrorReply,
                vec![format!("This number is not registered with {}.", self.name)],
            );
        };

        let mut tokens = trimmed.splitn(2, char::is_whitespace);
        let verb = tokens.next().unwrap_or("").to_ascii_uppercase();
        let rest = tokens.next().unwrap_or("").trim().to_string();

        let log = |acc: &mut SocialAccount, action: &str, detail: &str| {
            acc.activity_log.push(ActivityEntry {
                at: now,
                action: action.to_string(),
                detail: detail.to_string(),
                origin_phone: from_phone.to_string(),
            });
        };

        match verb.as_str() {
            "ADD" if !rest.is_empty() => {
                let target = self
                    .by_name
                    .get(&rest.to_ascii_lowercase())
                    .cloned()
                    .or_else(|| self.by_phone.get(&rest).cloned());
                let Some(target_id) = target else {
                    self.bump("add_unknown_target");
                    return (
                        SocialAction::ErrorReply,
                        vec![format!("No account matches {rest}.")],
                    );
                };
                if let Some(t) = self.accounts.get_mut(&target_id) {
                    t.pending_friend_requests.insert(account_id.clone());
                }
                let acc = self.accounts.get_mut(&account_id).unwrap();
                log(acc, "add-friend", &target_id);
                self.bump("friend_requests");
                (SocialAction::FriendRequest(target_id), vec![])
            }
            "LIKE" if !rest.is_empty() => {
                let acc = self.accounts.get_mut(&account_id).unwrap();
                acc.likes.insert(rest.clone());
                log(acc, "like", &rest);
                // Page counters move once per distinct account.
                self.pages.entry(rest.clone()).or_default().insert(account_id.clone());
                self.bump("likes");
                (SocialAction::Like(rest), vec![])
            }
            "SUBSCRIBE" if !rest.is_empty() => {
                let target = self.by_name.get(&rest.to_ascii_lowercase()).cloned();
                let Some(target_id) = target else {
                    self.bump("follow_unknown_target");
                    return (SocialAction::ErrorReply, vec![format!("No account matches {rest}.")]);
                };
                let acc = self.accounts.get_mut(&account_id).unwrap();
                acc.follows.insert(target_id.clone());
                log(acc, "subscribe", &target_id);
                (SocialAction::Follow(target_id), vec![])
            }
            "UNSUBSCRIBE" if !rest.is_empty() => {
                let target = self.by_name.get(&rest.to_ascii_lowercase()).cloned();
                let Some(target_id) = target else {
                    self.bump("follow_unknown_target");
                    return (SocialAction::ErrorReply, vec![format!("No account matches {rest}.")]);
                };
                let acc = self.accounts.get_mut(&account_id).unwrap();
                acc.follows.remove(&target_id);
                log(acc, "unsubscribe", &target_id);
                (SocialAction::Unfollow(target_id), vec![])
            }
            _ => {
                let acc = self.accounts.get_mut(&account_id).unwrap();
                acc.status_log.push((now, trimmed.to_string(), from_phone.to_string()));
                log(acc, "status", trimmed);
                self.bump("status_updates");
                (SocialAction::StatusUpdate, vec![])
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(3)
    }

    fn service() -> SocialService {
        let mut s = SocialService::new("FaceText", "32665");
        s.create_account("acct-one", "ResearchOne");
        s.create_account("acct-two", "ResearchTwo");
        s.create_account("acct-bob", "Bob");
        s
    }

    #[test]
    fn full_four_step_binding_flow() {
        let mut s = service();
        let mut r = rng();
        s.web_begin_add_phone("acct-one");
        let (action, replies) = s.handle_text("3105554347", "F", 0, &mut r);
        assert_eq!(action, SocialAction::BindCodeIssued);
        let code = replies[0].split_whitespace().last().unwrap().to_string();
        assert!(s.web_enter_code("acct-one", &code, 5_000));
        assert_eq!(s.account("acct-one").unwrap().bound_phone.as_deref(), Some("3105554347"));
        // Single use: entering the same code again fails.
        assert!(!s.web_enter_code("acct-two", &code, 6_000));
    }

    #[test]
    fn stray_trigger_issues_unusable_code() {
        let mut s = service();
        let mut r = rng();
        // No prior web request: the code exists but no session can use it
        // toward an account that never asked.
        let (_, replies) = s.handle_text("3105550000", "F", 0, &mut r);
        let code = replies[0].split_whitespace().last().unwrap().to_string();
        assert!(!s.web_enter_code("acct-one", &code, 1_000));
    }

    #[test]
    fn expired_code_fails() {
        let mut s = service();
        let mut r = rng();
        s.web_begin_add_phone("acct-one");
        let (_, replies) = s.handle_text("3105554347", "F", 0, &mut r);
        let code = replies[0].split_whitespace().last().unwrap().to_string();
        assert!(!s.web_enter_code("acct-one", &code, BIND_CODE_TTL_MS));
    }

    #[test]
    fn commands_from_bound_phone() {
        let mut s = service();
        let mut r = rng();
        s.bind_direct("acct-one", "3105554347");

        let (a, _) = s.handle_text("3105554347", "Hi...", 10, &mut r);
        assert_eq!(a, SocialAction::StatusUpdate);
        let (a, _) = s.handle_text("3105554347", "Add Bob", 20, &mut r);
        assert_eq!(a, SocialAction::FriendRequest("acct-bob".into()));
        let (a, _) = s.handle_text("3105554347", "Like Lakers Nation", 30, &mut r);
        assert_eq!(a, SocialAction::Like("Lakers Nation".into()));

        let acc = s.account("acct-one").unwrap();
        assert_eq!(acc.activity_log.len(), 3);
        assert!(acc.activity_log.iter().all(|e| e.origin_phone == "3105554347"));
        assert_eq!(acc.status_log[0].1, "Hi...");
        assert!(s.account("acct-bob").unwrap().pending_friend_requests.contains("acct-one"));
        assert_eq!(s.page_like_count("Lakers Nation"), 1);
    }

    #[test]
    fn duplicate_likes_count_once() {
        let mut s = service();
        let mut r = rng();
        s.bind_direct("acct-one", "1111111111");
        s.bind_direct("acct-two", "2222222222");
        s.handle_text("1111111111", "Like Lakers Nation", 0, &mut r);
        s.handle_text("1111111111", "Like Lakers Nation", 1, &mut r);
        assert_eq!(s.page_like_count("Lakers Nation"), 1);
        s.handle_text("2222222222", "Like Lakers Nation", 2, &mut r);
        assert_eq!(s.page_like_count("Lakers Nation"), 2);
    }

    #[test]
    fn unbound_phone_gets_error_reply() {
        let mut s = service();
        let mut r = rng();
        let (a, replies) = s.handle_text("9995550000", "Hi...", 0, &mut r);
        assert_eq!(a, SocialAction::ErrorReply);
        assert_eq!(replies.len(), 1);
    }

    #[test]
    fn add_unknown_target_replies_with_error() {
        let mut s = service();
        let mut r = rng();
        s.bind_direct("acct-one", "1111111111");
        let (a, replies) = s.handle_text("1111111111", "Add Nobody Known", 0, &mut r);
        assert_eq!(a, SocialAction::ErrorReply);
        assert!(!replies.is_empty());
    }

    #[test]
    fn friend_acceptance_links_both_sides() {
        let mut s = service();
        let mut r = rng();
        s.bind_direct("acct-one", "1111111111");
        s.handle_text("1111111111", "Add ResearchTwo", 0, &mut r);
        assert!(s.web_accept_friend("acct-two", "acct-one"));
        assert!(s.account("acct-one").unwrap().friends.contains("acct-two"));
        assert!(s.account("acct-two").unwrap().friends.contains("acct-one"));
        // Second acceptance has nothing pending.
        assert!(!s.web_accept_friend("acct-two", "acct-one"));
    }

    #[test]
    fn status_with_phone_number_lands_in_log() {
        let mut s = service();
        let mut r = rng();
        s.bind_direct("acct-one", "3105552501");
        s.handle_text("3105552501", "my number is 3105552501", 0, &mut r);
        let acc = s.account("acct-one").unwrap();
        assert!(acc.status_log[0].1.contains("3105552501"));
    }
}
