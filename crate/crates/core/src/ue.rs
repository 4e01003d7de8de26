//! Simulated user equipment.
//!
//! Two send paths exist on the same device. The honest path goes through
//! the messaging app and its OS gates: a confirmation dialog for short-code
//! recipients and a rate prompt once 30 messages have gone out inside a
//! 30-minute window. The attacker path builds SIP MESSAGE requests directly
//! and pushes them out raw datagrams from arbitrary source ports, skipping
//! every device gate; whatever happens next is network policy.

use crate::defenses::{
    self, attach_tag_payload, canonical_bytes, compute_tag, MacConfig, SeqWindowState, VerifyStatus,
};
use crate::ims_core::{Carrier, SIP_PORT};
use crate::netsim::{
    parse_routing_table, Datagram, Millis, Net, Node, NodeId, RouteEntry,
};
use crate::sip_codec::{
    self, build_message_request, build_register_request, compute_digest_response, parse_challenge,
    tel_uri_number, DeviceProfile, SipEnvelope, SipKind,
};
use crate::sms_codec::{self, SmsAddress, SmsPdu, UserData};
use std::collections::{BTreeMap, VecDeque};
use thiserror::Error;

/// App-side cap within one 30-minute window before the rate prompt appears.
pub const APP_WINDOW_CAP: u32 = 30;
pub const APP_WINDOW_MS: Millis = 30 * 60 * 1000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum UeError {
    #[error("no route toward an IMS interface besides the default route")]
    NoImsRoute,
    #[error("routing table: {0}")]
    RouteTable(String),
    #[error("device is not registered")]
    NotRegistered,
}

/// How the simulated user answers confirmation dialogs.
#[derive(Debug, Clone)]
pub enum ApprovalPolicy {
    AutoApprove,
    AutoDeny,
    /// Scripted decisions consumed in order; exhausted scripts deny.
    Script(VecDeque<bool>),
}

impl ApprovalPolicy {
    fn decide(&mut self) -> bool {
        match self {
            ApprovalPolicy::AutoApprove => true,
            ApprovalPolicy::AutoDeny => false,
            ApprovalPolicy::Script(q) => q.pop_front().unwrap_or(false),
        }
    }
}

/// Result of an app-path send attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppSendOutcome {
    Sent,
    /// Held behind the short-code confirmation dialog and denied.
    AwaitingUserConfirm,
    /// Held behind the rate-control prompt and denied.
    AwaitingRateApproval,
}

/// Scripted spoofing campaign, executed in a pipeline across victims.
#[derive(Debug, Clone)]
pub struct AttackScript {
    pub victim_numbers: Vec<String>,
    pub target_code: String,
    /// `{victim}` substitutes the current victim number.
    pub message_template: String,
    pub inter_message_delay_ms: Millis,
    pub second_message: Option<(String, Millis)>,
}

/// Network-visible fate of one sent message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SendStatus {
    Pending,
    Accepted,
    Rejected(u16),
    HeldForApproval,
    Abandoned,
}

#[derive(Debug, Clone)]
pub struct SendRecord {
    pub victim: Option<String>,
    pub from_number: String,
    pub recipient: String,
    pub request_uri: String,
    pub status: SendStatus,
}

#[derive(Debug, Clone)]
pub struct InboxEntry {
    pub at: Millis,
    pub orig: String,
    pub text: String,
    /// Set when the runtime MAC layer inspected the message.
    pub auth: Option<VerifyStatus>,
}

/// Deferred device work driven by fabric timers.
#[derive(Debug, Clone)]
pub enum DeviceAction {
    Register,
    AppSend { recipient: String, text: String },
    RawSend { from: String, recipient: String, text: String },
    /// Repeats an app-path send every `interval` until `until` (exclusive).
    AppLoop { recipient: String, text: String, interval: Millis, until: Millis },
    /// Repeats a raw-path send every `interval` until `until` (exclusive).
    RawLoop { from: String, recipient: String, text: String, interval: Millis, until: Millis },
}

/// Per-device runtime MAC state: shared config plus send/receive sequence
/// tracking per provider short code.
#[derive(Debug, Clone)]
pub struct DeviceMac {
    pub cfg: MacConfig,
    next_seq: BTreeMap<String, u64>,
    recv_seq: BTreeMap<String, SeqWindowState>,
}

impl DeviceMac {
    pub fn new(cfg: MacConfig) -> Self {
        DeviceMac { cfg, next_seq: BTreeMap::new(), recv_seq: BTreeMap::new() }
    }
}

pub struct Device {
    pub profile: DeviceProfile,
    pub registered: bool,
    pub approval_policy: ApprovalPolicy,
    pub inbox: Vec<InboxEntry>,
    pub inbox_enabled: bool,
    pub routing_table: Vec<RouteEntry>,
    pub outcomes: BTreeMap<String, SendRecord>,
    pub counters: BTreeMap<String, u64>,
    pub mac: Option<DeviceMac>,
    app_window: (u32, Millis),
    pending_reg: Option<PendingReg>,
    session_key: Option<Vec<u8>>,
    ephemeral_port: u16,
    msg_seq: u16,
    actions: BTreeMap<u64, DeviceAction>,
    next_token: u64,
    node_id: NodeId,
}

#[derive(Debug, Clone)]
struct PendingReg {
    call_id: String,
    challenge: Option<sip_codec::DigestChallenge>,
}

impl Device {
    pub fn new(profile: DeviceProfile, approval_policy: ApprovalPolicy) -> Self {
        Device {
            profile,
            registered: false,
            approval_policy,
            inbox: Vec::new(),
            inbox_enabled: true,
            routing_table: Vec::new(),
            outcomes: BTreeMap::new(),
            counters: BTreeMap::new(),
            mac: None,
            app_window: (0, 0),
            pending_reg: None,
            session_key: None,
            ephemeral_port: 40_000,
            msg_seq: 0,
            actions: BTreeMap::new(),
            next_token: 1,
            node_id: 0,
        }
    }

    pub fn set_node_id(&mut self, id: NodeId) {
        self.node_id = id;
    }

    pub fn counter(&self, key: &str) -> u64 {
        self.counters.get(key).copied().unwrap_or(0)
    }

    pub fn messages_sent(&self) -> u64 {
        self.counter("app_sent") + self.counter("raw_sent")
    }

    fn bump(&mut self, key: &str) {
        *self.counters.entry(key.to_string()).or_insert(0) += 1;
    }

    /// Reads the routing table text and fills in the IMS server address.
    pub fn discover(&mut self, routing_table_text: &str) -> Result<(String, String), UeError> {
        let (addr, dev) = discover_ims_address(routing_table_text)?;
        self.routing_table = parse_routing_table(routing_table_text)
            .map_err(|e| UeError::RouteTable(e.to_string()))?;
        self.profile.ims_server_address = addr.clone();
        Ok((addr, dev))
    }

    /// Queues `action` at absolute virtual time `at`.
    pub fn schedule(&mut self, net: &mut Net, at: Millis, action: DeviceAction) {
        let token = self.next_token;
        self.next_token += 1;
        self.actions.insert(token, action);
        net.schedule_at(self.node_id, at, token);
    }

    /// Kicks off the two-step registration exchange.
    pub fn start_register(&mut self, net: &mut Net) {
        let env = build_register_request(&mut self.profile, None);
        let call_id = env.header("Call-ID").unwrap().to_string();
        self.pending_reg = Some(PendingReg { call_id, challenge: None });
        self.bump("register_attempts");
        self.dispatch(net, env, SIP_PORT, "REGISTER");
    }

    /// Honest app-path send with the OS gates in front of it.
    pub fn send_sms_app(&mut self, net: &mut Net, recipient: &str, text: &str) -> AppSendOutcome {
        debug_assert!(self.registered, "app path requires registration");
        let now = net.now();
        // A window opens at its first sent message and expires 30 minutes
        // after that.
        if self.app_window.0 > 0 && now.saturating_sub(self.app_window.1) >= APP_WINDOW_MS {
            self.app_window = (0, now);
        }

        if is_short_code(recipient) {
            self.bump("app_prompt_shortcode");
            if !self.approval_policy.decide() {
                self.bump("app_blocked_shortcode");
                return AppSendOutcome::AwaitingUserConfirm;
            }
        }
        if self.app_window.0 >= APP_WINDOW_CAP {
            self.bump("app_prompt_rate");
            if !self.approval_policy.decide() {
                self.bump("app_blocked_rate");
                return AppSendOutcome::AwaitingRateApproval;
            }
        }

        let own = self.profile.phone_number.clone();
        let user_data = self.outbound_user_data(recipient, text);
        self.send_message(net, &own, recipient, user_data, SIP_PORT, None);
        if self.app_window.0 == 0 {
            self.app_window.1 = now;
        }
        self.app_window.0 += 1;
        self.bump("app_sent");
        AppSendOutcome::Sent
    }

    /// Raw datagram path: builds the MESSAGE directly, `from_number` free,
    /// source port arbitrary, no gate consulted and no app window touched.
    pub fn attacker_send_raw(&mut self, net: &mut Net, from_number: &str, recipient: &str, text: &str) {
        let port = self.next_ephemeral_port();
        let victim = Some(from_number.to_string());
        self.send_message(net, from_number, recipient, UserData::text(text), port, victim);
        self.bump("raw_sent");
    }

    /// Schedules the whole campaign: victim i's first message goes out at
    /// `now + i * inter_message_delay`, its optional second message after
    /// the configured extra delay, regardless of other victims' progress.
    pub fn run_attack_script(&mut self, net: &mut Net, script: &AttackScript) {
        let start = net.now();
        for (i, victim) in script.victim_numbers.iter().enumerate() {
            let t0 = start + i as Millis * script.inter_message_delay_ms;
            let text = script.message_template.replace("{victim}", victim);
            self.schedule(
                net,
                t0,
                DeviceAction::RawSend {
                    from: victim.clone(),
                    recipient: script.target_code.clone(),
                    text,
                },
            );
            if let Some((second_text, delay)) = &script.second_message {
                self.schedule(
                    net,
                    t0 + delay,
                    DeviceAction::RawSend {
                        from: victim.clone(),
                        recipient: script.target_code.clone(),
                        text: second_text.replace("{victim}", victim),
                    },
                );
            }
        }
    }

    /// Per-victim view of script outcomes, keyed by the spoofed number.
    pub fn script_outcomes(&self) -> BTreeMap<String, Vec<SendStatus>> {
        let mut out: BTreeMap<String, Vec<SendStatus>> = BTreeMap::new();
        for record in self.outcomes.values() {
            if let Some(victim) = &record.victim {
                out.entry(victim.clone()).or_default().push(record.status);
            }
        }
        out
    }

    fn outbound_user_data(&mut self, recipient: &str, text: &str) -> UserData {
        if let Some(mac) = &mut self.mac {
            let own = self.profile.phone_number.clone();
            if let Some(secret) = mac.cfg.secret(&own, recipient).map(<[u8]>::to_vec) {
                let seq = mac.next_seq.entry(recipient.to_string()).or_insert(0);
                let canonical = canonical_bytes(&own, recipient, *seq, text.as_bytes());
                let tag = compute_tag(&secret, &canonical, &mac.cfg);
                *seq += 1;
                if let Ok(payload) = attach_tag_payload(text.as_bytes(), &tag) {
                    return UserData::Octet(payload);
                }
            }
        }
        UserData::text(text)
    }

    fn send_message(
        &mut self,
        net: &mut Net,
        from_number: &str,
        recipient: &str,
        user_data: UserData,
        src_port: u16,
        victim: Option<String>,
    ) {
        self.msg_seq = self.msg_seq.wrapping_add(1);
        let dest = match SmsAddress::dtmf(recipient) {
            Ok(d) => d,
            Err(_) => {
                self.bump("send_bad_recipient");
                return;
            }
        };
        let pdu = SmsPdu::submit(dest, self.msg_seq, user_data);
        let body = match sms_codec::encode_pdu(&pdu) {
            Ok(b) => b,
            Err(_) => {
                self.bump("send_encode_error");
                return;
            }
        };
        let mut env = match build_message_request(&mut self.profile, from_number, recipient, body) {
            Ok(e) => e,
            Err(_) => {
                self.bump("send_build_error");
                return;
            }
        };
        if let Some(key) = &self.session_key {
            let tag = Carrier::ipsec_tag(key, &env);
            env.headers.insert(0, ("X-Sim-Ipsec-Tag".into(), tag));
        }
        let call_id = env.header("Call-ID").unwrap().to_string();
        self.outcomes.insert(
            call_id,
            SendRecord {
                victim,
                from_number: from_number.to_string(),
                recipient: recipient.to_string(),
                request_uri: env.request_uri().unwrap().to_string(),
                status: SendStatus::Pending,
            },
        );
        self.dispatch(net, env, src_port, "MESSAGE");
    }

    fn dispatch(&mut self, net: &mut Net, env: SipEnvelope, src_port: u16, tag: &str) {
        net.send(
            &self.profile.device_address.clone(),
            src_port,
            &self.profile.ims_server_address.clone(),
            SIP_PORT,
            sip_codec::serialize(&env),
            tag,
        );
    }

    fn next_ephemeral_port(&mut self) -> u16 {
        self.ephemeral_port = if self.ephemeral_port >= 60_000 {
            40_000
        } else {
            self.ephemeral_port + 1
        };
        self.ephemeral_port
    }

    fn on_register_response(&mut self, env: &SipEnvelope, net: &mut Net) {
        let Some(pending) = self.pending_reg.clone() else {
            return;
        };
        match env.response_code() {
            Some(401) => {
                let Some(challenge) = env.header("WWW-Authenticate").and_then(|v| parse_challenge(v).ok())
                else {
                    self.bump("register_bad_challenge");
                    self.pending_reg = None;
                    return;
                };
                let uri = format!("sip:{}", self.profile.ims_server_address);
                let response_hex =
                    compute_digest_response(&self.profile.auth_key, &challenge, "REGISTER", &uri);
                let env2 = build_register_request(&mut self.profile, Some((&challenge, &response_hex)));
                let call_id = env2.header("Call-ID").unwrap().to_string();
                self.pending_reg = Some(PendingReg { call_id, challenge: Some(challenge) });
                self.dispatch(net, env2, SIP_PORT, "REGISTER-auth");
            }
            Some(200) => {
                if let Some(tag) = env.header("X-Sim-Ipsec-Tag") {
                    let Some(challenge) = &pending.challenge else {
                        self.bump("register_bad_challenge");
                        self.pending_reg = None;
                        return;
                    };
                    let key = Carrier::derive_session_key(&self.profile.auth_key, &challenge.nonce);
                    if Carrier::ipsec_tag(&key, env) != tag {
                        self.bump("register_tag_mismatch");
                        self.pending_reg = None;
                        return;
                    }
                    self.session_key = Some(key);
                }
                self.registered = true;
                self.pending_reg = None;
                self.bump("register_ok");
            }
            Some(403) => {
                self.registered = false;
                self.pending_reg = None;
                self.bump("register_rejected");
            }
            _ => {}
        }
    }

    fn on_message_response(&mut self, env: &SipEnvelope, net: &mut Net) {
        let Some(call_id) = env.header("Call-ID").map(str::to_string) else {
            return;
        };
        let code = env.response_code().unwrap_or(0);
        match code {
            200 => {
                self.bump("accepted_200");
                if let Some(r) = self.outcomes.get_mut(&call_id) {
                    r.status = SendStatus::Accepted;
                }
            }
            440 => {
                self.bump("challenged_440");
                if let Some(r) = self.outcomes.get_mut(&call_id) {
                    r.status = SendStatus::HeldForApproval;
                }
                self.handle_440(env, &call_id, net);
            }
            other => {
                self.bump(&format!("rejected_{other}"));
                if let Some(r) = self.outcomes.get_mut(&call_id) {
                    r.status = SendStatus::Rejected(other);
                }
            }
        }
    }

    /// Consults the approval policy; on approval the digest answer is
    /// computed and the held message reference resubmitted, otherwise the
    /// message is abandoned.
    fn handle_440(&mut self, env: &SipEnvelope, call_id: &str, net: &mut Net) {
        let challenge = env.header("WWW-Authenticate").and_then(|v| parse_challenge(v).ok());
        let record = self.outcomes.get(call_id).cloned();
        let (Some(challenge), Some(record)) = (challenge, record) else {
            self.bump("abandoned_440");
            return;
        };
        if !self.approval_policy.decide() {
            self.bump("abandoned_440");
            if let Some(r) = self.outcomes.get_mut(call_id) {
                r.status = SendStatus::Abandoned;
            }
            return;
        }
        let response_hex = compute_digest_response(
            &self.profile.auth_key,
            &challenge,
            "MESSAGE",
            &record.request_uri,
        );
        let resubmit = SipEnvelope {
            kind: SipKind::Request { method: "MESSAGE".into(), uri: record.request_uri.clone() },
            headers: vec![
                ("Via".into(), format!("SIP/2.0/UDP {}", self.profile.device_address)),
                ("From".into(), format!("<tel:{}>", record.from_number)),
                ("To".into(), format!("<tel:{}>", record.recipient)),
                (
                    "Authorization".into(),
                    format!(
                        "Digest nonce=\"{}\", response=\"{}\"",
                        challenge.nonce, response_hex
                    ),
                ),
                ("Call-ID".into(), call_id.to_string()),
                ("Content-Length".into(), "0".into()),
            ],
            body: Vec::new(),
        };
        self.bump("resubmitted_440");
        self.dispatch(net, resubmit, SIP_PORT, "MESSAGE-resubmit");
    }

    fn on_mt_message(&mut self, env: &SipEnvelope, net: &mut Net) {
        if env.header("X-Sim-Report").is_some() {
            self.bump("delivery_reports");
            return;
        }
        let Ok(pdu) = sms_codec::decode_pdu(&env.body) else {
            self.bump("mt_decode_error");
            return;
        };
        if !self.inbox_enabled {
            self.bump("inbox_dropped");
            return;
        }
        let orig = pdu
            .orig
            .as_ref()
            .map(|a| a.digits.clone())
            .or_else(|| env.header("From").and_then(tel_uri_number).map(str::to_string))
            .unwrap_or_default();

        let own = self.profile.phone_number.clone();
        let mut auth = None;
        let mut payload = pdu.bearer.user_data.payload_bytes();
        if is_short_code(&orig) {
            if let Some(mac) = &mut self.mac {
                let secret = mac.cfg.secret(&own, &orig).map(<[u8]>::to_vec);
                let seq = mac.recv_seq.entry(orig.clone()).or_default();
                let (stripped, status) =
                    defenses::verify_payload(&orig, &own, &payload, secret.as_deref(), &mac.cfg, seq);
                payload = stripped;
                auth = Some(status);
                self.bump(match status {
                    VerifyStatus::Verified => "mt_verified",
                    VerifyStatus::Unauthenticated => "mt_unauthenticated",
                    VerifyStatus::Invalid => "mt_invalid",
                });
            }
        }
        self.inbox.push(InboxEntry {
            at: net.now(),
            orig,
            text: String::from_utf8_lossy(&payload).into_owned(),
            auth,
        });
    }

    fn run_action(&mut self, action: DeviceAction, net: &mut Net) {
        match action {
            DeviceAction::Register => self.start_register(net),
            DeviceAction::AppSend { recipient, text } => {
                self.send_sms_app(net, &recipient, &text);
            }
            DeviceAction::RawSend { from, recipient, text } => {
                self.attacker_send_raw(net, &from, &recipient, &text);
            }
            DeviceAction::AppLoop { recipient, text, interval, until } => {
                if net.now() < until {
                    self.send_sms_app(net, &recipient, &text);
                    let next = net.now() + interval;
                    if next < until {
                        self.schedule(net, next, DeviceAction::AppLoop { recipient, text, interval, until });
                    }
                }
            }
            DeviceAction::RawLoop { from, recipient, text, interval, until } => {
                if net.now() < until {
                    self.attacker_send_raw(net, &from, &recipient, &text);
                    let next = net.now() + interval;
                    if next < until {
                        self.schedule(
                            net,
                            next,
                            DeviceAction::RawLoop { from, recipient, text, interval, until },
                        );
                    }
                }
            }
        }
    }
}

impl Node for Device {
    fn on_datagram(&mut self, net: &mut Net, dgram: &Datagram) {
        let Ok(env) = sip_codec::parse(&dgram.payload) else {
            self.bump("sip_parse_error");
            return;
        };
        match &env.kind {
            SipKind::Response { .. } => {
                let is_reg = self
                    .pending_reg
                    .as_ref()
                    .map(|p| env.header("Call-ID") == Some(p.call_id.as_str()))
                    .unwrap_or(false);
                if is_reg {
                    self.on_register_response(&env, net);
                } else {
                    self.on_message_response(&env, net);
                }
            }
            SipKind::Request { method, .. } if method == "MESSAGE" => {
                self.on_mt_message(&env, net);
            }
            SipKind::Request { .. } => self.bump("unsupported_method"),
        }
    }

    fn on_timer(&mut self, net: &mut Net, token: u64) {
        if let Some(action) = self.actions.remove(&token) {
            self.run_action(action, net);
        }
    }
}

/// Short codes are 5-6 digit service numbers; subscriber numbers are longer.
pub fn is_short_code(number: &str) -> bool {
    (5..=6).contains(&number.len()) && number.chars().all(|c| c.is_ascii_digit())
}

/// Locates the IMS interface from an `ip -6 route` listing: the default
/// route marks the Internet interface, so the IMS server is the destination
/// prefix of a route on a different interface. Ties resolve to the
/// lexicographically lowest interface name.
pub fn discover_ims_address(routing_table_text: &str) -> Result<(String, String), UeError> {
    let entries =
        parse_routing_table(routing_table_text).map_err(|e| UeError::RouteTable(e.to_string()))?;
    let default_dev = entries
        .iter()
        .find(|e| e.prefix == "default")
        .map(|e| e.dev.clone())
        .expect("parser guarantees a default entry");
    entries
        .iter()
        .filter(|e| e.prefix != "default" && e.dev != default_dev)
        .min_by(|a, b| a.dev.cmp(&b.dev))
        .map(|e| (e.prefix.clone(), e.dev.clone()))
        .ok_or(UeError::NoImsRoute)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discovery_follows_non_default_interface() {
        let table = "default via fe80:xxx::5dc8 dev rmnet0 metric 1024\n\
                     2001:xxxx:y:fe03:fa:104:0:5 via fe80::2 dev rmnet1\n";
        let (addr, dev) = discover_ims_address(table).unwrap();
        assert_eq!(addr, "2001:xxxx:y:fe03:fa:104:0:5");
        assert_eq!(dev, "rmnet1");
    }

    #[test]
    fn discovery_is_symmetric_in_interface_naming() {
        let table = "default via fe80::1 dev rmnet1 metric 1024\n\
                     2001:db8::9 via fe80::2 dev rmnet0\n";
        let (addr, dev) = discover_ims_address(table).unwrap();
        assert_eq!(addr, "2001:db8::9");
        assert_eq!(dev, "rmnet0");
    }

    #[test]
    fn discovery_prefers_lowest_interface_name() {
        let table = "default via fe80::1 dev rmnet9\n\
                     2001:db8::7 via fe80::2 dev rmnet2\n\
                     2001:db8::8 via fe80::2 dev rmnet1\n";
        let (addr, dev) = discover_ims_address(table).unwrap();
        assert_eq!(dev, "rmnet1");
        assert_eq!(addr, "2001:db8::8");
    }

    #[test]
    fn discovery_errors_without_ims_route() {
        let only_default = "default via fe80::1 dev rmnet0\n";
        assert_eq!(discover_ims_address(only_default).unwrap_err(), UeError::NoImsRoute);
        // Routes on the default interface do not count.
        let same_dev = "default via fe80::1 dev rmnet0\n2001:db8::1 via fe80::2 dev rmnet0\n";
        assert_eq!(discover_ims_address(same_dev).unwrap_err(), UeError::NoImsRoute);
        // Empty tables violate the one-default invariant.
        assert!(matches!(discover_ims_address(""), Err(UeError::RouteTable(_))));
    }

    #[test]
    fn short_code_shape() {
        assert!(is_short_code("32665"));
        assert!(is_short_code("553935"));
        assert!(!is_short_code("3105550001"));
        assert!(!is_short_code("1234"));
        assert!(!is_short_code("3266a"));
    }

    #[test]
    fn approval_policy_script_consumes_in_order() {
        let mut p = ApprovalPolicy::Script(VecDeque::from([false, true]));
        assert!(!p.decide());
        assert!(p.decide());
        assert!(!p.decide());
    }
}
