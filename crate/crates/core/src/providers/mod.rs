//! Service providers behind short codes, plus the aggregator hop in front
//! of them.
//!
//! A single hub node terminates every relay frame the carriers emit. It
//! dispatches by short code, then by text content when several providers
//! share a code, runs the per-provider enrollment machine or service logic,
//! and hands reply texts back to the recipient's carrier. The hub is also
//! where the runtime-MAC defense verifies inbound commands and where the
//! man-in-the-aggregator mutation hook lives.

pub mod catalog;
pub mod donation;
pub mod enrollment;
pub mod social;

pub use catalog::{
    audit_catalog, classify_threat, default_catalog, load_catalog, CatalogError, ProviderRecord,
    RuntimeAuth, ServiceModel, Threat, ThreatAudit, ThreatRow,
};
pub use donation::{DonationService, DONATION_AMOUNT};
pub use enrollment::{
    enrollment_advance, EnrollEvent, EnrollOutcome, EnrollState, EnrollmentKind,
    FIXED_REPLY_TOKENS,
};
pub use social::{SocialAction, SocialService};

use crate::defenses::{self, canonical_bytes, compute_tag, MacConfig, SeqWindowState, VerifyStatus};
use crate::netsim::{Datagram, Millis, Net, Node, NodeId};
use crate::sms_codec::UserData;
use crate::wire::{Frame, RelayFrame, ServiceText};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Default cadence of notification pushes.
pub const NOTIFICATION_PERIOD_MS: Millis = 24 * 3600 * 1000;

/// What kind of service logic a live provider runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServiceKind {
    Social,
    Donation,
    Notification,
}

/// A provider wired into the simulation (as opposed to a catalog row that
/// exists only for classification).
pub struct ActiveProvider {
    pub record: ProviderRecord,
    pub kind: ServiceKind,
    /// Uppercase keywords claiming texts on a shared code.
    pub keywords: Vec<String>,
    subscribers: BTreeMap<String, SubscriberInfo>,
    enroll: BTreeMap<String, (EnrollState, Millis)>,
    pub notifications_sent: u64,
    pub unsolicited: BTreeMap<String, u64>,
}

#[derive(Debug, Clone)]
struct SubscriberInfo {
    spoof_enrolled: bool,
}

impl ActiveProvider {
    pub fn subscriber_count(&self) -> usize {
        self.subscribers.len()
    }

    pub fn is_subscribed(&self, phone: &str) -> bool {
        self.record.enrollment == EnrollmentKind::AlwaysOn || self.subscribers.contains_key(phone)
    }

    pub fn spoof_enrolled(&self, phone: &str) -> bool {
        self.subscribers.get(phone).map(|s| s.spoof_enrolled).unwrap_or(false)
    }

    pub fn enroll_state(&self, phone: &str) -> EnrollState {
        if self.record.enrollment == EnrollmentKind::AlwaysOn {
            return EnrollState::Subscribed;
        }
        self.enroll
            .get(phone)
            .map(|(s, _)| s.clone())
            .unwrap_or(EnrollState::Idle)
    }
}

/// Runtime-MAC verification state on the provider side.
pub struct HubMac {
    pub cfg: MacConfig,
    recv_seq: BTreeMap<(String, String), SeqWindowState>,
    send_seq: BTreeMap<(String, String), u64>,
}

impl HubMac {
    pub fn new(cfg: MacConfig) -> Self {
        HubMac { cfg, recv_seq: BTreeMap::new(), send_seq: BTreeMap::new() }
    }
}

struct Tamper {
    rng: ChaCha8Rng,
    flips: u64,
}

pub struct ProviderHub {
    pub addr: String,
    providers: Vec<ActiveProvider>,
    by_code: BTreeMap<String, Vec<usize>>,
    pub social: Option<SocialService>,
    pub donation: DonationService,
    pub mac: Option<HubMac>,
    /// aggregator id -> only accepts traffic originating in carrier networks
    pub aggregators: BTreeMap<String, bool>,
    /// phone number -> carrier address, for provider-originated texts
    pub directory: BTreeMap<String, String>,
    pub counters: BTreeMap<String, u64>,
    tamper: Option<Tamper>,
    rng: ChaCha8Rng,
    node_id: NodeId,
    notification_period: Millis,
}

impl ProviderHub {
    pub fn new(addr: &str, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0x9406);
        ProviderHub {
            addr: addr.to_string(),
            providers: Vec::new(),
            by_code: BTreeMap::new(),
            social: None,
            donation: DonationService::new(),
            mac: None,
            aggregators: BTreeMap::new(),
            directory: BTreeMap::new(),
            counters: BTreeMap::new(),
            tamper: None,
            rng,
            node_id: 0,
            notification_period: NOTIFICATION_PERIOD_MS,
        }
    }

    pub fn set_node_id(&mut self, id: NodeId) {
        self.node_id = id;
    }

    pub fn counter(&self, key: &str) -> u64 {
        self.counters.get(key).copied().unwrap_or(0)
    }

    fn bump(&mut self, key: &str) {
        *self.counters.entry(key.to_string()).or_insert(0) += 1;
    }

    /// Enables the man-in-the-aggregator mutation hook: every relayed
    /// payload gets one random bit flipped before dispatch.
    pub fn enable_tamper(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0x7a3);
        self.tamper = Some(Tamper { rng, flips: 0 });
    }

    pub fn tamper_flips(&self) -> u64 {
        self.tamper.as_ref().map(|t| t.flips).unwrap_or(0)
    }

    pub fn add_aggregator(&mut self, id: &str, carrier_only: bool) {
        self.aggregators.insert(id.to_string(), carrier_only);
    }

    pub fn add_provider(&mut self, record: ProviderRecord, kind: ServiceKind, keywords: &[&str]) -> usize {
        let idx = self.providers.len();
        self.by_code.entry(record.short_code.clone()).or_default().push(idx);
        self.providers.push(ActiveProvider {
            record,
            kind,
            keywords: keywords.iter().map(|k| k.to_ascii_uppercase()).collect(),
            subscribers: BTreeMap::new(),
            enroll: BTreeMap::new(),
            notifications_sent: 0,
            unsolicited: BTreeMap::new(),
        });
        idx
    }

    pub fn provider(&self, idx: usize) -> &ActiveProvider {
        &self.providers[idx]
    }

    pub fn provider_mut(&mut self, idx: usize) -> &mut ActiveProvider {
        &mut self.providers[idx]
    }

    pub fn providers(&self) -> &[ActiveProvider] {
        &self.providers
    }

    /// Applies a web-side enrollment event (web traffic does not ride the
    /// SMS fabric, but any resulting text, such as an auth code, does).
    pub fn web_enroll_event(
        &mut self,
        net: &mut Net,
        idx: usize,
        phone: &str,
        event: EnrollEvent,
        now: Millis,
    ) {
        let state = self.providers[idx].enroll_state(phone);
        let out = enrollment_advance(self.providers[idx].record.enrollment, &state, &event, now, &mut self.rng);
        let newly = out.state == EnrollState::Subscribed && state != EnrollState::Subscribed;
        if let Some(reply) = self.apply_enroll_transition(idx, phone, newly, out, now, true) {
            let code = self.providers[idx].record.short_code.clone();
            self.service_reply(net, &code, phone, &reply);
        }
    }

    /// Starts recurring notification pushes for every notification provider.
    pub fn start_notification_ticks(&self, net: &mut Net, first_at: Millis) {
        for (idx, p) in self.providers.iter().enumerate() {
            if p.kind == ServiceKind::Notification {
                net.schedule_at(self.node_id, first_at, idx as u64);
            }
        }
    }

    /// Records the successor state and returns any text the provider owes
    /// the phone.
    fn apply_enroll_transition(
        &mut self,
        idx: usize,
        phone: &str,
        newly_subscribed: bool,
        out: EnrollOutcome,
        now: Millis,
        authentic_origin: bool,
    ) -> Option<String> {
        {
            let p = &mut self.providers[idx];
            p.enroll.insert(phone.to_string(), (out.state.clone(), now));
            if newly_subscribed && p.record.enrollment != EnrollmentKind::AlwaysOn {
                p.subscribers.insert(
                    phone.to_string(),
                    SubscriberInfo { spoof_enrolled: !authentic_origin },
                );
            }
        }
        if newly_subscribed {
            self.bump("subscriptions");
            if !authentic_origin {
                self.bump("subscriptions_spoofed");
            }
        }
        out.reply
    }

    /// Classifies an inbound text into an enrollment event for `idx`.
    fn enroll_event_for_text(&self, idx: usize, text: &str) -> Option<EnrollEvent> {
        let token = text.trim().to_ascii_uppercase();
        if FIXED_REPLY_TOKENS.iter().any(|t| *t == token) {
            return Some(EnrollEvent::TextFixedReply(token));
        }
        if self.providers[idx].keywords.contains(&token) {
            return match self.providers[idx].record.enrollment {
                EnrollmentKind::FourStepAuthCode => Some(EnrollEvent::TextTrigger),
                _ => Some(EnrollEvent::TextJoin),
            };
        }
        None
    }

    /// Picks which provider on `code` claims `text`.
    fn resolve_provider(&self, code: &str, text: &str) -> Option<usize> {
        let candidates = self.by_code.get(code)?;
        if candidates.len() == 1 {
            return Some(candidates[0]);
        }
        let token = text.trim().to_ascii_uppercase();
        let first_word = token.split_whitespace().next().unwrap_or("").to_string();
        candidates
            .iter()
            .copied()
            .find(|idx| {
                let kw = &self.providers[*idx].keywords;
                kw.contains(&token) || kw.contains(&first_word)
            })
            .or(candidates.first().copied())
    }

    /// Provider-originated text toward a phone, MAC-tagged when the
    /// provider runs runtime authentication and a secret exists.
    pub fn service_reply(&mut self, net: &mut Net, code: &str, recipient: &str, text: &str) {
        let Some(carrier_addr) = self.directory.get(recipient).cloned() else {
            self.bump("reply_unroutable");
            return;
        };
        let mut octet_payload = None;
        let provider_idx = self.by_code.get(code).and_then(|v| v.first().copied());
        let wants_mac = provider_idx
            .map(|i| self.providers[i].record.runtime_auth == RuntimeAuth::Mac)
            .unwrap_or(false);
        if wants_mac {
            if let Some(mac) = &mut self.mac {
                if let Some(secret) = mac.cfg.secret(recipient, code).map(<[u8]>::to_vec) {
                    let key = (recipient.to_string(), code.to_string());
                    let seq = mac.send_seq.entry(key).or_insert(0);
                    let canonical = canonical_bytes(code, recipient, *seq, text.as_bytes());
                    let tag = compute_tag(&secret, &canonical, &mac.cfg);
                    *seq += 1;
                    if let Ok(payload) = defenses::attach_tag_payload(text.as_bytes(), &tag) {
                        octet_payload = Some(payload);
                    }
                }
            }
        }
        self.bump("service_texts_out");
        let frame = Frame::ServiceText(ServiceText {
            short_code: code.to_string(),
            recipient_number: recipient.to_string(),
            text: text.to_string(),
            octet_payload,
        });
        net.send(&self.addr.clone(), crate::ims_core::SIP_PORT, &carrier_addr, crate::ims_core::SIP_PORT, frame.encode(), "service-text");
    }

    /// Aggregator-customer injection path (non-carrier origin). Blocked by
    /// aggregators configured to forward carrier traffic only.
    pub fn inject_noncarrier_text(
        &mut self,
        net: &mut Net,
        aggregator: &str,
        orig_number: &str,
        short_code: &str,
        text: &str,
    ) -> bool {
        if self.aggregators.get(aggregator).copied().unwrap_or(false) {
            self.bump("noncarrier_blocked");
            return false;
        }
        let frame = RelayFrame {
            carrier_id: String::new(),
            aggregator_id: aggregator.to_string(),
            orig_number: orig_number.to_string(),
            short_code: short_code.to_string(),
            authentic_origin: false,
            user_data: UserData::text(text),
        };
        self.handle_relay(frame, net);
        true
    }

    fn handle_relay(&mut self, frame: RelayFrame, net: &mut Net) {
        self.bump("relay_in");
        let now = net.now();
        let mut payload = frame.user_data.payload_bytes();

        if let Some(tamper) = &mut self.tamper {
            if !payload.is_empty() {
                let bit = tamper.rng.random_range(0..payload.len() * 8);
                payload[bit / 8] ^= 1 << (bit % 8);
                tamper.flips += 1;
                self.bump("tampered");
            }
        }

        let text_for_dispatch = String::from_utf8_lossy(&payload).into_owned();
        let Some(idx) = self.resolve_provider(&frame.short_code, &text_for_dispatch) else {
            self.bump("relay_unroutable");
            return;
        };

        // Runtime MAC gate: providers running it act only on verified
        // payloads. Absent or broken tags produce no provider action.
        let mut text = text_for_dispatch;
        if self.providers[idx].record.runtime_auth == RuntimeAuth::Mac {
            let Some(mac) = &mut self.mac else {
                self.bump("mac_unconfigured");
                return;
            };
            let key = (frame.orig_number.clone(), frame.short_code.clone());
            let secret = mac.cfg.secret(&frame.orig_number, &frame.short_code).map(<[u8]>::to_vec);
            let seq = mac.recv_seq.entry(key).or_default();
            let (stripped, status) = defenses::verify_payload(
                &frame.orig_number,
                &frame.short_code,
                &payload,
                secret.as_deref(),
                &mac.cfg,
                seq,
            );
            match status {
                VerifyStatus::Verified => {
                    self.bump("mac_verified");
                    text = String::from_utf8_lossy(&stripped).into_owned();
                }
                VerifyStatus::Unauthenticated => {
                    // No secret provisioned: displayed as unauthenticated,
                    // never executed.
                    self.bump("mac_unauthenticated");
                    return;
                }
                VerifyStatus::Invalid => {
                    self.bump("mac_invalid");
                    return;
                }
            }
        }

        match self.providers[idx].kind {
            ServiceKind::Social => {
                let Some(social) = &mut self.social else {
                    self.bump("social_unconfigured");
                    return;
                };
                let (action, replies) = social.handle_text(&frame.orig_number, &text, now, &mut self.rng);
                if !matches!(action, SocialAction::ErrorReply) {
                    self.bump("provider_actions");
                }
                let code = frame.short_code.clone();
                for reply in replies {
                    self.service_reply(net, &code, &frame.orig_number, &reply);
                }
            }
            ServiceKind::Donation => {
                let before = self.donation.charge_count();
                let replies = self.donation.handle_text(&frame.orig_number, &text, now);
                if self.donation.charge_count() > before {
                    self.bump("provider_actions");
                    if !frame.authentic_origin {
                        self.bump("charges_from_spoofed");
                    }
                }
                let code = frame.short_code.clone();
                for reply in replies {
                    self.service_reply(net, &code, &frame.orig_number, &reply);
                }
            }
            ServiceKind::Notification => {
                let Some(event) = self.enroll_event_for_text(idx, &text) else {
                    self.bump("texts_ignored");
                    return;
                };
                let state = self.providers[idx].enroll_state(&frame.orig_number);
                let kind = self.providers[idx].record.enrollment;
                let out = enrollment_advance(kind, &state, &event, now, &mut self.rng);
                let newly = out.state == EnrollState::Subscribed && state != EnrollState::Subscribed;
                let reply = self.apply_enroll_transition(
                    idx,
                    &frame.orig_number,
                    newly,
                    out,
                    now,
                    frame.authentic_origin,
                );
                if let Some(reply) = reply {
                    let code = frame.short_code.clone();
                    self.service_reply(net, &code, &frame.orig_number, &reply);
                }
            }
        }
    }

    fn notification_tick(&mut self, idx: usize, net: &mut Net) {
        let (code, recipients): (String, Vec<(String, bool)>) = {
            let p = &self.providers[idx];
            (
                p.record.short_code.clone(),
                p.subscribers.iter().map(|(ph, s)| (ph.clone(), s.spoof_enrolled)).collect(),
            )
        };
        let text = format!("{}: special offers this week!", self.providers[idx].record.name);
        for (phone, spoofed) in recipients {
            self.service_reply(net, &code, &phone, &text);
            let p = &mut self.providers[idx];
            p.notifications_sent += 1;
            if spoofed {
                *p.unsolicited.entry(phone.clone()).or_insert(0) += 1;
                self.bump("unsolicited_texts");
            }
            self.bump("notifications_sent");
        }
        let period = self.notification_period;
        net.schedule(self.node_id, period, idx as u64);
    }
}

impl Node for ProviderHub {
    fn on_datagram(&mut self, net: &mut Net, dgram: &Datagram) {
        if !Frame::sniff(&dgram.payload) {
            self.bump("non_frame_traffic");
            return;
        }
        match Frame::decode(&dgram.payload) {
            Ok(Frame::Relay(frame)) => self.handle_relay(frame, net),
            Ok(_) => self.bump("unexpected_frame"),
            Err(_) => self.bump("frame_decode_error"),
        }
    }

    fn on_timer(&mut self, net: &mut Net, token: u64) {
        let idx = token as usize;
        if idx < self.providers.len() && self.providers[idx].kind == ServiceKind::Notification {
            self.notification_tick(idx, net);
        }
    }
}
