//! Deterministic desk-scale simulator of the SMS-over-IMS ecosystem.
//!
//! The crate models the full delivery chain for text messages in a
//! packet-switched mobile network: user equipment builds IS-637-A SMS
//! payloads, wraps them in SIP MESSAGE requests, and submits them to a
//! carrier IMS core over a simulated datagram fabric. The carrier applies
//! configurable security policy (registration digest auth, per-message
//! integrity tags, originating-address checks, rate limits, user-approval
//! challenges), stores and forwards subscriber-to-subscriber traffic, and
//! relays short-code traffic through aggregators to service providers.
//! Providers run enrollment state machines, a text-command social service,
//! donation billing, and notification pushes.
//!
//! Everything runs on a virtual clock with seeded randomness: identical
//! configuration and seed produce byte-identical reports.

pub mod defenses;
pub mod hashlabel;
pub mod ims_core;
pub mod netsim;
pub mod providers;
pub mod report;
pub mod scenario;
pub mod sip_codec;
pub mod sms_codec;
pub mod ue;
pub mod wire;
