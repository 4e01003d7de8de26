//! Runtime message authentication between subscribers and service
//! providers: secret-code provisioning, a canonical byte form, truncated
//! keyed-hash tags, and sequence-windowed verification.
//!
//! Tags ride inside the ordinary user data field, so a tagged message is a
//! regular octet-mode SMS whose last `tag_length` bytes authenticate the
//! rest. Secrets are provisioned out of band over a secure web channel,
//! never over text.

use crate::hashlabel::HashLabel;
use crate::sms_codec::{SmsPdu, UserData, MAX_OCTET_PAYLOAD};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use thiserror::Error;

/// Smallest permitted tag, in bytes.
pub const MIN_TAG_LEN: usize = 16;
/// Largest permitted tag, in bytes.
pub const MAX_TAG_LEN: usize = 20;
/// Out-of-order tolerance of the verification window.
pub const SEQ_WINDOW: u64 = 5;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DefenseError {
    #[error("tag length {0} outside {MIN_TAG_LEN}..={MAX_TAG_LEN}")]
    TagLength(usize),
    #[error("secret codes must not travel over text; use the secure web channel")]
    ForbiddenChannel,
    #[error("payload {payload} + tag {tag} exceeds {MAX_OCTET_PAYLOAD} bytes")]
    Oversize { payload: usize, tag: usize },
}

/// Channel over which a secret code is handed to the subscriber.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProvisionChannel {
    SecureWeb,
    Text,
}

/// Six-character secret code: three uppercase letters, three digits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretCode(pub String);

impl SecretCode {
    pub fn as_bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }
}

/// Runtime-MAC configuration plus the per-(phone, provider) secret store.
#[derive(Debug, Clone)]
pub struct MacConfig {
    pub tag_length: usize,
    pub hash_label: HashLabel,
    pub secrets: BTreeMap<(String, String), Vec<u8>>,
}

impl MacConfig {
    pub fn new(tag_length: usize, hash_label: HashLabel) -> Result<Self, DefenseError> {
        if !(MIN_TAG_LEN..=MAX_TAG_LEN).contains(&tag_length) {
            return Err(DefenseError::TagLength(tag_length));
        }
        Ok(MacConfig { tag_length, hash_label, secrets: BTreeMap::new() })
    }

    pub fn secret(&self, phone: &str, provider: &str) -> Option<&[u8]> {
        self.secrets
            .get(&(phone.to_string(), provider.to_string()))
            .map(Vec::as_slice)
    }

    /// Fraction of a full message the tag occupies.
    pub fn overhead_fraction(&self) -> f64 {
        self.tag_length as f64 / MAX_OCTET_PAYLOAD as f64
    }
}

/// Generates and stores a fresh secret code for (phone, provider).
/// Re-provisioning replaces any previous code.
pub fn provision_secret(
    cfg: &mut MacConfig,
    phone: &str,
    provider: &str,
    channel: ProvisionChannel,
    rng: &mut ChaCha8Rng,
) -> Result<SecretCode, DefenseError> {
    if channel != ProvisionChannel::SecureWeb {
        return Err(DefenseError::ForbiddenChannel);
    }
    let mut code = String::with_capacity(6);
    for _ in 0..3 {
        code.push(rng.random_range(b'A'..=b'Z') as char);
    }
    for _ in 0..3 {
        code.push(rng.random_range(b'0'..=b'9') as char);
    }
    let secret = SecretCode(code);
    cfg.secrets.insert(
        (phone.to_string(), provider.to_string()),
        secret.as_bytes().to_vec(),
    );
    Ok(secret)
}

/// Injective canonical form over (orig, dest, sequence, payload): each field
/// is length-prefixed with a 4-byte big-endian count, the sequence number is
/// fixed-width 8 bytes.
pub fn canonical_bytes(orig_number: &str, dest: &str, sequence_number: u64, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(orig_number.len() + dest.len() + payload.len() + 24);
    for field in [orig_number.as_bytes(), dest.as_bytes()] {
        out.extend_from_slice(&(field.len() as u32).to_be_bytes());
        out.extend_from_slice(field);
    }
    out.extend_from_slice(&8u32.to_be_bytes());
    out.extend_from_slice(&sequence_number.to_be_bytes());
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(payload);
    out
}

/// Truncated keyed hash over the canonical form.
pub fn compute_tag(secret: &[u8], canonical: &[u8], cfg: &MacConfig) -> Vec<u8> {
    let full = cfg.hash_label.keyed(secret, canonical);
    full[..cfg.tag_length.min(full.len())].to_vec()
}

/// Appends a tag to a message's user data, switching it to octet mode.
pub fn attach_tag(pdu: &SmsPdu, tag: &[u8]) -> Result<SmsPdu, DefenseError> {
    let mut payload = pdu.bearer.user_data.payload_bytes();
    if payload.len() + tag.len() > MAX_OCTET_PAYLOAD {
        return Err(DefenseError::Oversize { payload: payload.len(), tag: tag.len() });
    }
    payload.extend_from_slice(tag);
    let mut out = pdu.clone();
    out.bearer.user_data = UserData::Octet(payload);
    Ok(out)
}

/// Tags a raw payload directly; same capacity rule as [`attach_tag`].
pub fn attach_tag_payload(payload: &[u8], tag: &[u8]) -> Result<Vec<u8>, DefenseError> {
    if payload.len() + tag.len() > MAX_OCTET_PAYLOAD {
        return Err(DefenseError::Oversize { payload: payload.len(), tag: tag.len() });
    }
    let mut out = payload.to_vec();
    out.extend_from_slice(tag);
    Ok(out)
}

/// Verification outcome for one received message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyStatus {
    /// Tag matches under the shared secret within the sequence window.
    Verified,
    /// No secret is provisioned for this (phone, provider) pair. The
    /// message is displayed with a warning, not dropped.
    Unauthenticated,
    /// A secret exists but the tag does not verify.
    Invalid,
}

/// Receiver-side sequence expectation for one (phone, provider) direction.
#[derive(Debug, Clone, Copy, Default)]
pub struct SeqWindowState {
    pub expected: u64,
}

/// Verifies a tagged payload and strips the tag.
///
/// The receiver recomputes the tag for each sequence number in
/// `expected..expected+SEQ_WINDOW` to tolerate reordering; a match advances
/// the expectation past the matched number, so a recorded message cannot be
/// replayed.
pub fn verify_payload(
    orig_number: &str,
    dest: &str,
    payload: &[u8],
    secret: Option<&[u8]>,
    cfg: &MacConfig,
    seq: &mut SeqWindowState,
) -> (Vec<u8>, VerifyStatus) {
    let Some(secret) = secret else {
        return (payload.to_vec(), VerifyStatus::Unauthenticated);
    };
    if payload.len() < cfg.tag_length {
        return (payload.to_vec(), VerifyStatus::Invalid);
    }
    let (body, tag) = payload.split_at(payload.len() - cfg.tag_length);
    for candidate in seq.expected..seq.expected.saturating_add(SEQ_WINDOW) {
        let canonical = canonical_bytes(orig_number, dest, candidate, body);
        if compute_tag(secret, &canonical, cfg) == tag {
            seq.expected = candidate + 1;
            return (body.to_vec(), VerifyStatus::Verified);
        }
    }
    (payload.to_vec(), VerifyStatus::Invalid)
}

/// PDU-level wrapper over [`verify_payload`] for mobile-terminated messages,
/// where the originating address rides in the PDU itself.
pub fn verify_and_strip(
    pdu: &SmsPdu,
    secret: Option<&[u8]>,
    cfg: &MacConfig,
    seq: &mut SeqWindowState,
) -> (Vec<u8>, VerifyStatus) {
    let orig = pdu.orig.as_ref().map(|a| a.digits.clone()).unwrap_or_default();
    let payload = pdu.bearer.user_data.payload_bytes();
    verify_payload(&orig, &pdu.dest.digits, &payload, secret, cfg, seq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sms_codec::SmsAddress;
    use rand_chacha::rand_core::SeedableRng;

    fn cfg() -> MacConfig {
        MacConfig::new(20, HashLabel::Sha256).unwrap()
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0xdef)
    }

    #[test]
    fn tag_length_bounds() {
        assert!(MacConfig::new(15, HashLabel::Sha256).is_err());
        assert!(MacConfig::new(21, HashLabel::Sha256).is_err());
        for len in MIN_TAG_LEN..=MAX_TAG_LEN {
            let c = MacConfig::new(len, HashLabel::Sha256).unwrap();
            assert!(c.overhead_fraction() <= 0.143, "len {len}");
        }
    }

    #[test]
    fn provisioning_shape_and_channel() {
        let mut c = cfg();
        let mut r = rng();
        let code = provision_secret(&mut c, "3105550001", "63257", ProvisionChannel::SecureWeb, &mut r)
            .unwrap();
        assert_eq!(code.0.len(), 6);
        assert!(code.0[..3].chars().all(|ch| ch.is_ascii_uppercase()));
        assert!(code.0[3..].chars().all(|ch| ch.is_ascii_digit()));
        assert_eq!(c.secret("3105550001", "63257").unwrap(), code.as_bytes());

        assert_eq!(
            provision_secret(&mut c, "3105550001", "63257", ProvisionChannel::Text, &mut r)
                .unwrap_err(),
            DefenseError::ForbiddenChannel
        );
    }

    #[test]
    fn reprovision_replaces_previous_secret() {
        let mut c = cfg();
        let mut r = rng();
        let first = provision_secret(&mut c, "p", "s", ProvisionChannel::SecureWeb, &mut r).unwrap();
        let second = provision_secret(&mut c, "p", "s", ProvisionChannel::SecureWeb, &mut r).unwrap();
        assert_ne!(first, second);
        assert_eq!(c.secret("p", "s").unwrap(), second.as_bytes());
    }

    #[test]
    fn canonical_form_is_injective_across_field_boundaries() {
        let a = canonical_bytes("1", "23", 0, b"AB");
        let b = canonical_bytes("12", "3", 0, b"AB");
        assert_ne!(a, b);
        let c = canonical_bytes("1", "2", 0, b"3AB");
        assert_ne!(a, c);
        // Empty payload is allowed.
        let d = canonical_bytes("1", "23", 0, b"");
        assert_ne!(a, d);
    }

    /// Test-only parser of the canonical form, used as a parse-back oracle.
    fn parse_canonical(bytes: &[u8]) -> Option<(String, String, u64, Vec<u8>)> {
        let mut pos = 0usize;
        let mut take = |bytes: &[u8]| -> Option<Vec<u8>> {
            let len = u32::from_be_bytes(bytes.get(pos..pos + 4)?.try_into().ok()?) as usize;
            pos += 4;
            let v = bytes.get(pos..pos + len)?.to_vec();
            pos += len;
            Some(v)
        };
        let orig = String::from_utf8(take(bytes)?).ok()?;
        let dest = String::from_utf8(take(bytes)?).ok()?;
        let seq_bytes = take(bytes)?;
        let seq = u64::from_be_bytes(seq_bytes.try_into().ok()?);
        let payload = take(bytes)?;
        if pos != bytes.len() {
            return None;
        }
        Some((orig, dest, seq, payload))
    }

    #[test]
    fn canonical_parse_back_roundtrip() {
        let cases = [
            ("3105550001", "90999", 0u64, b"REDCROSS".to_vec()),
            ("1", "2", u64::MAX, vec![]),
            ("", "", 7, vec![0, 1, 2, 255]),
        ];
        for (orig, dest, seq, payload) in cases {
            let bytes = canonical_bytes(orig, dest, seq, &payload);
            assert_eq!(
                parse_canonical(&bytes).unwrap(),
                (orig.to_string(), dest.to_string(), seq, payload)
            );
        }
    }

    #[test]
    fn compute_tag_determinism_and_length() {
        let c = cfg();
        let canonical = canonical_bytes("1", "2", 0, b"x");
        let a = compute_tag(b"secret", &canonical, &c);
        let b = compute_tag(b"secret", &canonical, &c);
        assert_eq!(a, b);
        assert_eq!(a.len(), c.tag_length);
    }

    #[test]
    fn single_bit_flips_change_the_tag() {
        let c = cfg();
        let payload = b"Like Lakers Nation".to_vec();
        let canonical = canonical_bytes("3105550001", "32665", 3, &payload);
        let base = compute_tag(b"WXM889", &canonical, &c);
        let mut r = rng();
        for _ in 0..256 {
            let mut flipped = payload.clone();
            let bit = r.random_range(0..flipped.len() * 8);
            flipped[bit / 8] ^= 1 << (bit % 8);
            let canonical = canonical_bytes("3105550001", "32665", 3, &flipped);
            assert_ne!(compute_tag(b"WXM889", &canonical, &c), base);
        }
    }

    #[test]
    fn attach_capacity_boundaries() {
        let pdu = SmsPdu::submit(
            SmsAddress::dtmf("90999").unwrap(),
            1,
            UserData::Octet(vec![0xaa; 120]),
        );
        let tagged = attach_tag(&pdu, &[0xbb; 20]).unwrap();
        assert_eq!(tagged.bearer.user_data.payload_bytes().len(), 140);
        match &tagged.bearer.user_data {
            UserData::Octet(_) => {}
            other => panic!("tag attach must switch to octet mode, got {other:?}"),
        }

        let big = SmsPdu::submit(
            SmsAddress::dtmf("90999").unwrap(),
            1,
            UserData::Octet(vec![0xaa; 125]),
        );
        assert_eq!(
            attach_tag(&big, &[0xbb; 20]).unwrap_err(),
            DefenseError::Oversize { payload: 125, tag: 20 }
        );
    }

    #[test]
    fn verify_roundtrip_and_window() {
        let mut c = cfg();
        let mut r = rng();
        let code =
            provision_secret(&mut c, "310", "32665", ProvisionChannel::SecureWeb, &mut r).unwrap();
        let secret = code.as_bytes().to_vec();

        let mut seq = SeqWindowState::default();
        for n in 0..4u64 {
            let body = format!("msg {n}").into_bytes();
            let canonical = canonical_bytes("310", "32665", n, &body);
            let tag = compute_tag(&secret, &canonical, &c);
            let payload = attach_tag_payload(&body, &tag).unwrap();
            let (stripped, status) =
                verify_payload("310", "32665", &payload, Some(&secret), &c, &mut seq);
            assert_eq!(status, VerifyStatus::Verified);
            assert_eq!(stripped, body);
        }
        assert_eq!(seq.expected, 4);

        // Reordering within the window verifies; sequence 6 before 4.
        let body = b"late".to_vec();
        let canonical = canonical_bytes("310", "32665", 6, &body);
        let tag = compute_tag(&secret, &canonical, &c);
        let payload = attach_tag_payload(&body, &tag).unwrap();
        let (_, status) = verify_payload("310", "32665", &payload, Some(&secret), &c, &mut seq);
        assert_eq!(status, VerifyStatus::Verified);
        assert_eq!(seq.expected, 7);

        // Replay of the same message now falls outside the window.
        let (_, status) = verify_payload("310", "32665", &payload, Some(&secret), &c, &mut seq);
        assert_eq!(status, VerifyStatus::Invalid);

        // Beyond the window is rejected outright.
        let canonical = canonical_bytes("310", "32665", 20, &body);
        let tag = compute_tag(&secret, &canonical, &c);
        let payload = attach_tag_payload(&body, &tag).unwrap();
        let (_, status) = verify_payload("310", "32665", &payload, Some(&secret), &c, &mut seq);
        assert_eq!(status, VerifyStatus::Invalid);
    }

    #[test]
    fn verify_statuses() {
        let c = cfg();
        let mut seq = SeqWindowState::default();

        // No secret: unauthenticated, payload passes through untouched.
        let (body, status) = verify_payload("310", "32665", b"hello", None, &c, &mut seq);
        assert_eq!(status, VerifyStatus::Unauthenticated);
        assert_eq!(body, b"hello");

        // Secret present but tampered payload: invalid.
        let secret = b"WXM889".to_vec();
        let canonical = canonical_bytes("310", "32665", 0, b"hello");
        let tag = compute_tag(&secret, &canonical, &c);
        let mut payload = attach_tag_payload(b"hello", &tag).unwrap();
        payload[0] ^= 0x01;
        let (_, status) = verify_payload("310", "32665", &payload, Some(&secret), &c, &mut seq);
        assert_eq!(status, VerifyStatus::Invalid);

        // Too-short payload with a secret present: invalid.
        let (_, status) = verify_payload("310", "32665", b"x", Some(&secret), &c, &mut seq);
        assert_eq!(status, VerifyStatus::Invalid);
    }

    #[test]
    fn mt_pdu_wrapper_uses_pdu_orig() {
        let mut c = cfg();
        let mut r = rng();
        let code = provision_secret(&mut c, "32665", "3105550001", ProvisionChannel::SecureWeb, &mut r)
            .unwrap();
        let secret = code.as_bytes().to_vec();
        let body = b"notification".to_vec();
        let canonical = canonical_bytes("32665", "3105550001", 0, &body);
        let tag = compute_tag(&secret, &canonical, &c);
        let pdu = SmsPdu::deliver(
            SmsAddress::dtmf("3105550001").unwrap(),
            SmsAddress::dtmf("32665").unwrap(),
            1,
            UserData::Octet(attach_tag_payload(&body, &tag).unwrap()),
        );
        let mut seq = SeqWindowState::default();
        let (stripped, status) = verify_and_strip(&pdu, Some(&secret), &c, &mut seq);
        assert_eq!(status, VerifyStatus::Verified);
        assert_eq!(stripped, body);
    }
}
