//! SIP subset used between user equipment and the IMS core: REGISTER,
//! MESSAGE, and the 200 / 401 / 403 / 404 / 429 / 440 responses, plus the
//! digest challenge-response computation used during registration and for
//! user-approval challenges.
//!
//! The text framing follows the usual shape: a start-line, `Name: value`
//! header lines with CRLF endings, a blank line, then a raw body of exactly
//! `Content-Length` bytes. The digest here is a single hash over a
//! colon-joined concatenation, not the RFC 2617 double-hash; it is not
//! interoperable with a real IMS and is not meant to be.

use crate::hashlabel::HashLabel;
use thiserror::Error;

/// Profile a simulated handset uses to fill MESSAGE/REGISTER headers.
#[derive(Debug, Clone)]
pub struct DeviceProfile {
    pub phone_number: String,
    pub device_address: String,
    pub ims_server_address: String,
    /// SIM-key stand-in, shared only with the home carrier's subscriber record.
    pub auth_key: Vec<u8>,
    /// Value of the `phone-context` parameter in tel request URIs.
    pub phone_context: String,
    pub call_id_counter: u64,
}

impl DeviceProfile {
    pub fn new(phone_number: &str, device_address: &str, auth_key: Vec<u8>) -> Self {
        DeviceProfile {
            phone_number: phone_number.to_string(),
            device_address: device_address.to_string(),
            ims_server_address: String::new(),
            auth_key,
            phone_context: "vzims.com".to_string(),
            call_id_counter: 0,
        }
    }

    fn next_call_id(&mut self) -> String {
        self.call_id_counter += 1;
        format!("{}@{}", self.call_id_counter, self.device_address)
    }
}

/// Request or response start line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SipKind {
    Request { method: String, uri: String },
    Response { code: u16, reason: String },
}

/// A SIP message with ordered headers and a binary body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SipEnvelope {
    pub kind: SipKind,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl SipEnvelope {
    /// First header value matching `name`, case-insensitively.
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    pub fn is_request(&self, method: &str) -> bool {
        matches!(&self.kind, SipKind::Request { method: m, .. } if m == method)
    }

    pub fn response_code(&self) -> Option<u16> {
        match &self.kind {
            SipKind::Response { code, .. } => Some(*code),
            SipKind::Request { .. } => None,
        }
    }

    pub fn request_uri(&self) -> Option<&str> {
        match &self.kind {
            SipKind::Request { uri, .. } => Some(uri.as_str()),
            SipKind::Response { .. } => None,
        }
    }

    /// Removes every header named `name` (case-insensitive).
    pub fn remove_header(&mut self, name: &str) {
        self.headers.retain(|(n, _)| !n.eq_ignore_ascii_case(name));
    }
}

/// Parameters of a digest challenge carried in 401 and 440 responses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigestChallenge {
    pub realm: String,
    pub nonce: String,
    pub algorithm_label: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SipError {
    #[error("recipient must not be empty")]
    EmptyRecipient,
    #[error("response code {0} requires a challenge")]
    ChallengeRequired(u16),
    #[error("response code 440 requires display text")]
    DisplayTextRequired,
    #[error("unsupported response code {0}")]
    UnsupportedCode(u16),
    #[error("malformed start-line: {0}")]
    BadStartLine(String),
    #[error("missing blank line terminating headers")]
    MissingBlankLine,
    #[error("malformed header line: {0}")]
    BadHeader(String),
    #[error("Content-Length {declared} does not match body length {actual}")]
    ContentLengthMismatch { declared: usize, actual: usize },
    #[error("missing header {0}")]
    MissingHeader(&'static str),
    #[error("malformed challenge: {0}")]
    BadChallenge(String),
}

/// Extracts the digits of a `tel:` URI from a From/To-style header value.
pub fn tel_uri_number(value: &str) -> Option<&str> {
    let start = value.find("tel:")? + 4;
    let rest = &value[start..];
    let end = rest.find([';', '>', ' ']).unwrap_or(rest.len());
    Some(&rest[..end])
}

/// Extracts the host part of a `Via: SIP/2.0/UDP host...` header value.
pub fn via_host(value: &str) -> Option<&str> {
    let rest = value.strip_prefix("SIP/2.0/UDP ")?;
    let end = rest.find([';', ' ']).unwrap_or(rest.len());
    Some(&rest[..end])
}

/// Builds a MESSAGE request carrying an encoded SMS body.
///
/// `from_number` is a free parameter: it lands verbatim in From and
/// P-Preferred-Identity. Nothing here compares it to the profile's own
/// number; whether such a message is accepted is a network policy decision.
pub fn build_message_request(
    profile: &mut DeviceProfile,
    from_number: &str,
    recipient: &str,
    body: Vec<u8>,
) -> Result<SipEnvelope, SipError> {
    if recipient.is_empty() {
        return Err(SipError::EmptyRecipient);
    }
    let call_id = profile.next_call_id();
    let uri = format!("tel:{};phone-context={}", recipient, profile.phone_context);
    let headers = vec![
        ("Route".into(), format!("<sip:{}:5060;lr>", profile.ims_server_address)),
        (
            "Via".into(),
            format!("SIP/2.0/UDP {};branch=z9hG4bK{}", profile.device_address, profile.call_id_counter),
        ),
        ("Max-Forwards".into(), "70".into()),
        ("From".into(), format!("<tel:{}>;tag={}", from_number, profile.call_id_counter)),
        ("To".into(), format!("<tel:{}>", recipient)),
        ("CSeq".into(), "1 MESSAGE".into()),
        ("P-Preferred-Identity".into(), format!("<tel:{}>", from_number)),
        ("Content-Type".into(), "application/vnd.3gpp2.sms".into()),
        ("Call-ID".into(), call_id),
        ("Content-Length".into(), body.len().to_string()),
    ];
    Ok(SipEnvelope {
        kind: SipKind::Request { method: "MESSAGE".into(), uri },
        headers,
        body,
    })
}

/// Builds a REGISTER request, with the digest answer attached on the second
/// round trip.
pub fn build_register_request(
    profile: &mut DeviceProfile,
    authorization: Option<(&DigestChallenge, &str)>,
) -> SipEnvelope {
    let call_id = profile.next_call_id();
    let uri = format!("sip:{}", profile.ims_server_address);
    let mut headers = vec![
        ("Route".into(), format!("<sip:{}:5060;lr>", profile.ims_server_address)),
        (
            "Via".into(),
            format!("SIP/2.0/UDP {};branch=z9hG4bK{}", profile.device_address, profile.call_id_counter),
        ),
        ("Max-Forwards".into(), "70".into()),
        ("From".into(), format!("<tel:{}>;tag={}", profile.phone_number, profile.call_id_counter)),
        ("To".into(), format!("<tel:{}>", profile.phone_number)),
        ("CSeq".into(), "1 REGISTER".into()),
        ("Call-ID".into(), call_id),
    ];
    if let Some((challenge, response_hex)) = authorization {
        headers.push((
            "Authorization".into(),
            format!(
                "Digest realm=\"{}\", nonce=\"{}\", algorithm={}, response=\"{}\"",
                challenge.realm, challenge.nonce, challenge.algorithm_label, response_hex
            ),
        ));
    }
    headers.push(("Content-Length".into(), "0".into()));
    SipEnvelope {
        kind: SipKind::Request { method: "REGISTER".into(), uri },
        headers,
        body: Vec::new(),
    }
}

/// Asserts that a built MESSAGE carries the full profile-derived header set.
pub fn validate_message_headers(env: &SipEnvelope) -> Result<(), SipError> {
    if !env.is_request("MESSAGE") {
        return Err(SipError::BadStartLine("not a MESSAGE request".into()));
    }
    for name in [
        "Route",
        "Via",
        "From",
        "To",
        "P-Preferred-Identity",
        "Call-ID",
        "Content-Length",
        "Max-Forwards",
        "CSeq",
        "Content-Type",
    ] {
        if env.header(name).is_none() {
            return Err(SipError::MissingHeader(match name {
                "Route" => "Route",
                "Via" => "Via",
                "From" => "From",
                "To" => "To",
                "P-Preferred-Identity" => "P-Preferred-Identity",
                "Call-ID" => "Call-ID",
                "Content-Length" => "Content-Length",
                "Max-Forwards" => "Max-Forwards",
                "CSeq" => "CSeq",
                _ => "Content-Type",
            }));
        }
    }
    let declared: usize = env
        .header("Content-Length")
        .and_then(|v| v.parse().ok())
        .ok_or(SipError::MissingHeader("Content-Length"))?;
    if declared != env.body.len() {
        return Err(SipError::ContentLengthMismatch { declared, actual: env.body.len() });
    }
    Ok(())
}

fn reason_phrase(code: u16) -> Option<&'static str> {
    match code {
        200 => Some("OK"),
        400 => Some("Bad Request"),
        401 => Some("Unauthorized"),
        403 => Some("Forbidden"),
        404 => Some("Not Found"),
        429 => Some("Too Many Requests"),
        440 => Some("User Approval Required"),
        _ => None,
    }
}

/// Formats a challenge into a WWW-Authenticate header value.
pub fn format_challenge(ch: &DigestChallenge) -> String {
    format!(
        "Digest realm=\"{}\", nonce=\"{}\", algorithm={}",
        ch.realm, ch.nonce, ch.algorithm_label
    )
}

/// Parses a WWW-Authenticate or Authorization header value into its
/// `key="value"` parameters.
pub fn parse_auth_params(value: &str) -> Result<Vec<(String, String)>, SipError> {
    let rest = value
        .strip_prefix("Digest ")
        .ok_or_else(|| SipError::BadChallenge(format!("no Digest prefix in {value:?}")))?;
    let mut out = Vec::new();
    for part in rest.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| SipError::BadChallenge(format!("bad parameter {part:?}")))?;
        out.push((k.trim().to_string(), v.trim().trim_matches('"').to_string()));
    }
    Ok(out)
}

/// Parses a WWW-Authenticate header value into a challenge.
pub fn parse_challenge(value: &str) -> Result<DigestChallenge, SipError> {
    let params = parse_auth_params(value)?;
    let get = |k: &str| {
        params
            .iter()
            .find(|(n, _)| n == k)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| SipError::BadChallenge(format!("missing {k}")))
    };
    Ok(DigestChallenge {
        realm: get("realm")?,
        nonce: get("nonce")?,
        algorithm_label: get("algorithm")?,
    })
}

/// Builds a response envelope.
///
/// A 440 carries the same challenge content as a 401 plus an
/// `X-Approval-Info` header holding the text shown to the user.
pub fn build_response(
    code: u16,
    challenge: Option<&DigestChallenge>,
    display_text: Option<&str>,
) -> Result<SipEnvelope, SipError> {
    let reason = reason_phrase(code).ok_or(SipError::UnsupportedCode(code))?;
    let mut headers: Vec<(String, String)> = Vec::new();
    if code == 401 || code == 440 {
        let ch = challenge.ok_or(SipError::ChallengeRequired(code))?;
        headers.push(("WWW-Authenticate".into(), format_challenge(ch)));
    }
    if code == 440 {
        let text = display_text.ok_or(SipError::DisplayTextRequired)?;
        headers.push(("X-Approval-Info".into(), text.to_string()));
    }
    headers.push(("Content-Length".into(), "0".into()));
    Ok(SipEnvelope {
        kind: SipKind::Response { code, reason: reason.to_string() },
        headers,
        body: Vec::new(),
    })
}

/// Serializes an envelope into its wire bytes.
pub fn serialize(env: &SipEnvelope) -> Vec<u8> {
    let mut out = Vec::new();
    match &env.kind {
        SipKind::Request { method, uri } => {
            out.extend_from_slice(format!("{method} {uri} SIP/2.0\r\n").as_bytes());
        }
        SipKind::Response { code, reason } => {
            out.extend_from_slice(format!("SIP/2.0 {code} {reason}\r\n").as_bytes());
        }
    }
    for (name, value) in &env.headers {
        out.extend_from_slice(format!("{name}: {value}\r\n").as_bytes());
    }
    out.extend_from_slice(b"\r\n");
    out.extend_from_slice(&env.body);
    out
}

/// Parses wire bytes back into an envelope.
pub fn parse(bytes: &[u8]) -> Result<SipEnvelope, SipError> {
    let split = find_blank_line(bytes).ok_or(SipError::MissingBlankLine)?;
    let head = std::str::from_utf8(&bytes[..split])
        .map_err(|_| SipError::BadStartLine("non-UTF8 header section".into()))?;
    let body = &bytes[split + 4..];

    let mut lines = head.split("\r\n");
    let start = lines.next().ok_or(SipError::MissingBlankLine)?;
    let kind = parse_start_line(start)?;

    let mut headers = Vec::new();
    for line in lines {
        let (name, value) = line
            .split_once(':')
            .ok_or_else(|| SipError::BadHeader(line.to_string()))?;
        if name.is_empty() {
            return Err(SipError::BadHeader(line.to_string()));
        }
        headers.push((name.to_string(), value.strip_prefix(' ').unwrap_or(value).to_string()));
    }

    let declared = headers
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case("Content-Length"))
        .map(|(_, v)| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| SipError::BadHeader(format!("Content-Length: {v}")))
        })
        .transpose()?
        .unwrap_or(0);
    if declared != body.len() {
        return Err(SipError::ContentLengthMismatch { declared, actual: body.len() });
    }

    Ok(SipEnvelope { kind, headers, body: body.to_vec() })
}

fn find_blank_line(bytes: &[u8]) -> Option<usize> {
    bytes.windows(4).position(|w| w == b"\r\n\r\n")
}

fn parse_start_line(line: &str) -> Result<SipKind, SipError> {
    if let Some(rest) = line.strip_prefix("SIP/2.0 ") {
        let (code, reason) = rest
            .split_once(' ')
            .ok_or_else(|| SipError::BadStartLine(line.to_string()))?;
        let code = code
            .parse::<u16>()
            .map_err(|_| SipError::BadStartLine(line.to_string()))?;
        return Ok(SipKind::Response { code, reason: reason.to_string() });
    }
    let mut parts = line.splitn(3, ' ');
    match (parts.next(), parts.next(), parts.next()) {
        (Some(method), Some(uri), Some("SIP/2.0")) if !method.is_empty() && !uri.is_empty() => {
            Ok(SipKind::Request { method: method.to_string(), uri: uri.to_string() })
        }
        _ => Err(SipError::BadStartLine(line.to_string())),
    }
}

/// Digest answer: lowercase hex of
/// `Hash(hex(auth_key) ":" nonce ":" method ":" request_uri)`, with the
/// hash picked by the challenge's algorithm label (unknown labels fall
/// back to the 256-bit default so the function stays total).
pub fn compute_digest_response(
    auth_key: &[u8],
    challenge: &DigestChallenge,
    method: &str,
    request_uri: &str,
) -> String {
    let label: HashLabel = challenge.algorithm_label.parse().unwrap_or_default();
    let input = format!("{}:{}:{}:{}", hex::encode(auth_key), challenge.nonce, method, request_uri);
    hex::encode(label.digest(input.as_bytes()))
}
