//! Bit-exact encoder/decoder for the ANSI IS-637-A point-to-point SMS
//! transport and teleservice layers.
//!
//! The transport layer is a message-type byte followed by parameter records
//! (`id`, `length`, `value`). Bearer data nests subparameter records of the
//! same shape. Addresses pack digits as 4-bit DTMF codes; user data packs
//! 7-bit ASCII characters MSB-first. All pad bits are zero on encode and
//! rejected when nonzero on decode.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// CDMA Cellular Messaging Teleservice identifier.
pub const TELESERVICE_CMT: u16 = 4098;

/// Largest octet-mode user data payload carried by a single message.
pub const MAX_OCTET_PAYLOAD: usize = 140;
/// Largest 7-bit-mode character count carried by a single message.
pub const MAX_SEVEN_BIT_CHARS: usize = 160;

const MSG_TYPE_POINT_TO_POINT: u8 = 0x00;
const PARAM_TELESERVICE: u8 = 0x00;
const PARAM_ORIG_ADDRESS: u8 = 0x02;
const PARAM_DEST_ADDRESS: u8 = 0x04;
const PARAM_BEARER_DATA: u8 = 0x08;
const SUBPARAM_MESSAGE_ID: u8 = 0x00;
const SUBPARAM_USER_DATA: u8 = 0x01;

const ENCODING_OCTET: u8 = 0;
const ENCODING_SEVEN_BIT: u8 = 2;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("address digit {0:?} is not in [0-9*#]")]
    InvalidDigit(char),
    #[error("address must carry 1..=20 digits, got {0}")]
    AddressLength(usize),
    #[error("digit code {0} is outside the DTMF table")]
    InvalidDigitCode(u8),
    #[error("nonzero pad bits")]
    NonZeroPadding,
    #[error("character {0:#04x} is not printable 7-bit ASCII")]
    NonPrintable(u8),
    #[error("user data too long: {got} > {max}")]
    UserDataTooLong { got: usize, max: usize },
    #[error("unknown user data encoding {0}")]
    UnknownEncoding(u8),
    #[error("unknown message kind {0}")]
    UnknownMessageKind(u8),
    #[error("truncated input: wanted {wanted} more bits")]
    Truncated { wanted: usize },
    #[error("{0} bytes left over after decoding")]
    TrailingBytes(usize),
    #[error("record length {len} overruns remaining {remaining} bytes")]
    BadRecordLength { len: usize, remaining: usize },
    #[error("unknown parameter id {0:#04x}")]
    UnknownParameter(u8),
    #[error("duplicate parameter id {0:#04x}")]
    DuplicateParameter(u8),
    #[error("missing {0} parameter")]
    MissingParameter(&'static str),
    #[error("unexpected transport message type {0:#04x}")]
    BadMessageType(u8),
    #[error("parameter {param:#04x} has wrong length {len}")]
    BadParameterLength { param: u8, len: usize },
    #[error("reserved bits are nonzero")]
    ReservedBitsSet,
}

/// How address digits are encoded on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum DigitMode {
    #[default]
    Dtmf4Bit,
    EightBit,
}

/// Numbering plan indicator for the address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum NumberMode {
    #[default]
    AnsiT1607,
    DataNetwork,
}

/// A transport-layer address: destination or originating phone number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmsAddress {
    pub digit_mode: DigitMode,
    pub number_mode: NumberMode,
    pub digits: String,
}

impl SmsAddress {
    /// DTMF address over the `[0-9*#]` alphabet.
    pub fn dtmf(digits: &str) -> Result<Self, CodecError> {
        let addr = SmsAddress {
            digit_mode: DigitMode::Dtmf4Bit,
            number_mode: NumberMode::AnsiT1607,
            digits: digits.to_string(),
        };
        addr.validate()?;
        Ok(addr)
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        let n = self.digits.chars().count();
        if n == 0 || n > 20 {
            return Err(CodecError::AddressLength(n));
        }
        match self.digit_mode {
            DigitMode::Dtmf4Bit => {
                for c in self.digits.chars() {
                    dtmf_code(c)?;
                }
            }
            DigitMode::EightBit => {
                for c in self.digits.chars() {
                    if !c.is_ascii_graphic() {
                        return Err(CodecError::InvalidDigit(c));
                    }
                }
            }
        }
        Ok(())
    }
}

/// User data payload in one of the two supported encodings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum UserData {
    Octet(Vec<u8>),
    SevenBitAscii(String),
}

impl UserData {
    pub fn text(s: &str) -> Self {
        UserData::SevenBitAscii(s.to_string())
    }

    /// Field count as carried in the num_fields octet.
    pub fn num_fields(&self) -> usize {
        match self {
            UserData::Octet(b) => b.len(),
            UserData::SevenBitAscii(s) => s.chars().count(),
        }
    }

    /// Payload as raw bytes, independent of encoding.
    pub fn payload_bytes(&self) -> Vec<u8> {
        match self {
            UserData::Octet(b) => b.clone(),
            UserData::SevenBitAscii(s) => s.as_bytes().to_vec(),
        }
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        match self {
            UserData::Octet(b) => {
                if b.len() > MAX_OCTET_PAYLOAD {
                    return Err(CodecError::UserDataTooLong {
                        got: b.len(),
                        max: MAX_OCTET_PAYLOAD,
                    });
                }
            }
            UserData::SevenBitAscii(s) => {
                if s.chars().count() > MAX_SEVEN_BIT_CHARS {
                    return Err(CodecError::UserDataTooLong {
                        got: s.chars().count(),
                        max: MAX_SEVEN_BIT_CHARS,
                    });
                }
                for b in s.bytes() {
                    if !(0x20..=0x7e).contains(&b) {
                        return Err(CodecError::NonPrintable(b));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Teleservice-layer message kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MessageKind {
    Deliver,
    Submit,
}

impl MessageKind {
    fn code(self) -> u8 {
        match self {
            MessageKind::Deliver => 1,
            MessageKind::Submit => 2,
        }
    }

    fn from_code(c: u8) -> Result<Self, CodecError> {
        match c {
            1 => Ok(MessageKind::Deliver),
            2 => Ok(MessageKind::Submit),
            other => Err(CodecError::UnknownMessageKind(other)),
        }
    }
}

/// Teleservice-layer bearer data: message identifier plus user data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BearerData {
    pub message_kind: MessageKind,
    pub message_id: u16,
    pub user_data: UserData,
}

/// A complete point-to-point SMS message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmsPdu {
    pub teleservice_id: u16,
    pub dest: SmsAddress,
    /// Absent in mobile-originated submissions; present in mobile-terminated
    /// deliveries, where the network fills it from the accepted sender.
    pub orig: Option<SmsAddress>,
    pub bearer: BearerData,
}

impl SmsPdu {
    /// Mobile-originated submission: no originating address field exists.
    pub fn submit(dest: SmsAddress, message_id: u16, user_data: UserData) -> Self {
        SmsPdu {
            teleservice_id: TELESERVICE_CMT,
            dest,
            orig: None,
            bearer: BearerData {
                message_kind: MessageKind::Submit,
                message_id,
                user_data,
            },
        }
    }

    /// Mobile-terminated delivery carrying the network-inserted sender.
    pub fn deliver(dest: SmsAddress, orig: SmsAddress, message_id: u16, user_data: UserData) -> Self {
        SmsPdu {
            teleservice_id: TELESERVICE_CMT,
            dest,
            orig: Some(orig),
            bearer: BearerData {
                message_kind: MessageKind::Deliver,
                message_id,
                user_data,
            },
        }
    }
}

fn dtmf_code(c: char) -> Result<u8, CodecError> {
    match c {
        '1'..='9' => Ok(c as u8 - b'0'),
        '0' => Ok(10),
        '*' => Ok(11),
        '#' => Ok(12),
        other => Err(CodecError::InvalidDigit(other)),
    }
}

fn dtmf_char(code: u8) -> Result<char, CodecError> {
    match code {
        1..=9 => Ok((b'0' + code) as char),
        10 => Ok('0'),
        11 => Ok('*'),
        12 => Ok('#'),
        other => Err(CodecError::InvalidDigitCode(other)),
    }
}

/// MSB-first bit accumulator used by the address and user data layouts.
struct BitWriter {
    buf: Vec<u8>,
    used: usize,
}

impl BitWriter {
    fn new() -> Self {
        BitWriter { buf: Vec::new(), used: 0 }
    }

    fn push(&mut self, value: u32, nbits: usize) {
        debug_assert!(nbits <= 32);
        for i in (0..nbits).rev() {
            let bit = (value >> i) & 1;
            if self.used.is_multiple_of(8) {
                self.buf.push(0);
            }
            if bit == 1 {
                let byte = self.buf.last_mut().unwrap();
                *byte |= 1 << (7 - (self.used % 8));
            }
            self.used += 1;
        }
    }

    /// Pads the last byte with zero bits and returns the buffer.
    fn finish(self) -> Vec<u8> {
        self.buf
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, pos: 0 }
    }

    fn read(&mut self, nbits: usize) -> Result<u32, CodecError> {
        if self.pos + nbits > self.bytes.len() * 8 {
            return Err(CodecError::Truncated {
                wanted: self.pos + nbits - self.bytes.len() * 8,
            });
        }
        let mut v = 0u32;
        for _ in 0..nbits {
            let byte = self.bytes[self.pos / 8];
            let bit = (byte >> (7 - (self.pos % 8))) & 1;
            v = (v << 1) | bit as u32;
            self.pos += 1;
        }
        Ok(v)
    }

    /// Remaining bits must all be zero padding within the final byte.
    fn expect_zero_padding(mut self) -> Result<(), CodecError> {
        let total = self.bytes.len() * 8;
        let left = total - self.pos;
        if left >= 8 {
            return Err(CodecError::TrailingBytes(left / 8));
        }
        if left > 0 && self.read(left)? != 0 {
            return Err(CodecError::NonZeroPadding);
        }
        Ok(())
    }
}

/// Encodes an address: mode flags, split num_fields octet, then one 4-bit
/// DTMF code or one 8-bit character per digit, zero padded to the byte
/// boundary.
pub fn encode_address(addr: &SmsAddress) -> Result<Vec<u8>, CodecError> {
    addr.validate()?;
    let mut w = BitWriter::new();
    w.push(matches!(addr.digit_mode, DigitMode::EightBit) as u32, 1);
    w.push(matches!(addr.number_mode, NumberMode::DataNetwork) as u32, 1);
    w.push(addr.digits.chars().count() as u32, 8);
    for c in addr.digits.chars() {
        match addr.digit_mode {
            DigitMode::Dtmf4Bit => w.push(dtmf_code(c)? as u32, 4),
            DigitMode::EightBit => w.push(c as u32, 8),
        }
    }
    Ok(w.finish())
}

/// Inverse of [`encode_address`]; rejects nonzero padding and digit codes
/// outside the DTMF table.
pub fn decode_address(bytes: &[u8]) -> Result<SmsAddress, CodecError> {
    let mut r = BitReader::new(bytes);
    let digit_mode = if r.read(1)? == 1 { DigitMode::EightBit } else { DigitMode::Dtmf4Bit };
    let number_mode = if r.read(1)? == 1 { NumberMode::DataNetwork } else { NumberMode::AnsiT1607 };
    let num_fields = r.read(8)? as usize;
    if num_fields == 0 || num_fields > 20 {
        return Err(CodecError::AddressLength(num_fields));
    }
    let mut digits = String::with_capacity(num_fields);
    for _ in 0..num_fields {
        match digit_mode {
            DigitMode::Dtmf4Bit => digits.push(dtmf_char(r.read(4)? as u8)?),
            DigitMode::EightBit => {
                let c = r.read(8)? as u8;
                if !c.is_ascii_graphic() {
                    return Err(CodecError::InvalidDigit(c as char));
                }
                digits.push(c as char);
            }
        }
    }
    r.expect_zero_padding()?;
    let addr = SmsAddress { digit_mode, number_mode, digits };
    addr.validate()?;
    Ok(addr)
}

/// Packs user data: 5-bit encoding, num_fields octet, then the payload at
/// 7 bits per character or 8 bits per byte, zero padded.
pub fn pack_user_data(ud: &UserData) -> Result<Vec<u8>, CodecError> {
    ud.validate()?;
    let mut w = BitWriter::new();
    match ud {
        UserData::Octet(bytes) => {
            w.push(ENCODING_OCTET as u32, 5);
            w.push(bytes.len() as u32, 8);
            for b in bytes {
                w.push(*b as u32, 8);
            }
        }
        UserData::SevenBitAscii(s) => {
            w.push(ENCODING_SEVEN_BIT as u32, 5);
            w.push(s.chars().count() as u32, 8);
            for b in s.bytes() {
                w.push(b as u32, 7);
            }
        }
    }
    Ok(w.finish())
}

/// Inverse of [`pack_user_data`].
pub fn unpack_user_data(bytes: &[u8]) -> Result<UserData, CodecError> {
    let mut r = BitReader::new(bytes);
    let encoding = r.read(5)? as u8;
    let num_fields = r.read(8)? as usize;
    let ud = match encoding {
        ENCODING_OCTET => {
            let mut payload = Vec::with_capacity(num_fields);
            for _ in 0..num_fields {
                payload.push(r.read(8)? as u8);
            }
            UserData::Octet(payload)
        }
        ENCODING_SEVEN_BIT => {
            let mut s = String::with_capacity(num_fields);
            for _ in 0..num_fields {
                let c = r.read(7)? as u8;
                if !(0x20..=0x7e).contains(&c) {
                    return Err(CodecError::NonPrintable(c));
                }
                s.push(c as char);
            }
            UserData::SevenBitAscii(s)
        }
        other => return Err(CodecError::UnknownEncoding(other)),
    };
    r.expect_zero_padding()?;
    ud.validate()?;
    Ok(ud)
}

fn push_record(out: &mut Vec<u8>, id: u8, value: &[u8]) {
    debug_assert!(value.len() <= u8::MAX as usize);
    out.push(id);
    out.push(value.len() as u8);
    out.extend_from_slice(value);
}

fn encode_bearer(bearer: &BearerData) -> Result<Vec<u8>, CodecError> {
    let mut id = BitWriter::new();
    id.push(bearer.message_kind.code() as u32, 4);
    id.push(bearer.message_id as u32, 16);
    id.push(0, 4);
    let mut out = Vec::new();
    push_record(&mut out, SUBPARAM_MESSAGE_ID, &id.finish());
    push_record(&mut out, SUBPARAM_USER_DATA, &pack_user_data(&bearer.user_data)?);
    Ok(out)
}

fn decode_bearer(bytes: &[u8]) -> Result<BearerData, CodecError> {
    let mut message_id: Option<(MessageKind, u16)> = None;
    let mut user_data: Option<UserData> = None;
    let mut rest = bytes;
    while !rest.is_empty() {
        if rest.len() < 2 {
            return Err(CodecError::BadRecordLength { len: 2, remaining: rest.len() });
        }
        let (id, len) = (rest[0], rest[1] as usize);
        if rest.len() - 2 < len {
            return Err(CodecError::BadRecordLength { len, remaining: rest.len() - 2 });
        }
        let value = &rest[2..2 + len];
        match id {
            SUBPARAM_MESSAGE_ID => {
                if message_id.is_some() {
                    return Err(CodecError::DuplicateParameter(id));
                }
                if len != 3 {
                    return Err(CodecError::BadParameterLength { param: id, len });
                }
                let mut r = BitReader::new(value);
                let kind = MessageKind::from_code(r.read(4)? as u8)?;
                let mid = r.read(16)? as u16;
                if r.read(4)? != 0 {
                    return Err(CodecError::ReservedBitsSet);
                }
                message_id = Some((kind, mid));
            }
            SUBPARAM_USER_DATA => {
                if user_data.is_some() {
                    return Err(CodecError::DuplicateParameter(id));
                }
                user_data = Some(unpack_user_data(value)?);
            }
            other => return Err(CodecError::UnknownParameter(other)),
        }
        rest = &rest[2 + len..];
    }
    let (message_kind, message_id) =
        message_id.ok_or(CodecError::MissingParameter("message identifier"))?;
    let user_data = user_data.ok_or(CodecError::MissingParameter("user data"))?;
    Ok(BearerData { message_kind, message_id, user_data })
}

/// Encodes a full point-to-point message. Parameter order is fixed:
/// teleservice, destination, originating (when present), bearer data.
pub fn encode_pdu(pdu: &SmsPdu) -> Result<Vec<u8>, CodecError> {
    let mut out = vec![MSG_TYPE_POINT_TO_POINT];
    push_record(&mut out, PARAM_TELESERVICE, &pdu.teleservice_id.to_be_bytes());
    push_record(&mut out, PARAM_DEST_ADDRESS, &encode_address(&pdu.dest)?);
    if let Some(orig) = &pdu.orig {
        push_record(&mut out, PARAM_ORIG_ADDRESS, &encode_address(orig)?);
    }
    push_record(&mut out, PARAM_BEARER_DATA, &encode_bearer(&pdu.bearer)?);
    Ok(out)
}

/// Inverse of [`encode_pdu`]; accepts parameters in any order but rejects
/// unknown ids, duplicates, bad lengths, and a missing destination.
pub fn decode_pdu(bytes: &[u8]) -> Result<SmsPdu, CodecError> {
    if bytes.is_empty() {
        return Err(CodecError::Truncated { wanted: 8 });
    }
    if bytes[0] != MSG_TYPE_POINT_TO_POINT {
        return Err(CodecError::BadMessageType(bytes[0]));
    }
    let mut teleservice: Option<u16> = None;
    let mut dest: Option<SmsAddress> = None;
    let mut orig: Option<SmsAddress> = None;
    let mut bearer: Option<BearerData> = None;
    let mut rest = &bytes[1..];
    while !rest.is_empty() {
        if rest.len() < 2 {
            return Err(CodecError::BadRecordLength { len: 2, remaining: rest.len() });
        }
        let (id, len) = (rest[0], rest[1] as usize);
        if rest.len() - 2 < len {
            return Err(CodecError::BadRecordLength { len, remaining: rest.len() - 2 });
        }
        let value = &rest[2..2 + len];
        match id {
            PARAM_TELESERVICE => {
                if teleservice.is_some() {
                    return Err(CodecError::DuplicateParameter(id));
                }
                if len != 2 {
                    return Err(CodecError::BadParameterLength { param: id, len });
                }
                teleservice = Some(u16::from_be_bytes([value[0], value[1]]));
            }
            PARAM_DEST_ADDRESS => {
                if dest.is_some() {
                    return Err(CodecError::DuplicateParameter(id));
                }
                dest = Some(decode_address(value)?);
            }
            PARAM_ORIG_ADDRESS => {
                if orig.is_some() {
                    return Err(CodecError::DuplicateParameter(id));
                }
                orig = Some(decode_address(value)?);
            }
            PARAM_BEARER_DATA => {
                if bearer.is_some() {
                    return Err(CodecError::DuplicateParameter(id));
                }
                bearer = Some(decode_bearer(value)?);
            }
            other => return Err(CodecError::UnknownParameter(other)),
        }
        rest = &rest[2 + len..];
    }
    Ok(SmsPdu {
        teleservice_id: teleservice.ok_or(CodecError::MissingParameter("teleservice"))?,
        dest: dest.ok_or(CodecError::MissingParameter("destination address"))?,
        orig,
        bearer: bearer.ok_or(CodecError::MissingParameter("bearer data"))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent bit-level oracle: concatenates fixed-width fields into
    /// a zero-padded byte vector without going through BitWriter.
    fn oracle_pack(fields: &[(u32, usize)]) -> Vec<u8> {
        let mut bits = Vec::new();
        for (value, nbits) in fields {
            for i in (0..*nbits).rev() {
                bits.push(((value >> i) & 1) as u8);
            }
        }
        while bits.len() % 8 != 0 {
            bits.push(0);
        }
        bits.chunks(8)
            .map(|c| c.iter().fold(0u8, |acc, b| (acc << 1) | b))
            .collect()
    }

    fn addr(digits: &str) -> SmsAddress {
        SmsAddress::dtmf(digits).unwrap()
    }

    #[test]
    fn address_32665_layout() {
        let bytes = encode_address(&addr("32665")).unwrap();
        let expect = oracle_pack(&[
            (0, 1), // 4-bit DTMF
            (0, 1), // ANSI T1.607
            (5, 8),
            (3, 4),
            (2, 4),
            (6, 4),
            (6, 4),
            (5, 4),
        ]);
        assert_eq!(bytes, expect);
        assert_eq!(bytes.len(), 4);
        // num_fields straddles the first byte boundary: 6 MSB then 2 LSB
        assert_eq!(bytes[0], 0b0000_0001);
        assert_eq!(bytes[1] >> 6, 0b01);
    }

    #[test]
    fn address_single_digit_has_two_zero_pad_bits() {
        let bytes = encode_address(&addr("1")).unwrap();
        // 1+1+8+4 = 14 bits -> 2 bytes, final 2 bits zero
        assert_eq!(bytes.len(), 2);
        assert_eq!(bytes[1] & 0b0000_0011, 0);
        assert_eq!(decode_address(&bytes).unwrap(), addr("1"));
    }

    #[test]
    fn address_dtmf_table_zero_star_hash() {
        let bytes = encode_address(&addr("90999")).unwrap();
        let expect = oracle_pack(&[(0, 1), (0, 1), (5, 8), (9, 4), (10, 4), (9, 4), (9, 4), (9, 4)]);
        assert_eq!(bytes, expect);
        assert_eq!(decode_address(&bytes).unwrap().digits, "90999");

        let bytes = encode_address(&addr("*#0")).unwrap();
        let expect = oracle_pack(&[(0, 1), (0, 1), (3, 8), (11, 4), (12, 4), (10, 4)]);
        assert_eq!(bytes, expect);
        assert_eq!(decode_address(&bytes).unwrap().digits, "*#0");
    }

    #[test]
    fn address_eight_bit_mode_roundtrips() {
        let addr = SmsAddress {
            digit_mode: DigitMode::EightBit,
            number_mode: NumberMode::DataNetwork,
            digits: "user42".into(),
        };
        let bytes = encode_address(&addr).unwrap();
        let expect = oracle_pack(&[
            (1, 1),
            (1, 1),
            (6, 8),
            (b'u' as u32, 8),
            (b's' as u32, 8),
            (b'e' as u32, 8),
            (b'r' as u32, 8),
            (b'4' as u32, 8),
            (b'2' as u32, 8),
        ]);
        assert_eq!(bytes, expect);
        assert_eq!(decode_address(&bytes).unwrap(), addr);
        // Non-graphic characters are rejected in 8-bit mode too.
        let bad = SmsAddress { digits: "a b".into(), ..addr };
        assert_eq!(encode_address(&bad).unwrap_err(), CodecError::InvalidDigit(' '));
    }

    #[test]
    fn address_rejects_bad_digits_and_lengths() {
        assert_eq!(
            SmsAddress::dtmf("12a").unwrap_err(),
            CodecError::InvalidDigit('a')
        );
        assert_eq!(SmsAddress::dtmf("").unwrap_err(), CodecError::AddressLength(0));
        assert!(SmsAddress::dtmf(&"1".repeat(21)).is_err());
    }

    #[test]
    fn address_decode_rejects_set_pad_bit() {
        let mut bytes = encode_address(&addr("1")).unwrap();
        *bytes.last_mut().unwrap() |= 1;
        assert_eq!(decode_address(&bytes).unwrap_err(), CodecError::NonZeroPadding);
    }

    #[test]
    fn address_decode_rejects_bad_digit_code() {
        // num_fields 1, digit code 0
        let bytes = oracle_pack(&[(0, 1), (0, 1), (1, 8), (0, 4)]);
        assert_eq!(decode_address(&bytes).unwrap_err(), CodecError::InvalidDigitCode(0));
        let bytes = oracle_pack(&[(0, 1), (0, 1), (1, 8), (13, 4)]);
        assert_eq!(decode_address(&bytes).unwrap_err(), CodecError::InvalidDigitCode(13));
    }

    #[test]
    fn user_data_yyyy8_character_area() {
        // Character area alone, as packed 7-bit values.
        let chars = oracle_pack(&[
            (0x79, 7),
            (0x79, 7),
            (0x79, 7),
            (0x79, 7),
            (0x38, 7),
        ]);
        assert_eq!(chars, vec![0xf3, 0xe7, 0xcf, 0x97, 0x00]);

        // Full field: encoding 2 in 5 bits, num_fields 5, then characters.
        let packed = pack_user_data(&UserData::text("yyyy8")).unwrap();
        let expect = oracle_pack(&[
            (2, 5),
            (5, 8),
            (0x79, 7),
            (0x79, 7),
            (0x79, 7),
            (0x79, 7),
            (0x38, 7),
        ]);
        assert_eq!(packed, expect);
        assert_eq!(packed.len(), 6);
        // Encoding nibble alignment: byte 0 is 0001 0000
        assert_eq!(packed[0], 0b0001_0000);
    }

    #[test]
    fn user_data_empty_and_capacity_formula() {
        let packed = pack_user_data(&UserData::text("")).unwrap();
        assert_eq!(packed.len(), 2);
        assert_eq!(unpack_user_data(&packed).unwrap(), UserData::text(""));

        for n in 0..=160usize {
            let s = "A".repeat(n);
            let packed = pack_user_data(&UserData::text(&s)).unwrap();
            assert_eq!(packed.len(), (5 + 8 + 7 * n).div_ceil(8), "n={n}");
        }
    }

    #[test]
    fn user_data_octet_140() {
        let payload = vec![0xAB; 140];
        let packed = pack_user_data(&UserData::Octet(payload.clone())).unwrap();
        let unpacked = unpack_user_data(&packed).unwrap();
        assert_eq!(unpacked, UserData::Octet(payload));
        assert!(pack_user_data(&UserData::Octet(vec![0; 141])).is_err());
        assert!(pack_user_data(&UserData::text(&"x".repeat(161))).is_err());
    }

    #[test]
    fn user_data_rejects_nonprintable_and_truncation() {
        assert_eq!(
            pack_user_data(&UserData::SevenBitAscii("a\u{7}".into())).unwrap_err(),
            CodecError::NonPrintable(0x07)
        );
        // Declared num_fields 6 but only 5 characters worth of bits.
        let five = pack_user_data(&UserData::text("yyyy8")).unwrap();
        let mut forged = five.clone();
        // num_fields bits 5..13: set to 6
        forged[0] &= 0b1111_1000;
        forged[1] = (0b0000_0110 << 3) | (forged[1] & 0b0000_0111);
        assert!(matches!(
            unpack_user_data(&forged).unwrap_err(),
            CodecError::Truncated { .. } | CodecError::NonPrintable(_) | CodecError::NonZeroPadding
        ));
        // Hard truncation: drop the final byte entirely.
        let cut = &five[..five.len() - 1];
        assert!(matches!(unpack_user_data(cut).unwrap_err(), CodecError::Truncated { .. }));
    }

    #[test]
    fn pdu_fig_structure_roundtrips() {
        let pdu = SmsPdu::submit(addr("32665"), 7, UserData::text("yyyy8"));
        let bytes = encode_pdu(&pdu).unwrap();
        assert_eq!(bytes[0], 0x00);
        // teleservice parameter: id 0x00, len 2, 4098 big-endian
        assert_eq!(&bytes[1..5], &[0x00, 0x02, 0x10, 0x02]);
        assert_eq!(decode_pdu(&bytes).unwrap(), pdu);
    }

    #[test]
    fn pdu_deliver_carries_orig() {
        let pdu = SmsPdu::deliver(addr("3105550142"), addr("32665"), 9, UserData::text("ok"));
        let bytes = encode_pdu(&pdu).unwrap();
        let back = decode_pdu(&bytes).unwrap();
        assert_eq!(back.orig.as_ref().unwrap().digits, "32665");
        assert_eq!(back, pdu);
    }

    #[test]
    fn pdu_decode_errors() {
        let pdu = SmsPdu::submit(addr("32665"), 7, UserData::text("hi"));
        let bytes = encode_pdu(&pdu).unwrap();

        // Invalid destination digits error out at encode time.
        let mut bad = pdu.clone();
        bad.dest.digits = String::new();
        assert!(encode_pdu(&bad).is_err());

        // Missing destination parameter.
        let mut stripped = vec![bytes[0]];
        let mut rest = &bytes[1..];
        while !rest.is_empty() {
            let len = rest[1] as usize;
            if rest[0] != PARAM_DEST_ADDRESS {
                stripped.extend_from_slice(&rest[..2 + len]);
            }
            rest = &rest[2 + len..];
        }
        assert_eq!(
            decode_pdu(&stripped).unwrap_err(),
            CodecError::MissingParameter("destination address")
        );

        // Unknown parameter id.
        let mut unknown = bytes.clone();
        unknown.extend_from_slice(&[0x77, 0x01, 0x00]);
        assert_eq!(decode_pdu(&unknown).unwrap_err(), CodecError::UnknownParameter(0x77));

        // Record length overrunning the buffer.
        let overrun = [0x00u8, 0x00, 0x05, 0x10, 0x02];
        assert!(matches!(decode_pdu(&overrun), Err(CodecError::BadRecordLength { .. })));
    }

    fn arb_digits() -> impl Strategy<Value = String> {
        proptest::collection::vec(proptest::sample::select(vec![
            '0', '1', '2', '3', '4', '5', '6', '7', '8', '9', '*', '#',
        ]), 1..=20)
        .prop_map(|v| v.into_iter().collect())
    }

    fn arb_address() -> impl Strategy<Value = SmsAddress> {
        prop_oneof![
            arb_digits().prop_map(|d| SmsAddress::dtmf(&d).unwrap()),
            proptest::collection::vec(0x21u8..=0x7eu8, 1..=20).prop_map(|v| SmsAddress {
                digit_mode: DigitMode::EightBit,
                number_mode: NumberMode::DataNetwork,
                digits: v.into_iter().map(|b| b as char).collect(),
            }),
        ]
    }

    fn arb_user_data() -> impl Strategy<Value = UserData> {
        prop_oneof![
            proptest::collection::vec(any::<u8>(), 0..=140).prop_map(UserData::Octet),
            proptest::collection::vec(0x20u8..=0x7e, 0..=160)
                .prop_map(|v| UserData::SevenBitAscii(v.into_iter().map(|b| b as char).collect())),
        ]
    }

    fn arb_pdu() -> impl Strategy<Value = SmsPdu> {
        (arb_address(), proptest::option::of(arb_address()), any::<u16>(), arb_user_data(), any::<bool>())
            .prop_map(|(dest, orig, message_id, user_data, deliver)| SmsPdu {
                teleservice_id: TELESERVICE_CMT,
                dest,
                orig,
                bearer: BearerData {
                    message_kind: if deliver { MessageKind::Deliver } else { MessageKind::Submit },
                    message_id,
                    user_data,
                },
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn pdu_roundtrip(pdu in arb_pdu()) {
            let bytes = encode_pdu(&pdu).unwrap();
            prop_assert_eq!(decode_pdu(&bytes).unwrap(), pdu);
        }
    }

    proptest! {
        #[test]
        fn user_data_roundtrip_100_chars(s in proptest::collection::vec(0x20u8..=0x7e, 100)) {
            let text: String = s.into_iter().map(|b| b as char).collect();
            let ud = UserData::text(&text);
            prop_assert_eq!(unpack_user_data(&pack_user_data(&ud).unwrap()).unwrap(), ud);
        }

        #[test]
        fn address_roundtrip(digits in arb_digits()) {
            let a = SmsAddress::dtmf(&digits).unwrap();
            prop_assert_eq!(decode_address(&encode_address(&a).unwrap()).unwrap(), a);
        }

        #[test]
        fn encoder_output_has_zero_pad_bits(digits in arb_digits()) {
            let a = SmsAddress::dtmf(&digits).unwrap();
            let bytes = encode_address(&a).unwrap();
            let used_bits = 10 + 4 * digits.chars().count();
            let pad = bytes.len() * 8 - used_bits;
            prop_assert!(pad < 8);
            if pad > 0 {
                let mask = (1u8 << pad) - 1;
                prop_assert_eq!(bytes.last().unwrap() & mask, 0);
            }
        }
    }
}
