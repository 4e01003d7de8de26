//! Interconnect frames exchanged between carriers and the aggregator/provider
//! hub, and between carriers for cross-network deliveries.
//!
//! Frames travel on the same port as SIP; a leading `{` distinguishes the
//! JSON framing from a SIP start-line.

use crate::sms_codec::UserData;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("frame decode failed: {0}")]
    Decode(#[from] serde_json::Error),
}

/// Short-code traffic relayed from a carrier through an aggregator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelayFrame {
    pub carrier_id: String,
    pub aggregator_id: String,
    pub orig_number: String,
    pub short_code: String,
    /// Origin audit recorded by the carrier: whether the From identity
    /// matched the authenticated registration that submitted the message.
    pub authentic_origin: bool,
    pub user_data: UserData,
}

/// Provider-originated text handed back to the recipient's carrier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceText {
    pub short_code: String,
    pub recipient_number: String,
    pub text: String,
    /// Octet payload replaces `text` when a runtime MAC tag is appended.
    pub octet_payload: Option<Vec<u8>>,
}

/// Subscriber-to-subscriber message crossing a carrier boundary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterCarrierSms {
    pub orig_number: String,
    pub dest_number: String,
    pub user_data: UserData,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    Relay(RelayFrame),
    ServiceText(ServiceText),
    InterCarrier(InterCarrierSms),
}

impl Frame {
    pub fn encode(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("frame serialization is infallible")
    }

    pub fn decode(bytes: &[u8]) -> Result<Frame, WireError> {
        Ok(serde_json::from_slice(bytes)?)
    }

    /// True when `payload` looks like a frame rather than a SIP message.
    pub fn sniff(payload: &[u8]) -> bool {
        payload.first() == Some(&b'{')
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_roundtrip_and_sniff() {
        let f = Frame::Relay(RelayFrame {
            carrier_id: "op-one".into(),
            aggregator_id: "agg-1".into(),
            orig_number: "3105550001".into(),
            short_code: "32665".into(),
            authentic_origin: false,
            user_data: UserData::text("Hi..."),
        });
        let bytes = f.encode();
        assert!(Frame::sniff(&bytes));
        assert!(!Frame::sniff(b"MESSAGE tel:1 SIP/2.0\r\n\r\n"));
        assert_eq!(Frame::decode(&bytes).unwrap(), f);
    }
}
