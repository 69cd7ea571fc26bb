//! Line-delimited JSON wire protocol. Every message carries a `type` tag.

use serde::{Deserialize, Serialize};

use super::{HubError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabCount {
    pub lab: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Message {
    // client -> hub
    #[serde(rename = "hello")]
    Hello { user: String },
    #[serde(rename = "bits")]
    Bits {
        user: String,
        seq: u64,
        payload: String,
        /// Client clock in ms; recorded, never used for ordering.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ts: Option<u64>,
    },
    #[serde(rename = "predict?")]
    Predict { user: String },
    #[serde(rename = "mission_done")]
    MissionDone { user: String, n: u64 },

    // hub -> client
    #[serde(rename = "feedback")]
    Feedback { per_lab: Vec<LabCount> },
    #[serde(rename = "prediction")]
    Prediction {
        bit: u8,
        #[serde(default)]
        confidence: f64,
        #[serde(default)]
        context_length: usize,
    },

    // lab -> hub
    #[serde(rename = "subscribe")]
    Subscribe { lab: String, rate: u64, burst: bool },
    #[serde(rename = "rate")]
    Rate { lab: String, rate: u64 },

    // hub -> lab
    #[serde(rename = "stream")]
    Stream {
        #[serde(default)]
        lab: String,
        interval_id: u64,
        payload: String,
        /// Index in `payload` where archived bits begin.
        archived_from: Option<usize>,
    },

    // either direction
    #[serde(rename = "ack")]
    Ack {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        detail: Option<String>,
    },
    #[serde(rename = "error")]
    Error { message: String },
}

impl Message {
    pub fn parse(line: &str) -> Result<Self> {
        serde_json::from_str(line.trim()).map_err(|e| HubError::Protocol(e.to_string()))
    }

    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("messages serialize");
        s.push('\n');
        s
    }
}

/// Parses an ASCII `0`/`1` payload.
pub fn decode_payload(payload: &str) -> Result<Vec<u8>> {
    payload
        .bytes()
        .map(|b| match b {
            b'0' => Ok(0),
            b'1' => Ok(1),
            other => Err(HubError::Protocol(format!(
                "payload byte {:?} is not '0' or '1'",
                other as char
            ))),
        })
        .collect()
}

pub fn encode_payload(bits: impl IntoIterator<Item = u8>) -> String {
    bits.into_iter().map(|b| if b == 0 { '0' } else { '1' }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_shapes() {
        let m = Message::parse(r#"{"type":"predict?","user":"u1"}"#).unwrap();
        assert_eq!(m, Message::Predict { user: "u1".into() });
        let m = Message::parse(r#"{"type":"bits","user":"u","seq":3,"payload":"0110"}"#).unwrap();
        assert!(matches!(m, Message::Bits { seq: 3, ts: None, .. }));
        let s = Message::Stream {
            lab: "x".into(),
            interval_id: 2,
            payload: "01".into(),
            archived_from: None,
        }
        .to_line();
        assert!(s.contains(r#""archived_from":null"#));
        assert!(s.ends_with('\n'));
        assert!(Message::parse(r#"{"type":"nope"}"#).is_err());
    }

    #[test]
    fn round_trip_all() {
        let msgs = vec![
            Message::Hello { user: "a".into() },
            Message::MissionDone { user: "a".into(), n: 30 },
            Message::Feedback { per_lab: vec![LabCount { lab: "l".into(), count: 4 }] },
            Message::Prediction { bit: 1, confidence: 0.75, context_length: 2 },
            Message::Subscribe { lab: "l".into(), rate: 100, burst: true },
            Message::Rate { lab: "l".into(), rate: 0 },
            Message::Ack { detail: None },
            Message::Error { message: "x".into() },
        ];
        for m in msgs {
            assert_eq!(Message::parse(&m.to_line()).unwrap(), m);
        }
    }

    #[test]
    fn payload_codec() {
        assert_eq!(decode_payload("0110").unwrap(), vec![0, 1, 1, 0]);
        assert!(decode_payload("012").is_err());
        assert_eq!(encode_payload([1, 0, 0]), "100");
    }
}
