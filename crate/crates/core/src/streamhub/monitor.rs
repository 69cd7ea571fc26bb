//! Append-only JSON-lines log of everything the hub accepts, drops, and
//! delivers. Enough to rebuild every lab stream offline.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{HubError, Result};

pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    Header {
        version: u32,
        ticks_per_interval: u64,
        tick_ms: u64,
        max_bits_per_tick: usize,
        archive_seed: u64,
        archive_len: usize,
    },
    Hello {
        user: String,
        tick: u64,
    },
    Subscribe {
        lab: String,
        rate: u64,
        burst: bool,
        effective_interval: u64,
    },
    Rate {
        lab: String,
        rate: u64,
        effective_interval: u64,
    },
    /// An accepted bit, written when its interval closes.
    Bit {
        id: u64,
        bit: u8,
        user: String,
        origin_ts: Option<u64>,
        tick: u64,
        labs: Vec<String>,
    },
    Dropped {
        user: String,
        tick: u64,
        payload: String,
    },
    Flag {
        user: String,
        tick: u64,
    },
    Mission {
        user: String,
        n: u64,
        tick: u64,
    },
    Interval {
        id: u64,
        first_tick: u64,
        live: usize,
        archive_start: Option<usize>,
        archive_len: usize,
    },
    Delivery {
        interval: u64,
        lab: String,
        payload: String,
        archived_from: Option<usize>,
    },
}

pub fn write_record<W: Write>(w: &mut W, rec: &LogRecord) -> std::io::Result<()> {
    serde_json::to_writer(&mut *w, rec)?;
    w.write_all(b"\n")
}

pub fn write_log<W: Write>(mut w: W, records: &[LogRecord]) -> std::io::Result<()> {
    for r in records {
        write_record(&mut w, r)?;
    }
    w.flush()
}

/// Reads a log, naming the line and byte offset of the first bad record.
/// A final line without a newline that fails to parse is reported as
/// truncated.
pub fn read_log<R: BufRead>(mut r: R) -> Result<Vec<LogRecord>> {
    let mut out = Vec::new();
    let mut offset = 0u64;
    let mut line_no = 0usize;
    let mut buf = String::new();
    loop {
        buf.clear();
        let n = r.read_line(&mut buf)?;
        if n == 0 {
            return Ok(out);
        }
        line_no += 1;
        let text = buf.trim();
        if !text.is_empty() {
            match serde_json::from_str::<LogRecord>(text) {
                Ok(rec) => out.push(rec),
                Err(e) if !buf.ends_with('\n') => {
                    return Err(HubError::TruncatedLog {
                        offset,
                        reason: e.to_string(),
                    })
                }
                Err(e) => {
                    return Err(HubError::MalformedLog {
                        line: line_no,
                        offset,
                        reason: e.to_string(),
                    })
                }
            }
        }
        offset += n as u64;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<LogRecord> {
        vec![
            LogRecord::Header {
                version: LOG_VERSION,
                ticks_per_interval: 4,
                tick_ms: 500,
                max_bits_per_tick: 10,
                archive_seed: 1,
                archive_len: 0,
            },
            LogRecord::Bit {
                id: 0,
                bit: 1,
                user: "u".into(),
                origin_ts: None,
                tick: 0,
                labs: vec!["a".into()],
            },
        ]
    }

    #[test]
    fn round_trip() {
        let mut buf = Vec::new();
        write_log(&mut buf, &sample()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(r#"{"type":"header""#));
        assert_eq!(read_log(&buf[..]).unwrap(), sample());
    }

    #[test]
    fn malformed_and_truncated() {
        let mut buf = Vec::new();
        write_log(&mut buf, &sample()).unwrap();
        let good = buf.len() as u64;
        let mut bad = buf.clone();
        bad.extend_from_slice(b"{\"type\":\"bit\"}\n");
        match read_log(&bad[..]) {
            Err(HubError::MalformedLog { line, offset, .. }) => assert_eq!((line, offset), (3, good)),
            other => panic!("{other:?}"),
        }
        let mut cut = buf.clone();
        cut.extend_from_slice(b"{\"type\":\"fla");
        match read_log(&cut[..]) {
            Err(HubError::TruncatedLog { offset, .. }) => assert_eq!(offset, good),
            other => panic!("{other:?}"),
        }
    }
}
