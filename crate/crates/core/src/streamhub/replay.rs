//! Rebuilds lab streams from a monitor log and checks them against the
//! deliveries the hub recorded.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::archive::ArchiveReservoir;
use super::distributor::{Delivery, Distributor};
use super::monitor::LogRecord;
use super::protocol::{decode_payload, encode_payload};
use super::{HubError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub intervals: u64,
    pub live_bits: u64,
    /// Concatenated payloads per lab, rebuilt.
    pub rebuilt: BTreeMap<String, String>,
    /// Concatenated payloads per lab, as logged.
    pub logged: BTreeMap<String, String>,
    pub mismatches: Vec<String>,
    /// Every rebuilt delivery in order, for re-running labs.
    pub deliveries: Vec<Delivery>,
    /// Intervals where two non-burst deliveries disagree on their overlap.
    pub prefix_violations: Vec<u64>,
}

impl ReplayReport {
    pub fn identical(&self) -> bool {
        self.mismatches.is_empty() && self.rebuilt == self.logged
    }
}

/// True when every pair of deliveries agrees on their common prefix.
pub fn shared_prefix_holds(deliveries: &[&[u8]]) -> bool {
    deliveries.iter().enumerate().all(|(i, a)| {
        deliveries[i + 1..].iter().all(|b| {
            let n = a.len().min(b.len());
            a[..n] == b[..n]
        })
    })
}

pub fn replay(records: &[LogRecord]) -> Result<ReplayReport> {
    let (seed, len) = match records.first() {
        Some(LogRecord::Header { archive_seed, archive_len, .. }) => (*archive_seed, *archive_len),
        _ => return Err(HubError::Replay("log does not start with a header".into())),
    };
    let mut archive = ArchiveReservoir::generate(seed, len);
    let mut dist = Distributor::new();
    let mut pending: Vec<u8> = Vec::new();
    let mut rebuilt: Vec<Delivery> = Vec::new();
    let mut logged: Vec<Delivery> = Vec::new();
    let mut burst = BTreeMap::new();
    let mut report = ReplayReport {
        intervals: 0,
        live_bits: 0,
        rebuilt: BTreeMap::new(),
        logged: BTreeMap::new(),
        mismatches: Vec::new(),
        deliveries: Vec::new(),
        prefix_violations: Vec::new(),
    };

    for rec in records {
        match rec {
            LogRecord::Subscribe { lab, rate, burst: b, effective_interval } => {
                dist.subscribe(lab, *rate, *b, *effective_interval)?;
                burst.insert(lab.clone(), *b);
            }
            LogRecord::Rate { lab, rate, effective_interval } => dist.set_rate(lab, *rate, *effective_interval)?,
            LogRecord::Bit { bit, .. } => pending.push(*bit),
            LogRecord::Interval { id, live, archive_start, .. } => {
                if pending.len() != *live {
                    return Err(HubError::Replay(format!(
                        "interval {id}: log holds {} bits, header says {live}",
                        pending.len()
                    )));
                }
                let out = dist.distribute(*id, &pending, &mut archive);
                if out.archive_block.map(|b| b.0) != *archive_start {
                    report.mismatches.push(format!("interval {id}: archive block moved"));
                }
                let plain: Vec<&[u8]> = out
                    .deliveries
                    .iter()
                    .filter(|d| !burst.get(&d.lab).copied().unwrap_or(false))
                    .map(|d| d.bits.as_slice())
                    .collect();
                if !shared_prefix_holds(&plain) {
                    report.prefix_violations.push(*id);
                }
                rebuilt.extend(out.deliveries);
                report.intervals += 1;
                report.live_bits += pending.len() as u64;
                pending.clear();
            }
            LogRecord::Delivery { interval, lab, payload, archived_from } => logged.push(Delivery {
                lab: lab.clone(),
                interval_id: *interval,
                bits: decode_payload(payload)?,
                archived_from: *archived_from,
            }),
            _ => {}
        }
    }

    if rebuilt.len() != logged.len() {
        report.mismatches.push(format!(
            "{} deliveries rebuilt, {} logged",
            rebuilt.len(),
            logged.len()
        ));
    }
    for (r, l) in rebuilt.iter().zip(&logged) {
        if r != l {
            report.mismatches.push(format!(
                "interval {} lab {}: rebuilt delivery differs from log",
                l.interval_id, l.lab
            ));
        }
    }
    for (target, list) in [(&mut report.rebuilt, &rebuilt), (&mut report.logged, &logged)] {
        for d in list {
            target
                .entry(d.lab.clone())
                .or_default()
                .push_str(&encode_payload(d.bits.iter().copied()));
        }
    }
    report.deliveries = rebuilt;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streamhub::hub::{Hub, HubConfig};

    fn run_hub() -> Vec<LogRecord> {
        let mut h = Hub::new(HubConfig {
            archive_len: 500,
            archive_seed: 11,
            ..HubConfig::default()
        })
        .unwrap();
        h.subscribe("small", 15, false).unwrap();
        h.subscribe("big", 60, false).unwrap();
        h.subscribe("burst", 50, true).unwrap();
        h.hello("u");
        h.hello("v");
        for t in 0..40u64 {
            h.ingest("u", &[(t % 2) as u8, 1, 0], Some(t)).unwrap();
            h.ingest("v", &[(t % 3 == 0) as u8; 4], None).unwrap();
            if t == 20 {
                h.set_rate("small", 0).unwrap();
                h.ingest("v", &[0; 9], None).unwrap();
            }
            h.tick();
        }
        h.drain_log()
    }

    #[test]
    fn round_trip_is_identical() {
        let log = run_hub();
        let r = replay(&log).unwrap();
        assert!(r.identical(), "{:?}", r.mismatches);
        assert!(r.prefix_violations.is_empty());
        assert_eq!(r.intervals, 10);
        assert!(r.logged["burst"].len() % 50 == 0);
    }

    #[test]
    fn tampering_detected() {
        let mut log = run_hub();
        let i = log
            .iter()
            .position(|r| matches!(r, LogRecord::Bit { labs, .. } if !labs.is_empty()))
            .unwrap();
        if let LogRecord::Bit { bit, .. } = &mut log[i] {
            *bit ^= 1;
        }
        assert!(!replay(&log).unwrap().identical());
        assert!(replay(&log[1..]).is_err());
    }

    #[test]
    fn prefix_check() {
        assert!(shared_prefix_holds(&[&[0, 1], &[0, 1, 1], &[0]]));
        assert!(!shared_prefix_holds(&[&[0, 1], &[0, 0, 1]]));
    }
}
