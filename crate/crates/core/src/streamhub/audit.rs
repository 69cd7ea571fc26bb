//! Offline screening of a monitor log for users who look automated.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::monitor::LogRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    /// Users at or below this many bits are never flagged.
    pub min_total_bits: u64,
    /// Shortest plausible gap between two missions, seconds.
    pub mission_gap_floor_s: f64,
    /// Most bits one mission may report.
    pub mission_bits_ceiling: u64,
    /// Sustained bits per second above which input is not typed by hand.
    pub rate_ceiling: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            min_total_bits: 2000,
            mission_gap_floor_s: 5.0,
            mission_bits_ceiling: 1000,
            rate_ceiling: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserAudit {
    pub user: String,
    pub total_bits: u64,
    pub rate: f64,
    pub min_mission_gap_s: Option<f64>,
    pub max_mission_bits: Option<u64>,
    pub health_flag_tick: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabContamination {
    pub lab: String,
    pub live_bits: u64,
    /// Bits from users the audit flagged.
    pub suspicious_bits: u64,
    /// Bits from health-flagged users accepted after their flag. Bits kept on
    /// the flag tick itself arrived before the flag, so only later ticks count.
    pub post_flag_bits: u64,
}

impl LabContamination {
    pub fn fraction(&self) -> f64 {
        if self.live_bits == 0 {
            0.0
        } else {
            self.suspicious_bits as f64 / self.live_bits as f64
        }
    }

    pub fn post_flag_fraction(&self) -> f64 {
        if self.live_bits == 0 {
            0.0
        } else {
            self.post_flag_bits as f64 / self.live_bits as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub suspicious: Vec<String>,
    pub health_flagged: Vec<String>,
    pub users: Vec<UserAudit>,
    pub labs: Vec<LabContamination>,
}

#[derive(Default)]
struct Tally {
    bits: u64,
    first_tick: Option<u64>,
    last_tick: u64,
    missions: Vec<(u64, u64)>,
    flag: Option<u64>,
}

impl Tally {
    fn touch(&mut self, tick: u64, bits: u64) {
        self.bits += bits;
        self.first_tick = Some(self.first_tick.map_or(tick, |t| t.min(tick)));
        self.last_tick = self.last_tick.max(tick);
    }
}

pub fn audit(records: &[LogRecord], cfg: &AuditConfig) -> AuditReport {
    let tick_s = records
        .iter()
        .find_map(|r| match r {
            LogRecord::Header { tick_ms, .. } => Some(*tick_ms as f64 / 1000.0),
            _ => None,
        })
        .unwrap_or(0.5);
    let mut users: BTreeMap<&str, Tally> = BTreeMap::new();
    for r in records {
        match r {
            LogRecord::Bit { user, tick, .. } => users.entry(user).or_default().touch(*tick, 1),
            LogRecord::Dropped { user, tick, payload } => {
                users.entry(user).or_default().touch(*tick, payload.len() as u64)
            }
            LogRecord::Mission { user, n, tick } => users.entry(user).or_default().missions.push((*tick, *n)),
            LogRecord::Flag { user, tick } => users.entry(user).or_default().flag = Some(*tick),
            _ => {}
        }
    }

    let mut report = AuditReport {
        suspicious: Vec::new(),
        health_flagged: Vec::new(),
        users: Vec::new(),
        labs: Vec::new(),
    };
    for (user, t) in &users {
        let span = t.first_tick.map_or(0, |f| t.last_tick - f + 1) as f64 * tick_s;
        let rate = if span > 0.0 { t.bits as f64 / span } else { 0.0 };
        let mut ticks: Vec<u64> = t.missions.iter().map(|m| m.0).collect();
        ticks.sort_unstable();
        let min_gap = ticks
            .windows(2)
            .map(|w| (w[1] - w[0]) as f64 * tick_s)
            .min_by(f64::total_cmp);
        let max_bits = t.missions.iter().map(|m| m.1).max();
        let odd = min_gap.is_some_and(|g| g < cfg.mission_gap_floor_s)
            || max_bits.is_some_and(|b| b > cfg.mission_bits_ceiling)
            || rate > cfg.rate_ceiling;
        if t.bits > cfg.min_total_bits && odd {
            report.suspicious.push(user.to_string());
        }
        if t.flag.is_some() {
            report.health_flagged.push(user.to_string());
        }
        report.users.push(UserAudit {
            user: user.to_string(),
            total_bits: t.bits,
            rate,
            min_mission_gap_s: min_gap,
            max_mission_bits: max_bits,
            health_flag_tick: t.flag,
        });
    }

    let suspicious: BTreeSet<&str> = report.suspicious.iter().map(String::as_str).collect();
    let mut labs: BTreeMap<&str, LabContamination> = BTreeMap::new();
    for r in records {
        if let LogRecord::Bit { user, tick, labs: to, .. } = r {
            let post_flag = users.get(user.as_str()).and_then(|t| t.flag).is_some_and(|f| *tick > f);
            for lab in to {
                let c = labs.entry(lab).or_insert_with(|| LabContamination {
                    lab: lab.clone(),
                    live_bits: 0,
                    suspicious_bits: 0,
                    post_flag_bits: 0,
                });
                c.live_bits += 1;
                c.suspicious_bits += u64::from(suspicious.contains(user.as_str()));
                c.post_flag_bits += u64::from(post_flag);
            }
        }
    }
    report.labs = labs.into_values().collect();
    report
}
