//! The hub state machine. No I/O: the server and the simulator drive it
//! with messages and clock ticks, and drain its log records.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::predictor::{Prediction, PredictorState, DEFAULT_L_MAX};

use super::archive::ArchiveReservoir;
use super::distributor::{Distributor, IntervalResult};
use super::feedback::{feedback_seed, sample_feedback};
use super::monitor::{LogRecord, LOG_VERSION};
use super::protocol::{encode_payload, LabCount};
use super::session::{UserSession, MAX_BITS_PER_TICK};
use super::{HubError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HubConfig {
    pub max_bits_per_tick: usize,
    pub ticks_per_interval: u64,
    pub tick_ms: u64,
    pub archive_seed: u64,
    pub archive_len: usize,
    pub feedback_seed: u64,
    pub predictor_l_max: usize,
}

impl Default for HubConfig {
    fn default() -> Self {
        Self {
            max_bits_per_tick: MAX_BITS_PER_TICK,
            ticks_per_interval: 4,
            tick_ms: 500,
            archive_seed: 0,
            archive_len: 100_000,
            feedback_seed: 0,
            predictor_l_max: DEFAULT_L_MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiveBit {
    pub id: u64,
    pub bit: u8,
    pub user: String,
    pub origin_ts: Option<u64>,
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TickBuffer {
    pub tick: u64,
    pub bits: Vec<LiveBit>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalClose {
    pub interval_id: u64,
    pub live: usize,
    pub result: IntervalResult,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TickOutcome {
    pub buffer: TickBuffer,
    pub interval: Option<IntervalClose>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HubStats {
    pub received: u64,
    pub accepted: u64,
    pub dropped: u64,
    pub delivered: u64,
    pub archived_delivered: u64,
    pub intervals: u64,
}

#[derive(Debug, Clone)]
pub struct Hub {
    cfg: HubConfig,
    sessions: BTreeMap<String, UserSession>,
    predictors: HashMap<String, PredictorState>,
    tick: u64,
    interval_id: u64,
    current: Vec<LiveBit>,
    interval_bits: Vec<LiveBit>,
    next_id: u64,
    distributor: Distributor,
    archive: ArchiveReservoir,
    log: Vec<LogRecord>,
    last_shares: Vec<(String, u64)>,
    last_total: u64,
    feedback_requests: HashMap<String, u64>,
    stats: HubStats,
}

impl Hub {
    pub fn new(cfg: HubConfig) -> Result<Self> {
        if cfg.ticks_per_interval == 0 {
            return Err(HubError::Config("ticks_per_interval must be positive".into()));
        }
        PredictorState::new(cfg.predictor_l_max).map_err(|e| HubError::Config(e.to_string()))?;
        let log = vec![LogRecord::Header {
            version: LOG_VERSION,
            ticks_per_interval: cfg.ticks_per_interval,
            tick_ms: cfg.tick_ms,
            max_bits_per_tick: cfg.max_bits_per_tick,
            archive_seed: cfg.archive_seed,
            archive_len: cfg.archive_len,
        }];
        Ok(Self {
            archive: ArchiveReservoir::generate(cfg.archive_seed, cfg.archive_len),
            cfg,
            sessions: BTreeMap::new(),
            predictors: HashMap::new(),
            tick: 0,
            interval_id: 0,
            current: Vec::new(),
            interval_bits: Vec::new(),
            next_id: 0,
            distributor: Distributor::new(),
            log,
            last_shares: Vec::new(),
            last_total: 0,
            feedback_requests: HashMap::new(),
            stats: HubStats::default(),
        })
    }

    pub fn config(&self) -> &HubConfig {
        &self.cfg
    }

    pub fn current_tick(&self) -> u64 {
        self.tick
    }

    /// Id of the interval now collecting bits.
    pub fn current_interval(&self) -> u64 {
        self.interval_id
    }

    pub fn stats(&self) -> HubStats {
        self.stats
    }

    pub fn session(&self, user: &str) -> Option<&UserSession> {
        self.sessions.get(user)
    }

    pub fn sessions(&self) -> impl Iterator<Item = &UserSession> {
        self.sessions.values()
    }

    pub fn distributor(&self) -> &Distributor {
        &self.distributor
    }

    pub fn archive_remaining(&self) -> usize {
        self.archive.remaining()
    }

    /// Registers a user; repeated hellos are harmless.
    pub fn hello(&mut self, user: &str) {
        if !self.sessions.contains_key(user) {
            self.sessions.insert(user.to_string(), UserSession::new(user));
            self.log.push(LogRecord::Hello {
                user: user.to_string(),
                tick: self.tick,
            });
        }
    }

    /// Screens and buffers a batch; returns the number of bits kept.
    pub fn ingest(&mut self, user: &str, bits: &[u8], origin_ts: Option<u64>) -> Result<usize> {
        if let Some(&b) = bits.iter().find(|&&b| b > 1) {
            return Err(HubError::Protocol(format!("bit value {b}")));
        }
        let now = self.tick * self.cfg.tick_ms;
        let session = self
            .sessions
            .get_mut(user)
            .ok_or_else(|| HubError::UnknownSession(user.to_string()))?;
        let verdict = session.screen(bits, self.tick, now, self.cfg.max_bits_per_tick);
        self.predictors
            .entry(user.to_string())
            .or_insert_with(|| PredictorState::new(self.cfg.predictor_l_max).expect("checked in new"))
            .observe_all(bits.iter().copied());
        self.stats.received += bits.len() as u64;
        self.stats.accepted += verdict.accepted.len() as u64;
        self.stats.dropped += verdict.dropped.len() as u64;
        for &bit in &verdict.accepted {
            self.current.push(LiveBit {
                id: self.next_id,
                bit,
                user: user.to_string(),
                origin_ts,
                tick: self.tick,
            });
            self.next_id += 1;
        }
        if verdict.newly_flagged {
            self.log.push(LogRecord::Flag {
                user: user.to_string(),
                tick: self.tick,
            });
        }
        if !verdict.dropped.is_empty() {
            self.log.push(LogRecord::Dropped {
                user: user.to_string(),
                tick: self.tick,
                payload: encode_payload(verdict.dropped.iter().copied()),
            });
        }
        Ok(verdict.accepted.len())
    }

    /// The Oracle's guess at the user's next bit.
    pub fn predict(&self, user: &str) -> Result<Prediction> {
        if !self.sessions.contains_key(user) {
            return Err(HubError::UnknownSession(user.to_string()));
        }
        Ok(match self.predictors.get(user) {
            Some(p) => p.predict(),
            None => PredictorState::new(self.cfg.predictor_l_max).expect("checked in new").predict(),
        })
    }

    /// Logs a finished mission and draws its per-lab feedback.
    pub fn feedback(&mut self, user: &str, n: u64) -> Result<Vec<LabCount>> {
        if !self.sessions.contains_key(user) {
            return Err(HubError::UnknownSession(user.to_string()));
        }
        self.log.push(LogRecord::Mission {
            user: user.to_string(),
            n,
            tick: self.tick,
        });
        let counter = self.feedback_requests.entry(user.to_string()).or_insert(0);
        let seed = feedback_seed(self.cfg.feedback_seed, user, *counter);
        *counter += 1;
        Ok(sample_feedback(n, &self.last_shares, self.last_total, seed))
    }

    /// Registers a lab from the next interval on.
    pub fn subscribe(&mut self, lab: &str, rate: u64, burst: bool) -> Result<u64> {
        let effective = self.interval_id + 1;
        self.distributor.subscribe(lab, rate, burst, effective)?;
        self.log.push(LogRecord::Subscribe {
            lab: lab.to_string(),
            rate,
            burst,
            effective_interval: effective,
        });
        Ok(effective)
    }

    pub fn set_rate(&mut self, lab: &str, rate: u64) -> Result<u64> {
        let effective = self.interval_id + 1;
        self.distributor.set_rate(lab, rate, effective)?;
        self.log.push(LogRecord::Rate {
            lab: lab.to_string(),
            rate,
            effective_interval: effective,
        });
        Ok(effective)
    }

    /// Closes the current tick, and the interval when it is the last one.
    pub fn tick(&mut self) -> TickOutcome {
        let bits = std::mem::take(&mut self.current);
        for s in self.sessions.values_mut() {
            s.end_tick();
        }
        let buffer = TickBuffer { tick: self.tick, bits };
        self.interval_bits.extend(buffer.bits.iter().cloned());
        self.tick += 1;
        let interval = (self.tick % self.cfg.ticks_per_interval == 0).then(|| self.close_interval());
        TickOutcome { buffer, interval }
    }

    fn close_interval(&mut self) -> IntervalClose {
        let id = self.interval_id;
        let bits = std::mem::take(&mut self.interval_bits);
        let live: Vec<u8> = bits.iter().map(|b| b.bit).collect();
        let result = self.distributor.distribute(id, &live, &mut self.archive);

        for (j, b) in bits.iter().enumerate() {
            let labs = result
                .allocations
                .iter()
                .filter(|a| j < a.live)
                .map(|a| a.lab.clone())
                .collect();
            self.log.push(LogRecord::Bit {
                id: b.id,
                bit: b.bit,
                user: b.user.clone(),
                origin_ts: b.origin_ts,
                tick: b.tick,
                labs,
            });
        }
        self.log.push(LogRecord::Interval {
            id,
            first_tick: self.tick - self.cfg.ticks_per_interval,
            live: bits.len(),
            archive_start: result.archive_block.map(|b| b.0),
            archive_len: result.archive_block.map_or(0, |b| b.1),
        });
        for d in &result.deliveries {
            self.stats.delivered += d.bits.len() as u64;
            self.stats.archived_delivered += d.archived_from.map_or(0, |k| d.bits.len() - k) as u64;
            self.log.push(LogRecord::Delivery {
                interval: id,
                lab: d.lab.clone(),
                payload: encode_payload(d.bits.iter().copied()),
                archived_from: d.archived_from,
            });
        }

        let running = self.distributor.running(id);
        self.last_shares = result
            .allocations
            .iter()
            .filter(|a| running.contains(&a.lab.as_str()))
            .map(|a| (a.lab.clone(), a.live as u64))
            .collect();
        self.last_total = bits.len() as u64;
        self.stats.intervals += 1;
        self.interval_id += 1;
        IntervalClose {
            interval_id: id,
            live: bits.len(),
            result,
        }
    }

    /// Ticks until the open interval closes, so every accepted bit is
    /// logged and distributed. Does nothing on an interval boundary.
    pub fn flush(&mut self) -> Vec<TickOutcome> {
        let mut out = Vec::new();
        while self.tick % self.cfg.ticks_per_interval != 0 || !self.current.is_empty() {
            out.push(self.tick());
        }
        out
    }

    /// Log records produced since the last drain.
    pub fn drain_log(&mut self) -> Vec<LogRecord> {
        std::mem::take(&mut self.log)
    }
}
