//! Per-interval allocation of live bits to labs.
//!
//! Non-burst labs all read the same interval buffer from index 0, so any
//! two allocations agree on their common prefix. Shortfalls are topped up
//! from one shared archive block. Burst labs bank every live bit and
//! receive `rate` bits at a time once enough have built up.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::archive::ArchiveReservoir;
use super::{HubError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subscription {
    pub lab: String,
    pub rate: u64,
    pub burst: bool,
    /// First interval in which the lab is served.
    pub active_from: u64,
    /// Rate changes keyed by the interval they take effect in.
    pending: BTreeMap<u64, u64>,
    bank: Vec<u8>,
    pub delivered: u64,
    pub starved_intervals: u64,
}

impl Subscription {
    fn apply_pending(&mut self, interval: u64) {
        let due: Vec<u64> = self.pending.range(..=interval).map(|(k, _)| *k).collect();
        for k in due {
            self.rate = self.pending.remove(&k).unwrap_or(self.rate);
        }
    }

    /// Bits banked but not yet released (burst labs only).
    pub fn banked(&self) -> usize {
        self.bank.len()
    }
}

/// Bits one lab got from one interval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub lab: String,
    pub live: usize,
    pub archived: usize,
    pub starved: bool,
}

/// One outgoing `stream` message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delivery {
    pub lab: String,
    pub interval_id: u64,
    pub bits: Vec<u8>,
    pub archived_from: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IntervalResult {
    pub allocations: Vec<Allocation>,
    pub deliveries: Vec<Delivery>,
    /// Archive index of the shared top-up block and its length.
    pub archive_block: Option<(usize, usize)>,
    /// Live bits no lab took.
    pub surplus: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Distributor {
    subs: BTreeMap<String, Subscription>,
}

impl Distributor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn subscribe(&mut self, lab: &str, rate: u64, burst: bool, active_from: u64) -> Result<()> {
        if self.subs.contains_key(lab) {
            return Err(HubError::DuplicateLab(lab.to_string()));
        }
        self.subs.insert(
            lab.to_string(),
            Subscription {
                lab: lab.to_string(),
                rate,
                burst,
                active_from,
                pending: BTreeMap::new(),
                bank: Vec::new(),
                delivered: 0,
                starved_intervals: 0,
            },
        );
        Ok(())
    }

    pub fn set_rate(&mut self, lab: &str, rate: u64, effective: u64) -> Result<()> {
        let sub = self
            .subs
            .get_mut(lab)
            .ok_or_else(|| HubError::UnknownLab(lab.to_string()))?;
        sub.pending.insert(effective, rate);
        Ok(())
    }

    pub fn subscription(&self, lab: &str) -> Option<&Subscription> {
        self.subs.get(lab)
    }

    pub fn subscriptions(&self) -> impl Iterator<Item = &Subscription> {
        self.subs.values()
    }

    /// Labs served in `interval` with a nonzero rate.
    pub fn running(&self, interval: u64) -> Vec<&str> {
        self.subs
            .values()
            .filter(|s| s.active_from <= interval && s.rate > 0)
            .map(|s| s.lab.as_str())
            .collect()
    }

    pub fn distribute(&mut self, interval: u64, live: &[u8], archive: &mut ArchiveReservoir) -> IntervalResult {
        let n_live = live.len();
        let mut out = IntervalResult::default();
        for s in self.subs.values_mut() {
            s.apply_pending(interval);
        }
        let active = |s: &&mut Subscription| s.active_from <= interval;

        let max_deficit = self
            .subs
            .values_mut()
            .filter(active)
            .filter(|s| !s.burst)
            .map(|s| (s.rate as usize).saturating_sub(n_live))
            .max()
            .unwrap_or(0);
        let (block_start, block) = archive.take(max_deficit);
        if !block.is_empty() {
            out.archive_block = Some((block_start, block.len()));
        }

        let mut taken = 0usize;
        for s in self.subs.values_mut().filter(active) {
            let rate = s.rate as usize;
            if s.burst {
                s.bank.extend_from_slice(live);
                taken = n_live;
                out.allocations.push(Allocation {
                    lab: s.lab.clone(),
                    live: n_live,
                    archived: 0,
                    starved: n_live < rate,
                });
                if n_live < rate {
                    s.starved_intervals += 1;
                }
                if rate > 0 {
                    while s.bank.len() >= rate {
                        let bits: Vec<u8> = s.bank.drain(..rate).collect();
                        s.delivered += bits.len() as u64;
                        out.deliveries.push(Delivery {
                            lab: s.lab.clone(),
                            interval_id: interval,
                            bits,
                            archived_from: None,
                        });
                    }
                }
                continue;
            }
            let n_l = rate.min(n_live);
            let n_a = (rate - n_l).min(block.len());
            taken = taken.max(n_l);
            let starved = n_l + n_a < rate;
            if starved {
                s.starved_intervals += 1;
            }
            out.allocations.push(Allocation {
                lab: s.lab.clone(),
                live: n_l,
                archived: n_a,
                starved,
            });
            if n_l + n_a == 0 {
                continue;
            }
            let mut bits = live[..n_l].to_vec();
            bits.extend_from_slice(&block[..n_a]);
            s.delivered += bits.len() as u64;
            out.deliveries.push(Delivery {
                lab: s.lab.clone(),
                interval_id: interval,
                bits,
                archived_from: (n_a > 0).then_some(n_l),
            });
        }
        out.surplus = n_live - taken;
        out
    }
}
