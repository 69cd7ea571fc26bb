//! The hub driven on a virtual clock: same state machine, no sockets, no
//! waiting. A minute of traffic runs in milliseconds and is reproducible
//! from the seed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::lhv::{LabConfig, LabRunner};

use super::client::{feed_delivery, player_name, robot_name, CrowdConfig};
use super::distributor::Delivery;
use super::hub::{Hub, HubConfig, HubStats, TickOutcome};
use super::monitor::LogRecord;
use super::protocol::LabCount;
use super::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub hub: HubConfig,
    pub crowd: CrowdConfig,
    pub labs: Vec<LabConfig>,
    pub duration_s: f64,
}

#[derive(Debug)]
pub struct SimReport {
    pub log: Vec<LogRecord>,
    pub deliveries: Vec<Delivery>,
    pub labs: BTreeMap<String, LabRunner>,
    pub sent: BTreeMap<String, u64>,
    pub feedback: Vec<(String, Vec<LabCount>)>,
    pub stats: HubStats,
}

struct Player {
    name: String,
    source: Box<dyn Iterator<Item = u8> + Send>,
    next_ms: f64,
    period_ms: f64,
    chunk: usize,
    mission: Option<u64>,
    in_mission: u64,
}

pub fn simulate(cfg: &SimConfig) -> Result<SimReport> {
    let mut hub = Hub::new(cfg.hub.clone())?;
    let tick_ms = cfg.hub.tick_ms.max(1) as f64;
    let crowd = &cfg.crowd;

    let mut runners = BTreeMap::new();
    for l in &cfg.labs {
        let (spec, model, signs) = l.build()?;
        hub.subscribe(&spec.id, spec.rate, spec.burst)?;
        let mut r = LabRunner::new(spec.clone(), model, l.seed)?;
        if let Some(s) = signs {
            r = r.with_signs(s);
        }
        runners.insert(spec.id, (r, 0u64));
    }

    let n = crowd.users + crowd.robots;
    let mut players: Vec<Player> = (0..n)
        .map(|k| {
            let robot = k >= crowd.users;
            let (period_ms, chunk) = if robot {
                (tick_ms, crowd.robot_bits_per_tick)
            } else {
                (1000.0 / crowd.bits_per_second, 1)
            };
            Player {
                name: if robot { robot_name(k - crowd.users) } else { player_name(k) },
                source: crowd.model.source(crowd.seed.wrapping_add(k as u64)),
                next_ms: period_ms * k as f64 / n as f64,
                period_ms,
                chunk,
                mission: crowd.mission_bits.filter(|_| !robot),
                in_mission: 0,
            }
        })
        .collect();
    for p in &players {
        hub.hello(&p.name);
    }

    let mut report = SimReport {
        log: Vec::new(),
        deliveries: Vec::new(),
        labs: BTreeMap::new(),
        sent: BTreeMap::new(),
        feedback: Vec::new(),
        stats: HubStats::default(),
    };
    let end_ms = cfg.duration_s * 1000.0;
    let mut t = 0.0;
    while t < end_ms {
        let close = (t + tick_ms).min(end_ms);
        let mut events: Vec<(f64, usize)> = Vec::new();
        for (i, p) in players.iter().enumerate() {
            let mut at = p.next_ms;
            while at < close {
                events.push((at, i));
                at += p.period_ms;
            }
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (at, i) in events {
            let p = &mut players[i];
            p.next_ms = at + p.period_ms;
            let bits: Vec<u8> = p.source.by_ref().take(p.chunk).collect();
            if bits.is_empty() {
                continue;
            }
            hub.ingest(&p.name, &bits, Some(at as u64))?;
            *report.sent.entry(p.name.clone()).or_default() += bits.len() as u64;
            p.in_mission += bits.len() as u64;
            if p.mission.is_some_and(|m| p.in_mission >= m) {
                let fb = hub.feedback(&p.name, p.in_mission)?;
                report.feedback.push((p.name.clone(), fb));
                p.in_mission = 0;
            }
        }
        if close - t == tick_ms {
            let out = hub.tick();
            route(out, &mut runners, &mut report.deliveries)?;
        }
        t = close;
    }
    for out in hub.flush() {
        route(out, &mut runners, &mut report.deliveries)?;
    }
    report.log = hub.drain_log();
    report.stats = hub.stats();
    report.labs = runners.into_iter().map(|(k, (r, _))| (k, r)).collect();
    Ok(report)
}

fn route(out: TickOutcome, runners: &mut BTreeMap<String, (LabRunner, u64)>, sink: &mut Vec<Delivery>) -> Result<()> {
    let Some(close) = out.interval else { return Ok(()) };
    for d in close.result.deliveries {
        if let Some((r, next)) = runners.get_mut(&d.lab) {
            feed_delivery(r, &d, next, d.interval_id)?;
        }
        sink.push(d);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lhv::LabKind;
    use crate::streamhub::replay::replay;
    use crate::streamhub::{audit, AuditConfig};

    fn cfg() -> SimConfig {
        let mut chsh = LabConfig::new("chsh", LabKind::Chsh);
        chsh.rate = Some(3000);
        let mut small = LabConfig::new("small", LabKind::Mdl);
        small.rate = Some(500);
        SimConfig {
            hub: HubConfig::default(),
            crowd: CrowdConfig {
                users: 20,
                robots: 2,
                ..CrowdConfig::default()
            },
            labs: vec![chsh, small],
            duration_s: 20.0,
        }
    }

    #[test]
    fn virtual_run_conserves_and_replays() {
        let r = simulate(&cfg()).unwrap();
        let honest: u64 = r.sent.iter().filter(|(u, _)| u.starts_with("player")).map(|(_, n)| n).sum();
        assert_eq!(honest, 20 * 10 * 20);
        let logged_honest = r
            .log
            .iter()
            .filter(|rec| matches!(rec, LogRecord::Bit { user, .. } if user.starts_with("player")))
            .count() as u64;
        assert_eq!(logged_honest, honest);

        let rep = replay(&r.log).unwrap();
        assert!(rep.identical());
        assert_eq!(rep.deliveries, r.deliveries);

        let a = audit(&r.log, &AuditConfig::default());
        assert_eq!(a.health_flagged, vec![robot_name(0), robot_name(1)]);
        assert!(a.labs.iter().all(|l| l.post_flag_bits == 0));
        assert!(r.labs["chsh"].report().trials > 0);
    }

    #[test]
    fn deterministic() {
        let a = simulate(&cfg()).unwrap();
        let b = simulate(&cfg()).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.labs["chsh"].output(), b.labs["chsh"].output());
    }
}
