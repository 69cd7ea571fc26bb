//! Client side of the wire protocol: players, labs, and a synthetic crowd.

use std::future::Future;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader, Lines};
use tokio::net::tcp::{OwnedReadHalf, OwnedWriteHalf};
use tokio::net::TcpStream;
use tokio::time::{Instant, MissedTickBehavior};

use crate::lhv::{LabConfig, LabRunner, MarkovBits, SettingBit};
use crate::predictor::Prediction;

use super::distributor::Delivery;
use super::protocol::{decode_payload, encode_payload, LabCount, Message};
use super::{HubError, Result};

pub struct Connection {
    lines: Lines<BufReader<OwnedReadHalf>>,
    write: OwnedWriteHalf,
}

impl Connection {
    pub async fn connect(addr: &str) -> Result<Self> {
        let stream = TcpStream::connect(addr).await?;
        stream.set_nodelay(true)?;
        let (r, w) = stream.into_split();
        Ok(Self {
            lines: BufReader::new(r).lines(),
            write: w,
        })
    }

    pub async fn send(&mut self, msg: &Message) -> Result<()> {
        self.write.write_all(msg.to_line().as_bytes()).await?;
        Ok(())
    }

    /// Next message, or `None` once the hub hangs up.
    pub async fn recv(&mut self) -> Result<Option<Message>> {
        loop {
            match self.lines.next_line().await? {
                None => return Ok(None),
                Some(l) if l.trim().is_empty() => continue,
                Some(l) => return Message::parse(&l).map(Some),
            }
        }
    }

    /// Waits for the first message `pick` accepts; hub errors abort.
    async fn expect<T>(&mut self, what: &str, pick: impl Fn(Message) -> Option<T>) -> Result<T> {
        loop {
            match self.recv().await? {
                None => return Err(HubError::Protocol(format!("hub closed while waiting for {what}"))),
                Some(Message::Error { message }) => return Err(HubError::Protocol(message)),
                Some(m) => {
                    if let Some(v) = pick(m) {
                        return Ok(v);
                    }
                }
            }
        }
    }
}

pub struct UserClient {
    conn: Connection,
    user: String,
    seq: u64,
}

impl UserClient {
    pub async fn connect(addr: &str, user: &str) -> Result<Self> {
        let mut conn = Connection::connect(addr).await?;
        conn.send(&Message::Hello { user: user.to_string() }).await?;
        conn.expect("hello ack", |m| matches!(m, Message::Ack { .. }).then_some(())).await?;
        Ok(Self {
            conn,
            user: user.to_string(),
            seq: 0,
        })
    }

    pub fn user(&self) -> &str {
        &self.user
    }

    /// Fire and forget; the hub never acknowledges bits.
    pub async fn send_bits(&mut self, bits: &[u8], ts: Option<u64>) -> Result<()> {
        let msg = Message::Bits {
            user: self.user.clone(),
            seq: self.seq,
            payload: encode_payload(bits.iter().copied()),
            ts,
        };
        self.seq += 1;
        self.conn.send(&msg).await
    }

    pub async fn predict(&mut self) -> Result<Prediction> {
        self.conn.send(&Message::Predict { user: self.user.clone() }).await?;
        self.conn
            .expect("prediction", |m| match m {
                Message::Prediction { bit, confidence, context_length } => Some(Prediction {
                    bit,
                    confidence,
                    context_length,
                }),
                _ => None,
            })
            .await
    }

    pub async fn mission_done(&mut self, n: u64) -> Result<Vec<LabCount>> {
        self.conn
            .send(&Message::MissionDone { user: self.user.clone(), n })
            .await?;
        self.conn
            .expect("feedback", |m| match m {
                Message::Feedback { per_lab } => Some(per_lab),
                _ => None,
            })
            .await
    }
}

pub struct LabClient {
    conn: Connection,
    lab: String,
    effective_from: String,
}

impl LabClient {
    pub async fn subscribe(addr: &str, lab: &str, rate: u64, burst: bool) -> Result<Self> {
        let mut conn = Connection::connect(addr).await?;
        conn.send(&Message::Subscribe {
            lab: lab.to_string(),
            rate,
            burst,
        })
        .await?;
        let detail = conn
            .expect("subscribe ack", |m| match m {
                Message::Ack { detail } => Some(detail.unwrap_or_default()),
                _ => None,
            })
            .await?;
        Ok(Self {
            conn,
            lab: lab.to_string(),
            effective_from: detail,
        })
    }

    pub fn lab(&self) -> &str {
        &self.lab
    }

    /// The hub's note on when the subscription starts.
    pub fn effective_from(&self) -> &str {
        &self.effective_from
    }

    /// Takes effect from the interval after the one now open.
    pub async fn set_rate(&mut self, rate: u64) -> Result<()> {
        self.conn
            .send(&Message::Rate {
                lab: self.lab.clone(),
                rate,
            })
            .await
    }

    /// Next delivery; `None` once the hub hangs up.
    pub async fn next_stream(&mut self) -> Result<Option<Delivery>> {
        loop {
            match self.conn.recv().await? {
                None => return Ok(None),
                Some(Message::Stream { interval_id, payload, archived_from, .. }) => {
                    return Ok(Some(Delivery {
                        lab: self.lab.clone(),
                        interval_id,
                        bits: decode_payload(&payload)?,
                        archived_from,
                    }))
                }
                Some(Message::Error { message }) => return Err(HubError::Protocol(message)),
                Some(_) => continue,
            }
        }
    }
}

/// Feeds one delivery to a lab; ids count every bit the lab has seen.
pub fn feed_delivery(runner: &mut LabRunner, d: &Delivery, next_id: &mut u64, ts_ms: u64) -> Result<()> {
    for (i, &bit) in d.bits.iter().enumerate() {
        runner.push_bit(SettingBit {
            id: *next_id,
            bit,
            archived: d.archived_from.is_some_and(|k| i >= k),
            ts_ms,
        })?;
        *next_id += 1;
    }
    Ok(())
}

/// Builds a lab from its config and runs it over a delivery sequence.
pub fn run_lab_over(cfg: &LabConfig, deliveries: &[Delivery]) -> Result<LabRunner> {
    let (spec, model, signs) = cfg.build()?;
    let mut runner = LabRunner::new(spec, model, cfg.seed)?;
    if let Some(s) = signs {
        runner = runner.with_signs(s);
    }
    let mut next = 0;
    for d in deliveries.iter().filter(|d| d.lab == cfg.id) {
        feed_delivery(&mut runner, d, &mut next, d.interval_id)?;
    }
    Ok(runner)
}

#[derive(Debug)]
pub struct LabClientReport {
    pub deliveries: Vec<Delivery>,
    pub runner: LabRunner,
}

/// Subscribes a configured lab and runs it until `stop` or hang-up.
pub async fn run_lab_client(addr: &str, cfg: &LabConfig, stop: impl Future<Output = ()>) -> Result<LabClientReport> {
    let (spec, model, signs) = cfg.build()?;
    let mut runner = LabRunner::new(spec.clone(), model, cfg.seed)?;
    if let Some(s) = signs {
        runner = runner.with_signs(s);
    }
    let mut client = LabClient::subscribe(addr, &spec.id, spec.rate, spec.burst).await?;
    let mut deliveries = Vec::new();
    let mut next = 0;
    tokio::pin!(stop);
    loop {
        tokio::select! {
            _ = &mut stop => break,
            d = client.next_stream() => match d? {
                Some(d) => {
                    feed_delivery(&mut runner, &d, &mut next, d.interval_id)?;
                    deliveries.push(d);
                }
                None => break,
            },
        }
    }
    Ok(LabClientReport { deliveries, runner })
}

/// Where synthetic players get their bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BitModel {
    Fair,
    CalibratedHuman,
    /// Every player cycles through this sequence from a seeded offset.
    Replay(Vec<u8>),
}

impl BitModel {
    pub fn source(&self, seed: u64) -> Box<dyn Iterator<Item = u8> + Send> {
        match self {
            BitModel::Fair => Box::new(MarkovBits::fair().stream(seed)),
            BitModel::CalibratedHuman => Box::new(MarkovBits::human().stream(seed)),
            BitModel::Replay(bits) if bits.is_empty() => Box::new(std::iter::empty()),
            BitModel::Replay(bits) => {
                let start = ChaCha8Rng::seed_from_u64(seed).random_range(0..bits.len());
                Box::new(bits.clone().into_iter().cycle().skip(start))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrowdConfig {
    pub users: usize,
    /// Bits per second per player, one bit per message.
    pub bits_per_second: f64,
    pub model: BitModel,
    /// Robots send `robot_bits_per_tick` bits in one message every tick.
    pub robots: usize,
    pub robot_bits_per_tick: usize,
    pub tick_ms: u64,
    /// Players report a mission after this many bits.
    pub mission_bits: Option<u64>,
    pub seed: u64,
}

impl Default for CrowdConfig {
    fn default() -> Self {
        Self {
            users: 100,
            bits_per_second: 10.0,
            model: BitModel::CalibratedHuman,
            robots: 0,
            robot_bits_per_tick: 11,
            tick_ms: 500,
            mission_bits: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerReport {
    pub user: String,
    pub robot: bool,
    pub sent: u64,
    pub missions: u64,
    pub first_send_ms: u64,
    pub last_send_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrowdReport {
    pub players: Vec<PlayerReport>,
    /// Sending window, seconds.
    pub duration_s: f64,
    /// Span from the first to the last honest send, seconds.
    pub honest_span_s: f64,
    pub honest_sent: u64,
    pub robot_sent: u64,
}

impl CrowdReport {
    /// Honest bits per second over the sending window.
    pub fn honest_rate(&self) -> f64 {
        if self.duration_s > 0.0 {
            self.honest_sent as f64 / self.duration_s
        } else {
            0.0
        }
    }
}

pub fn robot_name(k: usize) -> String {
    format!("robot-{k:03}")
}

pub fn player_name(k: usize) -> String {
    format!("player-{k:03}")
}

/// Connects the crowd, sends on an absolute schedule for `duration`, and
/// reports what each player sent.
pub async fn run_crowd(addr: &str, cfg: &CrowdConfig, duration: Duration) -> Result<CrowdReport> {
    let origin = Instant::now();
    let mut tasks = tokio::task::JoinSet::new();
    for k in 0..cfg.users + cfg.robots {
        let robot = k >= cfg.users;
        let user = if robot { robot_name(k - cfg.users) } else { player_name(k) };
        let (period, chunk) = if robot {
            (Duration::from_millis(cfg.tick_ms), cfg.robot_bits_per_tick)
        } else {
            (Duration::from_secs_f64(1.0 / cfg.bits_per_second), 1)
        };
        let source = cfg.model.source(cfg.seed.wrapping_add(k as u64));
        let addr = addr.to_string();
        let mission = cfg.mission_bits.filter(|_| !robot);
        // Stagger starts so sends do not all land on the same instant.
        let offset = period.mul_f64(k as f64 / (cfg.users + cfg.robots) as f64);
        tasks.spawn(async move {
            player(addr, user, robot, source, period, chunk, offset, duration, mission, origin).await
        });
    }
    let mut players = Vec::new();
    while let Some(r) = tasks.join_next().await {
        players.push(r.map_err(|e| HubError::Io(std::io::Error::other(e)))??);
    }
    players.sort_by(|a, b| a.user.cmp(&b.user));
    let honest: Vec<&PlayerReport> = players.iter().filter(|p| !p.robot && p.sent > 0).collect();
    let first = honest.iter().map(|p| p.first_send_ms).min().unwrap_or(0);
    let last = honest.iter().map(|p| p.last_send_ms).max().unwrap_or(0);
    Ok(CrowdReport {
        duration_s: duration.as_secs_f64(),
        honest_span_s: last.saturating_sub(first) as f64 / 1000.0,
        honest_sent: honest.iter().map(|p| p.sent).sum(),
        robot_sent: players.iter().filter(|p| p.robot).map(|p| p.sent).sum(),
        players,
    })
}

#[allow(clippy::too_many_arguments)]
async fn player(
    addr: String,
    user: String,
    robot: bool,
    mut source: Box<dyn Iterator<Item = u8> + Send>,
    period: Duration,
    chunk: usize,
    offset: Duration,
    duration: Duration,
    mission: Option<u64>,
    origin: Instant,
) -> Result<PlayerReport> {
    let mut client = UserClient::connect(&addr, &user).await?;
    let start = origin + offset;
    let mut clock = tokio::time::interval_at(start, period);
    clock.set_missed_tick_behavior(MissedTickBehavior::Burst);
    let mut report = PlayerReport {
        user,
        robot,
        sent: 0,
        missions: 0,
        first_send_ms: 0,
        last_send_ms: 0,
    };
    let mut in_mission = 0;
    let end = origin + duration;
    loop {
        let at = clock.tick().await;
        if at >= end {
            break;
        }
        let bits: Vec<u8> = source.by_ref().take(chunk).collect();
        if bits.is_empty() {
            break;
        }
        let ms = at.duration_since(origin).as_millis() as u64;
        client.send_bits(&bits, Some(ms)).await?;
        if report.sent == 0 {
            report.first_send_ms = ms;
        }
        report.last_send_ms = ms;
        report.sent += bits.len() as u64;
        in_mission += bits.len() as u64;
        if mission.is_some_and(|m| in_mission >= m) {
            client.mission_done(in_mission).await?;
            report.missions += 1;
            in_mission = 0;
        }
    }
    Ok(report)
}
