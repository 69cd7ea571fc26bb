//! TCP front end for [`Hub`]: one task per connection, one ticker, one
//! monitor writer.

use std::collections::HashMap;
use std::future::Future;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use tokio::io::{AsyncBufReadExt, AsyncWrite, AsyncWriteExt, BufReader, BufWriter};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, oneshot};
use tokio::task::{JoinHandle, JoinSet};
use tokio::time::MissedTickBehavior;

use super::hub::{Hub, HubConfig, HubStats, TickOutcome};
use super::monitor::LogRecord;
use super::protocol::{decode_payload, encode_payload, Message};
use super::{HubError, Result};

type Outbox = mpsc::UnboundedSender<String>;

struct Shared {
    hub: Hub,
    labs: HashMap<String, Outbox>,
    monitor: mpsc::UnboundedSender<Vec<LogRecord>>,
}

impl Shared {
    fn publish(&mut self, outcomes: Vec<TickOutcome>) {
        for o in outcomes {
            let Some(close) = o.interval else { continue };
            for d in close.result.deliveries {
                if let Some(tx) = self.labs.get(&d.lab) {
                    let msg = Message::Stream {
                        lab: d.lab.clone(),
                        interval_id: d.interval_id,
                        payload: encode_payload(d.bits.iter().copied()),
                        archived_from: d.archived_from,
                    };
                    if tx.send(msg.to_line()).is_err() {
                        self.labs.remove(&d.lab);
                    }
                }
            }
        }
        let records = self.hub.drain_log();
        if !records.is_empty() {
            let _ = self.monitor.send(records);
        }
    }
}

/// Runs a hub on `listener` until `shutdown` resolves, writing the monitor
/// log to `log`. The open interval is closed before returning.
pub async fn serve<W, F>(listener: TcpListener, cfg: HubConfig, log: W, shutdown: F) -> Result<HubStats>
where
    W: AsyncWrite + Unpin + Send + 'static,
    F: Future<Output = ()> + Send,
{
    let tick = Duration::from_millis(cfg.tick_ms.max(1));
    let (mon_tx, mut mon_rx) = mpsc::unbounded_channel::<Vec<LogRecord>>();
    let shared = Arc::new(Mutex::new(Shared {
        hub: Hub::new(cfg)?,
        labs: HashMap::new(),
        monitor: mon_tx,
    }));
    // Header goes out before anything else.
    lock(&shared).publish(Vec::new());

    let monitor: JoinHandle<std::io::Result<()>> = tokio::spawn(async move {
        let mut w = BufWriter::new(log);
        while let Some(batch) = mon_rx.recv().await {
            for rec in batch {
                let mut line = serde_json::to_vec(&rec).expect("records serialize");
                line.push(b'\n');
                w.write_all(&line).await?;
            }
            w.flush().await?;
        }
        w.flush().await
    });

    let ticker = {
        let shared = shared.clone();
        tokio::spawn(async move {
            let mut clock = tokio::time::interval_at(tokio::time::Instant::now() + tick, tick);
            clock.set_missed_tick_behavior(MissedTickBehavior::Burst);
            loop {
                clock.tick().await;
                let mut s = lock(&shared);
                let out = s.hub.tick();
                s.publish(vec![out]);
            }
        })
    };

    let mut conns = JoinSet::new();
    tokio::pin!(shutdown);
    loop {
        tokio::select! {
            _ = &mut shutdown => break,
            accepted = listener.accept() => {
                let (stream, peer) = accepted?;
                conns.spawn(handle_connection(stream, peer, shared.clone()));
            }
        }
    }
    ticker.abort();
    conns.abort_all();
    while conns.join_next().await.is_some() {}

    let stats = {
        let mut s = lock(&shared);
        let out = s.hub.flush();
        s.publish(out);
        s.labs.clear();
        s.hub.stats()
    };
    // Dropping the last sender lets the monitor drain and exit.
    drop(shared);
    let _ = ticker.await;
    monitor
        .await
        .map_err(|e| HubError::Io(std::io::Error::other(e)))??;
    Ok(stats)
}

fn lock(s: &Mutex<Shared>) -> std::sync::MutexGuard<'_, Shared> {
    s.lock().unwrap_or_else(|p| p.into_inner())
}

async fn handle_connection(stream: TcpStream, peer: SocketAddr, shared: Arc<Mutex<Shared>>) {
    let _ = stream.set_nodelay(true);
    let (read, mut write) = stream.into_split();
    let (tx, mut rx) = mpsc::unbounded_channel::<String>();
    let writer = tokio::spawn(async move {
        while let Some(line) = rx.recv().await {
            if write.write_all(line.as_bytes()).await.is_err() {
                break;
            }
        }
    });
    let mut lines = BufReader::new(read).lines();
    let mut lab_id: Option<String> = None;
    while let Ok(Some(line)) = lines.next_line().await {
        if line.trim().is_empty() {
            continue;
        }
        let reply = match Message::parse(&line) {
            Ok(msg) => respond(msg, &shared, &tx, &mut lab_id),
            Err(e) => Some(Message::Error { message: e.to_string() }),
        };
        if let Some(r) = reply {
            if tx.send(r.to_line()).is_err() {
                break;
            }
        }
    }
    if let Some(lab) = lab_id {
        lock(&shared).labs.remove(&lab);
    }
    tracing::debug!(%peer, "connection closed");
    drop(tx);
    let _ = writer.await;
}

fn respond(msg: Message, shared: &Mutex<Shared>, tx: &Outbox, lab_id: &mut Option<String>) -> Option<Message> {
    let err = |e: HubError| Some(Message::Error { message: e.to_string() });
    let mut s = lock(shared);
    match msg {
        Message::Hello { user } => {
            s.hub.hello(&user);
            Some(Message::Ack { detail: None })
        }
        // Bits are never acknowledged, so a flagged client cannot tell.
        Message::Bits { user, payload, ts, .. } => {
            match decode_payload(&payload).and_then(|bits| s.hub.ingest(&user, &bits, ts)) {
                Ok(_) => None,
                Err(e) => err(e),
            }
        }
        Message::Predict { user } => match s.hub.predict(&user) {
            Ok(p) => Some(Message::Prediction {
                bit: p.bit,
                confidence: p.confidence,
                context_length: p.context_length,
            }),
            Err(e) => err(e),
        },
        Message::MissionDone { user, n } => match s.hub.feedback(&user, n) {
            Ok(per_lab) => Some(Message::Feedback { per_lab }),
            Err(e) => err(e),
        },
        Message::Subscribe { lab, rate, burst } => match s.hub.subscribe(&lab, rate, burst) {
            Ok(from) => {
                s.labs.insert(lab.clone(), tx.clone());
                *lab_id = Some(lab);
                Some(Message::Ack {
                    detail: Some(format!("effective interval {from}")),
                })
            }
            Err(e) => err(e),
        },
        Message::Rate { lab, rate } => match s.hub.set_rate(&lab, rate) {
            Ok(from) => Some(Message::Ack {
                detail: Some(format!("effective interval {from}")),
            }),
            Err(e) => err(e),
        },
        other => Some(Message::Error {
            message: format!("unexpected message {:?}", other),
        }),
    }
}

/// A hub running on a background task.
pub struct ServerHandle {
    pub addr: SocketAddr,
    stop: oneshot::Sender<()>,
    task: JoinHandle<Result<HubStats>>,
}

impl ServerHandle {
    /// Binds `addr` and starts serving; the log goes to `log`.
    pub async fn start<W>(addr: &str, cfg: HubConfig, log: W) -> Result<Self>
    where
        W: AsyncWrite + Unpin + Send + 'static,
    {
        let listener = TcpListener::bind(addr).await?;
        let addr = listener.local_addr()?;
        let (stop, rx) = oneshot::channel();
        let task = tokio::spawn(serve(listener, cfg, log, async move {
            let _ = rx.await;
        }));
        Ok(Self { addr, stop, task })
    }

    pub async fn shutdown(self) -> Result<HubStats> {
        let _ = self.stop.send(());
        self.task
            .await
            .map_err(|e| HubError::Io(std::io::Error::other(e)))?
    }
}
