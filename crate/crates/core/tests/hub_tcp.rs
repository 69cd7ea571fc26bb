use std::time::Duration;

use humanbell::streamhub::client::{Connection, LabClient, UserClient};
use humanbell::streamhub::server::ServerHandle;
use humanbell::streamhub::{read_log, replay, HubConfig, LogRecord, Message};

fn fast_config() -> HubConfig {
    HubConfig {
        tick_ms: 25,
        archive_len: 10_000,
        archive_seed: 4,
        ..HubConfig::default()
    }
}

async fn drain(mut lab: LabClient) -> String {
    let mut s = String::new();
    while let Some(d) = lab.next_stream().await.unwrap() {
        s.extend(d.bits.iter().map(|b| if *b == 0 { '0' } else { '1' }));
    }
    s
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn short_run_replays_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hub.log");
    let log = tokio::fs::File::create(&path).await.unwrap();
    let server = ServerHandle::start("127.0.0.1:0", fast_config(), log).await.unwrap();
    let addr = server.addr.to_string();

    let wide = LabClient::subscribe(&addr, "wide", 1000, false).await.unwrap();
    let narrow = LabClient::subscribe(&addr, "narrow", 30, false).await.unwrap();
    assert!(wide.effective_from().contains("effective interval"));
    let wide = tokio::spawn(drain(wide));
    let narrow = tokio::spawn(drain(narrow));
    tokio::time::sleep(Duration::from_millis(150)).await;

    let mut users = Vec::new();
    for k in 0..4 {
        users.push(UserClient::connect(&addr, &format!("u{k}")).await.unwrap());
    }
    for round in 0..20u64 {
        for (k, u) in users.iter_mut().enumerate() {
            let bits: Vec<u8> = (0..5).map(|i| ((round + k as u64 + i) % 2) as u8).collect();
            u.send_bits(&bits, Some(round)).await.unwrap();
        }
        tokio::time::sleep(Duration::from_millis(30)).await;
    }
    tokio::time::sleep(Duration::from_millis(50)).await;
    let stats = server.shutdown().await.unwrap();
    let wide = wide.await.unwrap();
    let narrow = narrow.await.unwrap();

    assert_eq!(stats.accepted, 400);
    assert_eq!(stats.dropped, 0);
    let records = read_log(std::io::BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
    let rep = replay(&records).unwrap();
    assert!(rep.identical(), "{:?}", rep.mismatches);
    assert!(rep.prefix_violations.is_empty());
    assert_eq!(rep.rebuilt["wide"], wide);
    assert_eq!(rep.rebuilt["narrow"], narrow);
    assert!(wide.len() >= 400);
    // The wide lab saw every live bit; the rest of its stream is archive.
    let live: usize = rep
        .deliveries
        .iter()
        .filter(|d| d.lab == "wide")
        .map(|d| d.archived_from.unwrap_or(d.bits.len()))
        .sum();
    assert_eq!(live, 400);
}

#[tokio::test]
async fn protocol_errors_keep_connection_open() {
    let server = ServerHandle::start("127.0.0.1:0", fast_config(), tokio::io::sink()).await.unwrap();
    let addr = server.addr.to_string();
    let mut c = Connection::connect(&addr).await.unwrap();

    c.send(&Message::Hello { user: "x".into() }).await.unwrap();
    assert!(matches!(c.recv().await.unwrap(), Some(Message::Ack { .. })));

    let bad = [
        Message::Bits {
            user: "x".into(),
            seq: 0,
            payload: "01a".into(),
            ts: None,
        },
        Message::Predict { user: "ghost".into() },
        Message::MissionDone { user: "ghost".into(), n: 30 },
        Message::Rate { lab: "nolab".into(), rate: 5 },
        Message::Feedback { per_lab: vec![] },
    ];
    for m in bad {
        c.send(&m).await.unwrap();
        assert!(matches!(c.recv().await.unwrap(), Some(Message::Error { .. })), "{m:?}");
    }
    // Raw garbage is answered too.
    let mut raw = tokio::net::TcpStream::connect(&addr).await.unwrap();
    tokio::io::AsyncWriteExt::write_all(&mut raw, b"{not json}\n").await.unwrap();
    let mut line = String::new();
    let mut reader = tokio::io::BufReader::new(raw);
    tokio::io::AsyncBufReadExt::read_line(&mut reader, &mut line).await.unwrap();
    assert!(matches!(Message::parse(&line).unwrap(), Message::Error { .. }));

    c.send(&Message::Predict { user: "x".into() }).await.unwrap();
    assert!(matches!(c.recv().await.unwrap(), Some(Message::Prediction { .. })));

    let _ = LabClient::subscribe(&addr, "dup", 10, false).await.unwrap();
    assert!(LabClient::subscribe(&addr, "dup", 10, false).await.is_err());
    server.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn predict_and_feedback_over_the_wire() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hub.log");
    let log = tokio::fs::File::create(&path).await.unwrap();
    let server = ServerHandle::start("127.0.0.1:0", fast_config(), log).await.unwrap();
    let addr = server.addr.to_string();
    let a = tokio::spawn(drain(LabClient::subscribe(&addr, "a", 1000, false).await.unwrap()));
    let b = tokio::spawn(drain(LabClient::subscribe(&addr, "b", 1000, false).await.unwrap()));
    tokio::time::sleep(Duration::from_millis(150)).await;

    let mut u = UserClient::connect(&addr, "alt").await.unwrap();
    let cold = u.predict().await.unwrap();
    assert_eq!(cold.context_length, 0);
    for _ in 0..4 {
        u.send_bits(&[0, 1, 0, 1, 0, 1, 0, 1], None).await.unwrap();
        tokio::time::sleep(Duration::from_millis(30)).await;
    }
    // A strictly alternating player is fully predictable.
    let p = u.predict().await.unwrap();
    assert_eq!(p.bit, 0);
    assert!(p.context_length >= 1);
    assert!((p.confidence - 1.0).abs() < 1e-12);

    // Keep bits flowing so the last closed interval has live shares.
    for _ in 0..10 {
        u.send_bits(&[0, 1], None).await.unwrap();
        tokio::time::sleep(Duration::from_millis(25)).await;
    }
    let fb = u.mission_done(32).await.unwrap();
    let labs: Vec<&str> = fb.iter().map(|c| c.lab.as_str()).collect();
    assert_eq!(labs, ["a", "b"]);
    assert!(fb.iter().all(|c| c.count <= 32));

    server.shutdown().await.unwrap();
    a.await.unwrap();
    b.await.unwrap();
    let records = read_log(std::io::BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
    assert!(records
        .iter()
        .any(|r| matches!(r, LogRecord::Mission { user, n: 32, .. } if user == "alt")));
}
