//! Starts the hub on a local port, connects a lab and a small crowd over
//! TCP, and reports what the lab received.
//!
//! cargo run --example tcp_hub -- [seconds]

use std::time::Duration;

use humanbell::streamhub::client::{run_crowd, CrowdConfig, LabClient, UserClient};
use humanbell::streamhub::server::ServerHandle;
use humanbell::streamhub::HubConfig;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let secs: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(6.0);
    let server = ServerHandle::start("127.0.0.1:0", HubConfig::default(), tokio::io::sink()).await?;
    let addr = server.addr.to_string();
    println!("hub on {addr}");

    let mut lab = LabClient::subscribe(&addr, "demo", 400, false).await?;
    println!("lab subscribed, {}", lab.effective_from());
    let reader = tokio::spawn(async move {
        let (mut live, mut archived) = (0, 0);
        while let Ok(Some(d)) = lab.next_stream().await {
            let cut = d.archived_from.unwrap_or(d.bits.len());
            live += cut;
            archived += d.bits.len() - cut;
        }
        (live, archived)
    });

    let crowd_cfg = CrowdConfig {
        users: 20,
        ..CrowdConfig::default()
    };
    let crowd = run_crowd(&addr, &crowd_cfg, Duration::from_secs_f64(secs)).await?;
    println!("crowd sent {} bits ({:.1} bits/s)", crowd.honest_sent, crowd.honest_rate());

    let mut player = UserClient::connect(&addr, "solo").await?;
    player.send_bits(&[0, 1, 0, 1, 0, 1, 0, 1], None).await?;
    let guess = player.predict().await?;
    println!("the Oracle expects {} next (confidence {:.2})", guess.bit, guess.confidence);
    let feedback = player.mission_done(30).await?;
    println!("feedback: {feedback:?}");

    let stats = server.shutdown().await?;
    let (live, archived) = reader.await?;
    println!("hub accepted {} bits; lab got {live} live and {archived} archived", stats.accepted);
    Ok(())
}
