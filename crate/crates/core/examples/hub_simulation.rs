//! Runs the hub, a crowd, and two labs on a virtual clock, then replays
//! and audits the log.
//!
//! cargo run --release --example hub_simulation -- [seconds]

use humanbell::lhv::{LabConfig, LabKind};
use humanbell::streamhub::client::CrowdConfig;
use humanbell::streamhub::sim::{simulate, SimConfig};
use humanbell::streamhub::{audit, replay, AuditConfig, HubConfig};

fn main() {
    let duration_s: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(60.0);
    let mut chsh = LabConfig::new("chsh", LabKind::Chsh);
    chsh.rate = Some(1200);
    chsh.visibility = Some(0.95);
    let mut bellster = LabConfig::new("bellster", LabKind::Timebin);
    bellster.rate = Some(1000);
    bellster.burst = true;
    bellster.eta = Some(0.9);
    let cfg = SimConfig {
        hub: HubConfig {
            archive_len: 200_000,
            ..HubConfig::default()
        },
        crowd: CrowdConfig {
            users: 50,
            robots: 2,
            mission_bits: Some(120),
            ..CrowdConfig::default()
        },
        labs: vec![chsh, bellster],
        duration_s,
    };
    let out = simulate(&cfg).expect("simulation runs");
    println!(
        "accepted {} dropped {} delivered {} ({} from the archive) over {} intervals",
        out.stats.accepted, out.stats.dropped, out.stats.delivered, out.stats.archived_delivered, out.stats.intervals
    );
    for (id, lab) in &out.labs {
        match lab.analyze() {
            Ok(r) => println!("{id}: {:.4e} +- {:.1e} over {} trials", r.value, r.stderr, lab.report().trials),
            Err(e) => println!("{id}: {e}"),
        }
    }

    let rep = replay(&out.log).expect("log replays");
    println!("replay identical: {} ({} live bits)", rep.identical(), rep.live_bits);
    let a = audit(&out.log, &AuditConfig::default());
    println!("health-flagged: {:?}; suspicious: {:?}", a.health_flagged, a.suspicious);
    for l in &a.labs {
        println!("{}: {:.2}% of live bits from suspicious users", l.lab, 100.0 * l.fraction());
    }
}
