//! Builds labs from a TOML file and runs each on human-like bits.
//!
//! cargo run --release --example lab_config -- [labs.toml] [trials]

use humanbell::cli::inequality_symbol;
use humanbell::lhv::{LabFile, LabRunner, MarkovBits};
use humanbell::report::{render_table, ReportRow};

const LABS: &str = r#"
[[lab]]
id = "chsh"
kind = "chsh"
visibility = 0.95

[[lab]]
id = "steering"
kind = "steering"
visibility = 0.9

[[lab]]
id = "bilocal"
kind = "bilocal"
visibility = 0.9

[[lab]]
id = "mdl"
kind = "mdl"
visibility = 0.97
"#;

fn main() {
    let mut args = std::env::args().skip(1);
    let text = match args.next() {
        Some(p) => std::fs::read_to_string(p).expect("readable config"),
        None => LABS.to_string(),
    };
    let trials: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(200_000);
    let file = LabFile::parse(&text).expect("valid lab file");
    let mut rows = Vec::new();
    for (i, cfg) in file.lab.iter().enumerate() {
        let (spec, model, signs) = cfg.build().expect("buildable lab");
        let mut lab = LabRunner::new(spec, model, cfg.seed + i as u64).expect("valid lab");
        if let Some(s) = signs {
            lab = lab.with_signs(s);
        }
        let mut bits = MarkovBits::human().stream(100 + i as u64).enumerate();
        let report = lab.run(&mut bits, trials).expect("lab runs");
        match lab.analyze() {
            Ok(r) => {
                let mut row = ReportRow::new(cfg.id.clone(), inequality_symbol(cfg.kind), r);
                row.trials = Some(report.trials);
                rows.push(row);
            }
            Err(e) => eprintln!("{}: {e}", cfg.id),
        }
    }
    print!("{}", render_table(&rows));
}
