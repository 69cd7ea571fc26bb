//! Computes the time-bin K statistic from a table of counts.
//!
//! cargo run --example k_from_counts -- [counts.csv] [bins]

use std::path::PathBuf;

use humanbell::bellstats::csvio::read_timebin;
use humanbell::bellstats::k_statistic;
use humanbell::report::{render_table, ReportRow};

fn main() {
    let mut args = std::env::args().skip(1);
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let paths: Vec<PathBuf> = match args.next() {
        Some(p) => vec![PathBuf::from(p)],
        None => vec![fixtures.join("timebin_bellster.csv"), fixtures.join("timebin_computer.csv")],
    };
    let bins: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(15);
    let mut rows = Vec::new();
    for p in paths {
        let counts = read_timebin(std::fs::File::open(&p).expect("readable table"), bins).expect("time-bin table");
        let k = k_statistic(&counts).expect("every term counted");
        let label = p.file_stem().unwrap().to_string_lossy().into_owned();
        rows.push(ReportRow::new(label, "K", k));
    }
    print!("{}", render_table(&rows));
}
