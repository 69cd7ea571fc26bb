//! Evaluates CHSH from the bundled correlator tables.
//!
//! cargo run --example chsh_correlators -- [table.csv ...]

use std::path::PathBuf;

use humanbell::bellstats::chsh_from_correlators;
use humanbell::bellstats::csvio::{chsh_correlators, read_correlators};

fn main() {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let mut paths: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    if paths.is_empty() {
        paths = vec![fixtures.join("correlators_hrn.csv"), fixtures.join("correlators_qrn.csv")];
    }
    let signs = "+,-,-,-".parse().expect("valid signs");
    for p in paths {
        let rows = read_correlators(std::fs::File::open(&p).expect("readable table")).expect("correlator table");
        let (e, se) = chsh_correlators(&rows).expect("four correlators");
        let s = chsh_from_correlators(e, signs, se);
        println!(
            "{}: E = [{:.4}, {:.4}, {:.4}, {:.4}]  S = {:.4} (local bound {})",
            p.file_stem().unwrap().to_string_lossy(),
            e[0],
            e[1],
            e[2],
            e[3],
            s.value,
            s.bound
        );
    }
}
