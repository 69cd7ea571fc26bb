//! Simulates the pulsed time-bin experiment and evaluates K.
//!
//! cargo run --release --example timebin_simulation -- [trials] [eta]

use humanbell::bellstats::k_statistic;
use humanbell::lhv::{simulate_timebin_counts, SettingsModel, TimeBinModel};

fn main() {
    let mut args = std::env::args().skip(1);
    let trials: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(4_000_000);
    let eta: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.9);

    let model = TimeBinModel::reference(eta).expect("valid model");
    println!("single-pair K = {:.5}", model.single_pair_k());

    let start = std::time::Instant::now();
    let counts = simulate_timebin_counts(&model, SettingsModel::Uniform, trials, 2017);
    let k = k_statistic(&counts).expect("all settings visited");
    println!(
        "{trials} trials in {:.1?}: K = {:.3e} +- {:.1e} ({:.1} sigma)",
        start.elapsed(),
        k.value,
        k.stderr,
        k.sigma.unwrap_or(f64::NAN)
    );
}
