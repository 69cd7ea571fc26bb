//! Runs the pre-registered time-bin hypothesis test on simulated events.
//!
//! cargo run --release --example hypothesis_test -- [trials]

use humanbell::bellstats::{hypothesis_test_with_settings, HypothesisConfig};
use humanbell::lhv::{simulate_timebin_events, MarkovBits, SettingsModel, TimeBinModel};

fn main() {
    let trials: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(40_000_000);
    let model = TimeBinModel::reference(0.9).expect("valid model");
    let cfg = HypothesisConfig::default();
    for (name, settings) in [
        ("computer", SettingsModel::Uniform),
        ("human", SettingsModel::Markov(MarkovBits::human())),
    ] {
        let (events, dist) = simulate_timebin_events(&model, settings, trials, 8);
        let r = hypothesis_test_with_settings(&events, &dist, &cfg).expect("test runs");
        println!(
            "{name:>8}: cut {} of which {} analysed, {} positive, log10 tail {:.1}, p = {:.3e}, bias warning {}",
            r.n_cut, r.n_analysed, r.n_positive, r.log10_tail, r.p_value, r.bias_warning
        );
    }
}
