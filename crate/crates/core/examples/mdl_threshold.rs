//! Runs a measurement-dependence lab and compares I0 with the threshold
//! implied by a CHSH value.
//!
//! cargo run --release --example mdl_threshold -- [trials] [visibility]

use humanbell::bellstats::mdl_threshold_from_chsh;
use humanbell::lhv::{presets, run_lab, analyze_output, LabKind, LabSpec, MarkovBits};

fn main() {
    let mut args = std::env::args().skip(1);
    let trials: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(400_000);
    let v: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.97);

    let mut bits = MarkovBits::fair().stream(3).enumerate();
    let spec = LabSpec::new("mdl", LabKind::Mdl, 400, false);
    let (out, _) = run_lab(spec, presets::mdl(v).expect("valid model"), &mut bits, trials, 4).expect("lab runs");
    let i0 = analyze_output(LabKind::Mdl, &out, "+,+,+,-".parse().unwrap()).expect("enough trials");
    println!("I0 = {:.4} +- {:.4} over {trials} trials (free-will bound {})", i0.value, i0.stderr, i0.bound);

    for s in [2.0, 2.5, 2.804] {
        println!("a lab with S = {s} excludes models whose bias exceeds I* = {:.4}", mdl_threshold_from_chsh(s));
    }
}
