//! Plays the Oracle against a fair coin and a human-like bit source.
//!
//! cargo run --example predictor_game -- [bits]

use humanbell::bellstats::bias_stats;
use humanbell::lhv::MarkovBits;
use humanbell::predictor::{oracle_pass_probability, PredictorState};

fn play(name: &str, bits: &[u8]) {
    let mut oracle = PredictorState::default();
    let hits: u64 = bits.iter().map(|&b| u64::from(oracle.step(b))).sum();
    let stats = bias_stats(bits).expect("non-empty stream");
    println!(
        "{name:>6}: P(0) = {:.4}, alternation = {:.4}, Oracle accuracy = {:.4}",
        stats.p0,
        stats.alternation.unwrap_or(f64::NAN),
        hits as f64 / bits.len() as f64
    );
}

fn main() {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100_000);
    let fair: Vec<u8> = MarkovBits::fair().stream(1).take(n).collect();
    let human: Vec<u8> = MarkovBits::human().stream(2).take(n).collect();
    play("fair", &fair);
    play("human", &human);

    // Chance of beating the Oracle in a 30-bit round by luck or by skill.
    for guessed in [0.5, 0.55, 0.6] {
        println!(
            "Oracle right {:.0}% of the time: round passed with probability {:.4}",
            guessed * 100.0,
            oracle_pass_probability(1.0 - guessed)
        );
    }
}
