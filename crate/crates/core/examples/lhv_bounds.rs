//! Checks local models against the CHSH and time-bin bounds.
//!
//! cargo run --example lhv_bounds -- [draws]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use humanbell::lhv::{enumerate_deterministic_chsh, LocalTimeBinModel};

fn main() {
    let draws: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10_000);
    let e = enumerate_deterministic_chsh();
    println!("largest CHSH value over the 16 deterministic strategies: {}", e.max_s);
    println!("attained by {:?}", e.argmax);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let worst = (0..draws)
        .map(|_| LocalTimeBinModel::random(&mut rng, 4, 15).k_value())
        .fold(f64::NEG_INFINITY, f64::max);
    println!("largest K over {draws} random local time-bin models: {worst:.3e} (bound 0)");
}
