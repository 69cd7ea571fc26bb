//! Per-mission feedback: how many of a player's bits went to each lab,
//! drawn binomially from the lab shares of the last closed interval.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use super::protocol::LabCount;

/// FNV-1a over the request identity.
pub fn feedback_seed(seed: u64, user: &str, request: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for b in bytes {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    eat(&seed.to_le_bytes());
    eat(user.as_bytes());
    eat(&request.to_le_bytes());
    h
}

/// Draws `Binomial(n, share_i)` for each lab, where `share_i` is the lab's
/// fraction of all live bits. A zero total gives zero counts.
pub fn sample_feedback(n: u64, shares: &[(String, u64)], total: u64, seed: u64) -> Vec<LabCount> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shares
        .iter()
        .map(|(lab, used)| {
            let count = if total == 0 || n == 0 {
                0
            } else {
                let p = (*used as f64 / total as f64).clamp(0.0, 1.0);
                Binomial::new(n, p).expect("p in [0, 1]").sample(&mut rng)
            };
            LabCount {
                lab: lab.clone(),
                count,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_moments() {
        let shares = vec![("a".to_string(), 300), ("b".to_string(), 100)];
        let reps = 20_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for r in 0..reps {
            let c = sample_feedback(30, &shares, 400, feedback_seed(5, "u", r))[0].count as f64;
            s += c;
            s2 += c * c;
        }
        let mean = s / reps as f64;
        let var = s2 / reps as f64 - mean * mean;
        assert!((mean - 22.5).abs() < 0.05, "{mean}");
        assert!((var - 30.0 * 0.75 * 0.25).abs() < 0.15, "{var}");
    }

    #[test]
    fn edge_cases() {
        assert!(sample_feedback(30, &[], 10, 1).is_empty());
        let z = sample_feedback(30, &[("a".into(), 0)], 0, 1);
        assert_eq!(z[0].count, 0);
        let full = sample_feedback(30, &[("a".into(), 10)], 10, 1);
        assert_eq!(full[0].count, 30);
        assert_ne!(feedback_seed(1, "u", 0), feedback_seed(1, "u", 1));
    }
}
