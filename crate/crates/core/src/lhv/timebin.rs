//! Pulsed time-bin experiment with single-channel detection.
//!
//! A trial spans `n_bins` laser pulses. Each pulse independently creates a
//! photon pair with probability `pair_probability`; each party keeps only
//! its first detection. Bins are numbered from 1.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bellstats::{
    ClassifiedTrial, Contribution, SettingsDistribution, TimeBinCounts, TimeBinTerm,
};

use super::human::MarkovBits;
use super::quantum::{Detection, OutcomeDistribution, PartyOutcome, QuantumPairModel};
use super::{LhvError, Result};

pub const DEFAULT_BINS: usize = 15;
pub const DEFAULT_PAIR_PROBABILITY: f64 = 0.002;

/// First-detection bins; `None` is no detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TimeBinOutcome {
    pub a: Option<u8>,
    pub b: Option<u8>,
}

impl TimeBinOutcome {
    /// From bin indices where 0 means no detection.
    pub fn from_indices(i: usize, j: usize) -> Self {
        let f = |k: usize| (k > 0).then_some(k as u8);
        Self { a: f(i), b: f(j) }
    }
}

/// The K term an outcome at settings `(x, y)` contributes to, if any.
pub fn classify_timebin(x: u8, y: u8, o: TimeBinOutcome) -> Option<TimeBinTerm> {
    use TimeBinTerm::*;
    match ((x & 1, y & 1), o.a, o.b) {
        ((0, 0), Some(i), Some(j)) if i == j => Some(SameBinAB),
        ((1, 1), Some(i), Some(j)) if i == j => Some(SameBinPrimedAPrimedB),
        ((1, 0), None, Some(_)) => Some(BobOnlyPrimedAB),
        ((1, 0), Some(i), Some(j)) if i != j => Some(DiffBinPrimedAB),
        ((0, 1), Some(_), None) => Some(AliceOnlyAPrimedB),
        ((0, 1), Some(i), Some(j)) if i != j => Some(DiffBinAPrimedB),
        _ => None,
    }
}

pub fn contribution(x: u8, y: u8, o: TimeBinOutcome) -> Contribution {
    match classify_timebin(x, y, o) {
        Some(t) if t.sign() > 0.0 => Contribution::Positive,
        Some(_) => Contribution::Negative,
        None => Contribution::None,
    }
}

/// Adds one trial: every term measured at `(x, y)` gains a trial.
pub fn record_timebin(counts: &mut TimeBinCounts, x: u8, y: u8, o: TimeBinOutcome) {
    let hit = classify_timebin(x, y, o);
    for term in TimeBinTerm::ALL {
        if term.settings() == (x & 1, y & 1) {
            let c = counts.term_mut(term);
            c.trials += 1;
            if hit == Some(term) {
                c.events += 1;
            }
        }
    }
}

/// Anything that can produce time-bin trials.
pub trait TimeBinSampler: Sync {
    fn n_bins(&self) -> usize;
    fn sample_outcome(&self, x: u8, y: u8, rng: &mut ChaCha8Rng) -> TimeBinOutcome;
}

impl TimeBinSampler for super::strategies::LocalTimeBinModel {
    fn n_bins(&self) -> usize {
        super::strategies::LocalTimeBinModel::n_bins(self)
    }

    fn sample_outcome(&self, x: u8, y: u8, rng: &mut ChaCha8Rng) -> TimeBinOutcome {
        self.sample(x, y, rng)
    }
}

/// Quantum time-bin source.
#[derive(Debug, Clone)]
pub struct TimeBinModel {
    pair: QuantumPairModel,
    n_bins: usize,
    pair_probability: f64,
    ln_no_pair: f64,
    per_setting: [OutcomeDistribution; 4],
}

impl TimeBinModel {
    /// `pair` is switched to single-channel detection.
    pub fn new(pair: QuantumPairModel, n_bins: usize, pair_probability: f64) -> Result<Self> {
        if n_bins == 0 || n_bins > u8::MAX as usize {
            return Err(LhvError::Config(format!("n_bins = {n_bins} outside 1..=255")));
        }
        if !(0.0..=1.0).contains(&pair_probability) {
            return Err(LhvError::Config(format!(
                "pair probability {pair_probability} outside [0, 1]"
            )));
        }
        if pair.n_settings() != (2, 2) {
            return Err(LhvError::Config("time-bin model needs two angles per side".into()));
        }
        let pair = pair.with_detection(Detection::SingleChannel);
        let mut per_setting = [OutcomeDistribution { p: [[0.0; 3]; 3] }; 4];
        for (k, slot) in per_setting.iter_mut().enumerate() {
            *slot = pair.joint_outcome_probs(k / 2, k % 2)?;
        }
        Ok(Self {
            pair,
            n_bins,
            pair_probability,
            ln_no_pair: (1.0 - pair_probability).ln(),
            per_setting,
        })
    }

    /// State `0.982|HH> + 0.191|VV>`, analyzers at -3.7, 23.6 (Alice) and
    /// 3.7, -23.6 (Bob) degrees from vertical, 15 bins, pair probability
    /// 0.002, detection efficiency `eta` on both sides.
    pub fn reference(eta: f64) -> Result<Self> {
        let state = QuantumPairModel::two_term_state(0.982, 0.191)?;
        let pair = QuantumPairModel::new(
            state,
            vec![from_vertical_deg(-3.7), from_vertical_deg(23.6)],
            vec![from_vertical_deg(3.7), from_vertical_deg(-23.6)],
        )?
        .with_efficiencies(eta, eta)?;
        Self::new(pair, DEFAULT_BINS, DEFAULT_PAIR_PROBABILITY)
    }

    pub fn pair_model(&self) -> &QuantumPairModel {
        &self.pair
    }

    pub fn pair_probability(&self) -> f64 {
        self.pair_probability
    }

    /// K of a single created pair, from exact probabilities.
    pub fn single_pair_k(&self) -> f64 {
        let d = |x: usize, y: usize| &self.per_setting[2 * x + y];
        let (plus, none) = (PartyOutcome::Plus, PartyOutcome::NoDetection);
        d(0, 0).get(plus, plus) - d(1, 1).get(plus, plus) - d(1, 0).get(none, plus) - d(0, 1).get(plus, none)
    }

    /// Pulse index (0-based) of the next pair at or after `start`.
    fn next_pair<R: Rng + ?Sized>(&self, start: usize, rng: &mut R) -> Option<usize> {
        if self.pair_probability <= 0.0 {
            return None;
        }
        if self.pair_probability >= 1.0 {
            return (start < self.n_bins).then_some(start);
        }
        let u: f64 = 1.0 - rng.random::<f64>();
        let skip = (u.ln() / self.ln_no_pair).floor();
        let k = start as f64 + skip;
        (k < self.n_bins as f64).then_some(k as usize)
    }

    pub fn simulate_trial<R: Rng + ?Sized>(&self, x: u8, y: u8, rng: &mut R) -> TimeBinOutcome {
        let dist = &self.per_setting[2 * (x & 1) as usize + (y & 1) as usize];
        let mut out = TimeBinOutcome::default();
        let mut pulse = 0;
        while let Some(k) = self.next_pair(pulse, rng) {
            let (a, b) = dist.sample(rng);
            let bin = Some(k as u8 + 1);
            if out.a.is_none() && a == PartyOutcome::Plus {
                out.a = bin;
            }
            if out.b.is_none() && b == PartyOutcome::Plus {
                out.b = bin;
            }
            if out.a.is_some() && out.b.is_some() {
                break;
            }
            pulse = k + 1;
        }
        out
    }
}

impl TimeBinSampler for TimeBinModel {
    fn n_bins(&self) -> usize {
        self.n_bins
    }

    fn sample_outcome(&self, x: u8, y: u8, rng: &mut ChaCha8Rng) -> TimeBinOutcome {
        self.simulate_trial(x, y, rng)
    }
}

/// Analyzer angle (radians from horizontal) for one given in degrees from
/// vertical.
pub fn from_vertical_deg(deg: f64) -> f64 {
    (90.0 - deg).to_radians()
}

pub fn simulate_timebin_trial<R: Rng + ?Sized>(
    model: &TimeBinModel,
    a_bit: u8,
    b_bit: u8,
    rng: &mut R,
) -> TimeBinOutcome {
    model.simulate_trial(a_bit, b_bit, rng)
}

/// Where simulated setting bits come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SettingsModel {
    Uniform,
    /// Consecutive bits of a two-state Markov source set `x` then `y`.
    Markov(MarkovBits),
}

const CHUNK: u64 = 1 << 20;

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Runs `f` over each chunk of trials, in parallel, with per-chunk seeds.
fn for_chunks<T: Send>(
    n_trials: u64,
    seed: u64,
    settings: SettingsModel,
    f: impl Fn(u64, u64, &mut dyn FnMut() -> (u8, u8), &mut ChaCha8Rng) -> T + Sync,
) -> Vec<T> {
    let n_chunks = n_trials.div_ceil(CHUNK);
    (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let len = CHUNK.min(n_trials - start);
            let mut rng = chunk_rng(seed, c);
            let mut bits_rng = chunk_rng(seed ^ 0x5e77_1265, c);
            let mut markov = match settings {
                SettingsModel::Markov(m) => Some(m.start(&mut bits_rng)),
                SettingsModel::Uniform => None,
            };
            let mut pool = 0u64;
            let mut left = 0u32;
            let mut next = move || match markov.as_mut() {
                Some(chain) => {
                    let x = chain.next_bit(&mut bits_rng);
                    (x, chain.next_bit(&mut bits_rng))
                }
                None => {
                    if left == 0 {
                        pool = bits_rng.random();
                        left = 32;
                    }
                    let s = (pool & 3) as u8;
                    pool >>= 2;
                    left -= 1;
                    (s >> 1, s & 1)
                }
            };
            f(start, len, &mut next, &mut rng)
        })
        .collect()
}

/// Simulates `n_trials` and accumulates the six K terms.
pub fn simulate_timebin_counts<S: TimeBinSampler>(
    model: &S,
    settings: SettingsModel,
    n_trials: u64,
    seed: u64,
) -> TimeBinCounts {
    let parts = for_chunks(n_trials, seed, settings, |_, len, next, rng| {
        let mut c = TimeBinCounts::new(model.n_bins());
        for _ in 0..len {
            let (x, y) = next();
            record_timebin(&mut c, x, y, model.sample_outcome(x, y, rng));
        }
        c
    });
    let mut total = TimeBinCounts::new(model.n_bins());
    for p in parts {
        for (t, q) in total.terms.iter_mut().zip(p.terms) {
            t.events += q.events;
            t.trials += q.trials;
        }
    }
    total
}

/// Simulates `n_trials` and returns the relevant events in trial order
/// with the setting frequencies of every trial.
pub fn simulate_timebin_events<S: TimeBinSampler>(
    model: &S,
    settings: SettingsModel,
    n_trials: u64,
    seed: u64,
) -> (Vec<ClassifiedTrial>, SettingsDistribution) {
    let parts = for_chunks(n_trials, seed, settings, |start, len, next, rng| {
        let mut events = Vec::new();
        let mut dist = SettingsDistribution::default();
        for i in 0..len {
            let (x, y) = next();
            dist.record(x, y);
            let c = contribution(x, y, model.sample_outcome(x, y, rng));
            if c != Contribution::None {
                events.push(ClassifiedTrial {
                    trial: start + i,
                    settings: (x, y),
                    contribution: c,
                });
            }
        }
        (events, dist)
    });
    let mut events = Vec::new();
    let mut dist = SettingsDistribution::default();
    for (e, d) in parts {
        events.extend(e);
        for k in 0..4 {
            dist.counts[k] += d.counts[k];
        }
    }
    (events, dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bellstats::k_statistic;

    #[test]
    fn classification_table() {
        let o = |a: Option<u8>, b: Option<u8>| TimeBinOutcome { a, b };
        assert_eq!(classify_timebin(0, 0, o(Some(3), Some(3))), Some(TimeBinTerm::SameBinAB));
        assert_eq!(classify_timebin(0, 0, o(Some(3), Some(4))), None);
        assert_eq!(classify_timebin(1, 1, o(Some(1), Some(1))), Some(TimeBinTerm::SameBinPrimedAPrimedB));
        assert_eq!(classify_timebin(1, 0, o(None, Some(2))), Some(TimeBinTerm::BobOnlyPrimedAB));
        assert_eq!(classify_timebin(1, 0, o(Some(2), None)), None);
        assert_eq!(classify_timebin(1, 0, o(Some(1), Some(2))), Some(TimeBinTerm::DiffBinPrimedAB));
        assert_eq!(classify_timebin(0, 1, o(Some(5), None)), Some(TimeBinTerm::AliceOnlyAPrimedB));
        assert_eq!(classify_timebin(0, 1, o(Some(5), Some(6))), Some(TimeBinTerm::DiffBinAPrimedB));
        assert_eq!(classify_timebin(0, 1, o(None, None)), None);
        assert_eq!(contribution(0, 0, o(Some(1), Some(1))), Contribution::Positive);
        assert_eq!(contribution(0, 1, o(Some(1), None)), Contribution::Negative);
    }

    #[test]
    fn no_pairs_no_detections() {
        let base = TimeBinModel::reference(0.9).unwrap();
        let m = TimeBinModel::new(base.pair_model().clone(), 15, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in 0..1000u32 {
            let o = m.simulate_trial((k & 1) as u8, ((k >> 1) & 1) as u8, &mut rng);
            assert_eq!(o, TimeBinOutcome::default());
        }
    }

    #[test]
    fn certain_pairs_give_same_bin_coincidences() {
        // Parallel analyzers on |HH>: every photon passes, all in bin 1.
        let pair = QuantumPairModel::new([1.0, 0.0, 0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]).unwrap();
        let m = TimeBinModel::new(pair, 15, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let o = m.simulate_trial(0, 0, &mut rng);
        assert_eq!(o, TimeBinOutcome { a: Some(1), b: Some(1) });
    }

    #[test]
    fn reference_single_pair_k_positive() {
        let k = TimeBinModel::reference(0.9).unwrap().single_pair_k();
        assert!((k - 0.0202).abs() < 5e-4, "{k}");
    }

    #[test]
    fn bins_follow_geometric_law() {
        let pair = QuantumPairModel::new([1.0, 0.0, 0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]).unwrap();
        let m = TimeBinModel::new(pair, 15, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let mut first = 0;
        let mut none = 0;
        for _ in 0..n {
            match m.simulate_trial(0, 0, &mut rng).a {
                Some(1) => first += 1,
                None => none += 1,
                _ => {}
            }
        }
        let p_none = 0.9f64.powi(15);
        assert!((first as f64 / n as f64 - 0.1).abs() < 0.003);
        assert!((none as f64 / n as f64 - p_none).abs() < 0.003);
    }

    #[test]
    fn seeded_counts_reproducible() {
        let m = TimeBinModel::reference(0.9).unwrap();
        let a = simulate_timebin_counts(&m, SettingsModel::Uniform, 300_000, 9);
        let b = simulate_timebin_counts(&m, SettingsModel::Uniform, 300_000, 9);
        assert_eq!(a, b);
        assert_eq!(a.total_trials(), 300_000);
        assert!(k_statistic(&a).is_ok());
    }
}
