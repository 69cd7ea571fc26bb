//! Pre-registered stopping-rule test for the time-bin K functional.
//!
//! A trial is *relevant* when it produces an event counted by one of the K
//! terms. Under local realism with equiprobable settings, the expected
//! number of positive-term events never exceeds the expected number of
//! negative-term events, so among `n` relevant events the positive count is
//! dominated by `Binomial(n, 1/2)`.
//!
//! Protocol: the leading training fraction of trials estimates the relevant
//! event rate; the stopping point `n_cut` is a fixed fraction of the
//! estimated relevant events in the rest of the run; the analysis stops
//! after `n_cut` relevant events and reports the binomial upper tail. The
//! null distribution assumes uniform settings, so a settings distribution
//! that drifts from uniform beyond the tolerance voids the p-value.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::{Result, StatsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum Contribution {
    None,
    Positive,
    Negative,
}

/// One trial reduced to its index, setting pair, and role in K. Streams
/// may omit trials whose contribution is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifiedTrial {
    pub trial: u64,
    pub settings: (u8, u8),
    pub contribution: Contribution,
}

impl ClassifiedTrial {
    pub fn is_relevant(&self) -> bool {
        self.contribution != Contribution::None
    }
}

/// Observed trial counts per setting pair, indexed `2x + y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SettingsDistribution {
    pub counts: [u64; 4],
}

impl SettingsDistribution {
    /// Counts every listed trial; only meaningful for complete streams.
    pub fn from_trials(trials: &[ClassifiedTrial]) -> Self {
        let mut d = Self::default();
        for t in trials {
            d.record(t.settings.0, t.settings.1);
        }
        d
    }

    pub fn record(&mut self, x: u8, y: u8) {
        self.counts[2 * (x & 1) as usize + (y & 1) as usize] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn frequencies(&self) -> [f64; 4] {
        let n = self.total().max(1) as f64;
        self.counts.map(|c| c as f64 / n)
    }

    /// Largest `|f(x,y) - 1/4|` over the four setting pairs.
    pub fn max_deviation(&self) -> f64 {
        self.frequencies()
            .iter()
            .map(|f| (f - 0.25).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisConfig {
    /// Leading share of planned trials used to estimate the event rate.
    pub training_fraction: f64,
    /// Share of estimated remaining relevant events analysed.
    pub cut_fraction: f64,
    /// Allowed absolute deviation of any setting-pair frequency from 1/4.
    pub bias_tolerance: f64,
    /// Planned run length; defaults to the trials in the settings distribution.
    pub planned_trials: Option<u64>,
}

impl Default for HypothesisConfig {
    fn default() -> Self {
        Self {
            training_fraction: 0.05,
            cut_fraction: 0.90,
            bias_tolerance: 0.002,
            planned_trials: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    /// Reported p-value; `1` when the bias warning is raised.
    pub p_value: f64,
    /// `log10` of the binomial tail before any bias override.
    pub log10_tail: f64,
    pub n_cut: u64,
    /// Relevant events analysed (less than `n_cut` if the stream ran short).
    pub n_analysed: u64,
    pub n_positive: u64,
    pub training_trials: u64,
    pub training_events: u64,
    pub bias_warning: bool,
    pub max_setting_deviation: f64,
}

/// `ln P[X >= k]` for `X ~ Binomial(n, p)`, summed in log space.
pub fn ln_binomial_upper_tail(n: u64, k: u64, p: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if k > n {
        return f64::NEG_INFINITY;
    }
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return 0.0;
    }
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let ln_n_fact = ln_gamma(n as f64 + 1.0);
    let ln_pmf = |j: u64| {
        ln_n_fact - ln_gamma(j as f64 + 1.0) - ln_gamma((n - j) as f64 + 1.0)
            + j as f64 * lp
            + (n - j) as f64 * lq
    };
    let terms: Vec<f64> = (k..=n).map(ln_pmf).collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    (max + sum.ln()).min(0.0)
}

pub fn binomial_upper_tail(n: u64, k: u64, p: f64) -> f64 {
    ln_binomial_upper_tail(n, k, p).exp()
}

/// Runs the protocol on a complete trial stream (every trial listed).
pub fn hypothesis_test(
    trials: &[ClassifiedTrial],
    config: &HypothesisConfig,
) -> Result<HypothesisReport> {
    hypothesis_test_with_settings(trials, &SettingsDistribution::from_trials(trials), config)
}

/// Runs the protocol on an event stream ordered by trial index, with the
/// setting frequencies of all trials supplied separately.
pub fn hypothesis_test_with_settings(
    events: &[ClassifiedTrial],
    settings: &SettingsDistribution,
    config: &HypothesisConfig,
) -> Result<HypothesisReport> {
    let observed = settings.total();
    let planned = config.planned_trials.unwrap_or(observed);
    let training_trials = (planned as f64 * config.training_fraction).ceil() as u64;
    if training_trials == 0 || observed < training_trials {
        return Err(StatsError::Invalid(format!(
            "stream of {observed} trials is shorter than the {training_trials}-trial training segment"
        )));
    }
    if events.windows(2).any(|w| w[1].trial < w[0].trial) {
        return Err(StatsError::Invalid("events are not ordered by trial".into()));
    }
    let split = events.partition_point(|e| e.trial < training_trials);
    let (training, rest) = events.split_at(split);
    let training_events = training.iter().filter(|t| t.is_relevant()).count() as u64;
    if training_events == 0 {
        return Err(StatsError::Invalid(
            "no relevant events in the training segment".into(),
        ));
    }
    let rate = training_events as f64 / training_trials as f64;
    let estimated_remaining = rate * (planned - training_trials) as f64;
    let n_cut = (config.cut_fraction * estimated_remaining).floor() as u64;

    let mut n_analysed = 0u64;
    let mut n_positive = 0u64;
    for t in rest.iter().filter(|t| t.is_relevant()) {
        if n_analysed == n_cut {
            break;
        }
        n_analysed += 1;
        if t.contribution == Contribution::Positive {
            n_positive += 1;
        }
    }

    let ln_tail = ln_binomial_upper_tail(n_analysed, n_positive, 0.5);
    let deviation = settings.max_deviation();
    let bias_warning = deviation > config.bias_tolerance;
    let p_value = if bias_warning { 1.0 } else { ln_tail.exp() };
    Ok(HypothesisReport {
        p_value,
        log10_tail: ln_tail / std::f64::consts::LN_10,
        n_cut,
        n_analysed,
        n_positive,
        training_trials,
        training_events,
        bias_warning,
        max_setting_deviation: deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact tail by direct summation with rational binomial coefficients.
    fn brute_tail(n: u64, k: u64, p: f64) -> f64 {
        let mut total = 0.0;
        for j in k..=n {
            let mut c = 1.0f64;
            for i in 0..j {
                c = c * (n - i) as f64 / (i + 1) as f64;
            }
            total += c * p.powi(j as i32) * (1.0 - p).powi((n - j) as i32);
        }
        total
    }

    #[test]
    fn tail_matches_brute_force() {
        for (n, k, p) in [(30, 20, 0.5), (30, 20, 0.4), (10, 0, 0.3), (50, 50, 0.5), (17, 9, 0.61)] {
            let lib = binomial_upper_tail(n, k, p);
            let brute = brute_tail(n, k, p);
            assert!((lib - brute).abs() < 1e-12 * brute.max(1e-300), "{n} {k} {p}: {lib} vs {brute}");
        }
        assert_eq!(binomial_upper_tail(5, 6, 0.5), 0.0);
    }

    fn stream(pattern: &[(u8, u8, Contribution)], repeats: usize) -> Vec<ClassifiedTrial> {
        pattern
            .iter()
            .cycle()
            .take(pattern.len() * repeats)
            .enumerate()
            .map(|(i, &(x, y, contribution))| ClassifiedTrial {
                trial: i as u64,
                settings: (x, y),
                contribution,
            })
            .collect()
    }

    #[test]
    fn n_cut_from_training_rate() {
        use Contribution::*;
        // 1 relevant in 4 trials, uniform settings, all positive.
        let trials = stream(&[(0, 0, Positive), (0, 1, None), (1, 0, None), (1, 1, None)], 1000);
        let r = hypothesis_test(&trials, &HypothesisConfig::default()).unwrap();
        assert_eq!(r.training_trials, 200);
        assert_eq!(r.training_events, 50);
        // 0.9 * 0.25 * 3800 = 855
        assert_eq!(r.n_cut, 855);
        assert_eq!(r.n_analysed, 855);
        assert_eq!(r.n_positive, 855);
        assert!(!r.bias_warning);
        assert!(r.p_value < 1e-200);
    }

    #[test]
    fn balanced_events_do_not_reject() {
        use Contribution::*;
        let trials = stream(
            &[(0, 0, Positive), (0, 1, Negative), (1, 0, None), (1, 1, None)],
            1000,
        );
        let r = hypothesis_test(&trials, &HypothesisConfig::default()).unwrap();
        assert!(r.p_value > 0.4);
    }

    #[test]
    fn biased_settings_void_p_value() {
        use Contribution::*;
        let trials = stream(
            &[(0, 0, Positive), (0, 0, None), (0, 1, None), (1, 0, None), (1, 1, None)],
            1000,
        );
        let r = hypothesis_test(&trials, &HypothesisConfig::default()).unwrap();
        assert!(r.bias_warning);
        assert_eq!(r.p_value, 1.0);
        assert!(r.log10_tail < -100.0);
    }

    #[test]
    fn sparse_stream_matches_full_stream() {
        use Contribution::*;
        let full = stream(
            &[(0, 0, Positive), (0, 1, None), (1, 0, Negative), (1, 1, None), (0, 0, Positive), (0, 0, None), (1, 1, None), (0, 1, None)],
            500,
        );
        let settings = SettingsDistribution::from_trials(&full);
        let sparse: Vec<_> = full.iter().copied().filter(|t| t.is_relevant()).collect();
        let cfg = HypothesisConfig { bias_tolerance: 1.0, ..Default::default() };
        assert_eq!(
            hypothesis_test(&full, &cfg).unwrap(),
            hypothesis_test_with_settings(&sparse, &settings, &cfg).unwrap()
        );
        let mut shuffled = sparse.clone();
        shuffled.swap(0, 5);
        assert!(hypothesis_test_with_settings(&shuffled, &settings, &cfg).is_err());
    }

    #[test]
    fn short_stream_rejected() {
        let cfg = HypothesisConfig {
            planned_trials: Some(1000),
            ..Default::default()
        };
        assert!(hypothesis_test(&[], &cfg).is_err());
        let none = stream(&[(0, 0, Contribution::None)], 100);
        assert!(hypothesis_test(&none, &HypothesisConfig::default()).is_err());
    }
}
