//! Bell-parameter statistics over observed count tables.
//!
//! Every function here is pure. Outcomes are stored as bits with the
//! project-wide encoding `+1 <-> 0`, `-1 <-> 1`, so a correlator term is
//! `(-1)^(a + b)` on the bits.

mod bias;
mod chsh;
pub mod csvio;
mod hypothesis;
mod mdl;
mod network;
mod tables;
mod timebin;

pub use bias::{bias_stats, BiasStats};
pub use chsh::{
    chsh, chsh_from_correlators, correlator, correlator_stderr, ChshSigns, CHSH_LOCAL_BOUND,
};
pub use hypothesis::{
    binomial_upper_tail, hypothesis_test, hypothesis_test_with_settings, ClassifiedTrial,
    Contribution, HypothesisConfig, HypothesisReport, SettingsDistribution,
};
pub use mdl::{
    mdl_i0, mdl_inequality, mdl_terms, mdl_threshold_from_chsh, FnProbabilities, MdlProbabilities,
    MdlTerms, PermutedIndex, MDL_FREE_BOUND,
};
pub use network::{
    bilocal_parameter, bilocality, steering_from_counts, steering_s16, steering_s16_with_stderr,
    tripartite_correlator, BILOCAL_BOUND, STEERING_C16,
};
pub use tables::{CountTable, TermCount, TimeBinCounts, TimeBinTerm, TriCountTable};
pub use timebin::{k_statistic, K_LOCAL_BOUND};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("no trials recorded for setting {0}")]
    NoData(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("standard error must be positive, got {0}")]
    NonPositiveStderr(f64),
}

pub type Result<T> = std::result::Result<T, StatsError>;

/// Which side of the bound counts as a violation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Violation {
    /// Local models satisfy `value <= bound` (CHSH, K, B, S16).
    Above,
    /// Local models satisfy `value >= bound` (the measurement-dependence level `I0`).
    Below,
}

/// An evaluated inequality.
///
/// `sigma` is `(value - bound) / stderr` for [`Violation::Above`] and
/// `(bound - value) / stderr` for [`Violation::Below`], so a positive sigma
/// always means "beyond the local bound". It is `None` when no standard
/// error is available.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellResult {
    pub value: f64,
    pub bound: f64,
    pub stderr: f64,
    pub sigma: Option<f64>,
    pub violation: Violation,
}

impl BellResult {
    pub fn new(value: f64, bound: f64, stderr: f64, violation: Violation) -> Self {
        let sigma = (stderr > 0.0 && stderr.is_finite()).then(|| match violation {
            Violation::Above => (value - bound) / stderr,
            Violation::Below => (bound - value) / stderr,
        });
        Self {
            value,
            bound,
            stderr,
            sigma,
            violation,
        }
    }

    pub fn violates(&self) -> bool {
        match self.violation {
            Violation::Above => self.value > self.bound,
            Violation::Below => self.value < self.bound,
        }
    }
}

/// Number of standard errors separating `value` from `bound`.
pub fn sigma(value: f64, bound: f64, stderr: f64) -> Result<f64> {
    if stderr <= 0.0 || stderr.is_nan() {
        return Err(StatsError::NonPositiveStderr(stderr));
    }
    Ok((value - bound) / stderr)
}

/// `+1` for bit 0, `-1` for bit 1.
#[inline]
pub fn outcome_sign(bit: u8) -> f64 {
    if bit == 0 {
        1.0
    } else {
        -1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sigma_examples() {
        assert_abs_diff_eq!(sigma(2.55, 2.0, 0.07).unwrap(), 7.857, epsilon = 1e-3);
        assert_eq!(sigma(2.0, 2.0, 0.1).unwrap(), 0.0);
        assert_abs_diff_eq!(sigma(0.965, 0.511, 0.008).unwrap(), 56.75, epsilon = 1e-9);
    }

    #[test]
    fn sigma_rejects_nonpositive_stderr() {
        assert!(sigma(1.0, 0.0, 0.0).is_err());
        assert!(sigma(1.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn result_sign_convention() {
        let r = BellResult::new(0.10, 0.25, 0.05, Violation::Below);
        assert_abs_diff_eq!(r.sigma.unwrap(), 3.0, epsilon = 1e-12);
        assert!(r.violates());
        let r = BellResult::new(1.0, 2.0, 0.0, Violation::Above);
        assert_eq!(r.sigma, None);
        assert!(!r.violates());
    }
}
