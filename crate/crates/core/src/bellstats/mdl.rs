//! Measurement-dependent locality (MDL).
//!
//! `I = min P(xy|lambda)` measures how free the setting choices are; `1/4`
//! is full freedom. Probabilities are addressed as `P(abxy)` in the order
//! outcome `a`, outcome `b`, setting `x`, setting `y`, and read as
//! `p(ab|xy)`. Both the inequality and its root `I0` are homogeneous in the
//! probabilities, so reading them as joint probabilities under uniform
//! settings gives the same answers.

use super::{BellResult, CountTable, Result, StatsError, Violation};

/// Full measurement independence.
pub const MDL_FREE_BOUND: f64 = 0.25;

/// Access to `P(abxy)` in `(a, b, x, y)` order.
pub trait MdlProbabilities {
    fn prob(&self, a: u8, b: u8, x: u8, y: u8) -> Result<f64>;

    /// Trials behind the `(x, y)` estimate, when known.
    fn trials(&self, _x: u8, _y: u8) -> Option<u64> {
        None
    }
}

impl MdlProbabilities for CountTable {
    fn prob(&self, a: u8, b: u8, x: u8, y: u8) -> Result<f64> {
        self.conditional(x as usize, y as usize, a, b)
    }

    fn trials(&self, x: u8, y: u8) -> Option<u64> {
        Some(CountTable::trials(self, x as usize, y as usize))
    }
}

/// Wraps a closure `(a, b, x, y) -> probability`.
pub struct FnProbabilities<F>(pub F);

impl<F: Fn(u8, u8, u8, u8) -> f64> MdlProbabilities for FnProbabilities<F> {
    fn prob(&self, a: u8, b: u8, x: u8, y: u8) -> Result<f64> {
        Ok((self.0)(a, b, x, y))
    }
}

/// Adapts a source written in another index convention. `order[k]` names
/// which of `(a, b, x, y)` (0..4) goes into the inner source's `k`-th slot;
/// e.g. `[2, 3, 0, 1]` for an inner source indexed `(x, y, a, b)`.
pub struct PermutedIndex<P> {
    pub inner: P,
    pub order: [usize; 4],
}

impl<P: MdlProbabilities> MdlProbabilities for PermutedIndex<P> {
    fn prob(&self, a: u8, b: u8, x: u8, y: u8) -> Result<f64> {
        let ours = [a, b, x, y];
        let w = self.order.map(|k| ours[k]);
        self.inner.prob(w[0], w[1], w[2], w[3])
    }
}

/// `P(0000)` and the three subtracted terms `P(0101), P(1010), P(0011)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdlTerms {
    pub p0000: f64,
    pub q: [f64; 3],
}

impl MdlTerms {
    pub fn q_sum(&self) -> f64 {
        self.q.iter().sum()
    }
}

const Q_INDICES: [(u8, u8, u8, u8); 3] = [(0, 1, 0, 1), (1, 0, 1, 0), (0, 0, 1, 1)];

pub fn mdl_terms(p: &impl MdlProbabilities) -> Result<MdlTerms> {
    let p0000 = p.prob(0, 0, 0, 0)?;
    let mut q = [0.0; 3];
    for (slot, &(a, b, x, y)) in q.iter_mut().zip(&Q_INDICES) {
        *slot = p.prob(a, b, x, y)?;
    }
    for v in std::iter::once(p0000).chain(q) {
        if !(0.0..=1.0).contains(&v) {
            return Err(StatsError::Invalid(format!("probability {v} outside [0, 1]")));
        }
    }
    Ok(MdlTerms { p0000, q })
}

/// `I*` below which MDL models reach the CHSH value `s`: solves
/// `4 (1 - 2 I) = s`.
pub fn mdl_threshold_from_chsh(s: f64) -> f64 {
    (4.0 - s) / 8.0
}

/// Left-hand side `I P(0000) - (1 - 3I)[P(0101) + P(1010) + P(0011)]`.
/// Positive means MDL models with `P(xy|lambda) >= I` cannot produce `p`.
pub fn mdl_inequality(p: &impl MdlProbabilities, level: f64) -> Result<f64> {
    if !(0.0..=MDL_FREE_BOUND).contains(&level) {
        return Err(StatsError::Invalid(format!("I = {level} outside [0, 1/4]")));
    }
    let t = mdl_terms(p)?;
    Ok(level * t.p0000 - (1.0 - 3.0 * level) * t.q_sum())
}

/// `I0 = Q / (P(0000) + 3Q)`, the level where the left-hand side is zero.
/// Every MDL model with `I > I0` is excluded by the data.
pub fn mdl_i0(p: &impl MdlProbabilities) -> Result<BellResult> {
    let t = mdl_terms(p)?;
    let q = t.q_sum();
    let denom = t.p0000 + 3.0 * q;
    if denom <= 0.0 {
        return Err(StatsError::Invalid(
            "P(0000) and the subtracted terms are all zero".into(),
        ));
    }
    let value = q / denom;

    // dI0/dP = -Q/D^2, dI0/dQ_k = P/D^2; binomial variance per estimate.
    let binom_var = |prob: f64, n: Option<u64>| match n {
        Some(n) if n > 0 => prob * (1.0 - prob) / n as f64,
        _ => 0.0,
    };
    let d2 = denom * denom;
    let mut var = (q / d2).powi(2) * binom_var(t.p0000, p.trials(0, 0));
    for (&(_, _, x, y), &qk) in Q_INDICES.iter().zip(&t.q) {
        var += (t.p0000 / d2).powi(2) * binom_var(qk, p.trials(x, y));
    }
    Ok(BellResult::new(value, MDL_FREE_BOUND, var.sqrt(), Violation::Below))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn fixed(p0000: f64, q: [f64; 3]) -> FnProbabilities<impl Fn(u8, u8, u8, u8) -> f64> {
        FnProbabilities(move |a, b, x, y| match (a, b, x, y) {
            (0, 0, 0, 0) => p0000,
            (0, 1, 0, 1) => q[0],
            (1, 0, 1, 0) => q[1],
            (0, 0, 1, 1) => q[2],
            _ => 0.0,
        })
    }

    #[test]
    fn threshold_examples() {
        assert_abs_diff_eq!(mdl_threshold_from_chsh(2.804), 0.1495, epsilon = 1e-12);
        assert_eq!(mdl_threshold_from_chsh(4.0), 0.0);
        assert_eq!(mdl_threshold_from_chsh(2.0), 0.25);
    }

    #[test]
    fn inequality_examples() {
        let p = fixed(0.0, [0.1, 0.2, 0.05]);
        for lvl in [0.0, 0.1, 0.25] {
            assert!(mdl_inequality(&p, lvl).unwrap() <= 0.0);
        }
        let p = fixed(0.3, [0.01, 0.02, 0.03]);
        assert_abs_diff_eq!(mdl_inequality(&p, 0.0).unwrap(), -0.06, epsilon = 1e-15);
        let p = fixed(0.25, [0.02, 0.0, 0.0]);
        assert_abs_diff_eq!(mdl_inequality(&p, 0.1).unwrap(), 0.011, epsilon = 1e-15);
        assert!(mdl_inequality(&p, 0.3).is_err());
    }

    #[test]
    fn i0_examples() {
        assert_eq!(mdl_i0(&fixed(0.4, [0.0; 3])).unwrap().value, 0.0);
        assert_abs_diff_eq!(
            mdl_i0(&fixed(0.25, [0.05, 0.0, 0.0])).unwrap().value,
            0.125,
            epsilon = 1e-15
        );
        assert!(mdl_i0(&fixed(0.0, [0.0; 3])).is_err());
    }

    #[test]
    fn i0_stderr_from_counts() {
        let mut t = CountTable::chsh();
        for (x, y) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            t.add(x, y, 1, 1, 100).unwrap();
        }
        t.add(0, 0, 0, 0, 100).unwrap();
        t.add(0, 1, 0, 1, 10).unwrap();
        let r = mdl_i0(&t).unwrap();
        assert!(r.stderr > 0.0);
        assert!(r.violates());
    }

    #[test]
    fn permuted_index_adapter() {
        // Inner source indexed (x, y, a, b).
        let inner = FnProbabilities(|x, y, a, b| if (x, y, a, b) == (0, 1, 0, 1) { 0.5 } else { 0.0 });
        let adapted = PermutedIndex { inner, order: [2, 3, 0, 1] };
        // our (a,b,x,y) = (0,1,0,1) -> inner (x,y,a,b) = (0,1,0,1)
        assert_eq!(adapted.prob(0, 1, 0, 1).unwrap(), 0.5);
        // our (a,b,x,y) = (1,0,1,0) -> inner (1,0,1,0)
        assert_eq!(adapted.prob(0, 1, 1, 0).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn inequality_vanishes_at_i0(p in 0.0f64..1.0, q0 in 0.0f64..0.3, q1 in 0.0f64..0.3, q2 in 0.0f64..0.3) {
            prop_assume!(p + q0 + q1 + q2 > 1e-6);
            let src = fixed(p, [q0, q1, q2]);
            let i0 = mdl_i0(&src).unwrap().value;
            if i0 <= MDL_FREE_BOUND {
                prop_assert!(mdl_inequality(&src, i0).unwrap().abs() < 1e-14);
            }
        }
    }
}
