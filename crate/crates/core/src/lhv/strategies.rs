//! Local hidden-variable models: deterministic CHSH strategies and
//! factorized time-bin models.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bellstats::{chsh, ChshSigns, CountTable, TimeBinTerm};

use super::timebin::{classify_timebin, TimeBinOutcome};
use super::{LhvError, Result};

/// Outcome maps `setting -> +-1` for both parties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LhvStrategy {
    pub a: [i8; 2],
    pub b: [i8; 2],
}

impl LhvStrategy {
    /// All 16 strategies for binary settings.
    pub fn all() -> Vec<LhvStrategy> {
        let maps = [[1, 1], [1, -1], [-1, 1], [-1, -1]];
        let mut out = Vec::with_capacity(16);
        for a in maps {
            for b in maps {
                out.push(LhvStrategy { a, b });
            }
        }
        out
    }

    /// One trial per setting pair with this strategy's outcomes.
    pub fn count_table(&self) -> CountTable {
        let bit = |v: i8| u8::from(v < 0);
        let mut t = CountTable::chsh();
        for x in 0..2 {
            for y in 0..2 {
                t.record(x, y, bit(self.a[x]), bit(self.b[y])).expect("2x2");
            }
        }
        t
    }

    pub fn chsh(&self, signs: ChshSigns) -> f64 {
        chsh(&self.count_table(), signs).expect("all cells filled").value
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChshEnumeration {
    pub max_s: f64,
    pub argmax: Vec<LhvStrategy>,
}

pub fn enumerate_deterministic_chsh() -> ChshEnumeration {
    enumerate_deterministic_chsh_with(ChshSigns::STANDARD)
}

pub fn enumerate_deterministic_chsh_with(signs: ChshSigns) -> ChshEnumeration {
    let scored: Vec<(LhvStrategy, f64)> = LhvStrategy::all()
        .into_iter()
        .map(|s| (s, s.chsh(signs)))
        .collect();
    let max_s = scored.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let argmax = scored
        .into_iter()
        .filter(|p| p.1 == max_s)
        .map(|p| p.0)
        .collect();
    ChshEnumeration { max_s, argmax }
}

/// Per-hidden-variable integrand of the factorized time-bin functional
/// for one bin, with `pa = P(i_A|a)`, `pb = P(i_B|b)`, `pap = P(i_A|a')`,
/// `pbp = P(i_B|b')`.
pub fn timebin_bracket(pa: f64, pb: f64, pap: f64, pbp: f64) -> f64 {
    pa * pb - pap * pbp - pb + pb * pap - pa + pa * pbp
}

/// A factorized time-bin model: a finite mixture of hidden states, each
/// fixing every party's distribution over `{no detection, bin 1..n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTimeBinModel {
    n_bins: usize,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
    /// `alice[lambda][x][k]`, `k = 0` is no detection.
    alice: Vec<[Vec<f64>; 2]>,
    bob: Vec<[Vec<f64>; 2]>,
}

fn check_dist(d: &[f64], n_bins: usize) -> Result<()> {
    if d.len() != n_bins + 1 {
        return Err(LhvError::Config(format!(
            "bin distribution has {} entries, expected {}",
            d.len(),
            n_bins + 1
        )));
    }
    if d.iter().any(|p| !(0.0..=1.0).contains(p)) || (d.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(LhvError::Config("bin distribution is not a probability vector".into()));
    }
    Ok(())
}

impl LocalTimeBinModel {
    pub fn new(
        n_bins: usize,
        weights: Vec<f64>,
        alice: Vec<[Vec<f64>; 2]>,
        bob: Vec<[Vec<f64>; 2]>,
    ) -> Result<Self> {
        if weights.is_empty() || weights.len() != alice.len() || weights.len() != bob.len() {
            return Err(LhvError::Config("weights and local distributions differ in length".into()));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| *w < 0.0) || !(total > 0.0) {
            return Err(LhvError::Config("weights must be nonnegative with positive sum".into()));
        }
        for d in alice.iter().chain(&bob).flatten() {
            check_dist(d, n_bins)?;
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(Self {
            n_bins,
            weights,
            cumulative,
            alice,
            bob,
        })
    }

    /// Random mixture of `n_lambda` hidden states.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, n_lambda: usize, n_bins: usize) -> Self {
        let dist = |rng: &mut R| {
            let raw: Vec<f64> = (0..=n_bins).map(|_| rng.random::<f64>().powi(3)).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / s).collect::<Vec<_>>()
        };
        let mut alice = Vec::with_capacity(n_lambda);
        let mut bob = Vec::with_capacity(n_lambda);
        let mut weights = Vec::with_capacity(n_lambda);
        for _ in 0..n_lambda {
            weights.push(rng.random::<f64>() + 1e-3);
            alice.push([dist(rng), dist(rng)]);
            bob.push([dist(rng), dist(rng)]);
        }
        Self::new(n_bins, weights, alice, bob).expect("valid by construction")
    }

    /// Hidden polarization model: each trial carries a polarization angle
    /// (uniform on `n_angles` points of `[0, pi)`) and at most one photon
    /// pair in a uniformly chosen pulse. A party detects in that pulse's
    /// bin with probability `eta cos^2(angle - lambda)`.
    pub fn malus(
        n_angles: usize,
        n_bins: usize,
        pair_probability: f64,
        eta: f64,
        angles_a: [f64; 2],
        angles_b: [f64; 2],
    ) -> Result<Self> {
        if n_angles == 0 || n_bins == 0 {
            return Err(LhvError::Config("need at least one angle and one bin".into()));
        }
        let p_any = 1.0 - (1.0 - pair_probability).powi(n_bins as i32);
        let side = |angles: [f64; 2], lambda: f64, bin: Option<usize>| {
            angles.map(|t| {
                let mut d = vec![0.0; n_bins + 1];
                match bin {
                    Some(i) => {
                        let p = eta * (t - lambda).cos().powi(2);
                        d[i] = p;
                        d[0] = 1.0 - p;
                    }
                    None => d[0] = 1.0,
                }
                d
            })
        };
        let (mut weights, mut alice, mut bob) = (Vec::new(), Vec::new(), Vec::new());
        for k in 0..n_angles {
            let lambda = std::f64::consts::PI * k as f64 / n_angles as f64;
            weights.push((1.0 - p_any) / n_angles as f64);
            alice.push(side(angles_a, lambda, None));
            bob.push(side(angles_b, lambda, None));
            for i in 1..=n_bins {
                weights.push(p_any / (n_angles * n_bins) as f64);
                alice.push(side(angles_a, lambda, Some(i)));
                bob.push(side(angles_b, lambda, Some(i)));
            }
        }
        Self::new(n_bins, weights, alice, bob)
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    /// Exact value of each K term from the factorized probabilities.
    pub fn term_probabilities(&self) -> [f64; 6] {
        let mut out = [0.0; 6];
        for (l, w) in self.weights.iter().enumerate() {
            for term in TimeBinTerm::ALL {
                let (x, y) = term.settings();
                let pa = &self.alice[l][x as usize];
                let pb = &self.bob[l][y as usize];
                let mut p = 0.0;
                for i in 0..=self.n_bins {
                    for j in 0..=self.n_bins {
                        let o = TimeBinOutcome::from_indices(i, j);
                        if classify_timebin(x, y, o) == Some(term) {
                            p += pa[i] * pb[j];
                        }
                    }
                }
                out[term.index()] += w * p;
            }
        }
        out
    }

    /// `K` computed term by term.
    pub fn k_value(&self) -> f64 {
        TimeBinTerm::ALL
            .iter()
            .zip(self.term_probabilities())
            .map(|(t, p)| t.sign() * p)
            .sum()
    }

    /// `K` as the weighted sum of per-bin brackets.
    pub fn k_from_brackets(&self) -> f64 {
        let mut k = 0.0;
        for (l, w) in self.weights.iter().enumerate() {
            let (a, b) = (&self.alice[l], &self.bob[l]);
            for i in 1..=self.n_bins {
                k += w * timebin_bracket(a[0][i], b[0][i], a[1][i], b[1][i]);
            }
        }
        k
    }

    pub fn sample<R: Rng + ?Sized>(&self, x: u8, y: u8, rng: &mut R) -> TimeBinOutcome {
        let u: f64 = rng.random();
        let l = self.cumulative.partition_point(|c| *c <= u).min(self.weights.len() - 1);
        let draw = |d: &[f64], rng: &mut R| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (k, p) in d.iter().enumerate() {
                acc += p;
                if u < acc {
                    return k;
                }
            }
            0
        };
        let i = draw(&self.alice[l][x as usize & 1], rng);
        let j = draw(&self.bob[l][y as usize & 1], rng);
        TimeBinOutcome::from_indices(i, j)
    }
}
