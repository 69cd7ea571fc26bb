//! Synthetic bit sources standing in for human input.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LhvError, Result};

/// Zero bias of crowd-sourced bits.
pub const HUMAN_P0: f64 = 0.5237;
/// Fraction of adjacent pairs that differ in crowd-sourced bits.
pub const HUMAN_ALTERNATION: f64 = 0.6406;

/// Two-state Markov source with `alpha = P(0 -> 1)` and `beta = P(1 -> 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkovBits {
    pub alpha: f64,
    pub beta: f64,
}

impl MarkovBits {
    pub fn fair() -> Self {
        Self { alpha: 0.5, beta: 0.5 }
    }

    /// Chain whose stationary zero frequency is `p0` and whose adjacent
    /// pairs differ with probability `alternation`.
    pub fn calibrated(p0: f64, alternation: f64) -> Result<Self> {
        if !(0.0 < p0 && p0 < 1.0) {
            return Err(LhvError::Config(format!("p0 = {p0} outside (0, 1)")));
        }
        // Stationary flow balance: P(01) = P(10) = alternation / 2.
        let alpha = alternation / (2.0 * p0);
        let beta = alternation / (2.0 * (1.0 - p0));
        if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&beta) {
            return Err(LhvError::Config(format!(
                "no Markov chain has p0 = {p0} and alternation = {alternation}"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn human() -> Self {
        Self::calibrated(HUMAN_P0, HUMAN_ALTERNATION).expect("reachable targets")
    }

    pub fn stationary_p0(&self) -> f64 {
        if self.alpha + self.beta == 0.0 {
            return 0.5;
        }
        self.beta / (self.alpha + self.beta)
    }

    pub fn alternation(&self) -> f64 {
        2.0 * self.stationary_p0() * self.alpha
    }

    /// A chain whose first state is drawn from the stationary law.
    pub fn start<R: Rng + ?Sized>(&self, rng: &mut R) -> MarkovChain {
        let state = u8::from(rng.random::<f64>() >= self.stationary_p0());
        MarkovChain {
            model: *self,
            state,
            fresh: true,
        }
    }

    pub fn stream(&self, seed: u64) -> MarkovStream {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chain = self.start(&mut rng);
        MarkovStream { chain, rng }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MarkovChain {
    model: MarkovBits,
    state: u8,
    fresh: bool,
}

impl MarkovChain {
    pub fn next_bit<R: Rng + ?Sized>(&mut self, rng: &mut R) -> u8 {
        if std::mem::take(&mut self.fresh) {
            return self.state;
        }
        let flip = if self.state == 0 { self.model.alpha } else { self.model.beta };
        if rng.random::<f64>() < flip {
            self.state ^= 1;
        }
        self.state
    }
}

/// Seeded infinite bit iterator.
#[derive(Debug, Clone)]
pub struct MarkovStream {
    chain: MarkovChain,
    rng: ChaCha8Rng,
}

impl Iterator for MarkovStream {
    type Item = u8;

    fn next(&mut self) -> Option<u8> {
        Some(self.chain.next_bit(&mut self.rng))
    }
}
