use serde::{Deserialize, Serialize};

use crate::lhv::MarkovBits;

/// Pre-recorded bits used when live input runs short. Regenerated from
/// `(seed, len)` so replays need only the header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchiveReservoir {
    seed: u64,
    bits: Vec<u8>,
    cursor: usize,
}

impl ArchiveReservoir {
    /// Bits from the calibrated human source.
    pub fn generate(seed: u64, len: usize) -> Self {
        let bits = MarkovBits::human().stream(seed).take(len).collect();
        Self { seed, bits, cursor: 0 }
    }

    pub fn empty() -> Self {
        Self::generate(0, 0)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn remaining(&self) -> usize {
        self.bits.len() - self.cursor
    }

    /// Up to `n` bits with the archive index of the first.
    pub fn take(&mut self, n: usize) -> (usize, &[u8]) {
        let start = self.cursor;
        let end = (start + n).min(self.bits.len());
        self.cursor = end;
        (start, &self.bits[start..end])
    }
}
