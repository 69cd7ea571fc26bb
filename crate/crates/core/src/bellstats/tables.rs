use serde::{Deserialize, Serialize};

use super::{Result, StatsError};

/// Two-party event counts `N(a, b | x, y)` over binary outcomes.
///
/// Cells are indexed by setting pair; each cell holds four counts indexed
/// by `2 * a + b` with `a`, `b` as outcome bits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable {
    n_settings_a: usize,
    n_settings_b: usize,
    cells: Vec<[u64; 4]>,
}

impl CountTable {
    pub fn new(n_settings_a: usize, n_settings_b: usize) -> Self {
        Self {
            n_settings_a,
            n_settings_b,
            cells: vec![[0; 4]; n_settings_a * n_settings_b],
        }
    }

    /// Two settings per side.
    pub fn chsh() -> Self {
        Self::new(2, 2)
    }

    pub fn n_settings_a(&self) -> usize {
        self.n_settings_a
    }

    pub fn n_settings_b(&self) -> usize {
        self.n_settings_b
    }

    fn index(&self, x: usize, y: usize) -> Result<usize> {
        if x >= self.n_settings_a || y >= self.n_settings_b {
            return Err(StatsError::Shape(format!(
                "setting ({x},{y}) outside {}x{} table",
                self.n_settings_a, self.n_settings_b
            )));
        }
        Ok(x * self.n_settings_b + y)
    }

    pub fn add(&mut self, x: usize, y: usize, a: u8, b: u8, n: u64) -> Result<()> {
        let i = self.index(x, y)?;
        self.cells[i][outcome_index(a, b)] += n;
        Ok(())
    }

    pub fn record(&mut self, x: usize, y: usize, a: u8, b: u8) -> Result<()> {
        self.add(x, y, a, b, 1)
    }

    /// Panics if the setting is out of range.
    pub fn get(&self, x: usize, y: usize, a: u8, b: u8) -> u64 {
        self.cells[self.index(x, y).expect("setting in range")][outcome_index(a, b)]
    }

    pub fn cell(&self, x: usize, y: usize) -> Result<[u64; 4]> {
        Ok(self.cells[self.index(x, y)?])
    }

    pub fn trials(&self, x: usize, y: usize) -> u64 {
        self.index(x, y)
            .map(|i| self.cells[i].iter().sum())
            .unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// Empirical `p(a, b | x, y)`.
    pub fn conditional(&self, x: usize, y: usize, a: u8, b: u8) -> Result<f64> {
        let n = self.trials(x, y);
        if n == 0 {
            return Err(StatsError::NoData(format!("({x},{y})")));
        }
        Ok(self.get(x, y, a, b) as f64 / n as f64)
    }

    /// Multiplies every count by `k`.
    pub fn scaled(&self, k: u64) -> Self {
        let mut out = self.clone();
        for c in out.cells.iter_mut().flatten() {
            *c *= k;
        }
        out
    }

    pub fn merge(&mut self, other: &CountTable) -> Result<()> {
        if (self.n_settings_a, self.n_settings_b) != (other.n_settings_a, other.n_settings_b) {
            return Err(StatsError::Shape("cannot merge tables of different shape".into()));
        }
        for (c, o) in self.cells.iter_mut().zip(&other.cells) {
            for k in 0..4 {
                c[k] += o[k];
            }
        }
        Ok(())
    }

    /// `(x, y, a, b, count)` for every entry, zero counts included.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, u8, u8, u64)> + '_ {
        self.cells.iter().enumerate().flat_map(move |(i, cell)| {
            let (x, y) = (i / self.n_settings_b, i % self.n_settings_b);
            (0..4).map(move |k| (x, y, (k >> 1) as u8, (k & 1) as u8, cell[k]))
        })
    }
}

fn outcome_index(a: u8, b: u8) -> usize {
    2 * (a != 0) as usize + (b != 0) as usize
}

/// Three-party counts `N(a, b, c | x, y, z)`, binary settings and outcomes.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TriCountTable {
    /// `cells[4x + 2y + z][4a + 2b + c]`
    cells: [[u64; 8]; 8],
}

impl TriCountTable {
    pub fn new() -> Self {
        Self::default()
    }

    fn idx(x: u8, y: u8, z: u8) -> usize {
        4 * (x != 0) as usize + 2 * (y != 0) as usize + (z != 0) as usize
    }

    pub fn add(&mut self, settings: (u8, u8, u8), outcomes: (u8, u8, u8), n: u64) {
        let (x, y, z) = settings;
        let (a, b, c) = outcomes;
        self.cells[Self::idx(x, y, z)][Self::idx(a, b, c)] += n;
    }

    pub fn record(&mut self, settings: (u8, u8, u8), outcomes: (u8, u8, u8)) {
        self.add(settings, outcomes, 1);
    }

    pub fn get(&self, settings: (u8, u8, u8), outcomes: (u8, u8, u8)) -> u64 {
        let (x, y, z) = settings;
        let (a, b, c) = outcomes;
        self.cells[Self::idx(x, y, z)][Self::idx(a, b, c)]
    }

    pub fn trials(&self, x: u8, y: u8, z: u8) -> u64 {
        self.cells[Self::idx(x, y, z)].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }

    pub fn scaled(&self, k: u64) -> Self {
        let mut out = self.clone();
        for c in out.cells.iter_mut().flatten() {
            *c *= k;
        }
        out
    }

    /// `((x, y, z), (a, b, c), count)` for every entry.
    pub fn entries(&self) -> impl Iterator<Item = ((u8, u8, u8), (u8, u8, u8), u64)> + '_ {
        let split = |i: usize| ((i >> 2) as u8 & 1, (i >> 1) as u8 & 1, i as u8 & 1);
        self.cells.iter().enumerate().flat_map(move |(s, cell)| {
            cell.iter()
                .enumerate()
                .map(move |(o, &n)| (split(s), split(o), n))
        })
    }
}

/// The six terms of the time-bin K functional, in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TimeBinTerm {
    /// Same-bin coincidences at `(a, b)`; enters with `+`.
    SameBinAB,
    /// Same-bin coincidences at `(a', b')`.
    SameBinPrimedAPrimedB,
    /// Bob detects, Alice does not, at `(a', b)`.
    BobOnlyPrimedAB,
    /// Both detect in different bins at `(a', b)`.
    DiffBinPrimedAB,
    /// Alice detects, Bob does not, at `(a, b')`.
    AliceOnlyAPrimedB,
    /// Both detect in different bins at `(a, b')`.
    DiffBinAPrimedB,
}

impl TimeBinTerm {
    pub const ALL: [TimeBinTerm; 6] = [
        TimeBinTerm::SameBinAB,
        TimeBinTerm::SameBinPrimedAPrimedB,
        TimeBinTerm::BobOnlyPrimedAB,
        TimeBinTerm::DiffBinPrimedAB,
        TimeBinTerm::AliceOnlyAPrimedB,
        TimeBinTerm::DiffBinAPrimedB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TimeBinTerm::SameBinAB => "same_bin_ab",
            TimeBinTerm::SameBinPrimedAPrimedB => "same_bin_a'b'",
            TimeBinTerm::BobOnlyPrimedAB => "bob_only_a'b",
            TimeBinTerm::DiffBinPrimedAB => "diff_bin_a'b",
            TimeBinTerm::AliceOnlyAPrimedB => "alice_only_ab'",
            TimeBinTerm::DiffBinAPrimedB => "diff_bin_ab'",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == s)
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|t| *t == self).unwrap()
    }

    /// Setting bits `(x, y)` the term is measured at; `0` is unprimed.
    pub fn settings(self) -> (u8, u8) {
        match self {
            TimeBinTerm::SameBinAB => (0, 0),
            TimeBinTerm::SameBinPrimedAPrimedB => (1, 1),
            TimeBinTerm::BobOnlyPrimedAB | TimeBinTerm::DiffBinPrimedAB => (1, 0),
            TimeBinTerm::AliceOnlyAPrimedB | TimeBinTerm::DiffBinAPrimedB => (0, 1),
        }
    }

    /// `+1` for the single positive term.
    pub fn sign(self) -> f64 {
        if self == TimeBinTerm::SameBinAB {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TermCount {
    pub events: u64,
    pub trials: u64,
}

/// Event and trial counts for the six K terms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeBinCounts {
    pub n_bins: usize,
    pub terms: [TermCount; 6],
}

impl TimeBinCounts {
    pub fn new(n_bins: usize) -> Self {
        Self {
            n_bins,
            terms: [TermCount::default(); 6],
        }
    }

    /// Builds from `(events, trials)` in [`TimeBinTerm::ALL`] order.
    pub fn from_arrays(n_bins: usize, events: [u64; 6], trials: [u64; 6]) -> Result<Self> {
        let mut t = Self::new(n_bins);
        for i in 0..6 {
            t.terms[i] = TermCount {
                events: events[i],
                trials: trials[i],
            };
        }
        t.validate()?;
        Ok(t)
    }

    pub fn term(&self, term: TimeBinTerm) -> TermCount {
        self.terms[term.index()]
    }

    pub fn term_mut(&mut self, term: TimeBinTerm) -> &mut TermCount {
        &mut self.terms[term.index()]
    }

    pub fn validate(&self) -> Result<()> {
        for t in TimeBinTerm::ALL {
            let c = self.term(t);
            if c.events > c.trials {
                return Err(StatsError::Invalid(format!(
                    "term {} has {} events in {} trials",
                    t.name(),
                    c.events,
                    c.trials
                )));
            }
        }
        Ok(())
    }

    pub fn total_trials(&self) -> u64 {
        // Terms sharing a setting pair report the same trials; count each pair once.
        let mut seen = std::collections::BTreeMap::new();
        for t in TimeBinTerm::ALL {
            seen.entry(t.settings()).or_insert(self.term(t).trials);
        }
        seen.values().sum()
    }

    pub fn scaled(&self, k: u64) -> Self {
        let mut out = self.clone();
        for t in out.terms.iter_mut() {
            t.events *= k;
            t.trials *= k;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_table_indexing() {
        let mut t = CountTable::chsh();
        t.add(1, 0, 1, 0, 5).unwrap();
        t.record(1, 0, 0, 0).unwrap();
        assert_eq!(t.get(1, 0, 1, 0), 5);
        assert_eq!(t.trials(1, 0), 6);
        assert_eq!(t.trials(0, 0), 0);
        assert!(t.add(2, 0, 0, 0, 1).is_err());
        assert_eq!(t.entries().count(), 16);
        assert_eq!(t.entries().map(|e| e.4).sum::<u64>(), 6);
    }

    #[test]
    fn tri_table_entries() {
        let mut t = TriCountTable::new();
        t.record((1, 0, 1), (0, 1, 1));
        assert_eq!(t.get((1, 0, 1), (0, 1, 1)), 1);
        assert_eq!(t.trials(1, 0, 1), 1);
        let e: Vec<_> = t.entries().filter(|e| e.2 > 0).collect();
        assert_eq!(e, vec![((1, 0, 1), (0, 1, 1), 1)]);
    }

    #[test]
    fn timebin_validation() {
        assert!(TimeBinCounts::from_arrays(15, [2, 0, 0, 0, 0, 0], [1, 1, 1, 1, 1, 1]).is_err());
        let t = TimeBinCounts::from_arrays(15, [0; 6], [10, 20, 30, 30, 40, 40]).unwrap();
        assert_eq!(t.total_trials(), 100);
        for term in TimeBinTerm::ALL {
            assert_eq!(TimeBinTerm::from_name(term.name()), Some(term));
        }
    }
}
