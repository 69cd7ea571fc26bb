//! The Oracle: an online Markov-chain model of one player's bit stream.
//!
//! For every context length `L` in `1..=l_max` the state keeps the number of
//! times each `L`-bit word was followed by a `0` and by a `1`. A prediction
//! looks at the last `L` bits of the stream for every usable `L`, turns the
//! counts into empirical conditional frequencies
//!
//! ```text
//! f_L(x | w) = #(w followed by x) / #(w followed by anything)
//! ```
//!
//! and predicts the bit with the largest frequency over all `L`. Only
//! windows that already have a successor enter the denominator, so the
//! current tail occurrence of `w` is never counted.
//!
//! Ties are broken deterministically: a larger frequency wins, then the
//! longer context, then bit `0`.

use std::cmp::Ordering;
use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Context-length cap used by the game.
pub const DEFAULT_L_MAX: usize = 3;

/// Largest supported context length; count tables grow as `2^L`.
pub const MAX_L_MAX: usize = 16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PredictorError {
    #[error("l_max must be in 1..={MAX_L_MAX}, got {0}")]
    InvalidLMax(usize),
    #[error("not a bit: {0:?}")]
    NotABit(char),
    #[error("malformed state record at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

/// Transition counts for context lengths `1..=l_max` plus the history tail.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictorState {
    l_max: usize,
    /// `counts[L - 1][word][next]`, word packed oldest bit first.
    counts: Vec<Vec<[u64; 2]>>,
    tail: VecDeque<u8>,
    seen: u64,
}

/// The Oracle's guess for the next bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub bit: u8,
    /// Empirical frequency of the winning `(L, bit)` pair.
    pub confidence: f64,
    /// Context length that produced the maximum, `0` on cold start.
    pub context_length: usize,
}

impl Prediction {
    const COLD_START: Prediction = Prediction {
        bit: 0,
        confidence: 0.5,
        context_length: 0,
    };
}

/// Outcome of replaying a whole sequence against a fresh Oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionScore {
    pub total: u64,
    pub unpredicted: u64,
    /// `(total - unpredicted) / total`, or `0.5` for an empty session.
    pub accuracy: f64,
}

impl SessionScore {
    /// Fraction of bits the Oracle failed to guess.
    pub fn unpredictability(&self) -> f64 {
        if self.total == 0 {
            0.5
        } else {
            self.unpredicted as f64 / self.total as f64
        }
    }
}

impl Default for PredictorState {
    fn default() -> Self {
        Self::new(DEFAULT_L_MAX).expect("default l_max is valid")
    }
}

impl PredictorState {
    pub fn new(l_max: usize) -> Result<Self, PredictorError> {
        if !(1..=MAX_L_MAX).contains(&l_max) {
            return Err(PredictorError::InvalidLMax(l_max));
        }
        let counts = (1..=l_max).map(|len| vec![[0u64; 2]; 1 << len]).collect();
        Ok(Self {
            l_max,
            counts,
            tail: VecDeque::with_capacity(l_max),
            seen: 0,
        })
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    /// Total bits observed.
    pub fn seen(&self) -> u64 {
        self.seen
    }

    /// The last `min(seen, l_max)` bits, oldest first.
    pub fn tail(&self) -> impl Iterator<Item = u8> + '_ {
        self.tail.iter().copied()
    }

    /// Count of `context` followed by `next`. `context` holds the bits of
    /// the word oldest first; its length selects `L`.
    pub fn count(&self, context: &[u8], next: u8) -> u64 {
        let len = context.len();
        if len == 0 || len > self.l_max || next > 1 {
            return 0;
        }
        let word = pack(context.iter().copied());
        self.counts[len - 1][word][next as usize]
    }

    /// Every nonzero count as `(L, word, next, count)`, ordered by `L`, word, next.
    pub fn nonzero_counts(&self) -> impl Iterator<Item = (usize, usize, u8, u64)> + '_ {
        self.counts.iter().enumerate().flat_map(|(i, table)| {
            table.iter().enumerate().flat_map(move |(word, pair)| {
                (0..2u8).filter_map(move |next| {
                    let c = pair[next as usize];
                    (c > 0).then_some((i + 1, word, next, c))
                })
            })
        })
    }

    /// Packed word formed by the last `len` tail bits.
    fn tail_word(&self, len: usize) -> usize {
        pack(self.tail.iter().skip(self.tail.len() - len).copied())
    }

    /// Feeds one bit. Any nonzero value counts as `1`.
    pub fn observe(&mut self, bit: u8) {
        let bit = (bit != 0) as u8;
        let usable = self.tail.len();
        for len in 1..=usable {
            let word = self.tail_word(len);
            self.counts[len - 1][word][bit as usize] += 1;
        }
        if self.tail.len() == self.l_max {
            self.tail.pop_front();
        }
        self.tail.push_back(bit);
        self.seen += 1;
    }

    pub fn observe_all(&mut self, bits: impl IntoIterator<Item = u8>) {
        for b in bits {
            self.observe(b);
        }
    }

    pub fn predict(&self) -> Prediction {
        // (numerator, denominator, L, bit)
        let mut best: Option<(u64, u64, usize, u8)> = None;
        for len in 1..=self.tail.len() {
            let pair = self.counts[len - 1][self.tail_word(len)];
            let denom = pair[0] + pair[1];
            if denom == 0 {
                continue;
            }
            for bit in 0..2u8 {
                let cand = (pair[bit as usize], denom, len, bit);
                if best.is_none_or(|b| beats(cand, b)) {
                    best = Some(cand);
                }
            }
        }
        match best {
            None => Prediction::COLD_START,
            Some((num, denom, len, bit)) => Prediction {
                bit,
                confidence: num as f64 / denom as f64,
                context_length: len,
            },
        }
    }

    /// Prediction followed by observation, as the game does per keypress.
    /// Returns whether the Oracle guessed `bit`.
    pub fn step(&mut self, bit: u8) -> bool {
        let hit = self.predict().bit == (bit != 0) as u8;
        self.observe(bit);
        hit
    }
}

/// Whether candidate `a` displaces the current best `b`.
fn beats(a: (u64, u64, usize, u8), b: (u64, u64, usize, u8)) -> bool {
    let lhs = a.0 as u128 * b.1 as u128;
    let rhs = b.0 as u128 * a.1 as u128;
    match lhs.cmp(&rhs) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => match a.2.cmp(&b.2) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => a.3 < b.3,
        },
    }
}

fn pack(bits: impl Iterator<Item = u8>) -> usize {
    bits.fold(0usize, |w, b| (w << 1) | b as usize)
}

fn unpack(word: usize, len: usize) -> String {
    (0..len)
        .rev()
        .map(|i| if (word >> i) & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Replays `bits` through a fresh default Oracle, predicting before each
/// observation.
pub fn score_session(bits: &[u8]) -> SessionScore {
    let mut state = PredictorState::default();
    score_with(&mut state, bits)
}

/// Like [`score_session`] but continues from an existing state.
pub fn score_with(state: &mut PredictorState, bits: &[u8]) -> SessionScore {
    let mut unpredicted = 0;
    for &b in bits {
        if !state.step(b) {
            unpredicted += 1;
        }
    }
    let total = bits.len() as u64;
    let accuracy = if total == 0 {
        0.5
    } else {
        (total - unpredicted) as f64 / total as f64
    };
    SessionScore {
        total,
        unpredicted,
        accuracy,
    }
}

/// Parses an ASCII `'0'`/`'1'` string.
pub fn parse_bits(s: &str) -> Result<Vec<u8>, PredictorError> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(PredictorError::NotABit(other)),
        })
        .collect()
}

/// Bits a player gets in the final Oracle battle.
pub const ORACLE_BUDGET: u64 = 30;
/// Unguessed bits needed to win it.
pub const ORACLE_TARGET: u64 = 20;

/// Chance of beating the final Oracle level when each bit escapes the
/// Oracle independently with probability `unguessed`.
pub fn oracle_pass_probability(unguessed: f64) -> f64 {
    crate::bellstats::binomial_upper_tail(ORACLE_BUDGET, ORACLE_TARGET, unguessed)
}

const RECORD_HEADER: &str = "predictor-state v1";

/// Text record:
///
/// ```text
/// predictor-state v1
/// l_max 3
/// seen 7
/// tail 010
/// count 1 0 1 3
/// count 2 01 0 2
/// ```
///
/// `count` lines are `L context next count`, one per nonzero count.
impl fmt::Display for PredictorState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{RECORD_HEADER}")?;
        writeln!(f, "l_max {}", self.l_max)?;
        writeln!(f, "seen {}", self.seen)?;
        let tail: String = self.tail.iter().map(|b| if *b == 1 { '1' } else { '0' }).collect();
        writeln!(f, "tail {tail}")?;
        for (len, word, next, count) in self.nonzero_counts() {
            writeln!(f, "count {len} {} {next} {count}", unpack(word, len))?;
        }
        Ok(())
    }
}

impl FromStr for PredictorState {
    type Err = PredictorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |line: usize, reason: &str| PredictorError::Malformed {
            line,
            reason: reason.to_string(),
        };
        let mut lines = s.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        match lines.next() {
            Some((_, RECORD_HEADER)) => {}
            _ => return Err(bad(1, "missing header")),
        }
        let mut field = |name: &str| -> Result<(usize, String), PredictorError> {
            let (n, line) = lines.next().ok_or_else(|| bad(0, "truncated record"))?;
            let rest = line
                .strip_prefix(name)
                .and_then(|r| r.strip_prefix(' ').or(Some(r).filter(|r| r.is_empty())))
                .ok_or_else(|| bad(n, &format!("expected `{name}`")))?;
            Ok((n, rest.to_string()))
        };
        let (n, l_max) = field("l_max")?;
        let l_max: usize = l_max.parse().map_err(|_| bad(n, "bad l_max"))?;
        let mut state = PredictorState::new(l_max)?;
        let (n, seen) = field("seen")?;
        state.seen = seen.parse().map_err(|_| bad(n, "bad seen"))?;
        let (n, tail) = field("tail")?;
        let tail = parse_bits(&tail).map_err(|_| bad(n, "bad tail"))?;
        if tail.len() as u64 != state.seen.min(l_max as u64) {
            return Err(bad(n, "tail length must equal min(seen, l_max)"));
        }
        state.tail = tail.into_iter().collect();
        for (n, line) in lines {
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [kw, len, ctx, next, count] = parts[..] else {
                return Err(bad(n, "count line needs 4 fields"));
            };
            if kw != "count" {
                return Err(bad(n, "unknown keyword"));
            }
            let len: usize = len.parse().map_err(|_| bad(n, "bad L"))?;
            let ctx = parse_bits(ctx).map_err(|_| bad(n, "bad context"))?;
            if len == 0 || len > l_max || ctx.len() != len {
                return Err(bad(n, "context length out of range"));
            }
            let next: u8 = match next {
                "0" => 0,
                "1" => 1,
                _ => return Err(bad(n, "bad next bit")),
            };
            let count: u64 = count.parse().map_err(|_| bad(n, "bad count"))?;
            state.counts[len - 1][pack(ctx.into_iter())][next as usize] = count;
        }
        Ok(state)
    }
}
