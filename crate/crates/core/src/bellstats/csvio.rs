//! CSV readers and writers for the count tables.
//!
//! Outcomes are written as `+1`/`-1`; settings as 0-based indices.
//!
//! * two-party: `setting_x,setting_y,outcome_a,outcome_b,count`
//! * three-party: `setting_x,setting_y,setting_z,outcome_a,outcome_b,outcome_c,count`
//! * time-bin: `term,events,trials`
//! * correlators: `setting_x,setting_y,correlator[,trials]`

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CountTable, StatsError, TermCount, TimeBinCounts, TimeBinTerm, TriCountTable};

#[derive(Debug, Error)]
pub enum CsvError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("row {row}: {reason}")]
    Row { row: usize, reason: String },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

pub type Result<T> = std::result::Result<T, CsvError>;

fn outcome_bit(v: i8, row: usize) -> Result<u8> {
    match v {
        1 => Ok(0),
        -1 => Ok(1),
        _ => Err(CsvError::Row {
            row,
            reason: format!("outcome {v} is not +1 or -1"),
        }),
    }
}

fn outcome_value(bit: u8) -> i8 {
    if bit == 0 {
        1
    } else {
        -1
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PairRow {
    setting_x: usize,
    setting_y: usize,
    outcome_a: i8,
    outcome_b: i8,
    count: u64,
}

/// Reads a two-party table; its size is the largest setting index plus
/// one, and at least 2x2.
pub fn read_count_table<R: Read>(reader: R) -> Result<CountTable> {
    let mut rows = Vec::new();
    for (i, rec) in csv::Reader::from_reader(reader).deserialize().enumerate() {
        let r: PairRow = rec?;
        let a = outcome_bit(r.outcome_a, i + 1)?;
        let b = outcome_bit(r.outcome_b, i + 1)?;
        rows.push((r.setting_x, r.setting_y, a, b, r.count));
    }
    let na = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0).max(2);
    let nb = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0).max(2);
    let mut t = CountTable::new(na, nb);
    for (x, y, a, b, n) in rows {
        t.add(x, y, a, b, n)?;
    }
    Ok(t)
}

pub fn write_count_table<W: Write>(writer: W, table: &CountTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (x, y, a, b, count) in table.entries() {
        w.serialize(PairRow {
            setting_x: x,
            setting_y: y,
            outcome_a: outcome_value(a),
            outcome_b: outcome_value(b),
            count,
        })?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct TriRow {
    setting_x: u8,
    setting_y: u8,
    setting_z: u8,
    outcome_a: i8,
    outcome_b: i8,
    outcome_c: i8,
    count: u64,
}

pub fn read_tri_table<R: Read>(reader: R) -> Result<TriCountTable> {
    let mut t = TriCountTable::new();
    for (i, rec) in csv::Reader::from_reader(reader).deserialize().enumerate() {
        let r: TriRow = rec?;
        let row = i + 1;
        if r.setting_x > 1 || r.setting_y > 1 || r.setting_z > 1 {
            return Err(CsvError::Row {
                row,
                reason: "three-party settings must be 0 or 1".into(),
            });
        }
        let o = (
            outcome_bit(r.outcome_a, row)?,
            outcome_bit(r.outcome_b, row)?,
            outcome_bit(r.outcome_c, row)?,
        );
        t.add((r.setting_x, r.setting_y, r.setting_z), o, r.count);
    }
    Ok(t)
}

pub fn write_tri_table<W: Write>(writer: W, table: &TriCountTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for ((x, y, z), (a, b, c), count) in table.entries() {
        w.serialize(TriRow {
            setting_x: x,
            setting_y: y,
            setting_z: z,
            outcome_a: outcome_value(a),
            outcome_b: outcome_value(b),
            outcome_c: outcome_value(c),
            count,
        })?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct TermRow {
    term: String,
    events: u64,
    trials: u64,
}

/// Reads all six terms; missing or repeated terms are errors.
pub fn read_timebin<R: Read>(reader: R, n_bins: usize) -> Result<TimeBinCounts> {
    let mut t = TimeBinCounts::new(n_bins);
    let mut seen = [false; 6];
    for (i, rec) in csv::Reader::from_reader(reader).deserialize().enumerate() {
        let r: TermRow = rec?;
        let row = i + 1;
        let term = TimeBinTerm::from_name(r.term.trim()).ok_or_else(|| CsvError::Row {
            row,
            reason: format!("unknown term {:?}", r.term),
        })?;
        if std::mem::replace(&mut seen[term.index()], true) {
            return Err(CsvError::Row {
                row,
                reason: format!("term {} repeated", term.name()),
            });
        }
        *t.term_mut(term) = TermCount {
            events: r.events,
            trials: r.trials,
        };
    }
    if let Some(missing) = TimeBinTerm::ALL.iter().find(|t| !seen[t.index()]) {
        return Err(CsvError::Stats(StatsError::NoData(format!(
            "term {} missing",
            missing.name()
        ))));
    }
    t.validate()?;
    Ok(t)
}

pub fn write_timebin<W: Write>(writer: W, counts: &TimeBinCounts) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for term in TimeBinTerm::ALL {
        let c = counts.term(term);
        w.serialize(TermRow {
            term: term.name().to_string(),
            events: c.events,
            trials: c.trials,
        })?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorRow {
    pub setting_x: usize,
    pub setting_y: usize,
    pub correlator: f64,
    #[serde(default)]
    pub trials: Option<u64>,
}

pub fn read_correlators<R: Read>(reader: R) -> Result<Vec<CorrelatorRow>> {
    let mut out = Vec::new();
    for (i, rec) in csv::Reader::from_reader(reader).deserialize().enumerate() {
        let r: CorrelatorRow = rec?;
        if !(-1.0..=1.0).contains(&r.correlator) {
            return Err(CsvError::Row {
                row: i + 1,
                reason: format!("correlator {} outside [-1, 1]", r.correlator),
            });
        }
        out.push(r);
    }
    Ok(out)
}

/// Arranges rows into `[E00, E01, E10, E11]`; trials are returned only if
/// every row has them.
pub fn chsh_correlators(rows: &[CorrelatorRow]) -> Result<([f64; 4], Option<[u64; 4]>)> {
    let mut e = [None; 4];
    let mut n = [None; 4];
    for (i, r) in rows.iter().enumerate() {
        if r.setting_x > 1 || r.setting_y > 1 {
            return Err(CsvError::Row {
                row: i + 1,
                reason: "CHSH settings must be 0 or 1".into(),
            });
        }
        let k = 2 * r.setting_x + r.setting_y;
        if e[k].replace(r.correlator).is_some() {
            return Err(CsvError::Row {
                row: i + 1,
                reason: format!("setting ({},{}) repeated", r.setting_x, r.setting_y),
            });
        }
        n[k] = r.trials;
    }
    let mut out = [0.0; 4];
    for (k, v) in e.iter().enumerate() {
        out[k] = v.ok_or_else(|| StatsError::NoData(format!("({},{})", k / 2, k % 2)))?;
    }
    let trials = n.iter().all(Option::is_some).then(|| n.map(|v| v.unwrap()));
    Ok((out, trials))
}

pub fn write_correlators<W: Write>(writer: W, rows: &[CorrelatorRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
