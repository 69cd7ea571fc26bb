use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{outcome_sign, BellResult, CountTable, Result, StatsError, Violation};

pub const CHSH_LOCAL_BOUND: f64 = 2.0;

/// `E(x, y) = sum (-1)^(a+b) N(a,b|x,y) / N(x,y)`.
pub fn correlator(table: &CountTable, x: usize, y: usize) -> Result<f64> {
    let cell = table.cell(x, y)?;
    let n: u64 = cell.iter().sum();
    if n == 0 {
        return Err(StatsError::NoData(format!("({x},{y})")));
    }
    let signed: f64 = (0..4)
        .map(|k| outcome_sign((k >> 1) as u8) * outcome_sign((k & 1) as u8) * cell[k] as f64)
        .sum();
    Ok(signed / n as f64)
}

/// Standard error of a correlator estimated from `n` i.i.d. trials: the
/// product outcome is `+-1`, so its variance is `1 - E^2`.
pub fn correlator_stderr(e: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    ((1.0 - e * e).max(0.0) / n as f64).sqrt()
}

/// Coefficients of the four correlators, cells ordered
/// `(0,0), (0,1), (1,0), (1,1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshSigns(pub [i8; 4]);

impl ChshSigns {
    /// `E00 + E01 + E10 - E11`.
    pub const STANDARD: ChshSigns = ChshSigns([1, 1, 1, -1]);

    pub fn new(signs: [i8; 4]) -> Result<Self> {
        if signs.iter().any(|s| *s != 1 && *s != -1) {
            return Err(StatsError::Invalid(format!("CHSH signs must be +-1: {signs:?}")));
        }
        Ok(Self(signs))
    }

    /// The CHSH form (odd number of minus signs) maximizing `sum s_i E_i`
    /// for the given ideal correlators. Meant for choosing a lab's form
    /// before data is taken.
    pub fn best_for(correlators: [f64; 4]) -> Self {
        let mut best = (f64::NEG_INFINITY, Self::STANDARD);
        for mask in 0u8..16 {
            if mask.count_ones() % 2 == 0 {
                continue;
            }
            let signs: [i8; 4] = std::array::from_fn(|i| if mask >> i & 1 == 1 { -1 } else { 1 });
            let s: f64 = (0..4).map(|i| signs[i] as f64 * correlators[i]).sum();
            if s > best.0 + 1e-12 {
                best = (s, Self(signs));
            }
        }
        best.1
    }
}

impl Default for ChshSigns {
    fn default() -> Self {
        Self::STANDARD
    }
}

impl fmt::Display for ChshSigns {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<&str> = self.0.iter().map(|s| if *s > 0 { "+" } else { "-" }).collect();
        write!(f, "{}", s.join(","))
    }
}

impl FromStr for ChshSigns {
    type Err = StatsError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<i8> = s
            .split(',')
            .map(|p| match p.trim() {
                "+" | "+1" | "1" => Ok(1),
                "-" | "-1" => Ok(-1),
                other => Err(StatsError::Invalid(format!("bad sign {other:?}"))),
            })
            .collect::<Result<_>>()?;
        let arr: [i8; 4] = parts
            .try_into()
            .map_err(|_| StatsError::Invalid("need exactly four signs".into()))?;
        Self::new(arr)
    }
}

/// CHSH value of a 2x2 count table. Standard error propagates the
/// per-cell correlator variances in quadrature (cells are independent
/// under the i.i.d. assumption).
pub fn chsh(table: &CountTable, signs: ChshSigns) -> Result<BellResult> {
    if table.n_settings_a() != 2 || table.n_settings_b() != 2 {
        return Err(StatsError::Shape(format!(
            "CHSH needs a 2x2 table, got {}x{}",
            table.n_settings_a(),
            table.n_settings_b()
        )));
    }
    let mut e = [0.0; 4];
    let mut n = [0u64; 4];
    for (i, (x, y)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
        e[i] = correlator(table, x, y)?;
        n[i] = table.trials(x, y);
    }
    Ok(chsh_from_correlators(e, signs, Some(n)))
}

/// CHSH from already-computed correlators. Without trial counts the
/// standard error is reported as zero and no sigma is produced.
pub fn chsh_from_correlators(e: [f64; 4], signs: ChshSigns, trials: Option<[u64; 4]>) -> BellResult {
    let value: f64 = (0..4).map(|i| signs.0[i] as f64 * e[i]).sum();
    let stderr = trials
        .map(|n| {
            (0..4)
                .map(|i| correlator_stderr(e[i], n[i]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .unwrap_or(0.0);
    BellResult::new(value, CHSH_LOCAL_BOUND, stderr, Violation::Above)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cell_table(cell: [u64; 4]) -> CountTable {
        let mut t = CountTable::chsh();
        for k in 0..4 {
            t.add(0, 0, (k >> 1) as u8, (k & 1) as u8, cell[k]).unwrap();
        }
        t
    }

    #[test]
    fn correlator_examples() {
        // cell order ++, +-, -+, --
        assert_eq!(correlator(&cell_table([50, 0, 0, 50]), 0, 0).unwrap(), 1.0);
        assert_eq!(correlator(&cell_table([7, 7, 7, 7]), 0, 0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            correlator(&cell_table([40, 15, 10, 35]), 0, 0).unwrap(),
            0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn correlator_no_data() {
        assert!(matches!(
            correlator(&CountTable::chsh(), 1, 1),
            Err(StatsError::NoData(_))
        ));
    }

    #[test]
    fn table_two_correlators() {
        let signs: ChshSigns = "+,-,-,-".parse().unwrap();
        let hrn = chsh_from_correlators([0.6520, -0.6947, -0.6592, -0.6329], signs, None);
        assert_abs_diff_eq!(hrn.value, 2.6388, epsilon = 1e-9);
        assert!((hrn.value - 2.6387).abs() < 1e-3);
        let qrn = chsh_from_correlators([0.6560, -0.6938, -0.6544, -0.6391], signs, None);
        assert!((qrn.value - 2.6434).abs() < 1e-3);
        assert_eq!(hrn.sigma, None);
    }

    #[test]
    fn tsirelson_value() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let s = chsh_from_correlators([r, r, r, -r], ChshSigns::STANDARD, None);
        assert_abs_diff_eq!(s.value, 2.0 * std::f64::consts::SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn stderr_by_quadrature() {
        let mut t = CountTable::chsh();
        for (x, y) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            t.add(x, y, 0, 0, 75).unwrap();
            t.add(x, y, 0, 1, 25).unwrap();
        }
        // each E = 0.5 from 100 trials: var = 0.75/100
        let r = chsh(&t, ChshSigns::STANDARD).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.stderr, (4.0 * 0.0075f64).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn signs_parsing_and_best_form() {
        assert!("+,+,+".parse::<ChshSigns>().is_err());
        assert!(ChshSigns::new([1, 0, 1, 1]).is_err());
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let best = ChshSigns::best_for([-r, r, -r, -r]);
        assert_eq!(best.to_string(), "-,+,-,-");
    }

    #[test]
    fn missing_cell_is_no_data() {
        let mut t = CountTable::chsh();
        t.add(0, 0, 0, 0, 3).unwrap();
        assert!(chsh(&t, ChshSigns::STANDARD).is_err());
        assert!(chsh(&CountTable::new(3, 2), ChshSigns::STANDARD).is_err());
    }
}
