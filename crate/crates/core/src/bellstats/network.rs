//! Steering and bilocality parameters.

use super::chsh::{correlator, correlator_stderr};
use super::{outcome_sign, BellResult, CountTable, Result, StatsError, TriCountTable, Violation};

/// Steering bound for sixteen measurement settings.
pub const STEERING_C16: f64 = 0.511;
pub const BILOCAL_BOUND: f64 = 1.0;

const STEERING_SETTINGS: usize = 16;

fn check_correlators(correlators: &[f64]) -> Result<()> {
    if correlators.len() != STEERING_SETTINGS {
        return Err(StatsError::Shape(format!(
            "steering needs {STEERING_SETTINGS} correlators, got {}",
            correlators.len()
        )));
    }
    if let Some(bad) = correlators.iter().find(|c| !(-1.0..=1.0).contains(*c)) {
        return Err(StatsError::Invalid(format!("correlator {bad} outside [-1, 1]")));
    }
    Ok(())
}

/// `S16 = (1/16) sum_k <A_k sigma_k>` with no error estimate.
pub fn steering_s16(correlators: &[f64]) -> Result<BellResult> {
    steering_s16_with_stderr(correlators, 0.0)
}

pub fn steering_s16_with_stderr(correlators: &[f64], stderr: f64) -> Result<BellResult> {
    check_correlators(correlators)?;
    let value = correlators.iter().sum::<f64>() / STEERING_SETTINGS as f64;
    Ok(BellResult::new(value, STEERING_C16, stderr, Violation::Above))
}

/// S16 from a 16x16 table; only matching settings `(k, k)` enter.
pub fn steering_from_counts(table: &CountTable) -> Result<BellResult> {
    if table.n_settings_a() != STEERING_SETTINGS || table.n_settings_b() != STEERING_SETTINGS {
        return Err(StatsError::Shape(format!(
            "steering needs a 16x16 table, got {}x{}",
            table.n_settings_a(),
            table.n_settings_b()
        )));
    }
    let mut corr = Vec::with_capacity(STEERING_SETTINGS);
    let mut var = 0.0;
    for k in 0..STEERING_SETTINGS {
        let e = correlator(table, k, k)?;
        var += correlator_stderr(e, table.trials(k, k)).powi(2);
        corr.push(e);
    }
    let stderr = var.sqrt() / STEERING_SETTINGS as f64;
    steering_s16_with_stderr(&corr, stderr)
}

/// `<A_x B_y C_z> = sum (-1)^(a+b+c) p(abc|xyz)`.
pub fn tripartite_correlator(tri: &TriCountTable, x: u8, y: u8, z: u8) -> Result<f64> {
    let n = tri.trials(x, y, z);
    if n == 0 {
        return Err(StatsError::NoData(format!("({x},{y},{z})")));
    }
    let mut s = 0.0;
    for a in 0..2u8 {
        for b in 0..2u8 {
            for c in 0..2u8 {
                let sign = outcome_sign(a) * outcome_sign(b) * outcome_sign(c);
                s += sign * tri.get((x, y, z), (a, b, c)) as f64;
            }
        }
    }
    Ok(s / n as f64)
}

/// `B = sqrt|I| + sqrt|J|`.
pub fn bilocal_parameter(i: f64, j: f64) -> f64 {
    i.abs().sqrt() + j.abs().sqrt()
}

/// Bilocality parameter with
/// `I = (1/4) sum_{x,z} <A_x B_0 C_z>` and
/// `J = (1/4) sum_{x,z} (-1)^(x+z) <A_x B_1 C_z>`.
pub fn bilocality(tri: &TriCountTable) -> Result<BellResult> {
    let mut i_sum = 0.0;
    let mut j_sum = 0.0;
    let mut var_i = 0.0;
    let mut var_j = 0.0;
    for x in 0..2u8 {
        for z in 0..2u8 {
            let c0 = tripartite_correlator(tri, x, 0, z)?;
            let c1 = tripartite_correlator(tri, x, 1, z)?;
            let sign = if (x + z) % 2 == 0 { 1.0 } else { -1.0 };
            i_sum += c0;
            j_sum += sign * c1;
            var_i += correlator_stderr(c0, tri.trials(x, 0, z)).powi(2);
            var_j += correlator_stderr(c1, tri.trials(x, 1, z)).powi(2);
        }
    }
    let (i, j) = (i_sum / 4.0, j_sum / 4.0);
    let (var_i, var_j) = (var_i / 16.0, var_j / 16.0);
    let value = bilocal_parameter(i, j);
    let stderr = (sqrt_term_variance(i, var_i) + sqrt_term_variance(j, var_j)).sqrt();
    Ok(BellResult::new(value, BILOCAL_BOUND, stderr, Violation::Above))
}

/// Variance of `sqrt|v|` by the delta method; at `v = 0` the derivative
/// diverges and the spread of `sqrt|v|` is of order `var^(1/4)`.
fn sqrt_term_variance(v: f64, var: f64) -> f64 {
    if v.abs() < 1e-12 {
        var.sqrt()
    } else {
        var / (4.0 * v.abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn s16_examples() {
        let r = steering_s16(&[1.0; 16]).unwrap();
        assert_eq!(r.value, 1.0);
        let r = steering_s16(&[0.511; 16]).unwrap();
        assert_abs_diff_eq!(r.value, STEERING_C16, epsilon = 1e-12);
        let r = steering_s16_with_stderr(&[0.511; 16], 0.01).unwrap();
        assert_abs_diff_eq!(r.sigma.unwrap(), 0.0, epsilon = 1e-9);
        let r = steering_s16_with_stderr(&[0.965; 16], 0.008).unwrap();
        assert_abs_diff_eq!(r.sigma.unwrap(), 56.75, epsilon = 1e-9);
    }

    #[test]
    fn s16_wrong_count() {
        assert!(matches!(steering_s16(&[1.0; 15]), Err(StatsError::Shape(_))));
        assert!(steering_s16(&[1.5; 16]).is_err());
    }

    #[test]
    fn s16_permutation_invariant() {
        let c: Vec<f64> = (0..16).map(|k| (k as f64 * 0.37).sin()).collect();
        let mut rev = c.clone();
        rev.reverse();
        rev.swap(3, 11);
        assert_abs_diff_eq!(
            steering_s16(&c).unwrap().value,
            steering_s16(&rev).unwrap().value,
            epsilon = 1e-15
        );
    }

    #[test]
    fn bilocal_arithmetic() {
        assert_abs_diff_eq!(bilocal_parameter(0.49, 0.49), 1.4, epsilon = 1e-12);
        assert_eq!(bilocal_parameter(0.0, 0.0), 0.0);
        let r = BellResult::new(1.2251, BILOCAL_BOUND, 0.0066, Violation::Above);
        assert!((r.sigma.unwrap() - 34.0).abs() < 0.2);
    }

    #[test]
    fn bilocality_from_counts() {
        // Perfectly correlated parity for y=0, nothing for y=1.
        let mut tri = TriCountTable::new();
        for x in 0..2 {
            for z in 0..2 {
                tri.add((x, 0, z), (0, 0, 0), 10);
                for o in [(0, 0, 0), (0, 0, 1)] {
                    tri.add((x, 1, z), o, 5);
                }
            }
        }
        let r = bilocality(&tri).unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-12);
        assert!(r.stderr.is_finite());
    }

    #[test]
    fn bilocality_missing_cell() {
        let mut tri = TriCountTable::new();
        tri.record((0, 0, 0), (0, 0, 0));
        assert!(matches!(bilocality(&tri), Err(StatsError::NoData(_))));
    }
}
