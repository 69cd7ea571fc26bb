//! Ready-made models for each lab kind.

use super::quantum::QuantumPairModel;
use super::timebin::TimeBinModel;
use super::{LabModel, Result};

fn deg(v: &[f64]) -> Vec<f64> {
    v.iter().map(|d| d.to_radians()).collect()
}

/// Singlet at the Tsirelson angles: Alice 0 and 45 degrees, Bob 22.5 and
/// 67.5 degrees.
pub fn chsh_model(visibility: f64) -> Result<QuantumPairModel> {
    QuantumPairModel::new(
        QuantumPairModel::singlet_state(),
        deg(&[0.0, 45.0]),
        deg(&[22.5, 67.5]),
    )?
    .with_visibility(visibility)
}

pub fn chsh(visibility: f64) -> Result<LabModel> {
    Ok(LabModel::Pair(chsh_model(visibility)?))
}

/// Mixing angle of the non-maximally entangled MDL source.
pub const MDL_STATE_DEG: f64 = 69.1;

/// `cos 69.1 |HV> + sin 69.1 |VH>` with analyzer angles that make the
/// ideal `I0` vanish.
pub fn mdl_model(visibility: f64) -> Result<QuantumPairModel> {
    let t = MDL_STATE_DEG.to_radians();
    QuantumPairModel::new(
        [0.0, t.cos(), t.sin(), 0.0],
        deg(&[11.35, 144.00]),
        deg(&[105.51, 62.27]),
    )?
    .with_visibility(visibility)
}

pub fn mdl(visibility: f64) -> Result<LabModel> {
    Ok(LabModel::Pair(mdl_model(visibility)?))
}

/// `(|HH> + |VV>)/sqrt 2` with 16 linear analyzer angles `k * 180/16`
/// degrees on both sides.
pub fn steering(visibility: f64) -> Result<LabModel> {
    let angles: Vec<f64> = (0..16).map(|k| k as f64 * 180.0 / 16.0).collect();
    Ok(LabModel::Pair(
        QuantumPairModel::new(QuantumPairModel::phi_plus_state(), deg(&angles), deg(&angles))?
            .with_visibility(visibility)?,
    ))
}

/// Two `(|HH> + |VV>)/sqrt 2` sources; Alice and Charlie at +-22.5
/// degrees, Bob at 0 or 45 degrees on both photons.
pub fn bilocal(visibility: f64) -> Result<LabModel> {
    let phi = QuantumPairModel::phi_plus_state();
    let left = QuantumPairModel::new(phi, deg(&[22.5, -22.5]), deg(&[0.0, 45.0]))?
        .with_visibility(visibility)?;
    let right = QuantumPairModel::new(phi, deg(&[0.0, 45.0]), deg(&[22.5, -22.5]))?
        .with_visibility(visibility)?;
    Ok(LabModel::Bilocal { left, right })
}

pub fn timebin(eta: f64) -> Result<LabModel> {
    Ok(LabModel::TimeBin(TimeBinModel::reference(eta)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bellstats::{mdl_i0, FnProbabilities};

    #[test]
    fn chsh_ideal_is_tsirelson() {
        let m = chsh_model(1.0).unwrap();
        let signs = crate::lhv::lab::default_signs(&m).unwrap();
        let s: f64 = (0..4).map(|k| signs.0[k] as f64 * m.correlator(k / 2, k % 2).unwrap()).sum();
        assert!((s - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn mdl_ideal_i0_near_zero() {
        for (v, lo, hi) in [(1.0, 0.0, 1e-4), (0.95, 0.01, 0.25)] {
            let m = mdl_model(v).unwrap();
            let p = FnProbabilities(|a, b, x, y| m.outcome_prob(x as usize, y as usize, a, b).unwrap());
            let i0 = mdl_i0(&p).unwrap().value;
            assert!(i0 >= lo && i0 <= hi, "V={v}: I0={i0}");
        }
    }
}
