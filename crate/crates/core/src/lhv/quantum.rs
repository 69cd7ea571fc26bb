//! Two-qubit polarization models.
//!
//! States are real amplitude vectors over `[HH, HV, VH, VV]`. An analyzer
//! at angle `t` (radians from horizontal) passes `cos t |H> + sin t |V>`
//! as outcome `+` and `-sin t |H> + cos t |V>` as outcome `-`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{LhvError, Result};

const NORM_TOL: f64 = 1e-12;

/// `P(agree)` for the singlet with analyzers at Bloch angles `phi_a`, `phi_b`.
pub fn singlet_agree_prob(phi_a: f64, phi_b: f64) -> f64 {
    ((phi_b - phi_a) / 2.0).sin().powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartyOutcome {
    Plus,
    Minus,
    NoDetection,
}

impl PartyOutcome {
    pub const ALL: [PartyOutcome; 3] = [PartyOutcome::Plus, PartyOutcome::Minus, PartyOutcome::NoDetection];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Outcome bit (`+` is 0) if detected.
    pub fn bit(self) -> Option<u8> {
        match self {
            PartyOutcome::Plus => Some(0),
            PartyOutcome::Minus => Some(1),
            PartyOutcome::NoDetection => None,
        }
    }

    /// `+1`, `-1`, or `None`.
    pub fn value(self) -> Option<i8> {
        self.bit().map(|b| if b == 0 { 1 } else { -1 })
    }
}

/// How each analyzer records photons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detection {
    /// Both output ports are monitored.
    #[default]
    TwoChannel,
    /// Only the `+` port has a detector; `-` reads as no detection.
    SingleChannel,
}

/// Joint distribution over `{+, -, none}` per party, `p[a][b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeDistribution {
    pub p: [[f64; 3]; 3],
}

impl OutcomeDistribution {
    pub fn get(&self, a: PartyOutcome, b: PartyOutcome) -> f64 {
        self.p[a.index()][b.index()]
    }

    pub fn sum(&self) -> f64 {
        self.p.iter().flatten().sum()
    }

    pub fn marginal_a(&self) -> [f64; 3] {
        self.p.map(|row| row.iter().sum())
    }

    pub fn marginal_b(&self) -> [f64; 3] {
        let mut m = [0.0; 3];
        for row in &self.p {
            for (j, v) in row.iter().enumerate() {
                m[j] += v;
            }
        }
        m
    }

    /// Correlator over coincidences; `None` if coincidences are impossible.
    pub fn correlator(&self) -> Option<f64> {
        let (pp, pm, mp, mm) = (self.p[0][0], self.p[0][1], self.p[1][0], self.p[1][1]);
        let n = pp + pm + mp + mm;
        (n > 0.0).then(|| (pp + mm - pm - mp) / n)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (PartyOutcome, PartyOutcome) {
        let u: f64 = rng.random::<f64>() * self.sum();
        let mut acc = 0.0;
        let mut last = (PartyOutcome::NoDetection, PartyOutcome::NoDetection);
        for a in PartyOutcome::ALL {
            for b in PartyOutcome::ALL {
                let p = self.get(a, b);
                if p <= 0.0 {
                    continue;
                }
                acc += p;
                last = (a, b);
                if u < acc {
                    return (a, b);
                }
            }
        }
        last
    }
}

/// A two-photon source with white noise, lossy detectors, and a setting
/// to analyzer-angle map per side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumPairModel {
    amplitudes: [f64; 4],
    visibility: f64,
    eta_a: f64,
    eta_b: f64,
    angles_a: Vec<f64>,
    angles_b: Vec<f64>,
    detection: Detection,
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(LhvError::Config(format!("{name} = {v} outside [0, 1]")));
    }
    Ok(())
}

/// Divides by the norm; errors on the zero vector.
pub fn normalize(raw: [f64; 4]) -> Result<[f64; 4]> {
    let n = raw.iter().map(|c| c * c).sum::<f64>().sqrt();
    if !(n > 0.0 && n.is_finite()) {
        return Err(LhvError::Config("state has zero norm".into()));
    }
    Ok(raw.map(|c| c / n))
}

impl QuantumPairModel {
    /// `amplitudes` must have unit norm within 1e-12.
    pub fn new(amplitudes: [f64; 4], angles_a: Vec<f64>, angles_b: Vec<f64>) -> Result<Self> {
        let norm2: f64 = amplitudes.iter().map(|c| c * c).sum();
        if (norm2 - 1.0).abs() > NORM_TOL || !norm2.is_finite() {
            return Err(LhvError::Config(format!("state norm^2 = {norm2}, expected 1")));
        }
        if angles_a.is_empty() || angles_b.is_empty() {
            return Err(LhvError::Config("each side needs at least one angle".into()));
        }
        if angles_a.iter().chain(&angles_b).any(|t| !t.is_finite()) {
            return Err(LhvError::Config("angles must be finite".into()));
        }
        Ok(Self {
            amplitudes,
            visibility: 1.0,
            eta_a: 1.0,
            eta_b: 1.0,
            angles_a,
            angles_b,
            detection: Detection::TwoChannel,
        })
    }

    /// `(|HV> - |VH>) / sqrt 2`.
    pub fn singlet_state() -> [f64; 4] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        [0.0, h, -h, 0.0]
    }

    /// `(|HH> + |VV>) / sqrt 2`.
    pub fn phi_plus_state() -> [f64; 4] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        [h, 0.0, 0.0, h]
    }

    /// `c_hh |HH> + c_vv |VV>`, normalized.
    pub fn two_term_state(c_hh: f64, c_vv: f64) -> Result<[f64; 4]> {
        normalize([c_hh, 0.0, 0.0, c_vv])
    }

    pub fn with_visibility(mut self, v: f64) -> Result<Self> {
        check_unit("visibility", v)?;
        self.visibility = v;
        Ok(self)
    }

    pub fn with_efficiencies(mut self, eta_a: f64, eta_b: f64) -> Result<Self> {
        check_unit("eta_a", eta_a)?;
        check_unit("eta_b", eta_b)?;
        self.eta_a = eta_a;
        self.eta_b = eta_b;
        Ok(self)
    }

    pub fn with_detection(mut self, d: Detection) -> Self {
        self.detection = d;
        self
    }

    pub fn amplitudes(&self) -> [f64; 4] {
        self.amplitudes
    }

    pub fn visibility(&self) -> f64 {
        self.visibility
    }

    pub fn efficiencies(&self) -> (f64, f64) {
        (self.eta_a, self.eta_b)
    }

    pub fn detection(&self) -> Detection {
        self.detection
    }

    pub fn n_settings(&self) -> (usize, usize) {
        (self.angles_a.len(), self.angles_b.len())
    }

    fn angles(&self, x: usize, y: usize) -> Result<(f64, f64)> {
        let ta = *self.angles_a.get(x).ok_or(LhvError::UnknownSetting { party: 'A', setting: x })?;
        let tb = *self.angles_b.get(y).ok_or(LhvError::UnknownSetting { party: 'B', setting: y })?;
        Ok((ta, tb))
    }

    /// Noisy joint probability of outcome bits `(a, b)` for ideal detectors.
    pub fn outcome_prob(&self, x: usize, y: usize, a: u8, b: u8) -> Result<f64> {
        let (ta, tb) = self.angles(x, y)?;
        Ok(self.outcome_prob_at(ta, tb, a, b))
    }

    fn outcome_prob_at(&self, ta: f64, tb: f64, a: u8, b: u8) -> f64 {
        let u = analyzer_vector(ta, a);
        let v = analyzer_vector(tb, b);
        let amp = self.amplitudes[0] * u[0] * v[0]
            + self.amplitudes[1] * u[0] * v[1]
            + self.amplitudes[2] * u[1] * v[0]
            + self.amplitudes[3] * u[1] * v[1];
        self.visibility * amp * amp + (1.0 - self.visibility) / 4.0
    }

    /// Full detection and outcome distribution at settings `(x, y)`.
    pub fn joint_outcome_probs(&self, x: usize, y: usize) -> Result<OutcomeDistribution> {
        let (ta, tb) = self.angles(x, y)?;
        let mut q = [[0.0; 2]; 2];
        for a in 0..2u8 {
            for b in 0..2u8 {
                q[a as usize][b as usize] = self.outcome_prob_at(ta, tb, a, b);
            }
        }
        let (ea, eb) = (self.eta_a, self.eta_b);
        let mut p = [[0.0; 3]; 3];
        const NONE: usize = 2;
        match self.detection {
            Detection::TwoChannel => {
                for a in 0..2 {
                    for b in 0..2 {
                        p[a][b] = ea * eb * q[a][b];
                    }
                    p[a][NONE] = ea * (1.0 - eb) * (q[a][0] + q[a][1]);
                    p[NONE][a] = (1.0 - ea) * eb * (q[0][a] + q[1][a]);
                }
                p[NONE][NONE] = (1.0 - ea) * (1.0 - eb);
            }
            Detection::SingleChannel => {
                p[0][0] = ea * eb * q[0][0];
                p[0][NONE] = ea * (q[0][0] * (1.0 - eb) + q[0][1]);
                p[NONE][0] = eb * (q[0][0] * (1.0 - ea) + q[1][0]);
                p[NONE][NONE] = 1.0 - p[0][0] - p[0][NONE] - p[NONE][0];
            }
        }
        Ok(OutcomeDistribution { p })
    }

    /// `E(x, y)` of the noisy state for ideal detectors.
    pub fn correlator(&self, x: usize, y: usize) -> Result<f64> {
        let mut e = 0.0;
        for a in 0..2u8 {
            for b in 0..2u8 {
                let s = if a == b { 1.0 } else { -1.0 };
                e += s * self.outcome_prob(x, y, a, b)?;
            }
        }
        Ok(e)
    }

    pub fn sample<R: Rng + ?Sized>(
        &self,
        x: usize,
        y: usize,
        rng: &mut R,
    ) -> Result<(PartyOutcome, PartyOutcome)> {
        Ok(self.joint_outcome_probs(x, y)?.sample(rng))
    }
}

fn analyzer_vector(t: f64, outcome: u8) -> [f64; 2] {
    let (s, c) = t.sin_cos();
    if outcome == 0 {
        [c, s]
    } else {
        [-s, c]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, PI};

    /// Independent reference: explicit 4x4 density matrix and projectors.
    fn density_oracle(m: &QuantumPairModel, ta: f64, tb: f64, a: u8, b: u8) -> f64 {
        let psi = m.amplitudes();
        let v = m.visibility();
        let mut rho = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                rho[i][j] = v * psi[i] * psi[j] + if i == j { (1.0 - v) / 4.0 } else { 0.0 };
            }
        }
        let proj = |t: f64, o: u8| {
            let ang = if o == 0 { t } else { t + FRAC_PI_2 };
            let w = [ang.cos(), ang.sin()];
            [[w[0] * w[0], w[0] * w[1]], [w[1] * w[0], w[1] * w[1]]]
        };
        let (pa, pb) = (proj(ta, a), proj(tb, b));
        let mut pi = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                pi[i][j] = pa[i / 2][j / 2] * pb[i % 2][j % 2];
            }
        }
        let mut tr = 0.0;
        for i in 0..4 {
            for k in 0..4 {
                tr += rho[i][k] * pi[k][i];
            }
        }
        tr
    }

    fn timebin_model() -> QuantumPairModel {
        let state = QuantumPairModel::two_term_state(0.982, 0.191).unwrap();
        let deg = |d: f64| (90.0 - d).to_radians();
        QuantumPairModel::new(state, vec![deg(-3.7), deg(23.6)], vec![deg(3.7), deg(-23.6)])
            .unwrap()
            .with_efficiencies(0.9, 0.9)
            .unwrap()
    }

    #[test]
    fn agree_prob_examples() {
        assert_abs_diff_eq!(singlet_agree_prob(0.0, 0.0), 0.0);
        assert_abs_diff_eq!(singlet_agree_prob(0.0, PI), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(singlet_agree_prob(0.0, FRAC_PI_2), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn singlet_matches_agree_prob() {
        // Polarization angle t corresponds to Bloch angle 2t.
        for &(ta, tb) in &[(0.0, 0.0), (0.1, 0.7), (FRAC_PI_8, -0.4), (1.0, 2.5)] {
            let m = QuantumPairModel::new(QuantumPairModel::singlet_state(), vec![ta], vec![tb]).unwrap();
            let agree = m.outcome_prob(0, 0, 0, 0).unwrap() + m.outcome_prob(0, 0, 1, 1).unwrap();
            assert_abs_diff_eq!(agree, singlet_agree_prob(2.0 * ta, 2.0 * tb), epsilon = 1e-12);
        }
    }

    #[test]
    fn matches_density_matrix_oracle() {
        let base = timebin_model();
        for v in [1.0, 0.8, 0.0] {
            let m = base.clone().with_visibility(v).unwrap();
            for x in 0..2 {
                for y in 0..2 {
                    let (ta, tb) = m.angles(x, y).unwrap();
                    for a in 0..2 {
                        for b in 0..2 {
                            assert_abs_diff_eq!(
                                m.outcome_prob(x, y, a, b).unwrap(),
                                density_oracle(&m, ta, tb, a, b),
                                epsilon = 1e-12
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn distributions_normalized_and_no_signalling() {
        for det in [Detection::TwoChannel, Detection::SingleChannel] {
            let m = timebin_model().with_visibility(0.93).unwrap().with_detection(det);
            for x in 0..2 {
                let ma: Vec<_> = (0..2).map(|y| m.joint_outcome_probs(x, y).unwrap().marginal_a()).collect();
                for k in 0..3 {
                    assert_abs_diff_eq!(ma[0][k], ma[1][k], epsilon = 1e-12);
                }
            }
            for y in 0..2 {
                let mb: Vec<_> = (0..2).map(|x| m.joint_outcome_probs(x, y).unwrap().marginal_b()).collect();
                for k in 0..3 {
                    assert_abs_diff_eq!(mb[0][k], mb[1][k], epsilon = 1e-12);
                }
                for x in 0..2 {
                    assert_abs_diff_eq!(m.joint_outcome_probs(x, y).unwrap().sum(), 1.0, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn white_noise_is_uniform() {
        let m = timebin_model().with_efficiencies(1.0, 1.0).unwrap().with_visibility(0.0).unwrap();
        let d = m.joint_outcome_probs(1, 0).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                assert_abs_diff_eq!(d.p[a][b], 0.25, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn visibility_scales_correlators() {
        let angles = vec![0.0, FRAC_PI_4];
        let ideal = QuantumPairModel::new(QuantumPairModel::singlet_state(), angles.clone(), vec![FRAC_PI_8, 3.0 * FRAC_PI_8]).unwrap();
        for v in [0.0, 0.5, 1.0] {
            let m = ideal.clone().with_visibility(v).unwrap();
            for x in 0..2 {
                for y in 0..2 {
                    assert_abs_diff_eq!(
                        m.correlator(x, y).unwrap(),
                        v * ideal.correlator(x, y).unwrap(),
                        epsilon = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn singlet_aligned_never_agrees() {
        let m = QuantumPairModel::new(QuantumPairModel::singlet_state(), vec![0.3], vec![0.3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let (a, b) = m.sample(0, 0, &mut rng).unwrap();
            assert_ne!(a, b);
        }
    }

    #[test]
    fn bad_inputs() {
        assert!(QuantumPairModel::new([1.0, 1.0, 0.0, 0.0], vec![0.0], vec![0.0]).is_err());
        let m = QuantumPairModel::new(QuantumPairModel::singlet_state(), vec![0.0], vec![0.0]).unwrap();
        assert!(m.clone().with_visibility(1.5).is_err());
        assert!(matches!(m.joint_outcome_probs(1, 0), Err(LhvError::UnknownSetting { party: 'A', .. })));
    }
}
