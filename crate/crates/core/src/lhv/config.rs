//! TOML lab configuration. Angles are in degrees.
//!
//! ```toml
//! [[lab]]
//! id = "chsh-1"
//! kind = "chsh"
//! rate = 400
//! visibility = 0.95
//! state = "singlet"           # or "phi_plus", or [c_hh, c_hv, c_vh, c_vv]
//! angles_a = [0.0, 45.0]
//! angles_b = [22.5, 67.5]
//!
//! [[lab]]
//! id = "bellster"
//! kind = "timebin"
//! burst = true
//! eta = 0.9
//! angle_reference = "vertical"
//! angles_a = [-3.7, 23.6]
//! angles_b = [3.7, -23.6]
//! ```

use serde::{Deserialize, Serialize};

use crate::bellstats::ChshSigns;

use super::lab::{LabKind, LabModel, LabSpec};
use super::quantum::{normalize, QuantumPairModel};
use super::timebin::{TimeBinModel, DEFAULT_BINS, DEFAULT_PAIR_PROBABILITY};
use super::{presets, LhvError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateConfig {
    Named(String),
    Amplitudes([f64; 4]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleReference {
    #[default]
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabConfig {
    pub id: String,
    pub kind: LabKind,
    /// Bits per 2 s interval; defaults to [`LabConfig::default_rate`].
    pub rate: Option<u64>,
    #[serde(default)]
    pub burst: bool,
    #[serde(default)]
    pub seed: u64,
    pub visibility: Option<f64>,
    /// Detection efficiency for both sides; `eta_a`/`eta_b` override.
    pub eta: Option<f64>,
    pub eta_a: Option<f64>,
    pub eta_b: Option<f64>,
    pub state: Option<StateConfig>,
    #[serde(default)]
    pub angle_reference: AngleReference,
    pub angles_a: Option<Vec<f64>>,
    pub angles_b: Option<Vec<f64>>,
    /// Bilocal labs: Charlie's angles (Bob's are `angles_b`).
    pub angles_c: Option<Vec<f64>>,
    pub n_bins: Option<usize>,
    pub pair_probability: Option<f64>,
    /// CHSH signs such as `"+,+,+,-"`.
    pub signs: Option<String>,
}

impl LabConfig {
    pub fn new(id: impl Into<String>, kind: LabKind) -> Self {
        Self {
            id: id.into(),
            kind,
            rate: None,
            burst: false,
            seed: 0,
            visibility: None,
            eta: None,
            eta_a: None,
            eta_b: None,
            state: None,
            angle_reference: AngleReference::Horizontal,
            angles_a: None,
            angles_b: None,
            angles_c: None,
            n_bins: None,
            pair_probability: None,
            signs: None,
        }
    }

    pub fn default_rate(kind: LabKind) -> u64 {
        match kind {
            LabKind::Steering => 800,
            LabKind::Bilocal => 300,
            _ => 400,
        }
    }

    pub fn spec(&self) -> LabSpec {
        LabSpec::new(
            self.id.clone(),
            self.kind,
            self.rate.unwrap_or_else(|| Self::default_rate(self.kind)),
            self.burst,
        )
    }

    fn radians(&self, deg: &[f64]) -> Vec<f64> {
        deg.iter()
            .map(|d| match self.angle_reference {
                AngleReference::Horizontal => d.to_radians(),
                AngleReference::Vertical => (90.0 - d).to_radians(),
            })
            .collect()
    }

    fn state(&self, default: [f64; 4]) -> Result<[f64; 4]> {
        match &self.state {
            None => Ok(default),
            Some(StateConfig::Amplitudes(a)) => normalize(*a),
            Some(StateConfig::Named(n)) => match n.as_str() {
                "singlet" => Ok(QuantumPairModel::singlet_state()),
                "phi_plus" => Ok(QuantumPairModel::phi_plus_state()),
                "timebin" => QuantumPairModel::two_term_state(0.982, 0.191),
                "mdl" => {
                    let t = presets::MDL_STATE_DEG.to_radians();
                    Ok([0.0, t.cos(), t.sin(), 0.0])
                }
                other => Err(LhvError::Config(format!("unknown state {other:?}"))),
            },
        }
    }

    /// Overrides state, angles, noise, and efficiency of a preset pair.
    fn customize(&self, base: QuantumPairModel, a_default: Vec<f64>, b_default: Vec<f64>) -> Result<QuantumPairModel> {
        let angles_a = self.angles_a.as_deref().map(|v| self.radians(v)).unwrap_or(a_default);
        let angles_b = self.angles_b.as_deref().map(|v| self.radians(v)).unwrap_or(b_default);
        let eta = self.eta.unwrap_or(base.efficiencies().0);
        QuantumPairModel::new(self.state(base.amplitudes())?, angles_a, angles_b)?
            .with_visibility(self.visibility.unwrap_or(base.visibility()))?
            .with_efficiencies(self.eta_a.unwrap_or(eta), self.eta_b.unwrap_or(eta))
    }

    /// Builds the lab's model and, if given, its CHSH signs.
    pub fn build(&self) -> Result<(LabSpec, LabModel, Option<ChshSigns>)> {
        let v = self.visibility.unwrap_or(1.0);
        let deg = |d: &[f64]| d.iter().map(|x| x.to_radians()).collect::<Vec<_>>();
        let model = match self.kind {
            LabKind::Chsh => LabModel::Pair(self.customize(
                presets::chsh_model(v)?,
                deg(&[0.0, 45.0]),
                deg(&[22.5, 67.5]),
            )?),
            LabKind::Mdl => LabModel::Pair(self.customize(
                presets::mdl_model(v)?,
                deg(&[11.35, 144.0]),
                deg(&[105.51, 62.27]),
            )?),
            LabKind::Steering => {
                let angles: Vec<f64> = (0..16).map(|k| (k as f64 * 180.0 / 16.0).to_radians()).collect();
                let base = QuantumPairModel::new(QuantumPairModel::phi_plus_state(), angles.clone(), angles.clone())?;
                LabModel::Pair(self.customize(base, angles.clone(), angles)?)
            }
            LabKind::Bilocal => {
                let phi = self.state(QuantumPairModel::phi_plus_state())?;
                let a = self.angles_a.as_deref().map(|v| self.radians(v)).unwrap_or(deg(&[22.5, -22.5]));
                let b = self.angles_b.as_deref().map(|v| self.radians(v)).unwrap_or(deg(&[0.0, 45.0]));
                let c = self.angles_c.as_deref().map(|v| self.radians(v)).unwrap_or(deg(&[22.5, -22.5]));
                let eta = self.eta.unwrap_or(1.0);
                let left = QuantumPairModel::new(phi, a, b.clone())?
                    .with_visibility(v)?
                    .with_efficiencies(eta, eta)?;
                let right = QuantumPairModel::new(phi, b, c)?
                    .with_visibility(v)?
                    .with_efficiencies(eta, eta)?;
                LabModel::Bilocal { left, right }
            }
            LabKind::Timebin => {
                let reference = TimeBinModel::reference(1.0)?;
                let base = reference.pair_model().clone();
                let (a0, b0) = (
                    vec![super::timebin::from_vertical_deg(-3.7), super::timebin::from_vertical_deg(23.6)],
                    vec![super::timebin::from_vertical_deg(3.7), super::timebin::from_vertical_deg(-23.6)],
                );
                let pair = self.customize(base, a0, b0)?;
                LabModel::TimeBin(TimeBinModel::new(
                    pair,
                    self.n_bins.unwrap_or(DEFAULT_BINS),
                    self.pair_probability.unwrap_or(DEFAULT_PAIR_PROBABILITY),
                )?)
            }
        };
        let signs = self
            .signs
            .as_deref()
            .map(|s| s.parse::<ChshSigns>().map_err(|e| LhvError::Config(e.to_string())))
            .transpose()?;
        Ok((self.spec(), model, signs))
    }
}

/// A file of `[[lab]]` tables.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LabFile {
    #[serde(default)]
    pub lab: Vec<LabConfig>,
}

impl LabFile {
    pub fn parse(text: &str) -> Result<Self> {
        let f: LabFile = toml::from_str(text).map_err(|e| LhvError::Config(e.to_string()))?;
        let mut ids = std::collections::HashSet::new();
        for l in &f.lab {
            if !ids.insert(l.id.as_str()) {
                return Err(LhvError::Config(format!("duplicate lab id {:?}", l.id)));
            }
        }
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"
[[lab]]
id = "chsh-1"
kind = "chsh"
rate = 400
visibility = 0.95
state = "singlet"
angles_a = [0.0, 45.0]
angles_b = [22.5, 67.5]

[[lab]]
id = "bellster"
kind = "timebin"
burst = true
eta = 0.9
angle_reference = "vertical"
angles_a = [-3.7, 23.6]
angles_b = [3.7, -23.6]

[[lab]]
id = "net"
kind = "bilocal"
state = [1.0, 0.0, 0.0, 1.0]
"#;

    #[test]
    fn parses_and_builds() {
        let f = LabFile::parse(DOC).unwrap();
        assert_eq!(f.lab.len(), 3);
        let (spec, model, signs) = f.lab[0].build().unwrap();
        assert_eq!(spec.rate, 400);
        assert!(signs.is_none());
        match model {
            LabModel::Pair(m) => assert_eq!(m.visibility(), 0.95),
            _ => panic!("pair model expected"),
        }
        let (spec, model, _) = f.lab[1].build().unwrap();
        assert!(spec.burst);
        match model {
            LabModel::TimeBin(m) => {
                let r = TimeBinModel::reference(0.9).unwrap();
                assert!((m.single_pair_k() - r.single_pair_k()).abs() < 1e-12);
            }
            _ => panic!("time-bin model expected"),
        }
        assert!(f.lab[2].build().is_ok());
    }

    #[test]
    fn rejects_bad_files() {
        assert!(LabFile::parse("[[lab]]\nid = \"a\"\nkind = \"nope\"\n").is_err());
        assert!(LabFile::parse("[[lab]]\nid = \"a\"\nkind = \"chsh\"\n[[lab]]\nid = \"a\"\nkind = \"mdl\"\n").is_err());
        assert!(LabFile::parse("[[lab]]\nid = \"a\"\nkind = \"chsh\"\ncolour = 1\n").is_err());
        let f = LabFile::parse("[[lab]]\nid = \"a\"\nkind = \"chsh\"\nstate = \"weird\"\n").unwrap();
        assert!(f.lab[0].build().is_err());
    }
}
