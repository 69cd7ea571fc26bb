//! Simulated labs: consume setting bits in arrival order, run trials, and
//! accumulate the count structure their inequality needs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bellstats::{
    bilocality, chsh, k_statistic, mdl_i0, steering_from_counts, BellResult, ChshSigns,
    CountTable, StatsError, TimeBinCounts, TriCountTable,
};

use super::quantum::{OutcomeDistribution, PartyOutcome, QuantumPairModel};
use super::timebin::{record_timebin, TimeBinModel};
use super::{LhvError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabKind {
    Chsh,
    Steering,
    Bilocal,
    Timebin,
    Mdl,
}

impl LabKind {
    pub fn bits_per_trial(self) -> usize {
        match self {
            LabKind::Chsh | LabKind::Timebin | LabKind::Mdl => 2,
            LabKind::Steering => 8,
            LabKind::Bilocal => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LabKind::Chsh => "chsh",
            LabKind::Steering => "steering",
            LabKind::Bilocal => "bilocal",
            LabKind::Timebin => "timebin",
            LabKind::Mdl => "mdl",
        }
    }
}

impl std::str::FromStr for LabKind {
    type Err = LhvError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "chsh" => LabKind::Chsh,
            "steering" => LabKind::Steering,
            "bilocal" => LabKind::Bilocal,
            "timebin" | "k" => LabKind::Timebin,
            "mdl" => LabKind::Mdl,
            other => return Err(LhvError::Config(format!("unknown lab kind {other:?}"))),
        })
    }
}

/// How a lab asks the hub for bits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabSpec {
    pub id: String,
    pub kind: LabKind,
    /// Bits requested per 2 s distribution interval.
    pub rate: u64,
    pub burst: bool,
}

impl LabSpec {
    pub fn new(id: impl Into<String>, kind: LabKind, rate: u64, burst: bool) -> Self {
        Self {
            id: id.into(),
            kind,
            rate,
            burst,
        }
    }

    pub fn bits_per_trial(&self) -> usize {
        self.kind.bits_per_trial()
    }
}

/// Physics behind a lab.
#[derive(Debug, Clone)]
pub enum LabModel {
    /// CHSH, MDL, and steering labs; steering needs 16 angles per side.
    Pair(QuantumPairModel),
    /// Two independent sources `A-B1` and `B2-C`. Bob measures both of
    /// his photons at the angle for `y` (the `b` angle of `left`, the `a`
    /// angle of `right`) and outputs the parity.
    Bilocal {
        left: QuantumPairModel,
        right: QuantumPairModel,
    },
    TimeBin(TimeBinModel),
}

impl LabModel {
    fn check(&self, kind: LabKind) -> Result<()> {
        let want = |m: &QuantumPairModel, n: usize| {
            if m.n_settings() != (n, n) {
                return Err(LhvError::Config(format!(
                    "{} lab needs {n} angles per side, got {:?}",
                    kind.name(),
                    m.n_settings()
                )));
            }
            Ok(())
        };
        match (kind, self) {
            (LabKind::Chsh | LabKind::Mdl, LabModel::Pair(m)) => want(m, 2),
            (LabKind::Steering, LabModel::Pair(m)) => want(m, 16),
            (LabKind::Bilocal, LabModel::Bilocal { left, right }) => {
                want(left, 2)?;
                want(right, 2)
            }
            (LabKind::Timebin, LabModel::TimeBin(_)) => Ok(()),
            _ => Err(LhvError::Config(format!(
                "model does not fit a {} lab",
                kind.name()
            ))),
        }
    }
}

/// Provenance of one consumed setting bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettingBit {
    pub id: u64,
    pub bit: u8,
    #[serde(default)]
    pub archived: bool,
    #[serde(default)]
    pub ts_ms: u64,
}

/// What a bit source yields on each poll.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pull {
    Bit(SettingBit),
    /// No bit available right now; the lab idles.
    Starved,
    Exhausted,
}

pub trait BitSource {
    fn pull(&mut self) -> Pull;
}

/// Serves a fixed bit vector with sequential ids.
#[derive(Debug, Clone)]
pub struct VecSource {
    bits: Vec<u8>,
    pos: usize,
}

impl VecSource {
    pub fn new(bits: Vec<u8>) -> Self {
        Self { bits, pos: 0 }
    }
}

impl BitSource for VecSource {
    fn pull(&mut self) -> Pull {
        match self.bits.get(self.pos) {
            Some(&bit) => {
                let id = self.pos as u64;
                self.pos += 1;
                Pull::Bit(SettingBit { id, bit, archived: false, ts_ms: 0 })
            }
            None => Pull::Exhausted,
        }
    }
}

impl<I: Iterator<Item = u8>> BitSource for std::iter::Enumerate<I> {
    fn pull(&mut self) -> Pull {
        match self.next() {
            Some((i, bit)) => Pull::Bit(SettingBit { id: i as u64, bit, archived: false, ts_ms: 0 }),
            None => Pull::Exhausted,
        }
    }
}

/// One simulated trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub lab_id: String,
    pub trial_index: u64,
    /// Setting index per party.
    pub settings: Vec<u8>,
    /// `+1`, `-1`, or `null` (no detection) per party.
    pub outcomes: Vec<Option<i8>>,
    /// First-detection bin per party, time-bin labs only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<Vec<Option<u8>>>,
    pub source_bits: Vec<u64>,
    #[serde(default)]
    pub archived_bits: usize,
    pub timestamp_ms: u64,
}

/// Accumulated counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabOutput {
    Pair(CountTable),
    Tri(TriCountTable),
    TimeBin(TimeBinCounts),
}

impl LabOutput {
    pub fn empty(kind: LabKind, model: &LabModel) -> Self {
        match (kind, model) {
            (LabKind::Steering, _) => LabOutput::Pair(CountTable::new(16, 16)),
            (LabKind::Bilocal, _) => LabOutput::Tri(TriCountTable::new()),
            (LabKind::Timebin, LabModel::TimeBin(m)) => {
                LabOutput::TimeBin(TimeBinCounts::new(super::timebin::TimeBinSampler::n_bins(m)))
            }
            (LabKind::Timebin, _) => LabOutput::TimeBin(TimeBinCounts::new(super::timebin::DEFAULT_BINS)),
            _ => LabOutput::Pair(CountTable::chsh()),
        }
    }

    pub fn trials(&self) -> u64 {
        match self {
            LabOutput::Pair(t) => t.total(),
            LabOutput::Tri(t) => t.total(),
            LabOutput::TimeBin(t) => t.total_trials(),
        }
    }
}

/// Evaluates the lab's inequality on its counts.
pub fn analyze_output(
    kind: LabKind,
    output: &LabOutput,
    signs: ChshSigns,
) -> std::result::Result<BellResult, StatsError> {
    match (kind, output) {
        (LabKind::Chsh, LabOutput::Pair(t)) => chsh(t, signs),
        (LabKind::Mdl, LabOutput::Pair(t)) => mdl_i0(t),
        (LabKind::Steering, LabOutput::Pair(t)) => steering_from_counts(t),
        (LabKind::Bilocal, LabOutput::Tri(t)) => bilocality(t),
        (LabKind::Timebin, LabOutput::TimeBin(t)) => k_statistic(t),
        _ => Err(StatsError::Shape(format!(
            "output does not belong to a {} lab",
            kind.name()
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabRunReport {
    pub trials: u64,
    pub bits_consumed: u64,
    pub archived_bits: u64,
    /// Trials without a coincidence (not entered in a two-party table).
    pub lost_trials: u64,
    /// Polls that found no bit available.
    pub dead_polls: u64,
}

/// Incremental lab process.
#[derive(Debug, Clone)]
pub struct LabRunner {
    spec: LabSpec,
    model: LabModel,
    signs: ChshSigns,
    rng: ChaCha8Rng,
    pending: Vec<SettingBit>,
    output: LabOutput,
    report: LabRunReport,
    dists: Vec<OutcomeDistribution>,
    records: Option<Vec<TrialRecord>>,
}

impl LabRunner {
    pub fn new(spec: LabSpec, model: LabModel, seed: u64) -> Result<Self> {
        model.check(spec.kind)?;
        let dists = match &model {
            LabModel::Pair(m) => {
                let (na, nb) = m.n_settings();
                let mut v = Vec::with_capacity(na * nb);
                for x in 0..na {
                    for y in 0..nb {
                        v.push(m.joint_outcome_probs(x, y)?);
                    }
                }
                v
            }
            _ => Vec::new(),
        };
        let signs = match (&model, spec.kind) {
            (LabModel::Pair(m), LabKind::Chsh) => default_signs(m)?,
            _ => ChshSigns::STANDARD,
        };
        Ok(Self {
            output: LabOutput::empty(spec.kind, &model),
            spec,
            model,
            signs,
            rng: ChaCha8Rng::seed_from_u64(seed),
            pending: Vec::new(),
            report: LabRunReport::default(),
            dists,
            records: None,
        })
    }

    /// Keep every [`TrialRecord`].
    pub fn with_trace(mut self) -> Self {
        self.records = Some(Vec::new());
        self
    }

    pub fn with_signs(mut self, signs: ChshSigns) -> Self {
        self.signs = signs;
        self
    }

    pub fn spec(&self) -> &LabSpec {
        &self.spec
    }

    pub fn signs(&self) -> ChshSigns {
        self.signs
    }

    pub fn output(&self) -> &LabOutput {
        &self.output
    }

    pub fn report(&self) -> LabRunReport {
        self.report
    }

    pub fn records(&self) -> &[TrialRecord] {
        self.records.as_deref().unwrap_or(&[])
    }

    pub fn analyze(&self) -> std::result::Result<BellResult, StatsError> {
        analyze_output(self.spec.kind, &self.output, self.signs)
    }

    pub fn idle(&mut self) {
        self.report.dead_polls += 1;
    }

    /// Feeds one bit; returns the trial it completes, if any.
    pub fn push_bit(&mut self, bit: SettingBit) -> Result<Option<TrialRecord>> {
        if bit.bit > 1 {
            return Err(LhvError::Config(format!("setting bit {} is not 0 or 1", bit.bit)));
        }
        self.pending.push(bit);
        self.report.bits_consumed += 1;
        self.report.archived_bits += u64::from(bit.archived);
        if self.pending.len() < self.spec.bits_per_trial() {
            return Ok(None);
        }
        let bits = std::mem::take(&mut self.pending);
        let record = self.run_trial(&bits);
        if let Some(r) = self.records.as_mut() {
            r.push(record.clone());
        }
        Ok(Some(record))
    }

    fn run_trial(&mut self, bits: &[SettingBit]) -> TrialRecord {
        let b: Vec<u8> = bits.iter().map(|s| s.bit).collect();
        let nibble = |s: &[u8]| s.iter().fold(0u8, |acc, v| (acc << 1) | v);
        let settings: Vec<u8> = match self.spec.kind {
            LabKind::Steering => vec![nibble(&b[..4]), nibble(&b[4..])],
            _ => b.clone(),
        };
        let mut bins = None;
        let outcomes: Vec<Option<i8>> = match &self.model {
            LabModel::Pair(m) => {
                let (x, y) = (settings[0] as usize, settings[1] as usize);
                let nb = m.n_settings().1;
                let (a, o) = self.dists[x * nb + y].sample(&mut self.rng);
                let table = match &mut self.output {
                    LabOutput::Pair(t) => t,
                    _ => unreachable!("pair labs keep a count table"),
                };
                match (a.bit(), o.bit()) {
                    (Some(ab), Some(bb)) => table.record(x, y, ab, bb).expect("settings in range"),
                    _ => self.report.lost_trials += 1,
                }
                vec![a.value(), o.value()]
            }
            LabModel::Bilocal { left, right } => {
                let (x, y, z) = (settings[0] as usize, settings[1] as usize, settings[2] as usize);
                let (a, b1) = left.sample(x, y, &mut self.rng).expect("checked settings");
                let (b2, c) = right.sample(y, z, &mut self.rng).expect("checked settings");
                let parity = match (b1.bit(), b2.bit()) {
                    (Some(u), Some(v)) => Some(u ^ v),
                    _ => None,
                };
                let tri = match &mut self.output {
                    LabOutput::Tri(t) => t,
                    _ => unreachable!("bilocal labs keep a tri table"),
                };
                match (a.bit(), parity, c.bit()) {
                    (Some(ab), Some(bb), Some(cb)) => {
                        tri.record((x as u8, y as u8, z as u8), (ab, bb, cb))
                    }
                    _ => self.report.lost_trials += 1,
                }
                let val = |bit: Option<u8>| bit.map(|v| if v == 0 { 1 } else { -1 });
                vec![a.value(), val(parity), c.value()]
            }
            LabModel::TimeBin(m) => {
                let (x, y) = (settings[0], settings[1]);
                let o = m.simulate_trial(x, y, &mut self.rng);
                if let LabOutput::TimeBin(t) = &mut self.output {
                    record_timebin(t, x, y, o);
                }
                bins = Some(vec![o.a, o.b]);
                let v = |d: Option<u8>| d.map(|_| 1i8);
                vec![v(o.a), v(o.b)]
            }
        };
        let index = self.report.trials;
        self.report.trials += 1;
        TrialRecord {
            lab_id: self.spec.id.clone(),
            trial_index: index,
            settings,
            outcomes,
            bins,
            source_bits: bits.iter().map(|s| s.id).collect(),
            archived_bits: bits.iter().filter(|s| s.archived).count(),
            timestamp_ms: bits.last().map_or(0, |s| s.ts_ms),
        }
    }

    /// Pulls bits until `n_trials` more trials are done or the source ends.
    pub fn run(&mut self, source: &mut dyn BitSource, n_trials: u64) -> Result<LabRunReport> {
        let target = self.report.trials + n_trials;
        while self.report.trials < target {
            match source.pull() {
                Pull::Bit(b) => {
                    self.push_bit(b)?;
                }
                Pull::Starved => self.idle(),
                Pull::Exhausted => break,
            }
        }
        Ok(self.report)
    }
}

/// Signs that make the CHSH expression of `m`'s ideal correlators largest.
pub fn default_signs(m: &QuantumPairModel) -> Result<ChshSigns> {
    let mut e = [0.0; 4];
    for (k, slot) in e.iter_mut().enumerate() {
        *slot = m.correlator(k / 2, k % 2)?;
    }
    Ok(ChshSigns::best_for(e))
}

/// Runs a fresh lab over `source`.
pub fn run_lab(
    spec: LabSpec,
    model: LabModel,
    source: &mut dyn BitSource,
    n_trials: u64,
    seed: u64,
) -> Result<(LabOutput, LabRunReport)> {
    let mut runner = LabRunner::new(spec, model, seed)?;
    let report = runner.run(source, n_trials)?;
    Ok((runner.output, report))
}

/// One stand-alone two-party trial at settings `(x, y)`.
pub fn sample_trial<R: Rng + ?Sized>(
    model: &QuantumPairModel,
    x: usize,
    y: usize,
    rng: &mut R,
) -> Result<TrialRecord> {
    let (a, b): (PartyOutcome, PartyOutcome) = model.sample(x, y, rng)?;
    Ok(TrialRecord {
        lab_id: String::new(),
        trial_index: 0,
        settings: vec![x as u8, y as u8],
        outcomes: vec![a.value(), b.value()],
        bins: None,
        source_bits: Vec::new(),
        archived_bits: 0,
        timestamp_ms: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lhv::human::MarkovBits;
    use crate::lhv::presets;

    struct Stuttering {
        inner: VecSource,
        tick: u32,
    }

    impl BitSource for Stuttering {
        fn pull(&mut self) -> Pull {
            self.tick += 1;
            if self.tick % 3 == 0 {
                Pull::Starved
            } else {
                self.inner.pull()
            }
        }
    }

    #[test]
    fn bits_per_trial_by_kind() {
        assert_eq!(LabKind::Chsh.bits_per_trial(), 2);
        assert_eq!(LabKind::Timebin.bits_per_trial(), 2);
        assert_eq!(LabKind::Mdl.bits_per_trial(), 2);
        assert_eq!(LabKind::Steering.bits_per_trial(), 8);
        assert_eq!(LabKind::Bilocal.bits_per_trial(), 3);
    }

    #[test]
    fn steering_consumes_eight_bits() {
        let spec = LabSpec::new("st", LabKind::Steering, 800, false);
        let mut r = LabRunner::new(spec, presets::steering(1.0).unwrap(), 1).unwrap().with_trace();
        let bits = vec![1, 0, 1, 1, 0, 0, 1, 0];
        let mut src = VecSource::new(bits.clone());
        let rep = r.run(&mut src, 5).unwrap();
        assert_eq!(rep.trials, 1);
        assert_eq!(rep.bits_consumed, 8);
        let rec = &r.records()[0];
        assert_eq!(rec.settings, vec![0b1011, 0b0010]);
        assert_eq!(rec.source_bits, (0..8).collect::<Vec<u64>>());
    }

    #[test]
    fn dead_time_recorded() {
        let spec = LabSpec::new("c", LabKind::Chsh, 100, false);
        let mut src = Stuttering { inner: VecSource::new(vec![0; 20]), tick: 0 };
        let (out, rep) = run_lab(spec, presets::chsh(1.0).unwrap(), &mut src, 100, 3).unwrap();
        assert_eq!(rep.trials, 10);
        assert!(rep.dead_polls > 0);
        assert_eq!(out.trials(), 10);
    }

    #[test]
    fn zero_trials_refuses_analysis() {
        let spec = LabSpec::new("c", LabKind::Chsh, 100, false);
        let r = LabRunner::new(spec, presets::chsh(1.0).unwrap(), 3).unwrap();
        assert!(matches!(r.analyze(), Err(StatsError::NoData(_))));
    }

    #[test]
    fn seeded_runs_identical() {
        let run = || {
            let spec = LabSpec::new("c", LabKind::Chsh, 100, false);
            let mut src = MarkovBits::fair().stream(5).enumerate();
            run_lab(spec, presets::chsh(0.9).unwrap(), &mut src, 5000, 8).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn model_kind_mismatch() {
        let spec = LabSpec::new("x", LabKind::Steering, 100, false);
        assert!(LabRunner::new(spec, presets::chsh(1.0).unwrap(), 0).is_err());
    }

    #[test]
    fn bilocal_lab_violates() {
        let spec = LabSpec::new("b", LabKind::Bilocal, 300, false);
        let mut src = MarkovBits::fair().stream(6).enumerate();
        let mut r = LabRunner::new(spec, presets::bilocal(1.0).unwrap(), 4).unwrap();
        r.run(&mut src, 40_000).unwrap();
        let res = r.analyze().unwrap();
        assert!((res.value - std::f64::consts::SQRT_2).abs() < 0.05, "{}", res.value);
    }

    #[test]
    fn timebin_lab_records_bins() {
        let spec = LabSpec::new("t", LabKind::Timebin, 100, true);
        let mut r = LabRunner::new(spec, presets::timebin(0.9).unwrap(), 4).unwrap().with_trace();
        let mut src = MarkovBits::fair().stream(1).enumerate();
        r.run(&mut src, 1000).unwrap();
        assert!(r.records().iter().all(|t| t.bins.is_some()));
        assert_eq!(r.output().trials(), 1000);
    }

    #[test]
    fn single_trial_sampling_is_seeded() {
        let m = QuantumPairModel::new(QuantumPairModel::singlet_state(), vec![0.0], vec![0.0]).unwrap();
        let mut a = ChaCha8Rng::seed_from_u64(1);
        let mut b = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let (ra, rb) = (sample_trial(&m, 0, 0, &mut a).unwrap(), sample_trial(&m, 0, 0, &mut b).unwrap());
            assert_eq!(ra, rb);
            assert_ne!(ra.outcomes[0], ra.outcomes[1]);
        }
    }
}
