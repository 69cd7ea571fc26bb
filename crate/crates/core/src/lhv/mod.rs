//! Trial-generating simulator: quantum pair models, local hidden-variable
//! models, synthetic bit sources, and lab processes.

pub mod config;
pub mod human;
pub mod lab;
pub mod presets;
pub mod quantum;
pub mod strategies;
pub mod timebin;

pub use config::{LabConfig, LabFile};
pub use human::{MarkovBits, MarkovStream, HUMAN_ALTERNATION, HUMAN_P0};
pub use lab::{
    analyze_output, run_lab, sample_trial, BitSource, LabKind, LabModel, LabOutput, LabRunReport,
    LabRunner, LabSpec, Pull, SettingBit, TrialRecord, VecSource,
};
pub use quantum::{
    singlet_agree_prob, Detection, OutcomeDistribution, PartyOutcome, QuantumPairModel,
};
pub use strategies::{
    enumerate_deterministic_chsh, enumerate_deterministic_chsh_with, timebin_bracket,
    ChshEnumeration, LhvStrategy, LocalTimeBinModel,
};
pub use timebin::{
    classify_timebin, simulate_timebin_counts, simulate_timebin_events, simulate_timebin_trial,
    SettingsModel, TimeBinModel, TimeBinOutcome, TimeBinSampler,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LhvError {
    #[error("invalid model: {0}")]
    Config(String),
    #[error("party {party} has no setting {setting}")]
    UnknownSetting { party: char, setting: usize },
}

pub type Result<T> = std::result::Result<T, LhvError>;
