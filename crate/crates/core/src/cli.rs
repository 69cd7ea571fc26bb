//! Command-line front end. `run` returns the process exit code: 0 on
//! success, 1 for usage errors, 2 for bad data.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bellstats::csvio::{self, CsvError};
use crate::bellstats::{
    bilocality, chsh, chsh_from_correlators, k_statistic, mdl_i0, steering_from_counts, BellResult, ChshSigns,
};
use crate::lhv::{LabConfig, LabKind, LabRunner};
use crate::predictor::PredictorState;
use crate::report::{render_json_lines, render_table, ReportRow};
use crate::streamhub::client::{run_crowd, run_lab_client, run_lab_over, BitModel, CrowdConfig};
use crate::streamhub::server::ServerHandle;
use crate::streamhub::sim::{simulate, SimConfig};
use crate::streamhub::{read_log, replay, write_log, HubConfig, HubError};

pub const DEFAULT_ADDR: &str = "127.0.0.1:7878";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl From<HubError> for CliError {
    fn from(e: HubError) -> Self {
        match e {
            HubError::Config(m) => CliError::Usage(m),
            HubError::Lab(e) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<CsvError> for CliError {
    fn from(e: CsvError) -> Self {
        match e {
            CsvError::Stats(s) => CliError::Data(s.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "humanbell", version, about = "Human-randomness Bell test hub, labs, and analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the hub, with any configured labs and synthetic users attached.
    Serve(ServeArgs),
    /// Attach configured labs to a running hub.
    Lab(LabArgs),
    /// Send synthetic players to a running hub.
    Users(UsersArgs),
    /// Rebuild lab streams from a monitor log and re-run the labs.
    Replay(ReplayArgs),
    /// Evaluate an inequality on a CSV table.
    Analyze(AnalyzeArgs),
    /// Score bits from stdin against the Oracle.
    Predict(PredictArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    JsonLines,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Inequality {
    Chsh,
    Steering,
    Bilocal,
    Mdl,
    K,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Fair,
    Human,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub addr: Option<String>,
    /// Monitor log path.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seconds to run; the hub otherwise runs until interrupted.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Run on a virtual clock without sockets.
    #[arg(long = "virtual")]
    pub virtual_time: bool,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct LabArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = DEFAULT_ADDR)]
    pub addr: String,
    /// Only this lab id.
    #[arg(long)]
    pub lab: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 60.0)]
    pub duration: f64,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct UsersArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = DEFAULT_ADDR)]
    pub addr: String,
    #[arg(long)]
    pub users: Option<usize>,
    /// Bits per second per player.
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// Replay bits from this file instead of a model.
    #[arg(long)]
    pub bits_file: Option<PathBuf>,
    #[arg(long)]
    pub robots: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 60.0)]
    pub duration: f64,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub log: PathBuf,
    /// Lab specs to re-run over the rebuilt streams.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub table: PathBuf,
    #[arg(long, value_enum)]
    pub inequality: Inequality,
    /// CHSH signs such as "+,-,-,-"; defaults to the best form for the data.
    #[arg(long, allow_hyphen_values = true)]
    pub signs: Option<String>,
    /// Time bins per trial, for `k`.
    #[arg(long, default_value_t = 15)]
    pub bins: usize,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Report every this many bits.
    #[arg(long, default_value_t = 20)]
    pub every: u64,
    #[arg(long, default_value_t = crate::predictor::DEFAULT_L_MAX)]
    pub l_max: usize,
}

/// Everything `serve` can be told in one file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub duration: Option<f64>,
    #[serde(default = "default_addr")]
    pub addr: String,
    #[serde(default = "default_log")]
    pub log: PathBuf,
    #[serde(default)]
    pub hub: HubConfig,
    pub users: Option<CrowdConfig>,
    #[serde(default)]
    pub lab: Vec<LabConfig>,
}

fn default_addr() -> String {
    DEFAULT_ADDR.to_string()
}

fn default_log() -> PathBuf {
    PathBuf::from("hub.log")
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            duration: None,
            addr: default_addr(),
            log: default_log(),
            hub: HubConfig::default(),
            users: None,
            lab: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Usage(e.to_string()))?;
        let mut ids = std::collections::HashSet::new();
        for l in &cfg.lab {
            if !ids.insert(l.id.clone()) {
                return Err(CliError::Usage(format!("duplicate lab id {:?}", l.id)));
            }
        }
        if let Some(s) = cfg.seed {
            cfg.reseed(s);
        }
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
                Self::parse(&text)
            }
        }
    }

    /// Derives every seed in the run from one number.
    pub fn reseed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.hub.archive_seed = seed;
        self.hub.feedback_seed = seed ^ 0xfeed;
        if let Some(u) = self.users.as_mut() {
            u.seed = seed;
        }
        for (i, l) in self.lab.iter_mut().enumerate() {
            l.seed = seed.wrapping_add(1 + i as u64);
        }
    }
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run<I, T>(args: I, stdin: &mut dyn Read, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if code == 0 { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    match dispatch(cli.command, stdin, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(cmd: Command, stdin: &mut dyn Read, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Serve(a) => serve(a, out),
        Command::Lab(a) => lab(a, out),
        Command::Users(a) => users(a, out),
        Command::Replay(a) => replay_cmd(a, out),
        Command::Analyze(a) => analyze(a, out),
        Command::Predict(a) => predict(a, stdin, out),
    }
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(data)
}

fn emit(out: &mut dyn Write, rows: &[ReportRow], format: Format) -> Result<()> {
    let text = match format {
        Format::Table => render_table(rows),
        Format::JsonLines => render_json_lines(rows),
    };
    out.write_all(text.as_bytes()).map_err(data)
}

pub fn inequality_symbol(kind: LabKind) -> &'static str {
    match kind {
        LabKind::Chsh => "S",
        LabKind::Steering => "S16",
        LabKind::Bilocal => "B",
        LabKind::Timebin => "K",
        LabKind::Mdl => "I0",
    }
}

/// One row per lab; labs without enough data are reported on `out` and
/// skipped.
pub fn lab_rows<'a>(labs: impl IntoIterator<Item = &'a LabRunner>, out: &mut dyn Write) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    for r in labs {
        let spec = r.spec();
        match r.analyze() {
            Ok(res) => {
                let mut row = ReportRow::new(spec.id.clone(), inequality_symbol(spec.kind), res);
                row.trials = Some(r.report().trials);
                rows.push(row);
            }
            Err(e) => {
                let _ = writeln!(out, "# {}: {e}", spec.id);
            }
        }
    }
    rows
}

fn serve(a: ServeArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = RunConfig::load(a.config.as_deref())?;
    if let Some(s) = a.seed {
        cfg.reseed(s);
    }
    if let Some(addr) = a.addr {
        cfg.addr = addr;
    }
    if let Some(log) = a.log {
        cfg.log = log;
    }
    let duration = a.duration.or(cfg.duration);
    if duration.is_some_and(|d| !(d > 0.0)) {
        return Err(CliError::Usage("--duration must be positive".into()));
    }

    if a.virtual_time {
        let sim = SimConfig {
            hub: cfg.hub.clone(),
            crowd: cfg.users.clone().unwrap_or_default(),
            labs: cfg.lab.clone(),
            duration_s: duration.unwrap_or(60.0),
        };
        let report = simulate(&sim)?;
        let f = File::create(&cfg.log).map_err(data)?;
        write_log(std::io::BufWriter::new(f), &report.log).map_err(data)?;
        writeln!(out, "# virtual run: {} s, log {}", sim.duration_s, cfg.log.display()).map_err(data)?;
        writeln!(
            out,
            "# accepted {} dropped {} delivered {}",
            report.stats.accepted, report.stats.dropped, report.stats.delivered
        )
        .map_err(data)?;
        let rows = lab_rows(cfg.lab.iter().filter_map(|l| report.labs.get(&l.id)), out);
        return emit(out, &rows, a.format);
    }

    let rt = runtime()?;
    rt.block_on(async {
        let log = tokio::fs::File::create(&cfg.log).await.map_err(data)?;
        let server = ServerHandle::start(&cfg.addr, cfg.hub.clone(), log)
            .await
            .map_err(|e| CliError::Data(format!("cannot serve on {}: {e}", cfg.addr)))?;
        let addr = server.addr.to_string();
        writeln!(out, "# listening on {addr}, log {}", cfg.log.display()).map_err(data)?;

        // Labs run until the hub hangs up, so they see the final flush.
        let mut labs = Vec::new();
        for l in &cfg.lab {
            let l = l.clone();
            let addr = addr.clone();
            labs.push(tokio::spawn(async move {
                run_lab_client(&addr, &l, std::future::pending()).await
            }));
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
        for l in &cfg.lab {
            let spec = l.spec();
            writeln!(out, "# subscribed {} kind {} rate {} burst {}", spec.id, spec.kind.name(), spec.rate, spec.burst)
                .map_err(data)?;
        }

        let crowd = cfg.users.clone().map(|c| {
            let addr = addr.clone();
            let d = Duration::from_secs_f64(duration.unwrap_or(60.0));
            tokio::spawn(async move { run_crowd(&addr, &c, d).await })
        });
        match duration {
            Some(d) => tokio::time::sleep(Duration::from_secs_f64(d)).await,
            None => {
                let _ = tokio::signal::ctrl_c().await;
            }
        }
        if let Some(c) = crowd {
            let r = c.await.map_err(data)??;
            writeln!(out, "# players sent {} bits ({:.1} bits/s), robots {}", r.honest_sent, r.honest_rate(), r.robot_sent)
                .map_err(data)?;
        }
        let stats = server.shutdown().await?;
        writeln!(
            out,
            "# accepted {} dropped {} delivered {} intervals {}",
            stats.accepted, stats.dropped, stats.delivered, stats.intervals
        )
        .map_err(data)?;
        let mut runners = Vec::new();
        for h in labs {
            runners.push(h.await.map_err(data)??.runner);
        }
        let rows = lab_rows(runners.iter(), out);
        emit(out, &rows, a.format)
    })
}

fn lab_file(path: &Path, seed: Option<u64>) -> Result<Vec<LabConfig>> {
    let mut cfg = RunConfig::load(Some(path))?;
    if let Some(s) = seed {
        cfg.reseed(s);
    }
    Ok(cfg.lab)
}

fn lab(a: LabArgs, out: &mut dyn Write) -> Result<()> {
    let mut labs = lab_file(&a.config, a.seed)?;
    if let Some(id) = &a.lab {
        labs.retain(|l| &l.id == id);
        if labs.is_empty() {
            return Err(CliError::Usage(format!("no lab {id:?} in {}", a.config.display())));
        }
    }
    let rt = runtime()?;
    let runners = rt.block_on(async {
        let mut handles = Vec::new();
        for l in labs {
            let addr = a.addr.clone();
            let d = Duration::from_secs_f64(a.duration);
            handles.push(tokio::spawn(async move {
                run_lab_client(&addr, &l, tokio::time::sleep(d)).await
            }));
        }
        let mut v = Vec::new();
        for h in handles {
            v.push(h.await.map_err(data)??.runner);
        }
        Ok::<_, CliError>(v)
    })?;
    let rows = lab_rows(runners.iter(), out);
    emit(out, &rows, a.format)
}

fn users(a: UsersArgs, out: &mut dyn Write) -> Result<()> {
    let mut crowd = match &a.config {
        Some(p) => RunConfig::load(Some(p))?.users.unwrap_or_default(),
        None => CrowdConfig::default(),
    };
    if let Some(n) = a.users {
        crowd.users = n;
    }
    if let Some(r) = a.rate {
        if !(r > 0.0) {
            return Err(CliError::Usage("--rate must be positive".into()));
        }
        crowd.bits_per_second = r;
    }
    match a.model {
        Some(ModelArg::Fair) => crowd.model = BitModel::Fair,
        Some(ModelArg::Human) => crowd.model = BitModel::CalibratedHuman,
        None => {}
    }
    if let Some(p) = &a.bits_file {
        let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
        let bits: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        crowd.model = BitModel::Replay(crate::predictor::parse_bits(&bits).map_err(data)?);
    }
    if let Some(r) = a.robots {
        crowd.robots = r;
    }
    if let Some(s) = a.seed {
        crowd.seed = s;
    }
    let rt = runtime()?;
    let report = rt.block_on(run_crowd(&a.addr, &crowd, Duration::from_secs_f64(a.duration)))?;
    writeln!(
        out,
        "players {} sent {} bits ({:.1} bits/s); robots {} sent {}",
        crowd.users,
        report.honest_sent,
        report.honest_rate(),
        crowd.robots,
        report.robot_sent
    )
    .map_err(data)
}

fn replay_cmd(a: ReplayArgs, out: &mut dyn Write) -> Result<()> {
    let f = File::open(&a.log).map_err(|e| CliError::Usage(format!("{}: {e}", a.log.display())))?;
    let records = read_log(BufReader::new(f))?;
    if records.is_empty() {
        return emit(out, &[], a.format);
    }
    let rep = replay(&records)?;
    if !rep.identical() {
        return Err(CliError::Data(format!(
            "replay differs from the log: {}",
            rep.mismatches.join("; ")
        )));
    }
    writeln!(
        out,
        "# {} intervals, {} live bits, streams identical for {} labs",
        rep.intervals,
        rep.live_bits,
        rep.rebuilt.len()
    )
    .map_err(data)?;
    let labs = match &a.config {
        Some(p) => RunConfig::load(Some(p))?.lab,
        None => Vec::new(),
    };
    let mut runners = Vec::new();
    for l in &labs {
        runners.push(run_lab_over(l, &rep.deliveries)?);
    }
    let rows = lab_rows(runners.iter(), out);
    emit(out, &rows, a.format)
}

/// Reads the table behind `inequality` and evaluates it.
pub fn analyze_file(path: &Path, inequality: Inequality, signs: Option<&str>, bins: usize) -> Result<BellResult> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let header = text.lines().next().unwrap_or("");
    let signs = signs
        .map(|s| s.parse::<ChshSigns>().map_err(|e| CliError::Usage(e.to_string())))
        .transpose()?;
    Ok(match inequality {
        Inequality::Chsh if header.contains("correlator") => {
            let rows = csvio::read_correlators(text.as_bytes())?;
            let (e, n) = csvio::chsh_correlators(&rows)?;
            chsh_from_correlators(e, signs.unwrap_or_else(|| ChshSigns::best_for(e)), n)
        }
        Inequality::Chsh => {
            let t = csvio::read_count_table(text.as_bytes())?;
            let signs = match signs {
                Some(s) => s,
                None => {
                    let mut e = [0.0; 4];
                    for (k, v) in e.iter_mut().enumerate() {
                        *v = crate::bellstats::correlator(&t, k / 2, k % 2).map_err(data)?;
                    }
                    ChshSigns::best_for(e)
                }
            };
            chsh(&t, signs).map_err(data)?
        }
        Inequality::Mdl => mdl_i0(&csvio::read_count_table(text.as_bytes())?).map_err(data)?,
        Inequality::Steering => steering_from_counts(&csvio::read_count_table(text.as_bytes())?).map_err(data)?,
        Inequality::Bilocal => bilocality(&csvio::read_tri_table(text.as_bytes())?).map_err(data)?,
        Inequality::K => k_statistic(&csvio::read_timebin(text.as_bytes(), bins)?).map_err(data)?,
    })
}

fn analyze(a: AnalyzeArgs, out: &mut dyn Write) -> Result<()> {
    let res = analyze_file(&a.table, a.inequality, a.signs.as_deref(), a.bins)?;
    let symbol = match a.inequality {
        Inequality::Chsh => "S",
        Inequality::Steering => "S16",
        Inequality::Bilocal => "B",
        Inequality::Mdl => "I0",
        Inequality::K => "K",
    };
    let label = a
        .table
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    emit(out, &[ReportRow::new(label, symbol, res)], a.format)
}

fn predict(a: PredictArgs, stdin: &mut dyn Read, out: &mut dyn Write) -> Result<()> {
    let mut state = PredictorState::new(a.l_max).map_err(|e| CliError::Usage(e.to_string()))?;
    let every = a.every.max(1);
    let (mut n, mut hits) = (0u64, 0u64);
    for line in BufReader::new(stdin).lines() {
        let line = line.map_err(data)?;
        for c in line.chars().filter(|c| !c.is_whitespace()) {
            let bit = match c {
                '0' => 0,
                '1' => 1,
                other => return Err(CliError::Data(format!("not a bit: {other:?} after {n} bits"))),
            };
            hits += u64::from(state.step(bit));
            n += 1;
            if n % every == 0 {
                writeln!(out, "{n:>8} bits  accuracy {:.3}", hits as f64 / n as f64).map_err(data)?;
            }
        }
    }
    let acc = if n == 0 { 0.5 } else { hits as f64 / n as f64 };
    writeln!(out, "total {n} bits  predicted {hits}  accuracy {acc:.4}").map_err(data)
}
