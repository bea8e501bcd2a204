//! Command-line front end: argument and config-file parsing, running trials,
//! sweeps and the three-relay replay, and CSV output.
//!
//! Config files hold `key=value` lines using the long flag names without the
//! leading dashes (`mus=400`, `strategy=eb-mu`). `#` starts a comment.
//! Flags given on the command line override the file.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use thiserror::Error;

use crate::hexgeom::RelayId;
use crate::netmodel::{selection, Strategy};
use crate::predictor::{PredictorState, DEFAULT_EPS};
use crate::simengine::{
    mean_std, run_sweep, run_trial, SimConfig, SimError, SweepPlan, SweepRow, SweepTable,
};

pub const CSV_HEADER: &str =
    "n_mus,strategy,throughput_mean,throughput_std,lifetime_mean,lifetime_std,blocked_mean";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_REPLAY_MISMATCH: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("replay selected {selected} instead of {expected}")]
    ReplayMismatch { selected: String, expected: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Sim(_) => EXIT_USAGE,
            CliError::Io { .. } => EXIT_IO,
            CliError::ReplayMismatch { .. } => EXIT_REPLAY_MISMATCH,
        }
    }

    fn io(context: impl Into<String>, source: io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Trial,
    Sweep,
    #[value(name = "replay-example")]
    ReplayExample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    #[value(name = "no-eb")]
    NoEb,
    #[value(name = "eb-bs")]
    EbBs,
    #[value(name = "eb-mu")]
    EbMu,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::NoEb => Strategy::NoEb,
            StrategyArg::EbBs => Strategy::EbByBs,
            StrategyArg::EbMu => Strategy::EbByMu,
        }
    }
}

#[derive(Debug, Clone, Default, Parser)]
#[command(
    name = "relaysim",
    about = "Energy-balancing relay selection in hexagonal cellular networks",
    version
)]
struct Args {
    /// trial, sweep or replay-example
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    /// Number of mobile users (trial mode)
    #[arg(long)]
    mus: Option<usize>,
    #[arg(long)]
    cells: Option<usize>,
    /// Horizon in slots
    #[arg(long)]
    slots: Option<u64>,
    #[arg(long)]
    trials: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Predictor noise constant
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long = "hot-weight")]
    hot_weight: Option<f64>,
    #[arg(long = "p-idle")]
    p_idle: Option<f64>,
    #[arg(long = "p-session")]
    p_session: Option<f64>,
    /// Initial relay energy
    #[arg(long)]
    energy: Option<f64>,
    /// Concurrent sessions per relay
    #[arg(long)]
    capacity: Option<u32>,
    /// Data units per slot per session
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long = "start-prob")]
    start_prob: Option<f64>,
    #[arg(long = "mean-len")]
    mean_len: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    /// CSV output path
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=value config file; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
}

/// A fully resolved command line.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub mode: Mode,
    pub config: SimConfig,
    /// Trials per point; `None` means 1 in trial mode and 10 in sweep mode.
    pub trials: Option<u32>,
    pub out: Option<PathBuf>,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            mode: Mode::Trial,
            config: SimConfig::default(),
            trials: None,
            out: None,
        }
    }
}

impl RunSpec {
    fn apply(&mut self, a: Args) {
        if let Some(m) = a.mode {
            self.mode = m;
        }
        let c = &mut self.config;
        macro_rules! set {
            ($src:expr => $dst:expr) => {
                if let Some(v) = $src {
                    $dst = v.into();
                }
            };
        }
        set!(a.strategy => c.strategy);
        set!(a.mus => c.n_mus);
        set!(a.cells => c.n_cells);
        set!(a.slots => c.horizon);
        set!(a.seed => c.seed);
        set!(a.eps => c.eps);
        set!(a.hot_weight => c.hot_cell_weight);
        set!(a.p_idle => c.p_idle);
        set!(a.p_session => c.p_session);
        set!(a.energy => c.initial_energy);
        set!(a.capacity => c.capacity);
        set!(a.rate => c.rate);
        set!(a.start_prob => c.session_start_prob);
        set!(a.mean_len => c.mean_session_len);
        set!(a.radius => c.radius);
        if a.trials.is_some() {
            self.trials = a.trials;
        }
        if a.out.is_some() {
            self.out = a.out;
        }
    }

    pub fn sweep_plan(&self) -> SweepPlan {
        SweepPlan {
            trials: self.trials.unwrap_or(10),
            ..SweepPlan::default()
        }
    }
}

fn clap_usage(e: clap::Error) -> CliError {
    CliError::Usage(e.render().to_string())
}

/// Turns config-file text into the equivalent flag list.
pub fn config_file_args(text: &str) -> Result<Vec<String>, CliError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("config line {}: expected key=value, got '{raw}'", n + 1))
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || k.starts_with('-') || k == "config" {
            return Err(CliError::Usage(format!("config line {}: bad key '{k}'", n + 1)));
        }
        out.push(format!("--{k}={v}"));
    }
    Ok(out)
}

/// Parses `argv` (including the program name) into a [`RunSpec`].
pub fn parse_args<I, S>(argv: I) -> Result<RunSpec, CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let cli = Args::try_parse_from(&argv).map_err(clap_usage)?;
    let mut spec = RunSpec::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("reading config {}", path.display()), e))?;
        let mut file_argv = vec![argv.first().cloned().unwrap_or_else(|| "relaysim".into())];
        file_argv.extend(config_file_args(&text)?);
        let file_args = Args::try_parse_from(&file_argv).map_err(|e| {
            CliError::Usage(format!("in config {}: {}", path.display(), e.render()))
        })?;
        spec.apply(file_args);
    }
    spec.apply(cli);
    spec.config.validate()?;
    if spec.trials == Some(0) {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    Ok(spec)
}

/// `%g`-style formatting with `digits` significant digits.
pub fn format_sig(x: f64, digits: usize) -> String {
    let digits = digits.max(1);
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let m = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_fraction(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn sorted_rows(table: &SweepTable) -> Vec<&SweepRow> {
    let mut rows: Vec<&SweepRow> = table.rows.iter().collect();
    rows.sort_by(|a, b| {
        a.n_mus
            .cmp(&b.n_mus)
            .then_with(|| a.strategy.name().cmp(b.strategy.name()))
    });
    rows
}

/// Writes the table as CSV, rows sorted by user count then strategy name.
pub fn write_csv<W: Write>(table: &SweepTable, mut w: W) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in sorted_rows(table) {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.n_mus,
            r.strategy.name(),
            format_sig(r.throughput_mean, 6),
            format_sig(r.throughput_std, 6),
            format_sig(r.lifetime_mean, 6),
            format_sig(r.lifetime_std, 6),
            format_sig(r.blocked_mean, 6),
        )?;
    }
    w.flush()
}

pub fn emit_csv(table: &SweepTable, path: &Path) -> Result<(), CliError> {
    let ctx = || format!("writing {}", path.display());
    let f = File::create(path).map_err(|e| CliError::io(ctx(), e))?;
    write_csv(table, BufWriter::new(f)).map_err(|e| CliError::io(ctx(), e))
}

/// Energy histories of the three candidate relays in the worked example;
/// `R1` is busy and draining fast, `R2` drains slowly.
pub const EXAMPLE_HISTORIES: [(&str, [f64; 4]); 3] = [
    ("R1", [2000.0, 1500.0, 1300.0, 900.0]),
    ("R2", [900.0, 870.0, 830.0, 800.0]),
    ("R3", [1400.0, 1200.0, 1000.0, 850.0]),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayEntry {
    pub name: String,
    pub relay: RelayId,
    pub current: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub eps: f64,
    pub entries: Vec<ReplayEntry>,
    /// `None` when every prediction is zero.
    pub selected: Option<RelayId>,
}

impl ReplayReport {
    pub fn selected_name(&self) -> Option<&str> {
        let id = self.selected?;
        self.entries
            .iter()
            .find(|e| e.relay == id)
            .map(|e| e.name.as_str())
    }
}

/// Runs each history through a fresh predictor and selects by predicted
/// energy. Relay `Rk` gets id `k`.
pub fn replay_histories(histories: &[(&str, &[f64])], eps: f64) -> Result<ReplayReport, CliError> {
    let mut entries = Vec::with_capacity(histories.len());
    for (i, (name, hist)) in histories.iter().enumerate() {
        let mut state = PredictorState::new(eps)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let mut predicted = 0.0;
        for &e in hist.iter() {
            predicted = state
                .observe(e, 1.0)
                .map_err(|e| CliError::Usage(e.to_string()))?;
        }
        entries.push(ReplayEntry {
            name: name.to_string(),
            relay: RelayId(i + 1),
            current: hist.last().copied().unwrap_or(0.0),
            predicted,
        });
    }
    let offers: Vec<(RelayId, f64)> = entries.iter().map(|e| (e.relay, e.predicted)).collect();
    Ok(ReplayReport {
        eps,
        selected: selection(&offers),
        entries,
    })
}

pub fn replay_example(eps: f64) -> Result<ReplayReport, CliError> {
    let hs: Vec<(&str, &[f64])> = EXAMPLE_HISTORIES
        .iter()
        .map(|(n, h)| (*n, h.as_slice()))
        .collect();
    replay_histories(&hs, eps)
}

fn print_replay<W: Write>(out: &mut W, r: &ReplayReport) -> io::Result<()> {
    writeln!(out, "eps = {}", r.eps)?;
    for e in &r.entries {
        writeln!(
            out,
            "  {}: current {:>8.2}  potential {:>8.2}",
            e.name, e.current, e.predicted
        )?;
    }
    writeln!(out, "  selected: {}", r.selected_name().unwrap_or("none (blocked)"))
}

fn ordered(a: f64, b: f64, c: f64) -> bool {
    a >= b && b >= c
}

/// Per-point summary of which strategy won on throughput and lifetime.
pub fn write_summary<W: Write>(table: &SweepTable, out: &mut W) -> io::Result<()> {
    writeln!(
        out,
        "{:>5}  {:>28}  {:>28}",
        "n_mus", "throughput mu/bs/no", "lifetime mu/bs/no"
    )?;
    let mut tp_ok = 0;
    let mut lt_ok = 0;
    let counts = table.mu_counts();
    for &n in &counts {
        let get = |s| table.row(n, s);
        let (Some(mu), Some(bs), Some(no)) =
            (get(Strategy::EbByMu), get(Strategy::EbByBs), get(Strategy::NoEb))
        else {
            continue;
        };
        let t = ordered(mu.throughput_mean, bs.throughput_mean, no.throughput_mean);
        let l = ordered(mu.lifetime_mean, bs.lifetime_mean, no.lifetime_mean);
        tp_ok += t as usize;
        lt_ok += l as usize;
        writeln!(
            out,
            "{n:>5}  {:>8.2} {:>8.2} {:>8.2} {}  {:>8.1} {:>8.1} {:>8.1} {}",
            mu.throughput_mean,
            bs.throughput_mean,
            no.throughput_mean,
            if t { "ok" } else { "!!" },
            mu.lifetime_mean,
            bs.lifetime_mean,
            no.lifetime_mean,
            if l { "ok" } else { "!!" },
        )?;
    }
    writeln!(
        out,
        "ordering eb-mu >= eb-bs >= no-eb: throughput {tp_ok}/{n}, lifetime {lt_ok}/{n}",
        n = counts.len()
    )
}

/// Executes a parsed command line, writing human-readable output to `out`.
pub fn execute<W: Write>(spec: &RunSpec, out: &mut W) -> Result<(), CliError> {
    let io_err = |e| CliError::io("writing output", e);
    match spec.mode {
        Mode::ReplayExample => {
            let mut eps_list = vec![spec.config.eps];
            for e in [0.01, DEFAULT_EPS, 0.5, 5.0] {
                if !eps_list.contains(&e) {
                    eps_list.push(e);
                }
            }
            let mut mismatch = None;
            for eps in eps_list {
                let r = replay_example(eps)?;
                print_replay(out, &r).map_err(io_err)?;
                let name = r.selected_name().unwrap_or("none");
                if name != "R2" && mismatch.is_none() {
                    mismatch = Some(name.to_string());
                }
            }
            match mismatch {
                Some(selected) => Err(CliError::ReplayMismatch {
                    selected,
                    expected: "R2".into(),
                }),
                None => {
                    writeln!(out, "R2 selected for every eps").map_err(io_err)?;
                    Ok(())
                }
            }
        }
        Mode::Trial => {
            let trials = spec.trials.unwrap_or(1);
            let mut records = Vec::with_capacity(trials as usize);
            for t in 0..trials {
                let cfg = SimConfig {
                    seed: spec.config.seed.wrapping_add(u64::from(t)),
                    ..spec.config.clone()
                };
                let m = run_trial(&cfg)?;
                writeln!(
                    out,
                    "seed {}: strategy {} mus {} throughput {:.4} avg_lifetime {:.2} blocked {} dead {}/{}",
                    cfg.seed,
                    cfg.strategy,
                    cfg.n_mus,
                    m.aggregate_throughput,
                    m.avg_lifetime,
                    m.blocked_sessions,
                    m.relay_lifetimes.iter().filter(|&&l| l < cfg.horizon).count(),
                    m.relay_lifetimes.len(),
                )
                .map_err(io_err)?;
                records.push(m);
            }
            let tp: Vec<f64> = records.iter().map(|m| m.aggregate_throughput).collect();
            let lt: Vec<f64> = records.iter().map(|m| m.avg_lifetime).collect();
            let bl: Vec<f64> = records.iter().map(|m| m.blocked_sessions as f64).collect();
            let (throughput_mean, throughput_std) = mean_std(&tp);
            let (lifetime_mean, lifetime_std) = mean_std(&lt);
            let table = SweepTable {
                rows: vec![SweepRow {
                    n_mus: spec.config.n_mus,
                    strategy: spec.config.strategy,
                    trials,
                    throughput_mean,
                    throughput_std,
                    lifetime_mean,
                    lifetime_std,
                    blocked_mean: mean_std(&bl).0,
                }],
            };
            if let Some(path) = &spec.out {
                emit_csv(&table, path)?;
            }
            Ok(())
        }
        Mode::Sweep => {
            let table = run_sweep(&spec.config, &spec.sweep_plan())?;
            match &spec.out {
                Some(path) => {
                    write_summary(&table, out).map_err(io_err)?;
                    emit_csv(&table, path)
                }
                // CSV owns stdout; keep it clean for piping.
                None => {
                    write_summary(&table, &mut io::stderr()).map_err(io_err)?;
                    write_csv(&table, &mut *out).map_err(io_err)
                }
            }
        }
    }
}

/// Parses and runs; returns the process exit status.
pub fn main_with_args<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let spec = match parse_args(argv.clone()) {
        Ok(s) => s,
        Err(CliError::Usage(msg)) if is_help_request(&argv) => {
            print!("{msg}");
            return EXIT_OK;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    match execute(&spec, &mut lock) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn is_help_request(argv: &[String]) -> bool {
    argv.iter()
        .skip(1)
        .any(|a| a == "--help" || a == "-h" || a == "--version" || a == "-V")
}
