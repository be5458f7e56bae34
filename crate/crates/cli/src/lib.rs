//! Command-line front end: argument parsing, experiment runs and report files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use rdsim_core::config::{load_raw, ConfigError};
use rdsim_core::metrics::{percent_change, FlowKind, FlowReport};
use rdsim_core::scenario::builders::{
    exp3_population, EXP2_CBR_FLOW, EXP2_CHEATER_FLOW, EXP2_HONEST_FLOW,
};
use rdsim_core::{
    build_exp1, build_exp2, build_exp3, run_scenario, Arm, FlowId, ReportSet, ScenarioConfig,
    ScenarioError, StreamKind,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(#[from] clap::Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("no reports to write")]
    NoReports,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Config(ConfigError::Io { .. }) | CliError::Io { .. } => 4,
            CliError::Config(_) | CliError::Scenario(_) | CliError::NoReports => 3,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Exp1,
    Exp2,
    Exp3,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Exp1 => "exp1",
            Experiment::Exp2 => "exp2",
            Experiment::Exp3 => "exp3",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArmChoice {
    Control,
    Experiment,
    Both,
}

impl ArmChoice {
    pub fn arms(self) -> &'static [Arm] {
        match self {
            ArmChoice::Control => &[Arm::Control],
            ArmChoice::Experiment => &[Arm::Experiment],
            ArmChoice::Both => &[Arm::Control, Arm::Experiment],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StreamArg {
    Audio,
    Video,
}

impl From<StreamArg> for StreamKind {
    fn from(s: StreamArg) -> Self {
        match s {
            StreamArg::Audio => StreamKind::Audio,
            StreamArg::Video => StreamKind::Video,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "rdsim",
    version,
    about = "Rate-delay bearer experiments on a simulated LTE downlink"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one experiment and write CSV reports plus a summary table.
    Run {
        #[arg(value_enum)]
        experiment: Experiment,
        /// Real-time stream profile (exp1 defaults to audio; required for exp3).
        #[arg(long, value_enum)]
        stream: Option<StreamArg>,
        /// Number of UEs marking their stream (exp3 only).
        #[arg(long)]
        marked: Option<u32>,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        seed: Vec<u64>,
        #[arg(long, value_enum, default_value_t = ArmChoice::Both)]
        arm: ArmChoice,
        /// Scenario file whose keys override the built-in experiment.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "./results")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunRequest {
    pub experiment: Experiment,
    pub arm: ArmChoice,
    pub stream: StreamKind,
    pub n_marked: Option<u32>,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub config: Option<PathBuf>,
}

fn usage(kind: ErrorKind, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(Cli::command().error(kind, msg))
}

pub fn parse_args<I, T>(argv: I) -> Result<RunRequest, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let Command::Run {
        experiment,
        stream,
        marked,
        seed,
        arm,
        config,
        out,
    } = Cli::try_parse_from(argv)?.command;

    let stream = match (experiment, stream) {
        (Experiment::Exp3, None) => {
            return Err(usage(
                ErrorKind::MissingRequiredArgument,
                "exp3 requires --stream",
            ))
        }
        (Experiment::Exp2, Some(StreamArg::Video)) => {
            return Err(usage(
                ErrorKind::ArgumentConflict,
                "exp2 uses the audio stream only",
            ))
        }
        (_, s) => s.map_or(StreamKind::Audio, StreamKind::from),
    };
    match (experiment, marked) {
        (Experiment::Exp3, None) => {
            return Err(usage(
                ErrorKind::MissingRequiredArgument,
                "exp3 requires --marked",
            ))
        }
        (Experiment::Exp3, Some(n)) if n > exp3_population(stream) => {
            return Err(usage(
                ErrorKind::ValueValidation,
                format!(
                    "--marked {n} exceeds the {} {stream} UEs",
                    exp3_population(stream)
                ),
            ))
        }
        (Experiment::Exp3, Some(_)) | (_, None) => {}
        (_, Some(_)) => {
            return Err(usage(
                ErrorKind::ArgumentConflict,
                "--marked applies to exp3 only",
            ))
        }
    }
    if seed.is_empty() {
        return Err(usage(
            ErrorKind::ValueValidation,
            "at least one seed is required",
        ));
    }
    Ok(RunRequest {
        experiment,
        arm,
        stream,
        n_marked: marked,
        seeds: seed,
        out_dir: out,
        config,
    })
}

/// Builds the scenario for one arm and seed, with the request's config
/// file laid over it.
pub fn scenario_for(req: &RunRequest, arm: Arm, seed: u64) -> Result<ScenarioConfig, CliError> {
    let experiment = arm == Arm::Experiment;
    let mut cfg = match req.experiment {
        Experiment::Exp1 => build_exp1(experiment, req.stream),
        Experiment::Exp2 => build_exp2(experiment),
        Experiment::Exp3 => {
            let n = if experiment {
                req.n_marked.unwrap_or(0)
            } else {
                0
            };
            build_exp3(req.stream, n)?
        }
    };
    if let Some(path) = &req.config {
        load_raw(path)?.apply_to(&mut cfg)?;
    }
    cfg.arm = arm;
    cfg.seed = seed;
    cfg.validate()?;
    Ok(cfg)
}

pub fn execute(req: &RunRequest) -> Result<Vec<ReportSet>, CliError> {
    let mut sets = Vec::new();
    for &seed in &req.seeds {
        for &arm in req.arm.arms() {
            sets.push(run_scenario(&scenario_for(req, arm, seed)?)?);
        }
    }
    Ok(sets)
}

pub fn run(req: &RunRequest) -> Result<Vec<PathBuf>, CliError> {
    emit_reports(req.experiment, &execute(req)?, &req.out_dir)
}

pub const CSV_HEADER: [&str; 14] = [
    "scenario",
    "arm",
    "seed",
    "flow_id",
    "ue_id",
    "qci",
    "delay_mean",
    "delay_min",
    "delay_max",
    "delay_stddev",
    "jitter",
    "goodput_mbps",
    "retransmissions",
    "drops",
];

fn num(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.4}"))
}

fn csv_row(set: &ReportSet, f: &FlowReport) -> Vec<String> {
    vec![
        set.scenario.clone(),
        set.arm.to_string(),
        set.seed.to_string(),
        f.flow.to_string(),
        f.ue.to_string(),
        f.qci.to_string(),
        num(f.delay.map(|d| d.mean)),
        num(f.delay.map(|d| d.min)),
        num(f.delay.map(|d| d.max)),
        num(f.delay.map(|d| d.stddev)),
        num(f.jitter_ms),
        format!("{:.6}", f.goodput_mbps),
        f.retransmissions
            .map_or_else(String::new, |r| r.to_string()),
        f.drops.to_string(),
    ]
}

fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), CliError> {
    let csv_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => CliError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(format!("{other:?}")),
        },
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes one CSV per report set, the experiment summary and, for exp3,
/// the per-UE scatter data. Returns the files written.
pub fn emit_reports(
    experiment: Experiment,
    sets: &[ReportSet],
    out_dir: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    if sets.is_empty() {
        return Err(CliError::NoReports);
    }
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let exp = experiment.as_str();
    let mut written = Vec::new();
    for set in sets {
        let path = out_dir.join(format!("{exp}_{}_{}.csv", set.arm, set.seed));
        write_csv(
            &path,
            &CSV_HEADER,
            set.flows.iter().map(|f| csv_row(set, f)),
        )?;
        written.push(path);
    }

    let path = out_dir.join(format!("{exp}_summary.txt"));
    fs::write(&path, summary(experiment, sets)).map_err(io_err(&path))?;
    written.push(path);

    if experiment == Experiment::Exp3 {
        let path = out_dir.join("exp3_scatter.csv");
        let header = [
            "scenario",
            "arm",
            "seed",
            "ue_id",
            "flow_id",
            "marked",
            "delay_mean",
            "jitter",
        ];
        let rows = sets.iter().flat_map(|set| {
            set.flows
                .iter()
                .filter(|f| f.kind == FlowKind::Cbr)
                .map(move |f| {
                    vec![
                        set.scenario.clone(),
                        set.arm.to_string(),
                        set.seed.to_string(),
                        f.ue.to_string(),
                        f.flow.to_string(),
                        f.marked.to_string(),
                        num(f.delay.map(|d| d.mean)),
                        num(f.jitter_ms),
                    ]
                })
        });
        write_csv(&path, &header, rows)?;
        written.push(path);
    }
    Ok(written)
}

fn pct(control: Option<f64>, experiment: Option<f64>) -> String {
    match (control, experiment) {
        (Some(c), Some(e)) => {
            percent_change(c, e).map_or_else(|_| "n/a".into(), |p| format!("{p:+.2}%"))
        }
        _ => "n/a".into(),
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.3}"))
}

fn table_row(out: &mut String, label: &str, c: Option<f64>, e: Option<f64>) {
    let _ = writeln!(
        out,
        "  {label:<28} {:>12} {:>12} {:>10}",
        cell(c),
        cell(e),
        pct(c, e)
    );
}

fn flow_label(experiment: Experiment, f: &FlowReport) -> String {
    let role = match (experiment, f.flow) {
        (Experiment::Exp2, id) if id == EXP2_HONEST_FLOW => " honest",
        (Experiment::Exp2, id) if id == EXP2_CHEATER_FLOW => " liar",
        (Experiment::Exp2, id) if id == EXP2_CBR_FLOW => " real-time",
        _ => "",
    };
    let kind = match f.kind {
        FlowKind::Tcp => "tcp",
        FlowKind::Cbr => "cbr",
    };
    format!("flow {} ({kind}{role}, ue {})", f.flow, f.ue)
}

fn cbr_group_mean(set: &ReportSet, marked: bool) -> Option<f64> {
    let means: Vec<f64> = set
        .flows
        .iter()
        .filter(|f| f.kind == FlowKind::Cbr && f.marked == marked)
        .filter_map(|f| f.delay.map(|d| d.mean))
        .collect();
    (!means.is_empty()).then(|| means.iter().sum::<f64>() / means.len() as f64)
}

fn summary(experiment: Experiment, sets: &[ReportSet]) -> String {
    let mut out = String::new();
    let mut seeds: Vec<u64> = sets.iter().map(|s| s.seed).collect();
    seeds.dedup();
    for seed in seeds {
        let find = |arm| sets.iter().find(|s| s.seed == seed && s.arm == arm);
        let (control, exper) = (find(Arm::Control), find(Arm::Experiment));
        let name = exper
            .or(control)
            .map(|s| s.scenario.as_str())
            .unwrap_or_default();
        let _ = writeln!(out, "{name} seed {seed}");
        let _ = writeln!(
            out,
            "  {:<28} {:>12} {:>12} {:>10}",
            "", "control", "experiment", "% change"
        );

        let mut ids: Vec<FlowId> = sets
            .iter()
            .filter(|s| s.seed == seed)
            .flat_map(|s| s.flows.iter().map(|f| f.flow))
            .collect();
        ids.sort();
        ids.dedup();
        for id in ids {
            let c = control.and_then(|s| s.flow(id));
            let e = exper.and_then(|s| s.flow(id));
            let Some(any) = e.or(c) else { continue };
            let _ = writeln!(out, " {}", flow_label(experiment, any));
            let get = |f: Option<&FlowReport>, m: fn(&FlowReport) -> Option<f64>| f.and_then(m);
            match any.kind {
                FlowKind::Tcp => {
                    let goodput: fn(&FlowReport) -> Option<f64> = |f| Some(f.goodput_mbps);
                    let rtx: fn(&FlowReport) -> Option<f64> =
                        |f| f.retransmissions.map(|r| r as f64);
                    table_row(
                        &mut out,
                        "throughput (Mbit/s)",
                        get(c, goodput),
                        get(e, goodput),
                    );
                    table_row(&mut out, "retransmissions", get(c, rtx), get(e, rtx));
                }
                FlowKind::Cbr => {
                    let mean: fn(&FlowReport) -> Option<f64> = |f| f.delay.map(|d| d.mean);
                    let min: fn(&FlowReport) -> Option<f64> = |f| f.delay_rounded.map(|d| d.min);
                    let max: fn(&FlowReport) -> Option<f64> = |f| f.delay_rounded.map(|d| d.max);
                    let sd: fn(&FlowReport) -> Option<f64> = |f| f.delay.map(|d| d.stddev);
                    let jit: fn(&FlowReport) -> Option<f64> = |f| f.jitter_ms;
                    table_row(&mut out, "delay mean (ms)", get(c, mean), get(e, mean));
                    table_row(&mut out, "delay min (ms)", get(c, min), get(e, min));
                    table_row(&mut out, "delay max (ms)", get(c, max), get(e, max));
                    table_row(&mut out, "delay stddev (ms)", get(c, sd), get(e, sd));
                    table_row(&mut out, "jitter (ms)", get(c, jit), get(e, jit));
                }
            }
        }
        if experiment == Experiment::Exp3 {
            let _ = writeln!(out, " cbr group means");
            let group = |s: Option<&ReportSet>, m| s.and_then(|s| cbr_group_mean(s, m));
            table_row(
                &mut out,
                "marked delay mean (ms)",
                group(control, true),
                group(exper, true),
            );
            table_row(
                &mut out,
                "unmarked delay mean (ms)",
                group(control, false),
                group(exper, false),
            );
        }
        out.push('\n');
    }
    out
}
