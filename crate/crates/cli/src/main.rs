//! `leobeam` command-line front end.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage or input error,
//! 3 infeasible scenario.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand, ValueEnum};
use leobeam::sim::engine::SUMMARY_FILE;
use leobeam::sim::{read_trace, run_to_dir, validate_trace, MetricsSummary, ScenarioConfig};
use leobeam::Error;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "leobeam", version, about = "Beam management simulator for multi-satellite LEO constellations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write metrics, trace and summary.
    Run(RunArgs),
    /// Check every decision in a trace against the constraints.
    Validate {
        /// Trace written by `run`.
        trace: PathBuf,
    },
    /// Run a scenario over several parameter values and seeds.
    Sweep(SweepArgs),
    /// Tabulate the summaries of finished runs.
    Report {
        /// Run directories, or sweep directories to search.
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Override a setting, e.g. `--set lyapunov.V=1000`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    epochs: Option<u64>,
    /// Choose a policy, e.g. `--policy handover=load_balance`.
    #[arg(long = "policy", value_name = "STAGE=NAME")]
    policies: Vec<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepParameter {
    #[value(name = "V")]
    V,
    #[value(name = "arrival_rate")]
    ArrivalRate,
}

impl SweepParameter {
    fn key(self) -> &'static str {
        match self {
            Self::V => "lyapunov.V",
            Self::ArrivalRate => "arrivals.mean_total_rate_bps",
        }
    }

    fn label(self) -> &'static str {
        match self {
            Self::V => "V",
            Self::ArrivalRate => "arrival_rate",
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value = "sweep")]
    out: PathBuf,
    /// Parameter to vary.
    #[arg(long, ignore_case = true)]
    param: SweepParameter,
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    seeds: Vec<u64>,
    /// Concurrent runs; defaults to the available cores.
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Validate { trace } => cmd_validate(&trace),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Report { dirs, out } => cmd_report(&dirs, out.as_deref()),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Infeasible { .. } => 3,
        Error::Domain(_) => 1,
        _ => 2,
    }
}

fn split_pair(raw: &str, what: &str) -> Result<(String, String), Error> {
    raw.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| Error::Config(format!("{what} {raw:?} is not of the form key=value")))
}

fn load_scenario(args: &ScenarioArgs, extra: &[(String, String)]) -> Result<ScenarioConfig, Error> {
    let text = std::fs::read_to_string(&args.scenario)
        .map_err(|e| Error::Config(format!("cannot read scenario {}: {e}", args.scenario.display())))?;
    let mut overrides = args.overrides.iter().map(|o| split_pair(o, "override")).collect::<Result<Vec<_>, _>>()?;
    if let Some(epochs) = args.epochs {
        overrides.push(("epochs".into(), epochs.to_string()));
    }
    overrides.extend_from_slice(extra);
    let mut cfg = ScenarioConfig::from_toml(&text, &overrides).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", args.scenario.display())),
        other => other,
    })?;
    for p in &args.policies {
        let (stage, name) = split_pair(p, "policy")?;
        cfg.policy.set(&stage, &name)?;
    }
    Ok(cfg)
}

fn cmd_run(args: &RunArgs) -> Result<ExitCode, Error> {
    let extra: Vec<_> = args.seed.map(|s| ("seed".to_string(), s.to_string())).into_iter().collect();
    let cfg = load_scenario(&args.scenario, &extra)?;
    let summary = run_to_dir(cfg, &args.out)?;
    println!(
        "{} epochs: mean queue {:.4e} bits (last {}), max handover frequency {:.5}, diverging {}",
        summary.epochs, summary.mean_queue_window, summary.window, summary.final_max_handover_freq, summary.diverging
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(path: &Path) -> Result<ExitCode, Error> {
    let file = File::open(path).map_err(|e| Error::Trace(format!("cannot open {}: {e}", path.display())))?;
    let records = read_trace(BufReader::new(file))?;
    let violations = validate_trace(&records)?;
    if violations.is_empty() {
        println!("{} records, no violations", records.len());
        return Ok(ExitCode::SUCCESS);
    }
    for v in &violations {
        println!("{v}");
    }
    eprintln!("{} violations", violations.len());
    Ok(ExitCode::from(1))
}

/// One row of the sweep table.
#[derive(Debug, Serialize)]
struct SweepRow {
    parameter: &'static str,
    value: f64,
    seeds: usize,
    mean_queue_bits: f64,
    mean_queue_spread: f64,
    mean_handover_freq: f64,
    mean_handover_freq_spread: f64,
    max_handover_freq: f64,
    p0_time_average: f64,
    diverging_runs: usize,
    diverging: bool,
}

/// Mean and sample standard deviation.
fn mean_spread(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn cmd_sweep(args: &SweepArgs) -> Result<ExitCode, Error> {
    let mut jobs = Vec::new();
    for &value in &args.values {
        for &seed in &args.seeds {
            let extra = [(args.param.key().to_string(), value.to_string()), ("seed".to_string(), seed.to_string())];
            let cfg = load_scenario(&args.scenario, &extra)?;
            let dir = args.out.join(format!("{}={value}", args.param.label())).join(format!("seed={seed}"));
            jobs.push((value, cfg, dir));
        }
    }
    let workers = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .clamp(1, jobs.len().max(1));
    let queue = Mutex::new(jobs.into_iter().enumerate());
    let results: Mutex<Vec<(usize, f64, Result<MetricsSummary, Error>)>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let next = queue.lock().expect("queue lock").next();
                let Some((i, (value, cfg, dir))) = next else { break };
                let outcome = run_to_dir(cfg, &dir);
                results.lock().expect("results lock").push((i, value, outcome));
            });
        }
    });
    let mut results = results.into_inner().expect("results lock");
    results.sort_by_key(|r| r.0);

    let mut rows = Vec::new();
    for &value in &args.values {
        let mut summaries = Vec::new();
        for (_, v, outcome) in results.iter_mut().filter(|r| r.1 == value) {
            let outcome = std::mem::replace(outcome, Err(Error::Domain(String::new())));
            summaries.push(outcome.map_err(|e| match e {
                Error::Infeasible { .. } => e,
                other => Error::Domain(format!("{}={v}: {other}", args.param.label())),
            })?);
        }
        let pick = |f: fn(&MetricsSummary) -> f64| summaries.iter().map(f).collect::<Vec<_>>();
        let (q, q_spread) = mean_spread(&pick(|s| s.mean_queue_window));
        let (h, h_spread) = mean_spread(&pick(|s| s.final_mean_handover_freq));
        let diverging_runs = summaries.iter().filter(|s| s.diverging).count();
        rows.push(SweepRow {
            parameter: args.param.label(),
            value,
            seeds: summaries.len(),
            mean_queue_bits: q,
            mean_queue_spread: q_spread,
            mean_handover_freq: h,
            mean_handover_freq_spread: h_spread,
            max_handover_freq: pick(|s| s.final_max_handover_freq).into_iter().fold(0.0, f64::max),
            p0_time_average: mean_spread(&pick(|s| s.p0_time_average)).0,
            diverging_runs,
            diverging: 2 * diverging_runs > summaries.len(),
        });
    }
    std::fs::create_dir_all(&args.out)?;
    write_table(&rows, Some(&args.out.join("sweep.csv")))?;
    write_table(&rows, None)?;
    Ok(ExitCode::SUCCESS)
}

fn write_table<T: Serialize>(rows: &[T], path: Option<&Path>) -> Result<(), Error> {
    let out: Box<dyn std::io::Write> = match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct ReportRow {
    run: String,
    epochs: u64,
    mean_queue_bits: f64,
    queue_slope_last_half: f64,
    diverging: bool,
    p0_time_average: f64,
    mean_handover_freq: f64,
    max_handover_freq: f64,
    virtual_queue_ratio: f64,
    mean_sigma: f64,
    served_w1_bits: f64,
    served_w2_bits: f64,
    total_handovers: u64,
}

fn find_summaries(dir: &Path, found: &mut Vec<PathBuf>) -> Result<(), Error> {
    let own = dir.join(SUMMARY_FILE);
    if own.is_file() {
        found.push(own);
        return Ok(());
    }
    let mut children: Vec<PathBuf> =
        std::fs::read_dir(dir)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_dir()).collect();
    children.sort();
    for child in children {
        find_summaries(&child, found)?;
    }
    Ok(())
}

fn cmd_report(dirs: &[PathBuf], out: Option<&Path>) -> Result<ExitCode, Error> {
    let mut paths = Vec::new();
    for d in dirs {
        if !d.is_dir() {
            return Err(Error::Config(format!("{} is not a directory", d.display())));
        }
        find_summaries(d, &mut paths)?;
    }
    if paths.is_empty() {
        return Err(Error::Config(format!("no {SUMMARY_FILE} found")));
    }
    let mut rows = Vec::new();
    for p in paths {
        let s: MetricsSummary = serde_json::from_reader(BufReader::new(File::open(&p)?))
            .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
        rows.push(ReportRow {
            run: p.parent().unwrap_or(Path::new(".")).display().to_string(),
            epochs: s.epochs,
            mean_queue_bits: s.mean_queue_window,
            queue_slope_last_half: s.queue_slope_last_half,
            diverging: s.diverging,
            p0_time_average: s.p0_time_average,
            mean_handover_freq: s.final_mean_handover_freq,
            max_handover_freq: s.final_max_handover_freq,
            virtual_queue_ratio: s.final_virtual_queue_ratio,
            mean_sigma: s.mean_sigma_window,
            served_w1_bits: s.served_w1_bits_window,
            served_w2_bits: s.served_w2_bits_window,
            total_handovers: s.total_handovers,
        });
    }
    write_table(&rows, out)?;
    Ok(ExitCode::SUCCESS)
}
