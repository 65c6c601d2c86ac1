// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mft_cli::{
    analyze, cached_calibration, load_series, resolve_windows, RunConfig, WindowChoice, CACHE_ENV,
    EXIT_ACCEPT, EXIT_ERROR, EXIT_REJECT,
};
use mft_core::limit::DEFAULT_SIMS;
use mft_core::process_sim::{
    simulate_change_point_process, simulate_random_cp_model, simulate_rpvv, ChangePointModel,
    GammaLaw, LifetimeSchedule, RandomChangePointModel,
};
use mft_core::{run_test, Result, WindowSet};
use mft_experiments::{ExperimentKind, ExperimentSpec, Scale};

#[derive(Parser)]
#[command(
    name = "mft",
    version,
    about = "Multiple filter test for rate change points in event series"
)]
struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an event series and write it in the event file format.
    Simulate(SimulateArgs),
    /// Simulate the limit process and print the calibration as JSON.
    Calibrate(CalibrateArgs),
    /// Test an event file for rate stationarity; exit 0 = accept, 1 = reject.
    Test(TestArgs),
    /// Test, estimate change points and segment rates, write a report.
    Detect(DetectArgs),
    /// Run a named simulation study.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SimModel {
    /// Three change points at 150, 180, 500 on (0, 700].
    ThreeCp,
    /// I.i.d. Gamma life times.
    Gamma,
    /// Gamma laws alternating every grid/2 life times.
    Alternating,
    /// Rate switching at random change points between four processes.
    RandomCp,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    model: SimModel,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Horizon (ignored by three-cp and random-cp, which fix T = 700).
    #[arg(long = "T", default_value_t = 700.0)]
    horizon: f64,
    /// Gamma shape (gamma model).
    #[arg(long, default_value_t = 2.0)]
    shape: f64,
    /// Gamma rate parameter (gamma model).
    #[arg(long, default_value_t = 24.0)]
    rate: f64,
    /// Life times per period (alternating model).
    #[arg(long, default_value_t = 10_000)]
    grid: usize,
    /// Output file; standard output if absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long = "T")]
    horizon: f64,
    /// Comma separated window sizes.
    #[arg(long)]
    windows: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_SIMS)]
    sims: usize,
    #[arg(long)]
    grid_step: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct AnalysisArgs {
    /// Event file: one time per line, optional `# T=<horizon>` header.
    input: PathBuf,
    /// Horizon; defaults to the file header or the last event time.
    #[arg(long = "T")]
    horizon: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Comma separated window sizes or `auto`.
    #[arg(long, default_value = "auto")]
    windows: String,
    #[arg(long, default_value_t = DEFAULT_SIMS)]
    sims: usize,
    #[arg(long)]
    grid_step: Option<f64>,
    /// Calibration seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Calibration cache directory; overrides the environment variable.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

impl AnalysisArgs {
    fn config(&self, output_dir: PathBuf) -> Result<RunConfig> {
        let mut c = RunConfig::new(&self.input, output_dir);
        c.horizon = self.horizon;
        c.alpha = self.alpha;
        c.windows = self.windows.parse::<WindowChoice>()?;
        c.n_sims = self.sims;
        c.grid_step = self.grid_step;
        c.seed = self.seed;
        if self.cache_dir.is_some() {
            c.cache_dir = self.cache_dir.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    analysis: AnalysisArgs,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    analysis: AnalysisArgs,
    /// Output directory for report.json, calibration.json and rates.csv.
    #[arg(short, long, default_value = "mft-out")]
    out: PathBuf,
    /// Also write trace_h<h>.csv with G and R per window.
    #[arg(long)]
    traces: bool,
}

#[derive(Args)]
struct ExperimentArgs {
    /// q-sweep, significance, table1, table2, multiwindow or worked-example.
    name: String,
    /// Full replicate counts instead of the desk budget.
    #[arg(long)]
    full: bool,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    perms: Option<usize>,
    #[arg(long)]
    sims: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Read the whole spec from a JSON file instead.
    #[arg(long, conflicts_with_all = ["full", "replicates", "perms", "sims", "seed"])]
    spec: Option<PathBuf>,
    /// Output directory for <name>.json, <name>.csv and <name>_cells.csv.
    #[arg(short, long, default_value = "mft-experiments")]
    out: PathBuf,
}

fn write_output(path: Option<&PathBuf>, body: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, body)?,
        None => std::io::stdout().write_all(body.as_bytes())?,
    }
    Ok(())
}

fn simulate(args: &SimulateArgs) -> Result<i32> {
    let series = match args.model {
        SimModel::ThreeCp => {
            simulate_change_point_process(&ChangePointModel::three_change_points(), args.seed)?
        }
        SimModel::Gamma => simulate_rpvv(
            &LifetimeSchedule::iid(args.shape, args.rate)?,
            args.horizon,
            args.seed,
        )?,
        SimModel::Alternating => {
            let schedule = LifetimeSchedule::Alternating {
                first: GammaLaw::new(0.5, 15.0)?,
                second: GammaLaw::new(5.0, 150.0)?,
                grid: args.grid,
            };
            schedule.validate()?;
            simulate_rpvv(&schedule, args.horizon, args.seed)?
        }
        SimModel::RandomCp => {
            let sim = simulate_random_cp_model(&RandomChangePointModel::default(), args.seed)?;
            let cps: Vec<String> = sim.change_points.iter().map(|c| c.to_string()).collect();
            log::info!("true change points: {}", cps.join(", "));
            sim.series
        }
    };
    write_output(args.output.as_ref(), &series.to_text())?;
    Ok(EXIT_ACCEPT)
}

fn calibrate_cmd(args: &CalibrateArgs) -> Result<i32> {
    let windows = WindowSet::parse(&args.windows)?;
    let cache = std::env::var_os(CACHE_ENV).map(PathBuf::from);
    let (calib, _) = cached_calibration(
        args.horizon,
        &windows,
        args.alpha,
        args.sims,
        args.grid_step,
        args.seed,
        cache.as_deref(),
    )?;
    write_output(args.output.as_ref(), &(calib.to_json()? + "\n"))?;
    Ok(EXIT_ACCEPT)
}

fn test_cmd(args: &TestArgs) -> Result<i32> {
    let config = args.analysis.config(PathBuf::new())?;
    let series = load_series(&config.input, config.horizon)?;
    let (windows, dropped) = resolve_windows(&config.windows, &series)?;
    let (calib, _) = cached_calibration(
        series.horizon(),
        &windows,
        config.alpha,
        config.n_sims,
        config.grid_step,
        config.seed,
        config.cache_dir.as_deref(),
    )?;
    let mut result = run_test(&series, &windows, &calib)?;
    result.dropped_windows = dropped;
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(if result.rejected() {
        EXIT_REJECT
    } else {
        EXIT_ACCEPT
    })
}

fn detect_cmd(args: &DetectArgs) -> Result<i32> {
    let mut config = args.analysis.config(args.out.clone())?;
    config.emit_traces = args.traces;
    let analysis = analyze(&config)?;
    let test = &analysis.report.test;
    println!(
        "M = {:.4}, Q = {:.4}: {}",
        test.statistic,
        test.threshold,
        if test.rejected() { "reject" } else { "accept" }
    );
    for e in &analysis.report.accepted {
        println!("change point {:.4} (window {})", e.time, e.window);
    }
    for p in &analysis.written {
        log::info!("wrote {}", p.display());
    }
    Ok(analysis.exit_code())
}

fn experiment_cmd(args: &ExperimentArgs) -> Result<i32> {
    let spec = match &args.spec {
        Some(path) => serde_json::from_str::<ExperimentSpec>(&fs::read_to_string(path)?)?,
        None => {
            let kind: ExperimentKind = args.name.parse()?;
            let mut spec =
                ExperimentSpec::new(kind, if args.full { Scale::Full } else { Scale::Desk });
            if let Some(n) = args.replicates {
                spec.n_replicates = n;
            }
            if let Some(n) = args.perms {
                spec.n_perms = n;
            }
            if let Some(n) = args.sims {
                spec.n_sims = n;
            }
            if let Some(s) = args.seed {
                spec.seed = s;
            }
            spec
        }
    };
    let report = mft_experiments::run(&spec)?;
    fs::create_dir_all(&args.out)?;
    let name = &report.name;
    fs::write(
        args.out.join(format!("{name}.json")),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    fs::write(args.out.join(format!("{name}.csv")), report.table.to_csv())?;
    fs::write(
        args.out.join(format!("{name}_cells.csv")),
        report.cells_csv(),
    )?;
    print!("{}", report.summary());
    Ok(EXIT_ACCEPT)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let outcome = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Calibrate(a) => calibrate_cmd(a),
        Command::Test(a) => test_cmd(a),
        Command::Detect(a) => detect_cmd(a),
        Command::Experiment(a) => experiment_cmd(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
