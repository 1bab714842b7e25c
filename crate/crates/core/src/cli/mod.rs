//! Command-line front end: `run`, `sweep` and `plot`.

pub mod config;
pub mod output;
pub mod runner;
pub mod svg;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{Algorithm, RunSpec, Settings};
pub use runner::{dead_reckoning, execute, filter_log, simulate, Filter, RunOutput};

use crate::error::{Result, SlamError};
use crate::metrics::{mean_std, RunStats};
use output::{read_csv, write_csv, LandmarkRow, PoseRow, StepRow};
use svg::{Chart, Series, Style};

/// Overrides the root directory for outputs when `--out` is not given.
pub const OUT_DIR_ENV: &str = "UFSLAM_OUT_DIR";

/// Noise rows of the sweep: `(σ_r [m], σ_φ [deg])`.
pub const SWEEP_ROWS: [(f64, f64); 3] = [(0.1, 1.0), (0.3, 3.0), (0.6, 6.0)];

#[derive(Debug, Parser)]
#[command(
    name = "ufslam",
    version,
    about = "Unscented FastSLAM and FastSLAM 2.0 simulation harness"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate and filter one (scenario, algorithm, seed) run.
    Run(RunArgs),
    /// Both algorithms over the three sensor-noise rows on sim100.
    Sweep(SweepArgs),
    /// Render SVG plots from run or sweep outputs.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Extra `key=value` override (repeatable, applied after the file).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub particles: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub algo: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Seeds per (algorithm, noise row); seeds run from 1.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Directory written by `run`.
    #[arg(long, conflicts_with = "sweep", required_unless_present = "sweep")]
    pub run: Option<PathBuf>,
    /// Directory written by `sweep`.
    #[arg(long)]
    pub sweep: Option<PathBuf>,
    /// Where to write the SVGs (default: the input directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn settings(common: &CommonArgs) -> Result<Settings> {
    let mut s = match &common.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    for a in &common.set {
        s.apply(a)?;
    }
    if let Some(p) = common.particles {
        s.set("particles", p)?;
    }
    Ok(s)
}

fn out_dir(explicit: &Option<PathBuf>, default_name: &str) -> PathBuf {
    match explicit {
        Some(p) => p.clone(),
        None => std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("runs"))
            .join(default_name),
    }
}

fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> Result<T> + Send,
) -> Result<T> {
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| SlamError::invalid("threads", e.to_string()))?
            .install(f),
    }
}

pub fn cmd_run(args: &RunArgs) -> Result<PathBuf> {
    let mut s = settings(&args.common)?;
    if let Some(v) = &args.scenario {
        s.set("scenario", v)?;
    }
    if let Some(v) = &args.algo {
        s.set("algo", v)?;
    }
    if let Some(v) = args.seed {
        s.set("seed", v)?;
    }
    let spec = RunSpec::resolve(&s)?;
    let out = with_threads(args.common.threads, || execute(&spec))?;
    let dir = out_dir(
        &args.common.out,
        &format!("{}-{}-{}", spec.scenario.name, spec.algo, spec.seed),
    );
    output::write_run(&dir, &out)?;
    Ok(dir)
}

#[derive(Debug, Clone)]
pub struct SweepRun {
    pub row: usize,
    pub algo: Algorithm,
    pub seed: u64,
    pub stats: RunStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub sigma_r: f64,
    /// Degrees.
    pub sigma_phi: f64,
    pub algo: String,
    pub mean_max_pose_error: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRunRow {
    pub sigma_r: f64,
    pub sigma_phi: f64,
    pub algo: String,
    pub seed: u64,
    pub max_pos_err: f64,
    pub mean_pos_err: f64,
    pub final_quarter_pos_err: f64,
    pub final_landmark_rmse: Option<f64>,
    pub resample_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub step: u64,
    pub t: f64,
    pub ufastslam: f64,
    pub fastslam2: f64,
}

/// Runs every (noise row, seed) world once and filters it with both
/// algorithms. Results are ordered by (row, algorithm, seed) regardless of
/// scheduling.
pub fn sweep(base: &Settings, seeds: u64) -> Result<Vec<SweepRun>> {
    if seeds == 0 {
        return Err(SlamError::invalid("seeds", "must be >= 1"));
    }
    let jobs: Vec<(usize, u64)> = (0..SWEEP_ROWS.len())
        .flat_map(|r| (1..=seeds).map(move |s| (r, s)))
        .collect();
    let mut runs: Vec<SweepRun> = jobs
        .par_iter()
        .map(|&(row, seed)| {
            let (sr, sp) = SWEEP_ROWS[row];
            let mut s = base.clone();
            s.set("scenario", "sim100")?;
            s.set("seed", seed)?;
            s.set("sensor.sigma_r", sr)?;
            s.set("sensor.sigma_phi", sp.to_radians())?;
            s.set("algo", Algorithm::UFastSlam)?;
            let spec = RunSpec::resolve(&s)?;
            let log = simulate(&spec)?;
            Algorithm::ALL
                .iter()
                .map(|&algo| {
                    let spec = RunSpec {
                        algo,
                        ..spec.clone()
                    };
                    Ok(SweepRun {
                        row,
                        algo,
                        seed,
                        stats: filter_log(&spec, &log)?.stats,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    runs.sort_by_key(|r| (r.row, r.algo, r.seed));
    Ok(runs)
}

pub fn sweep_table(runs: &[SweepRun]) -> Vec<TableRow> {
    let mut rows = Vec::new();
    for (k, &(sr, sp)) in SWEEP_ROWS.iter().enumerate() {
        for algo in Algorithm::ALL {
            let maxes: Vec<f64> = runs
                .iter()
                .filter(|r| r.row == k && r.algo == algo)
                .map(|r| r.stats.max_position_error)
                .collect();
            let (mean, std) = mean_std(&maxes);
            rows.push(TableRow {
                sigma_r: sr,
                sigma_phi: sp,
                algo: algo.to_string(),
                mean_max_pose_error: mean,
                std,
            });
        }
    }
    rows
}

/// Per-step position error averaged over seeds, truncated to the shortest run.
pub fn sweep_error_curves(runs: &[SweepRun], row: usize, dt: f64) -> Vec<ErrorRow> {
    let curve = |algo: Algorithm| -> Vec<f64> {
        let sel: Vec<&RunStats> = runs
            .iter()
            .filter(|r| r.row == row && r.algo == algo)
            .map(|r| &r.stats)
            .collect();
        let n = sel
            .iter()
            .map(|s| s.position_errors.len())
            .min()
            .unwrap_or(0);
        (0..n)
            .map(|i| sel.iter().map(|s| s.position_errors[i]).sum::<f64>() / sel.len() as f64)
            .collect()
    };
    let u = curve(Algorithm::UFastSlam);
    let f = curve(Algorithm::FastSlam2);
    u.iter()
        .zip(&f)
        .enumerate()
        .map(|(i, (a, b))| ErrorRow {
            step: i as u64 + 1,
            t: (i + 1) as f64 * dt,
            ufastslam: *a,
            fastslam2: *b,
        })
        .collect()
}

fn error_chart(rows: &[ErrorRow], title: String) -> Chart {
    Chart {
        title,
        x_label: "time [s]".into(),
        y_label: "mean position error [m]".into(),
        equal_aspect: false,
        series: vec![
            Series::new(
                "UFastSLAM",
                "#d62728",
                Style::Solid,
                rows.iter().map(|r| (r.t, r.ufastslam)).collect(),
            ),
            Series::new(
                "FastSLAM 2.0",
                "black",
                Style::Dashed,
                rows.iter().map(|r| (r.t, r.fastslam2)).collect(),
            ),
        ],
    }
}

fn row_title(k: usize) -> String {
    let (sr, sp) = SWEEP_ROWS[k];
    format!("Position error, sigma_r = {sr} m, sigma_phi = {sp} deg")
}

pub fn write_sweep(dir: &Path, runs: &[SweepRun], dt: f64) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_csv(&dir.join("table.csv"), &sweep_table(runs))?;
    let per_run: Vec<SweepRunRow> = runs
        .iter()
        .map(|r| SweepRunRow {
            sigma_r: SWEEP_ROWS[r.row].0,
            sigma_phi: SWEEP_ROWS[r.row].1,
            algo: r.algo.to_string(),
            seed: r.seed,
            max_pos_err: r.stats.max_position_error,
            mean_pos_err: r.stats.mean_position_error,
            final_quarter_pos_err: r.stats.tail_mean_position_error(0.25),
            final_landmark_rmse: r.stats.final_landmark_rmse,
            resample_count: r.stats.resample_count,
        })
        .collect();
    write_csv(&dir.join("runs.csv"), &per_run)?;
    for k in 0..SWEEP_ROWS.len() {
        let curves = sweep_error_curves(runs, k, dt);
        write_csv(&dir.join(format!("errors_row{}.csv", k + 1)), &curves)?;
        std::fs::write(
            dir.join(format!("errors_row{}.svg", k + 1)),
            error_chart(&curves, row_title(k)).render(),
        )?;
    }
    Ok(())
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<PathBuf> {
    let mut base = settings(&args.common)?;
    if !base.0.contains_key("particles") {
        base.set("particles", 100)?;
    }
    let runs = with_threads(args.common.threads, || sweep(&base, args.seeds))?;
    let dt = {
        let mut s = base.clone();
        s.set("scenario", "sim100")?;
        RunSpec::resolve(&s)?.scenario.dt
    };
    let dir = out_dir(&args.common.out, "sweep");
    write_sweep(&dir, &runs, dt)?;
    Ok(dir)
}

pub fn plot_run(dir: &Path, out: &Path) -> Result<()> {
    let steps: Vec<StepRow> = read_csv(&dir.join("steps.csv"))?;
    let landmarks: Vec<LandmarkRow> = read_csv(&dir.join("landmarks.csv"))?;
    let dr: Option<Vec<PoseRow>> = match dir.join("dead_reckoning.csv") {
        p if p.exists() => Some(read_csv(&p)?),
        _ => None,
    };
    let mut series = vec![Series::new(
        "true trajectory",
        "#d62728",
        Style::Solid,
        steps.iter().map(|s| (s.true_x, s.true_y)).collect(),
    )];
    if let Some(dr) = dr {
        series.push(Series::new(
            "dead reckoning",
            "#1f77b4",
            Style::Dotted,
            dr.iter().map(|p| (p.x, p.y)).collect(),
        ));
    }
    series.push(Series::new(
        "estimate",
        "black",
        Style::Dashed,
        steps.iter().map(|s| (s.est_x, s.est_y)).collect(),
    ));
    series.push(Series::new(
        "true landmarks",
        "#2ca02c",
        Style::Crosses,
        landmarks.iter().map(|l| (l.true_x, l.true_y)).collect(),
    ));
    series.push(Series::new(
        "estimated landmarks",
        "#9467bd",
        Style::Points,
        landmarks
            .iter()
            .filter_map(|l| Some((l.est_x?, l.est_y?)))
            .collect(),
    ));
    std::fs::create_dir_all(out)?;
    let traj = Chart {
        title: "Trajectory and map".into(),
        x_label: "x [m]".into(),
        y_label: "y [m]".into(),
        equal_aspect: true,
        series,
    };
    std::fs::write(out.join("trajectory.svg"), traj.render())?;
    let errs = Chart {
        title: "Pose error".into(),
        x_label: "time [s]".into(),
        y_label: "error [m] / [rad]".into(),
        equal_aspect: false,
        series: vec![
            Series::new(
                "position",
                "#d62728",
                Style::Solid,
                steps.iter().map(|s| (s.t, s.pos_err)).collect(),
            ),
            Series::new(
                "heading",
                "black",
                Style::Dashed,
                steps.iter().map(|s| (s.t, s.heading_err)).collect(),
            ),
        ],
    };
    std::fs::write(out.join("errors.svg"), errs.render())?;
    Ok(())
}

pub fn plot_sweep(dir: &Path, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    for k in 0..SWEEP_ROWS.len() {
        let rows: Vec<ErrorRow> = read_csv(&dir.join(format!("errors_row{}.csv", k + 1)))?;
        std::fs::write(
            out.join(format!("errors_row{}.svg", k + 1)),
            error_chart(&rows, row_title(k)).render(),
        )?;
    }
    Ok(())
}

pub fn cmd_plot(args: &PlotArgs) -> Result<PathBuf> {
    match (&args.run, &args.sweep) {
        (Some(dir), _) => {
            let out = args.out.clone().unwrap_or_else(|| dir.clone());
            plot_run(dir, &out)?;
            Ok(out)
        }
        (None, Some(dir)) => {
            let out = args.out.clone().unwrap_or_else(|| dir.clone());
            plot_sweep(dir, &out)?;
            Ok(out)
        }
        (None, None) => Err(SlamError::invalid("plot", "pass --run or --sweep")),
    }
}

pub fn dispatch(cli: &Cli) -> Result<PathBuf> {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Plot(a) => cmd_plot(a),
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(dir) => {
            println!("wrote {}", dir.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
