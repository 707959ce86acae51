//! Command-line interface.
//!
//! Deterministic artifacts (tables, prices, region files) go to stdout and
//! `--out`; wall-clock summaries go to stderr. Exit codes: 0 success, 1
//! usage/config error, 2 numerical failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::config::{self, Algo, ExperimentConfig, ModelKind};
use crate::bench::driver::run_price;
use crate::bench::region::export_stopping_region;
use crate::bench::tables::{
    run_convergence_study, run_table1, run_table2, table1_result, table2_result, ResultTable,
};
use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "stopsim",
    version,
    about = "Optimal stopping under partial observation: particle filter + regression Monte Carlo"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Price a single configuration with the configured solver.
    Price(RunArgs),
    /// Linear-Gaussian benchmark: Monte Carlo vs PDE vs European per initial law.
    Table1(RunArgs),
    /// Stochastic-volatility benchmark: full-observation PDE vs partial-observation MC.
    Table2(RunArgs),
    /// Particle-filter convergence study against the Kalman reference.
    Converge(ConvergeArgs),
    /// Stopping-region export at one exercise date.
    Region(RegionArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AlgoArg {
    Ls,
    Tvr,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML config file; defaults depend on the subcommand's model.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for output artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Path count override.
    #[arg(long)]
    paths: Option<usize>,
    /// Particle count override.
    #[arg(long)]
    particles: Option<usize>,
    /// Exercise spacing override.
    #[arg(long)]
    dt: Option<f64>,
    /// Backward-induction algorithm.
    #[arg(long, value_enum)]
    algo: Option<AlgoArg>,
    /// Output format.
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
    /// Generic dotted-key override, e.g. --set linear_gaussian.kappa=2.5.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Args)]
struct ConvergeArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated particle counts.
    #[arg(long, default_value = "50,100,200,400,800,1600")]
    n_list: String,
    /// Observation paths per particle count.
    #[arg(long, default_value_t = 200)]
    trials: usize,
}

#[derive(Debug, Args)]
struct RegionArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Exercise date to export.
    #[arg(long, default_value_t = 0.5)]
    time: f64,
}

fn base_config(args: &RunArgs, default_model: ModelKind) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => config::load_config(path)?,
        None => match default_model {
            ModelKind::LinearGaussian => ExperimentConfig::linear_gaussian_default(),
            ModelKind::SteinStein => ExperimentConfig::stein_stein_default(),
        },
    };
    for assignment in &args.set {
        cfg = config::apply_set(&cfg, assignment)?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(paths) = args.paths {
        cfg.paths = paths;
    }
    if let Some(particles) = args.particles {
        cfg.particles = particles;
    }
    if let Some(dt) = args.dt {
        cfg.grid.dt_exercise = dt;
    }
    if let Some(algo) = args.algo {
        cfg.algo = match algo {
            AlgoArg::Ls => Algo::Ls,
            AlgoArg::Tvr => Algo::Tvr,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_artifact(dir: &Option<PathBuf>, name: &str, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(name), bytes)?;
    }
    Ok(())
}

fn emit_table(table: &ResultTable, args: &RunArgs, stem: &str) -> Result<()> {
    let mut buf = Vec::new();
    let name = match args.format {
        FormatArg::Csv => {
            table.write_csv(&mut buf)?;
            format!("{stem}.csv")
        }
        FormatArg::Json => {
            table.write_json(&mut buf)?;
            format!("{stem}.json")
        }
    };
    std::io::stdout().write_all(&buf)?;
    write_artifact(&args.out, &name, &buf)?;
    eprintln!("{}", table.render());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Price(args) => {
            let cfg = base_config(&args, ModelKind::LinearGaussian)?;
            let out = run_price(&cfg)?;
            let mut buf = Vec::new();
            let name = match args.format {
                FormatArg::Json => {
                    buf.extend_from_slice(
                        serde_json::to_string_pretty(&out)
                            .map_err(|e| Error::Parse(e.to_string()))?
                            .as_bytes(),
                    );
                    buf.push(b'\n');
                    "price.json"
                }
                FormatArg::Csv => {
                    buf.extend_from_slice(
                        b"solver,value,std_error,immediate_value,continuation_value,config_hash\n",
                    );
                    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                    buf.extend_from_slice(
                        format!(
                            "{},{},{},{},{},{}\n",
                            out.solver,
                            out.value,
                            opt(out.std_error),
                            opt(out.immediate_value),
                            opt(out.continuation_value),
                            out.config_hash
                        )
                        .as_bytes(),
                    );
                    "price.csv"
                }
            };
            std::io::stdout().write_all(&buf)?;
            write_artifact(&args.out, name, &buf)?;
            Ok(())
        }
        Command::Table1(args) => {
            let cfg = base_config(&args, ModelKind::LinearGaussian)?;
            let rows = run_table1(&cfg)?;
            emit_table(&table1_result(&rows), &args, "table1")
        }
        Command::Table2(args) => {
            let cfg = base_config(&args, ModelKind::SteinStein)?;
            let result = run_table2(&cfg)?;
            emit_table(&table2_result(&result), &args, "table2")
        }
        Command::Converge(args) => {
            let cfg = base_config(&args.run, ModelKind::LinearGaussian)?;
            let counts: Vec<usize> = args
                .n_list
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::config(format!("bad particle count '{s}'")))
                })
                .collect::<Result<_>>()?;
            if counts.len() < 2 {
                return Err(Error::config("need at least two particle counts"));
            }
            let report = run_convergence_study(&cfg, &counts, args.trials)?;
            let mut buf = Vec::new();
            let name = match args.run.format {
                FormatArg::Csv => {
                    report.write_csv(&mut buf)?;
                    "converge.csv"
                }
                FormatArg::Json => {
                    buf.extend_from_slice(
                        serde_json::to_string_pretty(&report)
                            .map_err(|e| Error::Parse(e.to_string()))?
                            .as_bytes(),
                    );
                    buf.push(b'\n');
                    "converge.json"
                }
            };
            std::io::stdout().write_all(&buf)?;
            write_artifact(&args.run.out, name, &buf)?;
            Ok(())
        }
        Command::Region(args) => {
            let cfg = base_config(&args.run, ModelKind::LinearGaussian)?;
            let export = export_stopping_region(&cfg, args.time)?;
            let mut points = Vec::new();
            export.write_points_csv(&mut points)?;
            let mut boundary = Vec::new();
            export.write_boundary_csv(&mut boundary)?;
            write_artifact(&args.run.out, "region_points.csv", &points)?;
            write_artifact(&args.run.out, "region_boundary.csv", &boundary)?;
            let n_stop = export.points.iter().filter(|p| p.stop).count();
            let summary = serde_json::json!({
                "time": export.time,
                "date_index": export.date_index,
                "points": export.points.len(),
                "stopped": n_stop,
                "boundary_points": export.boundary.len(),
            });
            println!("{summary:#}");
            Ok(())
        }
    }
}

/// Entry point used by `main` and by tests; returns the process exit code.
pub fn cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are successful exits
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Convenience for tests: run against string arguments.
pub fn cli_from_strs(args: &[&str]) -> i32 {
    cli(args.iter().map(|s| s.to_string()))
}

#[allow(dead_code)]
fn _assert_path_is_sync(_: &Path) {}
