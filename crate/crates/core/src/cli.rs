//! Command-line front end. `rhee <subcommand> --config <file>`.
//!
//! Exit codes: 0 on success, 1 when a run fails, 2 for bad arguments or an
//! invalid configuration.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::scenario::{
    run_coverage, run_localization, run_monte_carlo, run_search_and_localize, RunReport, ScenarioConfig,
};

#[derive(Debug, Parser)]
#[command(name = "rhee", version, about = "Receding-horizon ergodic exploration scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cover a static density with one agent or a team.
    Coverage(RunArgs),
    /// Localize targets with the expected information density.
    Localize(RunArgs),
    /// Search for and localize targets, some of which appear mid-run.
    Search(RunArgs),
    /// Seeded localization trials run in parallel.
    Montecarlo {
        #[command(flatten)]
        run: RunArgs,
        /// Trial count; defaults to `run.trials` in the config.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Parse and check a config without running it.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `run.seed`; the Monte Carlo seed base.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the config echo, CSV traces and summary.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

enum Failure {
    Config(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Failure::Config(m),
            e => Failure::Run(e.to_string()),
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
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
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(Failure::Config(m)) => {
            eprintln!("rhee: configuration error: {m}");
            2
        }
        Err(Failure::Run(m)) => {
            eprintln!("rhee: run failed: {m}");
            1
        }
    }
}

fn init_logging(quiet: bool) {
    let level = if quiet { "warn" } else { "info" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_target(false)
        .try_init();
}

fn load(args: &RunArgs) -> Result<ScenarioConfig, Failure> {
    init_logging(args.quiet);
    let mut cfg = ScenarioConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.run.seed = s;
    }
    Ok(cfg)
}

fn say(quiet: bool, line: impl AsRef<str>) {
    if !quiet {
        let _ = writeln!(std::io::stdout(), "{}", line.as_ref());
    }
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::ValidateConfig { config, quiet } => {
            ScenarioConfig::load(&config)?;
            say(quiet, format!("{}: ok", config.display()));
            Ok(())
        }
        Command::Coverage(a) => {
            let cfg = load(&a)?;
            let base = a.config.parent().map(Path::to_path_buf);
            finish(&a, run_coverage(&cfg, base.as_deref())?)
        }
        Command::Localize(a) => {
            let cfg = load(&a)?;
            finish(&a, run_localization(&cfg)?)
        }
        Command::Search(a) => {
            let cfg = load(&a)?;
            finish(&a, run_search_and_localize(&cfg)?)
        }
        Command::Montecarlo { run, trials } => {
            let cfg = load(&run)?;
            let trials = trials.unwrap_or(cfg.run.trials);
            let mc = run_monte_carlo(&cfg, trials, cfg.run.seed)?;
            if let Some(dir) = &run.out_dir {
                mc.write_dir(dir)?;
            }
            let s = mc.summary();
            say(
                run.quiet,
                format!("{} trials, {} failed, {:.1} s wall", s.trials, s.failed_trials, s.wall_seconds),
            );
            for (t, first, all) in &s.success_by_time {
                say(
                    run.quiet,
                    format!("  by {t:>6.1} s: first target {:>5.1}%  all targets {:>5.1}%", 100.0 * first, 100.0 * all),
                );
            }
            Ok(())
        }
    }
}

fn finish(args: &RunArgs, report: RunReport) -> Result<(), Failure> {
    if let Some(dir) = &args.out_dir {
        report.write_dir(dir)?;
    }
    let s = report.summary();
    say(
        args.quiet,
        format!(
            "{:?}: {} steps, {:.1} simulated s in {:.2} s wall (real-time factor {:.1})",
            s.kind, s.steps, s.simulated_seconds, s.wall_seconds, s.real_time_factor
        ),
    );
    if let Some(e) = s.final_collective_ergodicity {
        say(args.quiet, format!("  final ergodicity {e:.3e}"));
    }
    for t in &s.targets {
        let at = |v: Option<f64>| v.map_or("never".to_string(), |v| format!("{v:.1} s"));
        say(
            args.quiet,
            format!(
                "  target {}: first measured {}, localized {}, final error {:.4}",
                t.id,
                at(t.first_measurement_at),
                at(t.localized_at),
                t.final_error
            ),
        );
    }
    if s.unreachable_targets {
        say(args.quiet, "  some target was never measured and no exploration floor remained");
    }
    Ok(())
}
