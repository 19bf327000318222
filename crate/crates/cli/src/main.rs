use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use qotto::study::{self, ConvergeReport};
use qotto::{Error, RunConfig};

/// Driven resonant-level Otto engine simulator.
#[derive(Parser)]
#[command(name = "qotto", version)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; the built-in reference engine when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate one configuration and write its ledger.
    Run(Common),
    /// Run every combination of the `[sweep]` axes.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Concurrent runs.
        #[arg(short, long)]
        workers: Option<usize>,
    },
    /// Equilibrium estimate of the engine region over `[regime]`.
    Regime(Common),
    /// Vary the `[converge]` axes one at a time around the base run.
    Converge {
        #[command(flatten)]
        common: Common,
        #[arg(short, long)]
        workers: Option<usize>,
    },
    /// Print the built-in configuration as TOML.
    Defaults,
}

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_UNSTABLE: u8 = 3;
const EXIT_PARTIAL: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_) | Error::Parse(_) => EXIT_CONFIG,
        Error::Instability { .. } => EXIT_UNSTABLE,
        _ => EXIT_IO,
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code(&e))
}

fn load(common: &Common) -> Result<RunConfig, Error> {
    let cfg = match &common.config {
        Some(p) => RunConfig::load(p).map_err(|e| match e {
            Error::Io(io) => Error::InvalidConfig(format!("{}: {io}", p.display())),
            other => other,
        })?,
        None => RunConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn workers(w: Option<usize>) -> usize {
    w.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_else(|| "undefined".into())
}

fn cmd_run(common: &Common) -> Result<ExitCode, Error> {
    let cfg = load(common)?;
    let start = Instant::now();
    let outcome = study::execute(&cfg)?;
    info!("propagated {} steps in {:.1?}", outcome.summary.steps, start.elapsed());
    study::write_outputs(&outcome, &cfg, &common.out)?;
    let s = &outcome.summary;
    let l = &s.limit_cycle;
    println!("dimension        {}", s.dim);
    println!(
        "transient cycles {}",
        s.transient_cycles.map(|c| c.to_string()).unwrap_or_else(|| "n/a".into())
    );
    println!(
        "last cycle       W={:.6} Qh={:.6} Qc={:.6} A={:.6} eta={} eta0={}",
        l.work,
        l.heat_hot,
        l.heat_cold,
        l.a_term,
        fmt_opt(l.eta),
        fmt_opt(l.eta0)
    );
    println!("max |F|          {:.3e}", s.max_first_law_residual);
    println!("max hot-cold     {:.3e}", s.max_hot_cold);
    if !s.checks.all() {
        warn!("ledger invariant violated: {:?}", s.checks);
    }
    println!("wrote {}", common.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(common: &Common, w: Option<usize>) -> Result<ExitCode, Error> {
    let cfg = load(common)?;
    let entries = study::run_sweep(&cfg, &common.out, workers(w))?;
    let mut failed = 0;
    for e in &entries {
        match &e.result {
            Ok(s) => println!(
                "{}  W={:.6} eta={} transient={}",
                e.label,
                s.limit_cycle.work,
                fmt_opt(s.limit_cycle.eta),
                s.transient_cycles.map(|c| c.to_string()).unwrap_or_else(|| "n/a".into())
            ),
            Err(msg) => {
                failed += 1;
                eprintln!("{}  failed: {msg}", e.label);
            }
        }
    }
    println!("wrote {}", common.out.join("index.csv").display());
    Ok(if failed > 0 {
        ExitCode::from(EXIT_PARTIAL)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_regime(common: &Common) -> Result<ExitCode, Error> {
    let cfg = load(common)?;
    let grid = study::run_regime(&cfg)?;
    fs::create_dir_all(&common.out)?;
    let path = common.out.join("regime.csv");
    grid.save_csv(&path)?;
    let engine = grid.w_est.iter().flatten().filter(|w| **w < 0.0).count();
    let total = grid.eps1_axis.len() * grid.eps2_axis.len();
    println!("engine points {engine}/{total}");
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn write_converge(report: &ConvergeReport, dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(report).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(dir.join("converge.json"), json + "\n")?;
    Ok(())
}

fn cmd_converge(common: &Common, w: Option<usize>) -> Result<ExitCode, Error> {
    let cfg = load(common)?;
    let report = study::run_converge(&cfg, workers(w))?;
    write_converge(&report, &common.out)?;
    for axis in &report.axes {
        println!("{} (reference {})", axis.axis.name(), axis.reference);
        for e in &axis.entries {
            println!(
                "  {:<10} occupation {:.3e}  ledger {:.3e}  {}",
                e.value,
                e.occupation_deviation,
                e.ledger_deviation,
                if e.pass { "ok" } else { "FAIL" }
            );
        }
        if let Some(r) = axis.richardson {
            println!("  richardson ratio {r:.2}");
        }
    }
    println!("{}", if report.pass { "converged" } else { "not converged" });
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Run(c) => cmd_run(c),
        Command::Sweep { common, workers } => cmd_sweep(common, *workers),
        Command::Regime(c) => cmd_regime(c),
        Command::Converge { common, workers } => cmd_converge(common, *workers),
        Command::Defaults => RunConfig::default().to_toml_string().map(|s| {
            print!("{s}");
            ExitCode::SUCCESS
        }),
    };
    result.unwrap_or_else(fail)
}
