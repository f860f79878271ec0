//! Command-line front end: scenario runs, parameter sweeps, the analytic
//! calculator, and scenario validation.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure
//! (e.g. an unwritable output directory).

use afsim::analytic;
use afsim::report;
use afsim::scenario::{load_scenario, LoadedScenario};
use afsim::sim::run_scenario;
use afsim::sweep::{parse_vary_spec, plan_sweep, run_sweep, sweep_csv, VarySpec};
use afsim::units::{Duration, Rate};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Output-directory override honored when --out is not given.
const OUT_DIR_ENV: &str = "AFSIM_OUT";

#[derive(Parser)]
#[command(name = "afsim", version, about = "Assured-forwarding conditioning simulator and analytic calculator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write metrics.csv, summary.csv, run.json.
    Run(RunArgs),
    /// Parse and validate a scenario, reporting every defaulted field.
    Validate { scenario: PathBuf },
    /// Run the cross product of config overrides and seeds.
    Sweep(SweepArgs),
    /// Evaluate the closed-form models.
    #[command(subcommand)]
    Analytic(AnalyticCmd),
}

#[derive(Args)]
struct RunArgs {
    scenario: PathBuf,
    /// Override the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $AFSIM_OUT or the current directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    scenario: PathBuf,
    /// Override key and values, e.g. --vary flows.0.access_delay=0.02,0.04.
    /// Repeatable; the cross product of all values is run.
    #[arg(long = "vary", required = true)]
    vary: Vec<String>,
    /// Number of seeds per point (seed, seed+1, …).
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Base seed (default: the scenario's seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum AnalyticCmd {
    /// Square-root model: √(3/2)·MSS/(RTT·√p).
    Mathis {
        #[arg(long)]
        mss: u32,
        #[arg(long)]
        rtt: f64,
        #[arg(long)]
        p: f64,
    },
    /// Rate upper bound: 1.5·√(1/3)·k/(RTT·√p).
    Dovrolis {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        rtt: f64,
        #[arg(long)]
        p: f64,
    },
    /// Drop-rate ratio d1/d2 = r2/r1 equalizing two target rates.
    DropRatio {
        #[arg(long)]
        r1: f64,
        #[arg(long)]
        r2: f64,
    },
    /// Token-bucket ineffectiveness test for a target rate.
    Ineffective {
        /// Target rate in bits per second.
        #[arg(long)]
        target: f64,
        #[arg(long)]
        rtt: f64,
        #[arg(long = "p-out")]
        p_out: f64,
        #[arg(long)]
        mss: u32,
    },
    /// Marking-target model: (3/4)m + (3k/(4·RTT))·√(2/p).
    Yeom {
        /// Marking target in bits per second.
        #[arg(long)]
        m: f64,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        rtt: f64,
        #[arg(long)]
        p: f64,
    },
    /// Elastic term of the marking-target model.
    Epsilon {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        rtt: f64,
        #[arg(long)]
        p: f64,
    },
    /// Full steady-state TCP throughput model.
    Padhye {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        wmax: f64,
        #[arg(long)]
        rtt: f64,
        #[arg(long)]
        rto: f64,
        #[arg(long)]
        mss: u32,
        #[arg(long, default_value_t = 2)]
        b: u32,
    },
    /// Invert the throughput model: loss probability for a target rate.
    Invert {
        /// Target rate in bits per second.
        #[arg(long)]
        target: f64,
        #[arg(long)]
        wmax: f64,
        #[arg(long)]
        rtt: f64,
        #[arg(long)]
        rto: f64,
        #[arg(long)]
        mss: u32,
        #[arg(long, default_value_t = 2)]
        b: u32,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap prints its own help/usage; keep its formatting but pin the
            // exit codes: help/version are success, usage errors are 1.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

enum CliError {
    Config(String),
    Runtime(String),
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Validate { scenario } => cmd_validate(&scenario),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Analytic(cmd) => cmd_analytic(cmd),
    }
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let LoadedScenario { mut config, defaulted } = load_scenario(&args.scenario).map_err(config_err)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let result = run_scenario(&config, config.seed);
    let dir = out_dir(args.out);
    write_file(&dir, "metrics.csv", &report::metrics_csv(&result.records))?;
    write_file(&dir, "summary.csv", &report::summary_csv(&result.summary))?;
    write_file(&dir, "run.json", &report::run_json(&config, &result.summary))?;

    if !defaulted.is_empty() {
        println!("defaults applied: {}", defaulted.len());
    }
    println!(
        "seed {}  regime {:?}  fairness {:.4}",
        result.summary.seed, result.summary.regime, result.summary.fairness
    );
    for f in &result.summary.flows {
        println!(
            "flow {:>3}: target {:>12.0} bit/s  achieved {:>12.0} bit/s  attainment {:.3}",
            f.flow_id, f.target_bps, f.achieved_bps, f.attainment
        );
    }
    println!("wrote metrics.csv, summary.csv, run.json to {}", dir.display());
    Ok(())
}

fn cmd_validate(path: &Path) -> Result<(), CliError> {
    let LoadedScenario { config, defaulted } = load_scenario(path).map_err(config_err)?;
    println!(
        "scenario ok: {} flows, duration {} s, seed {}",
        config.flows.len(),
        config.duration,
        config.seed
    );
    if defaulted.is_empty() {
        println!("no defaults applied");
    } else {
        println!("defaults applied:");
        for d in &defaulted {
            println!("  {d}");
        }
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let LoadedScenario { mut config, .. } = load_scenario(&args.scenario).map_err(config_err)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if args.seeds == 0 {
        return Err(CliError::Config("--seeds must be at least 1".into()));
    }
    let specs: Vec<VarySpec> = args
        .vary
        .iter()
        .map(|s| parse_vary_spec(s))
        .collect::<Result<_, _>>()
        .map_err(config_err)?;
    let seeds: Vec<u64> = (0..args.seeds).map(|i| config.seed + i).collect();
    let points = plan_sweep(&config, &specs, &seeds).map_err(config_err)?;
    let jobs = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let rows = run_sweep(&points, jobs);
    let dir = out_dir(args.out);
    let path = write_file(&dir, "sweep.csv", &sweep_csv(&specs, &rows))?;
    println!(
        "{} points x {} seeds -> {} rows",
        points.len() / seeds.len(),
        seeds.len(),
        rows.len()
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_analytic(cmd: AnalyticCmd) -> Result<(), CliError> {
    match cmd {
        AnalyticCmd::Mathis { mss, rtt, p } => {
            let rate = analytic::mathis_rate(mss, Duration::secs(rtt), p).map_err(config_err)?;
            print_rate("mathis", rate);
        }
        AnalyticCmd::Dovrolis { k, rtt, p } => {
            let rate = analytic::dovrolis_bound(k, Duration::secs(rtt), p).map_err(config_err)?;
            print_rate("dovrolis bound", rate);
        }
        AnalyticCmd::DropRatio { r1, r2 } => {
            let ratio =
                analytic::proportional_drop_ratio(Rate::bps(r1), Rate::bps(r2)).map_err(config_err)?;
            println!("drop ratio d1/d2 = {ratio}");
        }
        AnalyticCmd::Ineffective { target, rtt, p_out, mss } => {
            let verdict =
                analytic::marker_ineffective(Rate::bps(target), Duration::secs(rtt), p_out, mss)
                    .map_err(config_err)?;
            let threshold_seg =
                if p_out > 0.0 { (3.0 / (2.0 * p_out)).sqrt() / rtt } else { f64::INFINITY };
            println!("ineffective: {}", verdict.ineffective);
            println!(
                "threshold {} segments/s vs target {} segments/s",
                threshold_seg,
                target / (8.0 * mss as f64)
            );
            if verdict.degenerate_loss {
                println!("warning: p_out = 0 makes the threshold infinite; the test is degenerate");
            }
        }
        AnalyticCmd::Yeom { m, k, rtt, p } => {
            let rate = analytic::yeom_rate(&analytic::YeomParams {
                m: Rate::bps(m),
                k,
                rtt: Duration::secs(rtt),
                p,
            })
            .map_err(config_err)?;
            print_rate("yeom throughput", rate);
        }
        AnalyticCmd::Epsilon { k, rtt, p } => {
            let rate = analytic::yeom_epsilon(k, Duration::secs(rtt), p).map_err(config_err)?;
            print_rate("epsilon", rate);
        }
        AnalyticCmd::Padhye { p, wmax, rtt, rto, mss, b } => {
            let rate = analytic::padhye_rate(&analytic::PadhyeParams {
                p,
                wmax,
                rtt: Duration::secs(rtt),
                rto: Duration::secs(rto),
                mss,
                b_ack: b,
            })
            .map_err(config_err)?;
            print_rate("padhye throughput", rate);
        }
        AnalyticCmd::Invert { target, wmax, rtt, rto, mss, b } => {
            let inv = analytic::invert_padhye(
                Rate::bps(target),
                wmax,
                Duration::secs(rtt),
                Duration::secs(rto),
                mss,
                b,
            )
            .map_err(config_err)?;
            println!("p = {}", inv.p);
            if inv.saturated {
                println!("saturated: target is at or below the model rate at p = 1");
            }
        }
    }
    Ok(())
}

fn print_rate(label: &str, rate: Rate) {
    println!("{label}: {} bit/s ({:.4} Mb/s)", rate.as_bps(), rate.as_bps() / 1e6);
}
