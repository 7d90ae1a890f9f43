//! Batch scenario runner for the curverisk library.
//!
//! Subcommands: `run` simulates one scenario config and writes
//! `trace.csv` + `metrics.json`; `bench` compares the adaptive and
//! fixed-parameter maneuver searches on the bundled `case1` scenario and
//! writes `bench.csv`; `validate` checks a config without running it.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 scenario
//! failure (collision, dynamic-limit violation, or infeasible planning;
//! artifacts are still written).

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use curverisk::config::{load_config, parse_config, ScenarioConfig};
use curverisk::sim::{paired_bench, run_scenario, BenchReport, Metrics, Scenario, SimTrace};
use serde::Serialize;

/// Bundled reference scenario the benchmark runs on.
const CASE1: &str = include_str!("../../../configs/case1.cfg");

#[derive(Parser)]
#[command(
    name = "curverisk",
    version,
    about = "Risk-field lane-change simulation on curved two-lane roads"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write trace.csv and metrics.json.
    Run {
        /// Scenario config file (JSON).
        config: PathBuf,
        /// Seed for the maneuver search; defaults to the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory the artifacts are written to.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Omit the volatile metadata block from metrics.json so outputs
        /// of equal runs are byte-identical.
        #[arg(long)]
        no_meta: bool,
    },
    /// Compare the adaptive and fixed-parameter searches on the bundled
    /// case1 scenario and write bench.csv.
    Bench {
        /// Number of paired seeds (both searches run every seed).
        #[arg(long, default_value_t = 30)]
        seeds: usize,
        /// Directory the table is written to.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Parse and validate a scenario config without running it.
    Validate {
        /// Scenario config file (JSON).
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match cli.command {
        Command::Run { config, seed, out, no_meta } => cmd_run(&config, seed, &out, no_meta),
        Command::Bench { seeds, out } => cmd_bench(seeds, &out),
        Command::Validate { config } => cmd_validate(&config),
    }
}

/// Volatile provenance block of metrics.json; dropped under --no-meta.
#[derive(Serialize)]
struct Meta {
    generated_unix_ms: u128,
    tool: String,
}

#[derive(Serialize)]
struct MetricsDoc<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    meta: Option<Meta>,
    metrics: &'a Metrics<f64>,
}

fn config_error(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(1)
}

fn cmd_run(config_path: &Path, seed: Option<u64>, out: &Path, no_meta: bool) -> ExitCode {
    let config = match load_config::<f64>(config_path) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    let scenario = match Scenario::build(&config) {
        Ok(s) => s,
        Err(e) => return config_error(e),
    };
    let seed = seed.unwrap_or(scenario.seed);
    let trace = run_scenario(&scenario, seed);
    let metrics = trace.metrics();

    if let Err(e) = fs::create_dir_all(out) {
        return config_error(format_args!("cannot create {}: {e}", out.display()));
    }
    let trace_path = out.join("trace.csv");
    let metrics_path = out.join("metrics.json");
    if let Err(e) = write_trace(&trace, &trace_path) {
        return config_error(format_args!("cannot write {}: {e}", trace_path.display()));
    }
    let meta = (!no_meta).then(|| Meta {
        generated_unix_ms: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0),
        tool: format!("curverisk {}", env!("CARGO_PKG_VERSION")),
    });
    let doc = MetricsDoc { meta, metrics: &metrics };
    let json = serde_json::to_string_pretty(&doc).expect("metrics serialize");
    if let Err(e) = fs::write(&metrics_path, json + "\n") {
        return config_error(format_args!("cannot write {}: {e}", metrics_path.display()));
    }

    // A run fails on collision/planning failure or any dynamic-limit
    // violation; artifacts above are written either way.
    let failure = metrics.failure.clone().or_else(|| {
        (metrics.limit_violation_rows > 0)
            .then(|| format!("{} rows exceed dynamic limits", metrics.limit_violation_rows))
    });
    println!(
        "scenario {}: {} ({} rows, seed {seed})",
        metrics.scenario,
        if failure.is_none() { "PASS" } else { "FAIL" },
        metrics.rows,
    );
    match metrics.trigger_step {
        Some(step) => {
            println!("  lane change triggered at step {step}");
            if let Some(m) = &metrics.maneuver {
                println!(
                    "  maneuver: {} s, {} m advance, completed {}",
                    round3(m.duration),
                    round3(m.advance),
                    match m.completion_step {
                        Some(s) => format!("at step {s}"),
                        None => "never".to_owned(),
                    }
                );
            }
        }
        None => println!("  no lane change triggered"),
    }
    println!(
        "  min distance {} m, max |a_y| {} m/s^2, max |delta| {} rad",
        round3(metrics.min_distance),
        round3(metrics.max_abs_a_y),
        round3(metrics.max_abs_delta),
    );
    println!("  wrote {} and {}", trace_path.display(), metrics_path.display());
    if let Some(reason) = failure {
        println!("  failure: {reason}");
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}

fn write_trace(trace: &SimTrace<f64>, path: &Path) -> std::io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    trace.write_csv(&mut out)?;
    out.flush()
}

/// Fixed-precision display for the human-readable summary; artifacts use
/// full round-trip formatting.
fn round3(v: f64) -> String {
    format!("{v:.3}")
}

fn cmd_bench(seeds: usize, out: &Path) -> ExitCode {
    if seeds == 0 {
        return config_error("--seeds must be at least 1");
    }
    let config = parse_config::<f64>(CASE1, "bundled case1.cfg").expect("bundled config parses");
    let scenario = Scenario::build(&config).expect("bundled config builds");
    let report = match paired_bench(&scenario, seeds) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    if let Err(e) = fs::create_dir_all(out) {
        return config_error(format_args!("cannot create {}: {e}", out.display()));
    }
    let bench_path = out.join("bench.csv");
    match File::create(&bench_path) {
        Ok(file) => {
            let mut w = BufWriter::new(file);
            let r = write_bench_csv(&report, &mut w).and_then(|()| w.flush());
            if let Err(e) = r {
                return config_error(format_args!("cannot write {}: {e}", bench_path.display()));
            }
        }
        Err(e) => {
            return config_error(format_args!("cannot write {}: {e}", bench_path.display()));
        }
    }

    println!(
        "benchmark on scenario {} ({} seeds per algorithm)",
        report.scenario, seeds
    );
    println!(
        "  grid oracle (100x100): cost {:.6}; target = oracle + 1% = {:.6}",
        report.oracle_cost, report.target
    );
    for row in &report.rows {
        println!(
            "  {}: median {:.1} iterations to target, median {:.3} ms, median final cost {:.6} ({}/{} runs hit the target)",
            row.algorithm,
            row.median_iterations,
            row.median_wall_ms,
            row.median_final_cost,
            row.target_hits,
            row.seeds,
        );
    }
    let [a, f] = &report.rows;
    if report.adaptive_wins() {
        println!("  the adaptive schedule reached the target first on both medians");
    } else {
        println!(
            "  the fixed-parameter baseline reached the target first ({:.1} vs {:.1} iterations, {:.3} vs {:.3} ms)",
            f.median_iterations, a.median_iterations, f.median_wall_ms, a.median_wall_ms,
        );
    }
    println!("  wrote {}", bench_path.display());
    ExitCode::SUCCESS
}

fn write_bench_csv(report: &BenchReport<f64>, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "algorithm,median_iters_to_tolerance,median_wall_ms,median_final_cost")?;
    for row in &report.rows {
        writeln!(
            out,
            "{},{},{},{}",
            row.algorithm, row.median_iterations, row.median_wall_ms, row.median_final_cost
        )?;
    }
    Ok(())
}

fn cmd_validate(config_path: &Path) -> ExitCode {
    let config = match load_config::<f64>(config_path) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    let scenario = match Scenario::build(&config) {
        Ok(s) => s,
        Err(e) => return config_error(e),
    };
    print_summary(&config, &scenario);
    ExitCode::SUCCESS
}

fn print_summary(config: &ScenarioConfig<f64>, scenario: &Scenario<f64>) {
    println!("OK");
    println!("  scenario: {} (seed {})", scenario.name, scenario.seed);
    println!(
        "  road: circular, edges {} / {} m, lane width {} m (lane 1 r={}, lane 2 r={})",
        config.road.inner_edge_radius,
        config.road.outer_edge_radius,
        config.road.lane_width,
        scenario.lanes[0].radius,
        scenario.lanes[1].radius,
    );
    println!(
        "  {} vehicles, target lane {}, dt {} s, horizon {} steps",
        scenario.vehicles.len(),
        config.target_lane,
        scenario.dt,
        scenario.horizon,
    );
    for v in &scenario.vehicles {
        println!(
            "    {}: lane {}, start angle {:.2} deg, {} m/s",
            v.role,
            scenario.lanes[v.lane].id,
            v.angle0.to_degrees(),
            v.speed,
        );
    }
}
