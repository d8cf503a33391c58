//! meshsim: seeded packet-level simulation of multi-gateway wireless mesh
//! networks under a SINR interference model.
//!
//! `run` executes one simulation and writes its report files; `sweep` runs a
//! policy/seed grid (in parallel, resumable) and adds a comparison summary;
//! `topology` constructs and prints the pruned mesh as an edge list.
//!
//! Exit codes: 0 success, 2 configuration error, 3 disconnected topology.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use meshsim_core::config::{Overrides, RawConfig};
use meshsim_core::engine::{self, EngineError};
use meshsim_core::metrics::RunReport;
use meshsim_core::report::{self, Manifest};
use meshsim_core::topology::{write_edge_list, TopologyError};
use meshsim_core::weights::Policy;
use meshsim_core::RunSpec;

const EXIT_CONFIG: u8 = 2;
const EXIT_DISCONNECTED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "meshsim",
    version,
    about = "Packet-level simulator of multi-gateway wireless mesh networks (SINR model)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a single run and write its report files.
    Run(RunArgs),
    /// Run a policy/seed grid and write a comparison summary. Completed
    /// runs (matching summary files) are skipped.
    Sweep(SweepArgs),
    /// Construct the pruned mesh topology and emit it as an edge list.
    Topology(TopologyArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// TOML config file; omitted means the built-in default experiment
    /// (10 nodes, 350 m square, two max-distance gateways, 8 flows, 10^4 slots).
    #[arg(long)]
    config: Option<PathBuf>,
    /// RNG seed for node placement and flow selection.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of time slots to simulate.
    #[arg(long)]
    slots: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Frequency channels (multi-channel mode requires as many radios).
    #[arg(long)]
    channels: Option<usize>,
    /// Schedules built per slot (default: gateway count + 1).
    #[arg(long)]
    schedules: Option<usize>,
    /// Also write the per-slot schedule trace CSV.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Weight policy: W, Wr, WD, WrD, Wrd or WrdD.
    #[arg(long)]
    policy: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated policies (default: all six).
    #[arg(long, value_delimiter = ',')]
    policies: Vec<String>,
    /// Comma-separated seeds (default: the config seed).
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
}

#[derive(Args)]
struct TopologyArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: EXIT_CONFIG,
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        let code = match &e {
            EngineError::Topology(TopologyError::Disconnected { .. }) => EXIT_DISCONNECTED,
            EngineError::TopologyFile { .. }
            | EngineError::Topology(_)
            | EngineError::Model(_)
            | EngineError::Scheduler(_)
            | EngineError::Flows(_) => EXIT_CONFIG,
        };
        Self {
            message: e.to_string(),
            code,
        }
    }
}

impl From<report::ReportError> for CliError {
    fn from(e: report::ReportError) -> Self {
        Self {
            message: e.to_string(),
            code: 1,
        }
    }
}

fn load_raw(path: &Option<PathBuf>) -> Result<RawConfig, CliError> {
    match path {
        None => Ok(RawConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::config(format!("cannot read {}: {e}", p.display())))?;
            RawConfig::from_toml(&text).map_err(|e| CliError::config(e.to_string()))
        }
    }
}

fn parse_policy(s: &str) -> Result<Policy, CliError> {
    s.parse()
        .map_err(|_| CliError::config(format!("unknown policy {s:?} (use W, Wr, WD, WrD, Wrd, WrdD)")))
}

fn overrides_from(common: &CommonArgs, policy: Option<Policy>) -> Overrides {
    Overrides {
        policy,
        seed: common.seed,
        slots: common.slots,
        out_dir: common.out.clone(),
        channels: common.channels,
        schedules: common.schedules,
        trace: common.trace.then_some(true),
    }
}

fn resolve_spec(common: &CommonArgs, policy: Option<Policy>) -> Result<RunSpec, CliError> {
    let raw = load_raw(&common.config)?;
    RunSpec::resolve(&raw, &overrides_from(common, policy))
        .map_err(|e| CliError::config(e.to_string()))
}

fn execute_run(spec: &RunSpec) -> Result<RunReport, CliError> {
    let outcome = engine::run(spec)?;
    let (files, report) = report::write_run_files(spec, &outcome)?;
    println!(
        "run {}: aggregated throughput {:.3} Mbps, {} packets received, mean delay {} slots",
        spec.run_label(),
        report.aggregate.throughput_mbps,
        report.aggregate.total_received,
        report
            .aggregate
            .mean_delay_slots
            .map(|d| format!("{d:.1}"))
            .unwrap_or_else(|| "n/a".into()),
    );
    println!("  wrote {}", files.summary_json.display());
    Ok(report)
}

fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let policy = args.policy.as_deref().map(parse_policy).transpose()?;
    let spec = resolve_spec(&args.common, policy)?;
    execute_run(&spec)?;
    Ok(())
}

/// One sweep row, either freshly computed or recovered from a previous
/// summary file.
struct SweepRow {
    policy: Policy,
    seed: u64,
    report: RunReport,
    skipped: bool,
}

fn load_existing_report(path: &PathBuf, spec: &RunSpec) -> Option<RunReport> {
    let text = std::fs::read_to_string(path).ok()?;
    let value: serde_json::Value = serde_json::from_str(&text).ok()?;
    if value.get("manifest")?.get("config")?.as_str()? != spec.config_hash() {
        return None;
    }
    serde_json::from_value(value.get("report")?.clone()).ok()
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let policies: Vec<Policy> = if args.policies.is_empty() {
        Policy::ALL.to_vec()
    } else {
        args.policies
            .iter()
            .map(|s| parse_policy(s))
            .collect::<Result<_, _>>()?
    };
    let base = resolve_spec(&args.common, None)?;
    let seeds: Vec<u64> = if args.seeds.is_empty() {
        vec![base.seed]
    } else {
        args.seeds.clone()
    };

    let mut grid: Vec<RunSpec> = Vec::new();
    for &policy in &policies {
        for &seed in &seeds {
            let mut spec = base.clone();
            spec.policy = policy;
            spec.seed = seed;
            grid.push(spec);
        }
    }

    let rows: Vec<Result<SweepRow, CliError>> = grid
        .par_iter()
        .map(|spec| {
            let summary = spec
                .out_dir
                .join(format!("summary_{}.json", spec.run_label()));
            if let Some(report) = load_existing_report(&summary, spec) {
                return Ok(SweepRow {
                    policy: spec.policy,
                    seed: spec.seed,
                    report,
                    skipped: true,
                });
            }
            let outcome = engine::run(spec)?;
            let (_, report) = report::write_run_files(spec, &outcome)?;
            Ok(SweepRow {
                policy: spec.policy,
                seed: spec.seed,
                report,
                skipped: false,
            })
        })
        .collect();

    let mut done = Vec::new();
    for row in rows {
        done.push(row?);
    }
    for row in &done {
        println!(
            "{} {} seed {}: {:.3} Mbps, {} received",
            if row.skipped { "skipped (complete)" } else { "ran" },
            row.policy,
            row.seed,
            row.report.aggregate.throughput_mbps,
            row.report.aggregate.total_received
        );
    }

    // Comparison table across the grid, one row per run.
    let mut text = Manifest::for_spec(&base).header_line();
    text.push_str(
        "policy,seed,aggregate_throughput_mbps,total_received,mean_delay_slots,jfi_throughput,jfi_inv_mean_delay,jfi_throughput_over_delay\n",
    );
    let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "n/a".into());
    for &policy in &policies {
        for &seed in &seeds {
            let row = done
                .iter()
                .find(|r| r.policy == policy && r.seed == seed)
                .expect("every grid cell resolved");
            let a = &row.report.aggregate;
            text.push_str(&format!(
                "{},{},{:.6},{},{},{},{},{}\n",
                policy,
                seed,
                a.throughput_mbps,
                a.total_received,
                fmt_opt(a.mean_delay_slots),
                fmt_opt(row.report.jfi[0].value),
                fmt_opt(row.report.jfi[1].value),
                fmt_opt(row.report.jfi[2].value),
            ));
        }
    }
    let mut label = format!("n{}_t{}", base.nodes, base.slots);
    if base.channels > 1 {
        label.push_str(&format!("_c{}", base.channels));
    }
    let path = base.out_dir.join(format!("sweep_{label}.csv"));
    report::write_atomic(&path, &text)?;
    println!("sweep summary: {}", path.display());
    Ok(())
}

fn cmd_topology(args: &TopologyArgs) -> Result<(), CliError> {
    let common = CommonArgs {
        config: args.config.clone(),
        seed: args.seed,
        slots: None,
        out: None,
        channels: None,
        schedules: None,
        trace: false,
    };
    let spec = resolve_spec(&common, None)?;
    let topo = engine::build_topology(&spec)?;
    let mut text = Manifest::for_spec(&spec).header_line();
    text.push_str(&write_edge_list(&topo));
    match &args.out {
        Some(path) => {
            report::write_atomic(path, &text)?;
            println!("topology written to {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Topology(args) => cmd_topology(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
