use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use selfsync::config::{RunConfig, OUT_DIR_ENV};
use selfsync::experiments::{
    parse_grid, run_sweep, summarize, sweep_csv, RunSummary, SweepSpec, SweepVariable,
};
use selfsync::output::{format_real, write_atomic, write_trace};
use selfsync::Simulation;

#[derive(Parser)]
#[command(
    name = "selfsync",
    version,
    about = "Self-synchronized duty-cycling simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write its per-period trace.
    Run(RunArgs),
    /// Repeat the simulation over a grid of one variable.
    Sweep(SweepArgs),
    /// Print the default configuration as TOML.
    Defaults,
}

#[derive(Args)]
struct CommonArgs {
    /// TOML configuration file; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of periods to simulate (overrides the config).
    #[arg(long)]
    periods: Option<u64>,
    /// Output file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override any config key, e.g. `--set protocol.theta_act=0.2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum VarArg {
    Loss,
    Cloud,
    Size,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Variable to sweep.
    #[arg(long, value_enum)]
    var: VarArg,
    /// `start:stop:step` (inclusive) or a comma-separated list.
    #[arg(long)]
    grid: String,
    /// Seeds per grid value, counting up from the root seed.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Defaults => {
            print!("{}", RunConfig::default().to_toml_string());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(common: &CommonArgs) -> Result<RunConfig, String> {
    let mut overrides = common.overrides.clone();
    if let Some(seed) = common.seed {
        overrides.push(format!("seed={seed}"));
    }
    if let Some(periods) = common.periods {
        overrides.push(format!("schedule.total_periods={periods}"));
    }
    let config = match &common.config {
        Some(path) => RunConfig::load_with_overrides(path, &overrides),
        None => RunConfig::defaults_with_overrides(&overrides),
    };
    config.map_err(|e| e.to_string())
}

fn output_path(explicit: Option<&Path>, configured: Option<&Path>, file_name: &str) -> PathBuf {
    if let Some(p) = explicit.or(configured) {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) => PathBuf::from(dir).join(file_name),
        None => PathBuf::from(file_name),
    }
}

fn cmd_run(args: RunArgs) -> Result<(), String> {
    let config = load_config(&args.common)?;
    let trace_path = output_path(
        args.common.out.as_deref(),
        config.output.as_deref(),
        "trace.csv",
    );
    let mut sim = Simulation::new(config.clone()).map_err(|e| e.to_string())?;
    let trace = sim.run().map_err(|e| e.to_string())?;
    let summary = summarize(&trace, &config).ok();
    let summary_text = render_summary(trace.len(), summary.as_ref());

    write_trace(&trace_path, &trace)
        .map_err(|e| format!("cannot write {}: {e}", trace_path.display()))?;
    let summary_path = trace_path.with_extension("summary.toml");
    write_atomic(&summary_path, summary_text.as_bytes())
        .map_err(|e| format!("cannot write {}: {e}", summary_path.display()))?;
    print!("{summary_text}");
    eprintln!(
        "wrote {} and {}",
        trace_path.display(),
        summary_path.display()
    );
    Ok(())
}

fn render_summary(periods: usize, summary: Option<&RunSummary>) -> String {
    let mut out = format!("periods = {periods}\n");
    let Some(s) = summary else {
        out.push_str("# trace too short for the warmup; no statistics\n");
        return out;
    };
    let o = &s.oscillation;
    let mut kv = |k: &str, v: f64| out.push_str(&format!("{k} = {}\n", format_real(v)));
    kv("mean_system_activity", s.mean_system_activity);
    kv("final_mean_battery", s.final_mean_battery);
    kv("peaks_per_day", o.peaks_per_day);
    kv("mean_peak_height", o.mean_peak_height);
    kv("mean_trough_depth", o.mean_trough_depth);
    if let Some(r) = o.height_battery_correlation() {
        kv("peak_battery_correlation", r);
    }
    if let Some(b) = s.breakdown {
        out.push_str("\n[energy_percent]\n");
        for (k, v) in [
            ("tx", b.tx),
            ("rx", b.rx),
            ("idle", b.idle),
            ("active", b.active),
            ("app", b.app),
        ] {
            out.push_str(&format!("{k} = {}\n", format_real(v)));
        }
    }
    out
}

fn cmd_sweep(args: SweepArgs) -> Result<(), String> {
    let base = load_config(&args.common)?;
    let grid = parse_grid(&args.grid)?;
    if args.seeds == 0 {
        return Err("--seeds must be at least 1".into());
    }
    let variable = match args.var {
        VarArg::Loss => SweepVariable::Loss,
        VarArg::Cloud => SweepVariable::Cloud,
        VarArg::Size => SweepVariable::Size,
    };
    let seeds = (0..args.seeds).map(|i| base.seed.wrapping_add(i)).collect();
    let spec = SweepSpec {
        variable,
        grid,
        seeds,
        base,
    };
    spec.validate().map_err(|e| e.to_string())?;
    let path = output_path(args.common.out.as_deref(), None, "sweep.csv");
    let results = run_sweep(&spec, args.jobs.max(1)).map_err(|e| e.to_string())?;
    write_atomic(&path, sweep_csv(&results).as_bytes())
        .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    for row in &results.averages {
        println!(
            "{} = {:<8} mean_system_activity = {}",
            variable,
            format_real(row.value),
            format_real(row.mean_system_activity)
        );
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}
