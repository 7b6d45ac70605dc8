use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use bs_core::orbit::trace_orbit;
use bs_core::wkb::{build_branch, Branch};
use bs_core::{catalog_build, OrbitOptions, ParamValue, Params, SymbolModel};
use clap::{Parser, Subcommand};

mod check;
mod config;
mod error;
mod run;

use check::Suite;
use config::RunConfig;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "bs", version, about = "Second-order Bohr-Sommerfeld quantization with spectral checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the configured pipeline and write CSV/JSON artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Parallel h values; defaults to the available cores.
        #[arg(long)]
        jobs: Option<usize>,
        /// Overrides `output.dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an invariant suite and print a PASS/FAIL table.
    Check {
        #[arg(value_enum)]
        suite: Suite,
    },
    /// Trace the orbit at energy E and dump it as CSV `t,x,xi`.
    Orbit {
        #[arg(long)]
        problem: String,
        #[arg(long = "E", allow_negative_numbers = true)]
        energy: f64,
        #[arg(long)]
        dump_orbit: PathBuf,
        /// Catalog parameter `key=value`, or `key=a,b,c` for a list.
        #[arg(long = "param", value_parser = parse_param)]
        params: Vec<(String, ParamValue)>,
        #[arg(long, default_value_t = 1024)]
        n_samples: usize,
    },
    /// Build both WKB branches at (E, h) and dump them as CSV.
    Wkb {
        #[arg(long)]
        problem: String,
        #[arg(long = "E", allow_negative_numbers = true)]
        energy: f64,
        #[arg(long)]
        h: f64,
        #[arg(long)]
        dump_wkb: PathBuf,
        #[arg(long = "param", value_parser = parse_param)]
        params: Vec<(String, ParamValue)>,
        #[arg(long, default_value_t = 0.1)]
        margin: f64,
        #[arg(long, default_value_t = 201)]
        nodes: usize,
    },
}

fn parse_param(s: &str) -> Result<(String, ParamValue), String> {
    let (key, value) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let nums: Result<Vec<f64>, _> = value.split(',').map(|v| v.trim().parse::<f64>()).collect();
    let nums = nums.map_err(|e| format!("`{value}`: {e}"))?;
    let v = if value.contains(',') { ParamValue::List(nums) } else { ParamValue::Scalar(nums[0]) };
    Ok((key.trim().to_string(), v))
}

fn build_model(problem: &str, params: Vec<(String, ParamValue)>) -> Result<SymbolModel, CliError> {
    let params: Params = params.into_iter().collect();
    catalog_build(problem, &params).map_err(|e| CliError::Config(e.to_string()))
}

fn unix_seconds() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn cmd_run(config: &Path, jobs: Option<usize>, out: Option<PathBuf>) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(config)?.resolve()?;
    if let Some(dir) = out {
        cfg.output.dir = dir;
    }
    let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    if jobs == 0 {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    let started = unix_seconds();
    let clock = Instant::now();
    let report = run::run(&cfg, jobs);
    let metadata = serde_json::json!({
        "config_path": config.display().to_string(),
        "config_hash": report.provenance.config_hash,
        "started_unix": started,
        "finished_unix": unix_seconds(),
        "elapsed_seconds": clock.elapsed().as_secs_f64(),
        "jobs": jobs,
    });
    run::write_outputs(&report, &cfg.output.dir, &metadata)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for t in &report.tables {
        let errs: Vec<String> = t.max_error.iter().map(|(k, e)| format!("order {k}: {e:.3e}")).collect();
        println!("h = {}: {} rows, max |E_bs - E_oracle| {}", t.h, t.rows.len(), errs.join(", "));
    }
    for s in &report.slopes {
        let order = s.order.map(|o| format!(" order {o}")).unwrap_or_default();
        println!("slope {}{order}: {:.3}", s.quantity, s.slope);
    }
    println!("status: {} (artifacts in {})", report.status, cfg.output.dir.display());
    if let Some(f) = &report.failed_stage {
        return Err(CliError::StageFailed { stage: format!("h = {}, {}", f.h, f.stage), message: f.message.clone() });
    }
    if !report.invariants_pass() {
        let failed: Vec<String> = report
            .invariants
            .iter()
            .filter(|v| !v.pass)
            .map(|v| format!("{} at h = {}: {:e} > {:e}", v.name, v.h.unwrap_or(f64::NAN), v.value, v.tol))
            .collect();
        return Err(CliError::Invariant(failed.join("; ")));
    }
    Ok(())
}

fn cmd_check(suite: Suite) -> Result<(), CliError> {
    let rows = check::run_suite(suite)?;
    print!("{}", check::format_table(&rows));
    if rows.iter().all(|r| r.pass) {
        Ok(())
    } else {
        Err(CliError::Invariant(format!("{} of {} checks failed", rows.iter().filter(|r| !r.pass).count(), rows.len())))
    }
}

fn write_file(path: &Path, body: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, body).map_err(|e| CliError::io(path, e))
}

fn cmd_orbit(model: &SymbolModel, e: f64, path: &Path, n_samples: usize) -> Result<(), CliError> {
    let opts = OrbitOptions { n_samples, ..OrbitOptions::default() };
    let orbit = trace_orbit(model, e, &opts).map_err(CliError::stage("orbit"))?;
    let mut s = String::from("t,x,xi\n");
    for p in &orbit.samples {
        let _ = writeln!(s, "{},{},{}", p.t, p.point.x, p.point.xi);
    }
    write_file(path, &s)?;
    println!("E = {e}: T = {}, S0 = {}, {} samples -> {}", orbit.period, orbit.area_action(), orbit.len(), path.display());
    Ok(())
}

fn cmd_wkb(model: &SymbolModel, e: f64, h: f64, path: &Path, margin: f64, nodes: usize) -> Result<(), CliError> {
    if !(h > 0.0) {
        return Err(CliError::Config(format!("h = {h} must be positive")));
    }
    let plus = build_branch(model, e, h, Branch::Plus, margin, nodes).map_err(CliError::stage("wkb plus"))?;
    let minus = build_branch(model, e, h, Branch::Minus, margin, nodes).map_err(CliError::stage("wkb minus"))?;
    let mut s = String::from("x,xi_plus,phase_plus,amp_plus,xi_minus,phase_minus,amp_minus\n");
    for k in 0..plus.len() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            plus.x_grid[k],
            plus.xi_branch[k],
            plus.phase[k],
            plus.amplitude[k],
            minus.xi_branch[k],
            minus.phase[k],
            minus.amplitude[k]
        );
    }
    write_file(path, &s)?;
    let transport = plus.transport_identity_error(model).map_err(CliError::stage("wkb transport"))?;
    println!("E = {e}, h = {h}: {} nodes, transport defect {transport:.3e} -> {}", plus.len(), path.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, jobs, out } => cmd_run(&config, jobs, out),
        Command::Check { suite } => cmd_check(suite),
        Command::Orbit { problem, energy, dump_orbit, params, n_samples } => {
            cmd_orbit(&build_model(&problem, params)?, energy, &dump_orbit, n_samples)
        }
        Command::Wkb { problem, energy, h, dump_wkb, params, margin, nodes } => {
            cmd_wkb(&build_model(&problem, params)?, energy, h, &dump_wkb, margin, nodes)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
