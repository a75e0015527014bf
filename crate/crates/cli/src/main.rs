// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use catsim::models::{kappa2_effective, units};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

mod builtin;
mod config;
mod error;
mod scenario;

use config::{env_overrides, load, params_with, Override, ScenarioConfig};
use error::CliError;

/// Cat-qubit simulation scenarios.
#[derive(Parser)]
#[command(name = "catsim", version)]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OverrideArgs {
    /// Override a registry key (`kappa_b=26`) or a config entry (`scan.horizon=3`).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or built-in scenario; writes CSV plus a manifest.
    Run {
        /// Path to a TOML scenario, or the name of a built-in one.
        scenario: Option<String>,
        /// Output CSV path (default: `[output] path`, else `<name>.csv`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// List the built-in scenarios and exit.
        #[arg(long)]
        list: bool,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Check a scenario against every precondition without running it.
    Validate {
        scenario: String,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Inspect the parameter registry.
    Params {
        #[command(subcommand)]
        action: ParamsAction,
    },
}

#[derive(Subcommand)]
enum ParamsAction {
    /// Print every registry key with its value (MHz, µs) and the derived rates.
    Show {
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
}

fn overrides(args: &OverrideArgs) -> Result<Vec<Override>, CliError> {
    let mut all = env_overrides(std::env::vars())?;
    for s in &args.set {
        all.push(Override::parse_flag(s)?);
    }
    Ok(all)
}

/// Scenario text and a display name.
fn resolve(scenario: &str) -> Result<(String, String), CliError> {
    let path = Path::new(scenario);
    if path.exists() {
        let text = std::fs::read_to_string(path)?;
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "scenario".into());
        return Ok((text, name));
    }
    builtin::find(scenario).map(|t| (t.to_string(), scenario.to_string())).ok_or_else(|| {
        CliError::Validation(format!("`{scenario}` is neither a file nor a built-in scenario (see `run --list`)"))
    })
}

fn derived(cfg: &ScenarioConfig) -> Result<serde_json::Value, CliError> {
    let p = cfg.system_params()?;
    let k2 = kappa2_effective(p.g2, p.kappa_b);
    Ok(json!({
        "kappa2_mhz": k2,
        "kappa2_rad_per_us": units::to_angular(k2),
        "kappa_c_mhz": 2.0 * cfg.model.alpha_sq * k2,
        "loss_offset_alpha_sq": p.kappa_a / (2.0 * k2),
    }))
}

fn run(scenario: &str, out: Option<PathBuf>, ov: &[Override]) -> Result<(), CliError> {
    let start = Instant::now();
    let (text, name) = resolve(scenario)?;
    let cfg = load(&text, ov)?;
    let plan = scenario::plan(&cfg)?;
    let csv_path = out.or_else(|| cfg.output.path.clone()).unwrap_or_else(|| PathBuf::from(format!("{name}.csv")));
    if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let outcome = scenario::execute(&cfg, &plan)?;
    std::fs::write(&csv_path, &outcome.csv)?;

    let manifest = json!({
        "tool": "catsim",
        "version": env!("CARGO_PKG_VERSION"),
        "scenario": name,
        "kind": cfg.scan.kind(),
        "inputs": cfg,
        "overrides": ov,
        "derived": derived(&cfg)?,
        "output": csv_path.to_string_lossy(),
        "results": outcome.results,
        "wall_time_s": start.elapsed().as_secs_f64(),
        "timestamp_unix": SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
    });
    let mut manifest_path = csv_path.clone().into_os_string();
    manifest_path.push(".manifest.json");
    let body = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Numerical(e.to_string()))?;
    std::fs::write(&manifest_path, body + "\n")?;
    println!("wrote {} and {}", csv_path.display(), Path::new(&manifest_path).display());
    Ok(())
}

fn params_show(json_out: bool, ov: &[Override]) -> Result<(), CliError> {
    let p = params_with(ov)?;
    let k2 = kappa2_effective(p.g2, p.kappa_b);
    if json_out {
        let mut m = serde_json::Map::new();
        for k in catsim::models::SystemParams::KEYS {
            m.insert(k.to_string(), json!(p.get(k)?));
        }
        m.insert("derived.kappa2".into(), json!(k2));
        println!("{}", serde_json::to_string_pretty(&m).map_err(|e| CliError::Numerical(e.to_string()))?);
    } else {
        print!("{}", p.to_kv());
        println!("# derived");
        println!("kappa2 = {k2}");
        println!("loss_offset_alpha_sq = {}", p.kappa_a / (2.0 * k2));
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::Validation("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("cannot size the worker pool: {e}")))?;
    }
    match cli.command {
        Command::Run { list: true, .. } => {
            for (name, text) in builtin::BUILTINS {
                println!("{name:<24} {}", builtin::summary(text));
            }
            Ok(())
        }
        Command::Run { scenario: Some(s), out, overrides: o, .. } => run(&s, out, &overrides(&o)?),
        Command::Run { scenario: None, .. } => {
            Err(CliError::Validation("run needs a scenario file or built-in name (or --list)".into()))
        }
        Command::Validate { scenario, overrides: o } => {
            let (text, name) = resolve(&scenario)?;
            let cfg = load(&text, &overrides(&o)?)?;
            scenario::plan(&cfg)?;
            println!("{name}: ok ({})", cfg.scan.kind());
            Ok(())
        }
        Command::Params { action: ParamsAction::Show { json, overrides: o } } => params_show(json, &overrides(&o)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("catsim: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
