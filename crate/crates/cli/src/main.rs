//! `gelrom <mode> --config run.json` runs one pipeline and writes its outputs
//! plus a checksummed manifest under the output directory.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 numerical failure,
//! 1 anything else (I/O, corrupt input files).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gelrom::config::{self, ConfigErrors, Mode};
use gelrom::pipeline;
use gelrom::Error;
use serde_json::{json, Map, Value};

#[derive(Parser)]
#[command(name = "gelrom", version, about = "Reduced-order modeling of swelling gels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct ThetaArg {
    /// Material parameters as `lambda,A`.
    #[arg(long, value_parser = parse_theta)]
    theta: Option<(f64, f64)>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Forward {
    Rom,
    Fom,
}

#[derive(Subcommand)]
enum Command {
    /// Full-order solve at one parameter point.
    FomSolve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        theta: ThetaArg,
    },
    /// Sample training/test parameters and store full-order snapshots.
    Snapshots(Common),
    /// Build a POD or nested-POD reduced model from stored snapshots.
    PodTrain(Common),
    /// Reduced solve at one parameter point.
    RomSolve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        theta: ThetaArg,
    },
    /// Identify (lambda, A) from observed fields.
    Identify {
        #[command(flatten)]
        common: Common,
        /// Observation file.
        #[arg(long)]
        obs: Option<PathBuf>,
        #[arg(long, value_enum)]
        forward: Option<Forward>,
    },
    /// Monte Carlo propagation through the reduced model.
    Uq(Common),
    /// Mesh or time-step convergence study.
    Convergence(Common),
    /// POD and nested-POD error tables against full-order test runs.
    RomErrors(Common),
}

fn parse_theta(s: &str) -> Result<(f64, f64), String> {
    let (l, a) = s.split_once(',').ok_or("expected `lambda,A`")?;
    let f = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
    Ok((f(l)?, f(a)?))
}

enum Failure {
    Config(String),
    Numerical(String),
    Other(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Other(_) => 1,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if matches!(e, Error::Config(_)) {
            Failure::Config(e.to_string())
        } else if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Other(e.to_string())
        }
    }
}

impl From<ConfigErrors> for Failure {
    fn from(e: ConfigErrors) -> Self {
        Failure::Config(format!("invalid configuration:\n{e}"))
    }
}

fn section<'a>(root: &'a mut Map<String, Value>, name: &str) -> &'a mut Map<String, Value> {
    let v = root.entry(name).or_insert_with(|| json!({}));
    if !v.is_object() {
        *v = json!({});
    }
    v.as_object_mut().unwrap()
}

/// Configuration file with the command-line overrides applied.
fn build_config(mode: Mode, common: &Common, patch: impl FnOnce(&mut Map<String, Value>)) -> Result<Value, Failure> {
    let mut value = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Other(format!("{}: {e}", path.display())))?;
            if text.trim().is_empty() {
                json!({})
            } else {
                serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: invalid JSON: {e}", path.display())))?
            }
        }
        None => json!({}),
    };
    let root = value.as_object_mut().ok_or_else(|| Failure::Config("configuration must be a JSON object".into()))?;
    root.insert("mode".into(), json!(mode));
    if let Some(s) = common.seed {
        root.insert("seed".into(), json!(s));
    }
    if let Some(o) = &common.out {
        root.insert("output_dir".into(), json!(o));
    }
    if let Some(j) = common.jobs {
        root.insert("jobs".into(), json!(j));
    }
    patch(root);
    Ok(value)
}

fn theta_patch(theta: &ThetaArg) -> impl FnOnce(&mut Map<String, Value>) + '_ {
    move |root| {
        if let Some((l, a)) = theta.theta {
            section(root, "solve").insert("theta".into(), json!({"lambda": l, "A": a}));
        }
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let value = match &cli.command {
        Command::FomSolve { common, theta } => build_config(Mode::FomSolve, common, theta_patch(theta))?,
        Command::RomSolve { common, theta } => build_config(Mode::RomSolve, common, theta_patch(theta))?,
        Command::Identify { common, obs, forward } => build_config(Mode::Identify, common, |root| {
            let s = section(root, "identify");
            if let Some(o) = obs {
                s.insert("observations".into(), json!(o));
            }
            if let Some(f) = forward {
                s.insert("forward".into(), json!(match f {
                    Forward::Rom => "rom",
                    Forward::Fom => "fom",
                }));
            }
        })?,
        Command::Snapshots(c) => build_config(Mode::Snapshots, c, |_| {})?,
        Command::PodTrain(c) => build_config(Mode::PodTrain, c, |_| {})?,
        Command::Uq(c) => build_config(Mode::Uq, c, |_| {})?,
        Command::Convergence(c) => build_config(Mode::Convergence, c, |_| {})?,
        Command::RomErrors(c) => build_config(Mode::RomErrors, c, |_| {})?,
    };
    let cfg = config::validate_value(&value)?;
    log::info!("{} -> {}", cfg.mode, cfg.output_dir.display());
    let manifest = pipeline::run(&cfg)?;
    let path = pipeline::manifest_path(&cfg.output_dir, cfg.mode);
    println!("{} files, manifest {}", manifest.files.len(), path.display());
    println!("{}", serde_json::to_string_pretty(&manifest.summary).unwrap_or_default());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).format_timestamp_millis().init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Config(m) | Failure::Numerical(m) | Failure::Other(m)) = &f;
            eprintln!("error: {m}");
            ExitCode::from(f.code())
        }
    }
}
