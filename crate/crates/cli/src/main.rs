//! `dpi-lab`: runs one experiment described by a TOML file and writes its
//! CSV/JSON artifacts plus a manifest.
//!
//! Exit codes: 0 success, 2 parse error, 3 validation error, 4 numerical
//! failure, 1 I/O failure. Failures print one line `error[<category>]: <reason>`
//! on stderr.

mod config;
mod experiments;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use dpi_core::{DerivedParams, Error};
use serde_json::json;
use sha2::{Digest, Sha256};

use config::Loaded;
use experiments::Artifact;

#[derive(Debug)]
pub enum Failure {
    Parse(String),
    Validation(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Parse(_) => 2,
            Failure::Validation(_) => 3,
            Failure::Numerical(_) => 4,
            Failure::Io(_) => 1,
        }
    }

    fn line(&self) -> String {
        let (category, reason) = match self {
            Failure::Parse(r) => ("parse", r),
            Failure::Validation(r) => ("validation", r),
            Failure::Numerical(r) => ("numerical", r),
            Failure::Io(r) => ("io", r),
        };
        let reason = reason.split_whitespace().collect::<Vec<_>>().join(" ");
        format!("error[{category}]: {reason}")
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let reason = e.to_string();
        match e {
            Error::InvalidParams(_) | Error::Structure(_) | Error::Unsupported(_) => Failure::Validation(reason),
            Error::Domain(_) | Error::DegenerateDensity { .. } | Error::Numerical(_) => Failure::Numerical(reason),
            Error::Io(_) | Error::Csv(_) => Failure::Io(reason),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dpi-lab", version, about = "Run DPI potential experiments from TOML configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Execute the experiment and write its artifacts.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed; overrides `seed` in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for the parallel parts.
        #[arg(long)]
        threads: Option<usize>,
        /// Print the plan instead of running.
        #[arg(long)]
        dry_run: bool,
    },
    /// Print derived parameters and the experiment plan without running.
    Describe {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.line());
            ExitCode::from(f.code())
        }
    }
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Describe { config, seed } => describe(&config, seed),
        Command::Run { config, dry_run: true, seed, .. } => describe(&config, seed),
        Command::Run { config, out, seed, threads, dry_run: false } => {
            if let Some(n) = threads {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| Failure::Validation(format!("cannot set up {n} threads: {e}")))?;
            }
            run(&config, out, seed)
        }
    }
}

fn load(path: &Path, seed: Option<u64>) -> Result<(Loaded, DerivedParams), Failure> {
    let loaded = Loaded::read(path, seed)?;
    loaded.validate()?;
    let derived = loaded.config.params.derive()?;
    Ok((loaded, derived))
}

fn describe(path: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let (loaded, d) = load(path, seed)?;
    let p = &loaded.config.params;
    let mut text = String::new();
    let mut line = |s: String| {
        text.push_str(&s);
        text.push('\n');
    };
    line(format!("experiment: {}", loaded.config.kind.name()));
    line(format!("config hash: {}", loaded.hash));
    line(format!("parameters: u0 = {}, alpha_s = {}, alpha_l = {}", p.u0, p.alpha_s, p.alpha_l));
    line("derived:".into());
    line(format!("  epsilon = {:.6} ({})", d.epsilon, d.epsilon));
    line(format!("  beta = {:.6} ({})", d.beta, d.beta));
    line(format!("  gamma = {:.6} ({})", d.gamma, d.gamma));
    line(format!("  omega = {:.6} ({})", d.omega, d.omega));
    line(format!("  C = {:.6} ({})", d.prefactor_c, d.prefactor_c));
    line(format!("  coupling u0*C*omega = {:.6} ({})", d.quantum_coupling, d.quantum_coupling));
    line("plan:".into());
    for step in experiments::plan(&loaded) {
        line(format!("  - {step}"));
    }
    std::io::stdout().write_all(text.as_bytes()).map_err(|e| Failure::Io(e.to_string()))
}

fn run(path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<(), Failure> {
    let (loaded, derived) = load(path, seed)?;
    let dir = out.or_else(|| loaded.config.output.clone()).unwrap_or_else(|| PathBuf::from("dpi-out"));
    let artifacts = experiments::run(&loaded, &derived)?;
    let manifest = manifest(&loaded, &derived, &artifacts);
    write_all(&dir, artifacts.iter().chain(std::iter::once(&manifest)))?;
    println!("{} artifacts written to {}", artifacts.len() + 1, dir.display());
    Ok(())
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// The only artifact carrying a timestamp.
fn manifest(loaded: &Loaded, derived: &DerivedParams, artifacts: &[Artifact]) -> Artifact {
    let created = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let files: Vec<_> = artifacts
        .iter()
        .map(|a| json!({ "name": a.name, "bytes": a.bytes.len(), "sha256": sha256_hex(&a.bytes) }))
        .collect();
    let doc = json!({
        "config_hash": loaded.hash,
        "kind": loaded.config.kind.name(),
        "config_path": loaded.source.display().to_string(),
        "seed": loaded.config.seed,
        "params": loaded.config.params,
        "derived": derived,
        "constants": loaded.config.constants,
        "versions": { "dpi-lab": env!("CARGO_PKG_VERSION"), "dpi-core": dpi_core::VERSION },
        "artifacts": files,
        "created_unix": created,
    });
    let mut bytes = serde_json::to_vec_pretty(&doc).expect("json serialises");
    bytes.push(b'\n');
    Artifact { name: "manifest.json".into(), bytes }
}

/// Each file goes through a temporary name and a rename, so readers never see
/// a half-written artifact.
fn write_all<'a>(dir: &Path, artifacts: impl Iterator<Item = &'a Artifact>) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Io(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    for a in artifacts {
        let tmp = dir.join(format!(".{}.partial", a.name));
        std::fs::write(&tmp, &a.bytes).map_err(io)?;
        std::fs::rename(&tmp, dir.join(&a.name)).map_err(io)?;
    }
    Ok(())
}
