//! Command-line front end: `fractube run <config>` and
//! `fractube validate <config>`.

mod config;
mod run;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical { stage: String, message: String },
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) | Failure::Io(_) => 2,
            Failure::Numerical { .. } => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Numerical { stage, message } => {
                write!(f, "numerical failure in stage `{stage}`: {message}")
            }
            Failure::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "fractube", version, about = "Fractional Laplacians on tubes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads.
        #[arg(long)]
        threads: Option<usize>,
        /// Seed (overrides `seed`).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse and check a config without running it.
    Validate { config: PathBuf },
}

fn load(path: &PathBuf) -> Result<(Vec<u8>, config::RunConfig), Failure> {
    let bytes =
        std::fs::read(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let cfg = config::parse(text)?;
    config::validate(&cfg)?;
    Ok((bytes, cfg))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { config } => load(&config).map(|(_, cfg)| {
            let mut out = std::io::stdout().lock();
            let _ = writeln!(
                out,
                "{}",
                serde_json::to_string_pretty(&cfg).unwrap_or_default()
            );
            true
        }),
        Command::Run {
            config,
            out,
            threads,
            seed,
        } => load(&config).and_then(|(bytes, mut cfg)| {
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            if let Some(k) = seed {
                cfg.seed = k;
            }
            if let Some(n) = threads {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| Failure::Config(format!("--threads: {e}")))?;
            }
            let manifest = run::execute(&cfg, &bytes)?;
            let mut stdout = std::io::stdout().lock();
            for f in &manifest.files {
                let _ = writeln!(stdout, "wrote {} ({} rows)", f.path, f.rows);
            }
            for c in manifest.checks.iter().filter(|c| !c.pass) {
                let _ = writeln!(
                    stdout,
                    "check failed: {} (measured {}, threshold {})",
                    c.name, c.measured, c.threshold
                );
            }
            let _ = writeln!(stdout, "{}", if manifest.pass { "PASS" } else { "FAIL" });
            Ok(manifest.pass)
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let _ = writeln!(std::io::stderr().lock(), "{e}");
            ExitCode::from(e.code())
        }
    }
}
