//! `fracmax`: reproducible experiment runner.
//!
//! Every run writes its result tables and a `<command>-manifest.json` into the
//! output directory. Exit status is 0 when every check passes, 1 when a table
//! contains a failure row, and 2 on invalid input.

mod commands;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fracmax_core::Exponents;
use serde::Serialize;
use serde_json::json;

/// Environment variable naming the default output directory.
const OUT_ENV: &str = "FRACMAX_OUT";

#[derive(Parser, Debug)]
#[command(name = "fracmax", version, about = "Two-weight bounds for fractional maximal operators on probability trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    config: Config,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Command {
    /// The sharp constant C(p, q).
    Constants,
    /// Testing constant and main inequality on a random weighted tree.
    Testing,
    /// Carleson sequences from linearizations and the embedding inequality.
    Carleson,
    /// Lower bounds for the Bellman function on a point or a small grid.
    Bellman,
    /// The Bliss inequality on random step functions.
    Bliss,
    /// Extremal weights on the prefix tree and the ratio-versus-N curve.
    Sharpness,
    /// Seeded campaign of random instances of the main inequality.
    Fuzz,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Constants => "constants",
            Command::Testing => "testing",
            Command::Carleson => "carleson",
            Command::Bellman => "bellman",
            Command::Bliss => "bliss",
            Command::Sharpness => "sharpness",
            Command::Fuzz => "fuzz",
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Config {
    #[arg(long, global = true, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, global = true, default_value_t = 2.0)]
    pub q: f64,
    #[arg(long, global = true, default_value_t = 0.5)]
    pub alpha: f64,
    /// Cell counts of the prefix tree, comma separated.
    #[arg(long = "N", global = true, value_delimiter = ',', default_value = "16")]
    pub n: Vec<usize>,
    /// Maximal depth of random trees.
    #[arg(long, global = true, default_value_t = 4)]
    pub depth: usize,
    /// Pieces of Bellman trial functions, or the maximal piece count for `bliss`.
    #[arg(long, global = true)]
    pub pieces: Option<usize>,
    /// Evaluation budget of the search or ascent.
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    /// Search starts for `bellman`.
    #[arg(long, global = true)]
    pub starts: Option<usize>,
    /// Instances for `fuzz`, samples for `bliss`.
    #[arg(long, global = true)]
    pub count: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Quadrature tolerance.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    /// Relative slack of inequality checks; a negative value demands a margin.
    #[arg(long = "cmp-tol", global = true, default_value_t = 1e-9)]
    pub cmp_tol: f64,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory; defaults to $FRACMAX_OUT, then `fracmax-out`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Bellman point; the unset coordinates get defaults.
    #[arg(long, global = true)]
    pub x: Option<f64>,
    #[arg(long, global = true)]
    pub y: Option<f64>,
    #[arg(long, global = true)]
    pub s: Option<f64>,
    #[arg(long, global = true)]
    pub t: Option<f64>,
}

impl Config {
    fn validate(&self, command: Command) -> Result<(), String> {
        if command != Command::Fuzz {
            Exponents::new(self.p, self.q, self.alpha).map_err(|e| e.to_string())?;
        }
        if !(self.tol > 0.0 && self.cmp_tol > -1.0) {
            return Err(format!("need --tol > 0 and --cmp-tol > -1, got {} and {}", self.tol, self.cmp_tol));
        }
        if self.n.iter().any(|&n| n == 0) {
            return Err("--N entries must be positive".into());
        }
        if self.depth == 0 {
            return Err("--depth must be positive".into());
        }
        if self.jobs == Some(0) {
            return Err("--jobs must be positive".into());
        }
        Ok(())
    }

    fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("fracmax-out"))
    }
}

fn run(command: Command, config: &Config) -> Result<bool, String> {
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.unwrap_or(0))
        .build()
        .map_err(|e| e.to_string())?;
    let report = pool
        .install(|| match command {
            Command::Constants => commands::constants(config),
            Command::Testing => commands::testing(config),
            Command::Carleson => commands::carleson(config),
            Command::Bellman => commands::bellman(config),
            Command::Bliss => commands::bliss(config),
            Command::Sharpness => commands::sharpness(config),
            Command::Fuzz => commands::fuzz(config),
        })
        .map_err(|e| e.to_string())?;

    let dir = config.out_dir();
    std::fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let mut written = Vec::new();
    let mut failures = 0;
    for t in &report.tables {
        let path = t.write(&dir, command.name(), config.format).map_err(|e| e.to_string())?;
        written.push(path.file_name().expect("file name").to_string_lossy().into_owned());
        failures += t.failures();
    }
    for (name, contents) in &report.files {
        std::fs::write(dir.join(name), contents).map_err(|e| e.to_string())?;
        written.push(name.clone());
    }
    let manifest = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "wall_time_s": start.elapsed().as_secs_f64(),
        "status": if failures == 0 { "pass" } else { "fail" },
        "failures": failures,
        "files": written,
        "summary": report.summary,
    });
    let path = dir.join(format!("{}-manifest.json", command.name()));
    std::fs::write(&path, serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n")
        .map_err(|e| e.to_string())?;
    for t in &report.tables {
        println!("{}-{}: {} rows, {} failures", command.name(), t.name, t.rows.len(), t.failures());
    }
    println!("wrote {}", dir.display());
    Ok(failures == 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = cli.config.validate(cli.command) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(cli.command, &cli.config) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: contract violation, see the FAIL rows");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
