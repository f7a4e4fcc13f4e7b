//! `steerkit` command-line front end.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "steerkit", version, about = "One-sided device-independent self-testing experiments")]
pub struct Cli {
    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certify a state and Bob's observables against the closeness bound.
    Selftest(SelftestArgs),
    /// Measurement-count and round-count calculators.
    Counts(CountsArgs),
    /// Play steering games, run tail and extraction experiments.
    Game(GameArgs),
    /// Sequential-game rigidity checks.
    Rigidity(RigidityArgs),
    /// Total-steerability checks.
    Steerable(SteerableArgs),
    /// Verified state preparation with abort logic.
    Vdqc(VdqcArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SelftestArgs {
    /// Ideal Bell pair with honest observables.
    #[arg(long, conflicts_with_all = ["witness", "random_sweep"])]
    pub honest: bool,
    /// Tightness witness at `--eps`.
    #[arg(long, conflicts_with = "random_sweep")]
    pub witness: bool,
    #[arg(long, default_value_t = 0.02)]
    pub eps: f64,
    /// Randomized soundness sweep with this many trials.
    #[arg(long)]
    pub random_sweep: Option<usize>,
    #[arg(long, default_value_t = 1.9)]
    pub min_saturation: f64,
    /// How γ₂ enters the bound: tight, loose or measured.
    #[arg(long, default_value = "measured")]
    pub gamma2: String,
}

#[derive(Debug, Args, Serialize)]
pub struct CountsArgs {
    #[arg(long = "c")]
    pub c: Option<f64>,
    #[arg(long = "D")]
    #[serde(rename = "D")]
    pub d: Option<f64>,
    /// iid or noniid.
    #[arg(long)]
    pub setting: Option<String>,
    /// Count curve over `--D-grid` for both settings.
    #[arg(long)]
    pub curve: bool,
    /// `start:stop:step`, inclusive.
    #[arg(long = "D-grid", default_value = "0.05:0.5:0.01")]
    #[serde(rename = "D_grid")]
    pub d_grid: String,
    #[arg(long, default_value_t = 12.3)]
    pub c_iid: f64,
    #[arg(long, default_value_t = 12.3)]
    pub c_noniid: f64,
    /// Rounds per game needed for saturation threshold ε.
    #[arg(long)]
    pub rounds_for: Option<f64>,
    /// Ideal pair count `c·M¹³·ln M` for this M (uses `--c`, default 1).
    #[arg(long)]
    pub ideal_pairs: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct GameArgs {
    /// honest, lhs, deviated:<e>, bitflip:<q>, bad-rounds:<i,j>, flip-after:<n>.
    #[arg(long, default_value = "honest")]
    pub strategy: String,
    #[arg(long = "K", default_value_t = 1000)]
    #[serde(rename = "K")]
    pub k: usize,
    #[arg(long, default_value_t = 1)]
    pub repetitions: usize,
    /// Alice's observable pair as two Pauli letters, e.g. `xy` or `zx`.
    #[arg(long, default_value = "xy")]
    pub alice: String,
    /// Include the round-by-round transcript (single game only).
    #[arg(long)]
    pub transcript: bool,
    /// Azuma tail experiment with these comma-separated deviations.
    #[arg(long, value_delimiter = ',')]
    pub azuma: Option<Vec<f64>>,
    /// Rounds per game for `--azuma`.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Single-round extraction experiment at this saturation threshold ε.
    #[arg(long)]
    pub extract: Option<f64>,
    #[arg(long, default_value_t = steerkit::steergame::DEFAULT_ROUND_LIMIT)]
    pub round_limit: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct RigidityArgs {
    /// Scenario JSON file.
    #[arg(long, conflicts_with = "witness")]
    pub scenario: Option<PathBuf>,
    /// Tightness-witness pairs at this ε for every game.
    #[arg(long)]
    pub witness: Option<f64>,
    #[arg(long = "N", default_value_t = 2)]
    #[serde(rename = "N")]
    pub n: usize,
    #[arg(long = "K", default_value_t = 4)]
    #[serde(rename = "K")]
    pub k: usize,
    /// ε-structure threshold.
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 13.0)]
    pub constant: f64,
    /// Check the Bell-state shift identity on this many random matrices.
    #[arg(long)]
    pub shift_check: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct SteerableArgs {
    /// Random draws from the maximally entangled family.
    #[arg(long)]
    pub family_sweep: Option<usize>,
    /// Werner state with this visibility.
    #[arg(long)]
    pub werner: Option<f64>,
    /// Family member `re_f,im_f,phi1,phi2`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub form: Option<Vec<f64>>,
    /// Cross-check on this many random two-qubit density matrices.
    #[arg(long)]
    pub random: Option<usize>,
    #[arg(long, default_value_t = steerkit::steerability::DEFAULT_TOL)]
    pub tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct VdqcArgs {
    #[arg(long = "M", default_value_t = 4)]
    #[serde(rename = "M")]
    pub m: usize,
    #[arg(long = "T", default_value_t = 204)]
    #[serde(rename = "T")]
    pub t: usize,
    /// honest, bitflip:<q> or witness:<eps>.
    #[arg(long, default_value = "honest")]
    pub server: String,
    #[arg(long, default_value_t = 10.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    pub eta: f64,
    #[arg(long, default_value_t = 1000)]
    pub runs: u64,
    /// Write the full audit trace (secrets included) of run 0 here.
    #[arg(long)]
    pub audit: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(w) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code_for(&e))
        }
    }
}
