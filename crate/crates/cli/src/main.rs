//! Command-line front end: single runs, axis sweeps, and the invariant
//! selftest. Results go to stdout (or a file) as CSV.
//!
//! Exit codes: 0 on success, 1 for configuration problems, 2 when every
//! trial failed numerically.

use std::fs::File;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use cfiab_core::scenario::{NoiseModel, ScenarioConfig};
use cfiab_core::sim::{self, SweepAxis};
use cfiab_core::{selftest, Error};

#[derive(Parser)]
#[command(name = "cfiab", version, about = "Cell-free massive MIMO simulator with integrated access and backhaul")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and print its aggregated result row.
    Run(RunArgs),
    /// Sweep one axis over a list of values, one aggregated row per value.
    Sweep(SweepArgs),
    /// Run the fast invariant suite.
    Selftest,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Write the summary CSV here instead of stdout.
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
    /// Also dump one CSV row per trial to this path.
    #[arg(long = "trials_csv")]
    trials_csv: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Axis to sweep: p_access, p_backhaul, m_aps, or eta_grid.
    #[arg(long)]
    axis: String,
    /// Comma-separated axis values (dBm for power axes, counts for m_aps,
    /// fractions for eta_grid).
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Write the summary CSV here instead of stdout.
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
}

/// Scenario file plus per-field overrides named exactly like the config keys.
#[derive(Args)]
struct ScenarioArgs {
    /// TOML scenario file; defaults apply for missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "m_aps")]
    m_aps: Option<usize>,
    #[arg(long = "k_users")]
    k_users: Option<usize>,
    #[arg(long = "n_a")]
    n_a: Option<usize>,
    #[arg(long = "n_c")]
    n_c: Option<usize>,
    #[arg(long = "p_access_dbm")]
    p_access_dbm: Option<f64>,
    #[arg(long = "p_backhaul_dbm")]
    p_backhaul_dbm: Option<f64>,
    #[arg(long = "noise_dbm")]
    noise_dbm: Option<f64>,
    /// "fixed" or "psd_per_hz".
    #[arg(long = "noise_model")]
    noise_model: Option<String>,
    #[arg(long = "bandwidth_hz")]
    bandwidth_hz: Option<f64>,
    #[arg(long = "carrier_ghz")]
    carrier_ghz: Option<f64>,
    #[arg(long = "alpha_los")]
    alpha_los: Option<f64>,
    #[arg(long = "alpha_nlos")]
    alpha_nlos: Option<f64>,
    #[arg(long = "n_nlos_paths")]
    n_nlos_paths: Option<usize>,
    #[arg(long = "los_only")]
    los_only: Option<bool>,
    #[arg(long = "element_spacing_ratio")]
    element_spacing_ratio: Option<f64>,
    /// Two comma-separated meters, e.g. "30,50".
    #[arg(long = "ap_cpu_distance_m", value_delimiter = ',', num_args = 2)]
    ap_cpu_distance_m: Option<Vec<f64>>,
    /// Two comma-separated meters, e.g. "150,200".
    #[arg(long = "user_ap_distance_m", value_delimiter = ',', num_args = 2)]
    user_ap_distance_m: Option<Vec<f64>>,
    #[arg(long = "trials")]
    trials: Option<usize>,
    #[arg(long = "seed")]
    seed: Option<u64>,
    #[arg(long = "eps_bisect")]
    eps_bisect: Option<f64>,
    #[arg(long = "socp_tol")]
    socp_tol: Option<f64>,
    #[arg(long = "rank_tol")]
    rank_tol: Option<f64>,
    #[arg(long = "topology_file")]
    topology_file: Option<PathBuf>,
}

impl ScenarioArgs {
    fn build(&self) -> Result<ScenarioConfig, Error> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                ScenarioConfig::from_toml_str(&text)?
            }
            None => ScenarioConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field { config.$field = v.clone(); })*
            };
        }
        set!(
            m_aps, k_users, n_a, n_c, p_access_dbm, p_backhaul_dbm, noise_dbm,
            bandwidth_hz, carrier_ghz, alpha_los, alpha_nlos, n_nlos_paths,
            los_only, element_spacing_ratio, trials, seed, eps_bisect,
            socp_tol, rank_tol
        );
        if let Some(model) = &self.noise_model {
            config.noise_model = match model.as_str() {
                "fixed" => NoiseModel::Fixed,
                "psd_per_hz" => NoiseModel::PsdPerHz,
                other => {
                    return Err(Error::Config(format!("unknown noise model '{other}'")))
                }
            };
        }
        if let Some(pair) = &self.ap_cpu_distance_m {
            config.ap_cpu_distance_m = (pair[0], pair[1]);
        }
        if let Some(pair) = &self.user_ap_distance_m {
            config.user_ap_distance_m = (pair[0], pair[1]);
        }
        if let Some(path) = &self.topology_file {
            config.topology_file = Some(path.clone());
        }
        config.validate()?;
        Ok(config)
    }
}

fn write_out(path: &Option<PathBuf>, bytes: &[u8]) -> std::io::Result<()> {
    match path {
        Some(p) => File::create(p)?.write_all(bytes),
        None => std::io::stdout().write_all(bytes),
    }
}

fn run(cli: Cli) -> Result<i32, Error> {
    match cli.command {
        Command::Run(args) => {
            let config = args.scenario.build()?;
            let (row, trials) = sim::run_scenario(&config)?;
            let mut csv = Vec::new();
            sim::write_summary_csv(&mut csv, std::slice::from_ref(&row))?;
            write_out(&args.output, &csv)?;
            if let Some(path) = &args.trials_csv {
                let mut dump = Vec::new();
                sim::write_trials_csv(&mut dump, &trials)?;
                File::create(path)?.write_all(&dump)?;
            }
            Ok(if sim::all_failed(&[row], config.trials) { 2 } else { 0 })
        }
        Command::Sweep(args) => {
            let config = args.scenario.build()?;
            let axis: SweepAxis = args.axis.parse()?;
            let rows = sim::sweep(&config, axis, &args.values)?;
            let mut csv = Vec::new();
            sim::write_summary_csv(&mut csv, &rows)?;
            write_out(&args.output, &csv)?;
            Ok(if sim::all_failed(&rows, config.trials) { 2 } else { 0 })
        }
        Command::Selftest => {
            let mut out = std::io::stdout();
            let ok = selftest::run(&mut out)?;
            Ok(if ok { 0 } else { 2 })
        }
    }
}

fn main() {
    // Clap's own exit code for bad arguments is 2; remap to 1 so that exit
    // code 2 keeps meaning "numerical failure".
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
