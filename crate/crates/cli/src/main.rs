//! `foodsys`: simulate, analyse and fit the food-system model from the
//! command line. Every artifact is CSV or JSON with an embedded metadata
//! block (tool version, command, seed, config hash, input hashes).

mod commands;
mod output;
mod params;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use foodsys::integrator::IntegratorConfig;
use foodsys::stability::SensitivityParam;

use commands::{FitOverrides, Global};
use output::Format;

#[derive(Parser)]
#[command(name = "foodsys", version, about = "Food-system dynamics: simulation, stability analysis and Bayesian fitting")]
struct Cli {
    /// Random seed recorded in every artifact (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Format of tabular outputs.
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct IntegratorArgs {
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    abs_tol: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
}

impl IntegratorArgs {
    fn config(self) -> IntegratorConfig {
        let d = IntegratorConfig::default();
        IntegratorConfig {
            rel_tol: self.rel_tol.unwrap_or(d.rel_tol),
            abs_tol: self.abs_tol.unwrap_or(d.abs_tol),
            max_steps: self.max_steps.unwrap_or(d.max_steps),
            ..d
        }
    }
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct DataSource {
    /// Monthly CSV with columns month, breeding_herd, production_kg,
    /// imports_kg, exports_kg, price_p_per_kg.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Use the bundled 2015-2019 UK pork snapshot.
    #[arg(long)]
    bundled_uk: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the model and write dimensional and dimensionless trajectories.
    Simulate {
        /// Parameter JSON (dimensional with C0..P0, or dimensionless with alpha..rho).
        #[arg(long)]
        params: PathBuf,
        /// End time, in months or rescaled time depending on the file (default 120).
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        obs_step: f64,
        #[command(flatten)]
        integrator: IntegratorArgs,
    },
    /// Fixed points, eigenvalues, verdicts and critical ratios.
    Stability {
        #[arg(long)]
        params: PathBuf,
        /// Real parts below this in magnitude count as zero.
        #[arg(long)]
        tol_zero: Option<f64>,
    },
    /// Regime classification over a (kappa, alpha) grid for each beta.
    RegimeMap {
        /// Grid JSON; omitted fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Skip the long-horizon simulation check.
        #[arg(long)]
        no_verify: bool,
        #[command(flatten)]
        integrator: IntegratorArgs,
    },
    /// Critical ratio as single parameters are scaled.
    Sensitivity {
        /// Dimensional reference parameters (default: built-in reference).
        #[arg(long)]
        params: Option<PathBuf>,
        /// Parameters to vary (q, b, e, a, w, s, k); default all.
        #[arg(long = "parameter", value_delimiter = ',')]
        parameters: Vec<SensitivityParam>,
        /// Comma-separated multipliers (default 0.5 to 2.0 in steps of 0.05).
        #[arg(long, value_delimiter = ',')]
        multipliers: Option<Vec<f64>>,
    },
    /// Sample the posterior and write chains, summaries and derived quantities.
    Fit {
        #[command(flatten)]
        source: DataSource,
        /// Fit configuration JSON; omitted fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        chains: Option<usize>,
        #[arg(long)]
        warmup: Option<usize>,
        #[arg(long)]
        draws: Option<usize>,
        /// Sampler transitions per stored draw.
        #[arg(long)]
        steps_per_draw: Option<usize>,
    },
    /// Posterior predictive bands and draws from a chains file.
    Predict {
        #[arg(long)]
        chains: PathBuf,
        #[command(flatten)]
        source: DataSource,
        #[arg(long, default_value_t = 200)]
        draws: usize,
    },
    /// Check a data file and report coverage, gaps and positivity.
    ValidateData {
        #[command(flatten)]
        source: DataSource,
    },
}

fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    if let Some(n) = cli.threads {
        anyhow::ensure!(n > 0, "--threads must be positive");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let g = Global { seed: cli.seed, out: cli.out, format: cli.format };
    match cli.command {
        Command::Simulate { params, horizon, obs_step, integrator } => {
            commands::simulate(&g, &params, horizon, obs_step, integrator.config())
        }
        Command::Stability { params, tol_zero } => commands::stability(&g, &params, tol_zero),
        Command::RegimeMap { config, no_verify, integrator } => {
            commands::regime(&g, config.as_deref(), !no_verify, integrator.config())
        }
        Command::Sensitivity { params, parameters, multipliers } => {
            commands::sensitivity(&g, params.as_deref(), &parameters, multipliers)
        }
        Command::Fit { source, config, chains, warmup, draws, steps_per_draw } => commands::fit(
            &g,
            source.data.as_deref(),
            source.bundled_uk,
            config.as_deref(),
            FitOverrides { chains, warmup, draws, steps_per_draw },
        ),
        Command::Predict { chains, source, draws } => {
            commands::predict(&g, &chains, source.data.as_deref(), source.bundled_uk, draws)
        }
        Command::ValidateData { source } => commands::validate_data(&g, source.data.as_deref(), source.bundled_uk),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
