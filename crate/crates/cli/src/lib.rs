//! Command-line driver: reads a JSON run configuration, applies flag
//! overrides and dispatches to one subcommand.
//!
//! Exit codes: 0 when every check passes, 1 on a failed check or a
//! computation error, 2 on usage or configuration errors.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::{CommandError, Context, Status, Theorem};
use crate::config::{Format, RunConfig};
use crate::output::Sink;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "BIVEX_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "bivex", version, about = "Joint excursion probabilities of bivariate Matérn fields")]
pub struct Cli {
    /// JSON run configuration; built-in defaults when absent.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Output directory; overrides the config and the environment.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub reps: Option<u64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    #[arg(long, global = true)]
    pub points_per_axis: Option<usize>,
    #[arg(long, global = true)]
    pub eta: Option<f64>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Comma-separated thresholds.
    #[arg(long, global = true, value_delimiter = ',')]
    pub u: Option<Vec<f64>>,
    /// Comma-separated Pickands horizons.
    #[arg(long, global = true, value_delimiter = ',')]
    pub t_list: Option<Vec<f64>>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Check the standing assumptions and the validity bound.
    Validate,
    /// Tabulate the three covariances and the cross-correlation.
    MaternEval,
    /// Report the local expansion constants.
    Expansion,
    /// Draw field samples on the grid.
    Simulate {
        #[arg(long)]
        count: Option<u64>,
        /// Binary sample dump, relative to the output directory.
        #[arg(long)]
        dump: Option<String>,
    },
    /// Estimate Pickands constants.
    Pickands,
    /// Asymptotics for overlapping domains.
    Theorem1,
    /// Asymptotics for domains sharing part of their boundary.
    Theorem2,
    /// Compare the Riemann sum with its limit.
    RiemannCheck,
    /// Monte Carlo joint excursion probabilities.
    McExcursion,
    /// Monte Carlo against the asymptotics, with pass/fail metrics.
    Verify,
}

impl Cli {
    /// Loads the configuration and applies flag overrides.
    pub fn config(&self) -> Result<RunConfig, config::ConfigError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let e = &mut c.estimation;
        if let Some(v) = self.seed {
            e.seed = v;
        }
        if let Some(v) = self.reps {
            e.reps = v;
        }
        if let Some(v) = self.eta {
            e.eta = v;
        }
        if let Some(v) = self.alpha {
            e.alpha = Some(v);
        }
        if let Some(v) = &self.t_list {
            e.t_list = v.clone();
        }
        if let Some(v) = self.rho {
            c.model.rho = v;
        }
        if let Some(v) = self.points_per_axis {
            c.grid.points_per_axis = v;
        }
        if let Some(v) = &self.u {
            c.thresholds.u = v.clone();
        }
        if let Some(v) = self.format {
            c.output.format = v;
        }
        if let Some(v) = &self.out_dir {
            c.output.dir = Some(v.display().to_string());
        }
        if let Command::Simulate { count, dump } = &self.command {
            if let Some(v) = count {
                c.simulate.count = *v;
            }
            if let Some(v) = dump {
                c.simulate.dump = Some(v.clone());
            }
        }
        c.validate()?;
        Ok(c)
    }
}

fn sink(c: &RunConfig) -> Sink {
    match c.output.dir.clone().or_else(|| std::env::var(OUT_DIR_ENV).ok().filter(|s| !s.is_empty())) {
        Some(d) => Sink::Dir(PathBuf::from(d)),
        None => Sink::Stdout,
    }
}

fn dispatch(ctx: &Context, command: &Command) -> Result<Status, CommandError> {
    match command {
        Command::Validate => commands::validate(ctx),
        Command::MaternEval => commands::matern_eval(ctx),
        Command::Expansion => commands::expansion(ctx),
        Command::Simulate { .. } => commands::simulate(ctx),
        Command::Pickands => commands::pickands(ctx),
        Command::Theorem1 => commands::theorem(ctx, Theorem::Overlap),
        Command::Theorem2 => commands::theorem(ctx, Theorem::Split),
        Command::RiemannCheck => commands::riemann_check(ctx),
        Command::McExcursion => commands::mc_excursion(ctx),
        Command::Verify => commands::verify(ctx),
    }
}

/// Runs the parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let config = match cli.config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let ctx = Context::new(config.clone(), sink(&config));
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&ctx, &cli.command)),
            Err(e) => {
                eprintln!("error: cannot start {n} threads: {e}");
                return 2;
            }
        },
        None => dispatch(&ctx, &cli.command),
    };
    match result {
        Ok(Status::Pass) => 0,
        Ok(Status::Fail(reasons)) => {
            for r in reasons {
                eprintln!("FAIL {r}");
            }
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
