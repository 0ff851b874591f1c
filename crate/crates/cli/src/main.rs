use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod metadata;

use config::{parse_assignment, parse_pair, parse_prior, Likelihood, Pooling, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "lsp-bayes",
    version,
    about = "Bayesian double-logistic phenology fits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic observations from a known curve.
    Simulate(commands::simulate::SimulateArgs),
    /// Fit one series and write its chain.
    Fit(commands::fit::FitArgs),
    /// Fit every pixel of a brick.
    FitBrick(commands::brick::FitBrickArgs),
    /// Summary statistics of a chain or of a brick fit.
    Summarize(commands::derive::SummarizeArgs),
    /// Posterior samples of derived quantities.
    Derive(commands::derive::DeriveArgs),
}

/// Model and run settings shared by all subcommands. Values given here
/// override the configuration file.
#[derive(Args, Debug, Default, Clone)]
pub struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    likelihood: Option<Likelihood>,
    /// Index bounds `LO,HI`.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    gamma: Option<[f64; 2]>,
    /// Truncation bounds `A,B` of the truncated Normal; default the index bounds.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    tn_bounds: Option<[f64; 2]>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    sub_start: Option<usize>,
    #[arg(long)]
    sub_end: Option<usize>,
    #[arg(long)]
    sub_thin: Option<usize>,
    /// Iterations covered by the last-batch acceptance rate.
    #[arg(long)]
    batch_len: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Pixels with fewer observations are skipped.
    #[arg(long)]
    min_obs: Option<usize>,
    /// Uniform prior `KEY=LO,HI` for alpha1, alpha3, alpha5, alpha6 or alpha7.
    #[arg(long = "prior", value_parser = parse_prior, allow_hyphen_values = true)]
    priors: Vec<(String, [f64; 2])>,
    /// Inverse-gamma prior `SHAPE,SCALE` for sigma2.
    #[arg(long, value_parser = parse_pair)]
    ig: Option<[f64; 2]>,
    /// Starting value `KEY=V`.
    #[arg(long = "start", value_parser = parse_assignment, allow_hyphen_values = true)]
    starts: Vec<(String, f64)>,
    /// Proposal standard deviation `KEY=V`; sigma2's acts on log(sigma2).
    #[arg(long = "tune", value_parser = parse_assignment)]
    tunes: Vec<(String, f64)>,
    /// Lower bound of the alpha4 prior.
    #[arg(long, allow_hyphen_values = true)]
    alpha4_lower: Option<f64>,
    /// Pool all years into one brick (default).
    #[arg(long, conflicts_with = "annual")]
    pooled: bool,
    /// Fit each year separately.
    #[arg(long)]
    annual: bool,
    /// Move ingested values outside (0, 1) to [E, 1 - E].
    #[arg(long, value_name = "E")]
    clamp_beta_eps: Option<f64>,
    /// Above this many megabytes of samples, brick results stream to disk in chunks.
    #[arg(long)]
    memory_budget_mb: Option<f64>,
    /// Curve-area integration window `LO,HI`.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    auc_window: Option<[f64; 2]>,
    /// Simpson panels for the curve area (even).
    #[arg(long)]
    auc_panels: Option<usize>,
    /// Output directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    /// File values overlaid with flag values, keys canonicalised.
    pub fn resolve(&self) -> Result<RunConfig> {
        let base = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let flags = RunConfig {
            likelihood: self.likelihood,
            gamma: self.gamma,
            tn_bounds: self.tn_bounds,
            n_samples: self.n_samples,
            sub_start: self.sub_start,
            sub_end: self.sub_end,
            sub_thin: self.sub_thin,
            batch_len: self.batch_len,
            seed: self.seed,
            workers: self.workers,
            min_obs: self.min_obs,
            ig: self.ig,
            alpha4_lower: self.alpha4_lower,
            pooling: match (self.pooled, self.annual) {
                (true, _) => Some(Pooling::Pooled),
                (_, true) => Some(Pooling::Annual),
                _ => None,
            },
            clamp_beta_eps: self.clamp_beta_eps,
            memory_budget_mb: self.memory_budget_mb,
            auc_window: self.auc_window,
            auc_panels: self.auc_panels,
            output: self.out.clone(),
            start: self.starts.iter().cloned().collect(),
            tune: self.tunes.iter().cloned().collect(),
            prior: self.priors.iter().cloned().collect(),
            ..Default::default()
        }
        .normalized()?;
        Ok(base.overlay(flags))
    }
}

pub fn output_dir(cfg: &RunConfig) -> Result<PathBuf> {
    match &cfg.output {
        Some(p) => Ok(p.clone()),
        None => bail!("no output directory; pass --out DIR or set `output` in the config file"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let run = match cli.command {
        Command::Simulate(a) => commands::simulate::run(&a),
        Command::Fit(a) => commands::fit::run(&a),
        Command::FitBrick(a) => commands::brick::run(&a),
        Command::Summarize(a) => commands::derive::summarize(&a),
        Command::Derive(a) => commands::derive::derive(&a),
    };
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
