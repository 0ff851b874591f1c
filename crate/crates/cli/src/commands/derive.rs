use std::fs::File;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde_json::json;

use lsp_bayes::brick::{summarize_brick, write_brick, Brick, BrickFitResult, Grid};
use lsp_bayes::posterior::{
    fitted_samples, predictive_samples, write_summary_csv, Functional, PosteriorSummary,
    QuadratureConfig, Statistic,
};
use lsp_bayes::rng::{chain_rng, pixel_seed};
use lsp_bayes::sampler::read_draws_csv;
use lsp_bayes::{Draw, LikelihoodKind};

use super::{create, fmt17, prepare_dir, write_grid};
use crate::config::RunConfig;
use crate::{metadata, ConfigArgs};

/// Input of `summarize` and `derive`: a chain CSV or a brick-fit directory.
#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// Chain CSV written by `fit`.
    #[arg(long)]
    chain: Option<PathBuf>,
    /// Result directory written by `fit-brick`.
    #[arg(long)]
    result: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SummarizeArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[command(flatten)]
    source: Source,
    /// Quantities to summarise; default every parameter.
    #[arg(long = "functional", value_delimiter = ',')]
    functionals: Vec<String>,
    /// Grid statistics for --result; default median and sd.
    #[arg(long = "statistic", value_delimiter = ',')]
    statistics: Vec<String>,
}

#[derive(Args, Debug)]
pub struct DeriveArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[command(flatten)]
    source: Source,
    /// Derived quantities; default auc, season_length, curve_max and delta.
    #[arg(long = "functional", value_delimiter = ',')]
    functionals: Vec<String>,
    /// Days at which to evaluate the fitted curve.
    #[arg(long, value_delimiter = ',')]
    fitted_at: Vec<f64>,
    /// Days at which to draw posterior-predictive observations.
    #[arg(long, value_delimiter = ',')]
    predictive_at: Vec<f64>,
    /// Grid statistics for --result; default median and sd.
    #[arg(long = "statistic", value_delimiter = ',')]
    statistics: Vec<String>,
}

/// Summary of one functional over a chain. A single draw has zero spread.
pub fn summary_of(draws: &[Draw], f: Functional, q: &QuadratureConfig) -> Result<PosteriorSummary> {
    let samples = f.samples(draws, q);
    summary_of_samples(&samples).with_context(|| format!("cannot summarise {f}"))
}

fn summary_of_samples(samples: &[f64]) -> Result<PosteriorSummary> {
    match samples {
        [] => bail!("no samples"),
        [v] => Ok(PosteriorSummary {
            mean: *v,
            sd: 0.0,
            median: *v,
            q025: *v,
            q975: *v,
        }),
        _ => Ok(lsp_bayes::posterior::summarize(samples)?),
    }
}

fn parse_functionals(names: &[String], default: &[Functional]) -> Result<Vec<Functional>> {
    if names.is_empty() {
        return Ok(default.to_vec());
    }
    names.iter().map(|n| Ok(n.parse()?)).collect()
}

fn parse_statistics(names: &[String]) -> Result<Vec<Statistic>> {
    if names.is_empty() {
        return Ok(vec![Statistic::Median, Statistic::Sd]);
    }
    names.iter().map(|n| Ok(n.parse()?)).collect()
}

fn all_params() -> Vec<Functional> {
    (0..8).map(Functional::Param).collect()
}

fn read_chain(path: &PathBuf) -> Result<Vec<Draw>> {
    let draws = read_draws_csv(
        File::open(path).with_context(|| format!("cannot open {}", path.display()))?,
    )?;
    if draws.is_empty() {
        bail!("{} holds no draws", path.display());
    }
    Ok(draws)
}

fn load_result(dir: &PathBuf) -> Result<BrickFitResult> {
    BrickFitResult::load(dir)
        .with_context(|| format!("cannot load brick result from {}", dir.display()))
}

pub fn summarize(args: &SummarizeArgs) -> Result<()> {
    let cfg = args.cfg.resolve()?.with_defaults();
    let q = cfg.quadrature()?;
    let functionals = parse_functionals(&args.functionals, &all_params())?;
    if let Some(path) = &args.source.chain {
        let draws = read_chain(path)?;
        let rows = functionals
            .iter()
            .map(|&f| Ok((f.to_string(), summary_of(&draws, f, &q)?)))
            .collect::<Result<Vec<_>>>()?;
        match &cfg.output {
            Some(dir) => {
                prepare_dir(dir)?;
                write_summary_csv(create(&dir.join("summary.csv"))?, &rows)?;
                metadata::write(
                    dir,
                    "summarize",
                    &cfg,
                    json!({ "chain": path, "draws": draws.len() }),
                )?;
            }
            None => write_summary_csv(std::io::stdout().lock(), &rows)?,
        }
        return Ok(());
    }
    let src = args
        .source
        .result
        .as_ref()
        .expect("clap requires one source");
    let dir = crate::output_dir(&cfg)?;
    let result = load_result(src)?;
    let statistics = parse_statistics(&args.statistics)?;
    prepare_dir(&dir)?;
    for &f in &functionals {
        for &s in &statistics {
            write_grid(
                &dir,
                &format!("{f}_{s}"),
                &summarize_brick(&result, f, s, &q)?,
            )?;
        }
    }
    metadata::write(
        &dir,
        "summarize",
        &cfg,
        json!({ "result": src, "fitted_pixels": result.fitted_count() }),
    )?;
    log::info!(
        "wrote {} grid(s) to {}",
        functionals.len() * statistics.len(),
        dir.display()
    );
    Ok(())
}

/// One named column of derived samples.
struct Column {
    name: String,
    values: Vec<f64>,
}

fn derived_columns(
    draws: &[Draw],
    functionals: &[Functional],
    args: &DeriveArgs,
    kind: LikelihoodKind,
    seed: u64,
    q: &QuadratureConfig,
) -> Result<Vec<Column>> {
    let mut cols: Vec<Column> = functionals
        .iter()
        .map(|f| Column {
            name: f.to_string(),
            values: f.samples(draws, q),
        })
        .collect();
    for &t in &args.fitted_at {
        cols.push(Column {
            name: format!("fitted_t{t}"),
            values: fitted_samples(draws, t),
        });
    }
    // One generator serves every predictive day, in the order given.
    let mut rng = chain_rng(seed);
    for &t in &args.predictive_at {
        cols.push(Column {
            name: format!("predictive_t{t}"),
            values: predictive_samples(draws, kind, t, &mut rng)?,
        });
    }
    Ok(cols)
}

fn check_days(days: &[f64]) -> Result<()> {
    if let Some(t) = days.iter().find(|t| !t.is_finite()) {
        bail!("day {t} is not finite");
    }
    Ok(())
}

pub fn derive(args: &DeriveArgs) -> Result<()> {
    let cfg: RunConfig = args.cfg.resolve()?.with_defaults();
    let q = cfg.quadrature()?;
    let kind = cfg.kind()?;
    let seed = cfg.seed.unwrap_or(0);
    let default = [
        Functional::Auc,
        Functional::SeasonLength,
        Functional::CurveMax,
        Functional::Delta,
    ];
    let functionals = parse_functionals(&args.functionals, &default)?;
    check_days(&args.fitted_at)?;
    check_days(&args.predictive_at)?;
    let dir = crate::output_dir(&cfg)?;
    prepare_dir(&dir)?;

    if let Some(path) = &args.source.chain {
        let draws = read_chain(path)?;
        let cols = derived_columns(&draws, &functionals, args, kind, seed, &q)?;
        let mut out = create(&dir.join("derived_samples.csv"))?;
        let names: Vec<&str> = cols.iter().map(|c| c.name.as_str()).collect();
        writeln!(out, "{}", names.join(","))?;
        for i in 0..draws.len() {
            let row: Vec<String> = cols.iter().map(|c| fmt17(c.values[i])).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        out.flush()?;
        let rows = cols
            .iter()
            .map(|c| {
                let s = summary_of_samples(&c.values)
                    .with_context(|| format!("cannot summarise {}", c.name))?;
                Ok((c.name.clone(), s))
            })
            .collect::<Result<Vec<_>>>()?;
        write_summary_csv(create(&dir.join("derived_summary.csv"))?, &rows)?;
        metadata::write(
            &dir,
            "derive",
            &cfg,
            json!({ "chain": path, "draws": draws.len(), "likelihood": kind.name() }),
        )?;
        log::info!(
            "wrote {} derived quantities over {} draws",
            cols.len(),
            draws.len()
        );
        return Ok(());
    }

    let src = args
        .source
        .result
        .as_ref()
        .expect("clap requires one source");
    let result = load_result(src)?;
    let statistics = parse_statistics(&args.statistics)?;
    let (rows, cols) = (result.rows, result.cols);
    let retained = result.retained_count.max(1);
    let per_pixel: Vec<Option<Vec<Column>>> = (0..rows * cols)
        .map(|i| {
            result.pixels[i]
                .as_ref()
                .map(|fit| {
                    let s = pixel_seed(seed, i / cols, i % cols, cols);
                    derived_columns(&fit.draws, &functionals, args, kind, s, &q)
                })
                .transpose()
        })
        .collect::<Result<_>>()?;
    let names: Vec<String> = {
        let empty: Vec<Draw> = Vec::new();
        derived_columns(&empty, &functionals, args, kind, seed, &q)?
            .into_iter()
            .map(|c| c.name)
            .collect()
    };
    let sample_dir = dir.join("derived");
    prepare_dir(&sample_dir)?;
    for (k, name) in names.iter().enumerate() {
        let mut values = Vec::with_capacity(rows * cols * retained);
        let mut stats = vec![Vec::with_capacity(rows * cols); statistics.len()];
        for px in &per_pixel {
            match px {
                Some(c) => {
                    values.extend(c[k].values.iter().map(|v| *v as f32));
                    let summary = summary_of_samples(&c[k].values)?;
                    for (out, s) in stats.iter_mut().zip(&statistics) {
                        out.push(s.of(&summary));
                    }
                }
                None => {
                    values.extend(std::iter::repeat_n(f32::NAN, retained));
                    for out in &mut stats {
                        out.push(f64::NAN);
                    }
                }
            }
        }
        let keys: Vec<f64> = (1..=retained).map(|k| k as f64).collect();
        write_brick(
            &Brick::new(rows, cols, keys, result.georef, values)?,
            sample_dir.join(format!("{name}.lspb")),
        )?;
        for (values, s) in stats.into_iter().zip(&statistics) {
            let grid = Grid {
                rows,
                cols,
                georef: result.georef,
                values,
            };
            write_grid(&dir, &format!("{name}_{s}"), &grid)?;
        }
    }
    metadata::write(
        &dir,
        "derive",
        &cfg,
        json!({ "result": src, "fitted_pixels": result.fitted_count(), "likelihood": kind.name() }),
    )?;
    log::info!(
        "wrote {} derived quantities for {} fitted pixel(s)",
        names.len(),
        result.fitted_count()
    );
    Ok(())
}
