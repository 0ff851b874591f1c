use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde_json::json;

use lsp_bayes::brick::{
    fit_brick_chunked, ingest_long_csv, ingest_long_csv_by_year, read_brick, summarize_draws,
    Brick, BrickFitOptions, EvalMask, Grid, IngestOptions, PixelOutcome, ResultSink,
};
use lsp_bayes::posterior::{Functional, QuadratureConfig, Statistic};
use lsp_bayes::Draw;

use super::fit::{clamp_unit, is_lspb};
use super::{prepare_dir, write_grid};
use crate::config::{echo_priors, Model, Pooling, RunConfig};
use crate::{metadata, output_dir, ConfigArgs};

#[derive(Args, Debug)]
pub struct FitBrickArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// LSPB brick or long-format CSV.
    #[arg(long)]
    input: Option<PathBuf>,
    /// LSPB mask; pixels whose first layer is zero or missing are not fitted.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Summary grid `FUNCTIONAL:STATISTIC` to write, e.g. `alpha4:median,auc:sd`.
    #[arg(long = "summary", value_delimiter = ',')]
    summaries: Vec<String>,
    /// Do not write per-parameter sample bricks.
    #[arg(long)]
    no_samples: bool,
    /// Value column of CSV input.
    #[arg(long, default_value = "evi")]
    value_col: String,
}

pub fn parse_summary(s: &str) -> Result<(Functional, Statistic)> {
    let (f, st) = s
        .split_once(':')
        .with_context(|| format!("expected FUNCTIONAL:STATISTIC, got `{s}`"))?;
    Ok((f.parse()?, st.parse()?))
}

/// Pixels per chunk: small enough to respect the memory budget and to give
/// regular progress reports.
fn chunk_pixels(total: usize, retained: usize, workers: usize, budget_mb: f64) -> usize {
    let per_pixel = (retained * 8 * 8) as f64;
    let by_budget = ((budget_mb * 1e6) / per_pixel).floor().max(1.0) as usize;
    let by_progress = total.div_ceil(20).max(4 * workers);
    by_budget.min(by_progress).clamp(1, total.max(1))
}

struct FitSummary {
    fitted: usize,
    skipped: usize,
    masked: usize,
    chunk: usize,
}

#[allow(clippy::too_many_arguments)]
fn fit_one(
    brick: &Brick,
    opts: &BrickFitOptions,
    mask: Option<&EvalMask>,
    dir: &Path,
    summaries: &[(Functional, Statistic)],
    keep_samples: bool,
    budget_mb: f64,
    q: &QuadratureConfig,
) -> Result<FitSummary> {
    let (rows, cols) = (brick.rows(), brick.cols());
    let total = rows * cols;
    let retained = opts.config.retained_count();
    let chunk = chunk_pixels(total, retained, opts.workers, budget_mb);
    prepare_dir(dir)?;
    let mut sink = if keep_samples {
        ResultSink::create(dir, rows, cols, brick.georef(), retained)?
    } else {
        ResultSink::create_without_samples(dir, rows, cols, brick.georef(), retained)?
    };
    let mut grids = vec![vec![f64::NAN; total]; summaries.len()];
    let mut acc = [vec![f64::NAN; total], vec![f64::NAN; total]];
    let (mut fitted, mut skipped, mut masked) = (0, 0, 0);
    fit_brick_chunked(brick, opts, mask, chunk, |start, outcomes| {
        for (k, outcome) in outcomes.iter().enumerate() {
            let i = start + k;
            sink.push(outcome)?;
            match outcome {
                PixelOutcome::Fitted(fit) => {
                    fitted += 1;
                    acc[0][i] = fit.acc_overall;
                    acc[1][i] = fit.acc_last_batch;
                    // Summaries use the float32 values the sample bricks hold.
                    let stored: Vec<Draw> = fit
                        .draws
                        .iter()
                        .map(|d| d.map(|v| v as f32 as f64))
                        .collect();
                    for (g, &(f, s)) in grids.iter_mut().zip(summaries) {
                        g[i] = summarize_draws(&stored, f, s, q)?;
                    }
                }
                PixelOutcome::Skipped(_) => skipped += 1,
                PixelOutcome::Masked => masked += 1,
            }
        }
        log::info!(
            "{}/{total} pixels done ({fitted} fitted, {skipped} skipped, {masked} masked)",
            start + outcomes.len()
        );
        Ok(())
    })?;
    sink.finish()?;

    let grid = |values: Vec<f64>| Grid {
        rows,
        cols,
        georef: brick.georef(),
        values,
    };
    let [overall, last] = acc;
    write_grid(dir, "acceptance_overall", &grid(overall))?;
    write_grid(dir, "acceptance_last_batch", &grid(last))?;
    if !summaries.is_empty() {
        let sdir = dir.join("summaries");
        prepare_dir(&sdir)?;
        for (values, (f, s)) in grids.into_iter().zip(summaries) {
            write_grid(&sdir, &format!("{f}_{s}"), &grid(values))?;
        }
    }
    Ok(FitSummary {
        fitted,
        skipped,
        masked,
        chunk,
    })
}

fn load_bricks(
    input: &Path,
    cfg: &RunConfig,
    value_col: &str,
) -> Result<Vec<(Option<i64>, Brick)>> {
    if is_lspb(input)? {
        if cfg.pooling == Some(Pooling::Annual) {
            bail!("--annual needs long CSV input with a year column; an LSPB brick has no years");
        }
        let mut brick = read_brick(input)?;
        if let Some(eps) = cfg.clamp_beta_eps {
            for row in 0..brick.rows() {
                for col in 0..brick.cols() {
                    for v in brick.pixel_mut(row, col) {
                        if !v.is_nan() {
                            *v = clamp_unit(*v as f64, eps) as f32;
                        }
                    }
                }
            }
        }
        return Ok(vec![(None, brick)]);
    }
    let opts = IngestOptions {
        value_col: value_col.to_string(),
        clamp_beta_eps: cfg.clamp_beta_eps,
        ..Default::default()
    };
    Ok(match cfg.pooling.unwrap_or(Pooling::Pooled) {
        Pooling::Pooled => vec![(None, ingest_long_csv(input, &opts)?)],
        Pooling::Annual => ingest_long_csv_by_year(input, &opts)?
            .into_iter()
            .map(|(y, b)| (Some(y), b))
            .collect(),
    })
}

pub fn run(args: &FitBrickArgs) -> Result<()> {
    let mut cfg = args.cfg.resolve()?;
    if let Some(p) = &args.input {
        cfg.input = Some(p.clone());
    }
    let mut cfg = cfg.with_defaults();
    let model = Model::from_config(&cfg)?;
    echo_priors(&mut cfg, &model.spec);
    let summaries = args
        .summaries
        .iter()
        .map(|s| parse_summary(s))
        .collect::<Result<Vec<_>>>()?;
    let input = cfg.input.clone().context("no input; pass --input FILE")?;
    let dir = output_dir(&cfg)?;
    let mut opts = BrickFitOptions::new(
        model.kind,
        model.spec.clone(),
        model.start,
        model.tuning,
        model.chain,
    );
    opts.workers = cfg.workers.unwrap_or(1);
    opts.min_obs = cfg.min_obs.unwrap_or(BrickFitOptions::DEFAULT_MIN_OBS);
    opts.validate()?;

    let bricks = load_bricks(&input, &cfg, &args.value_col)?;
    let mask = match &args.mask {
        Some(p) => Some(EvalMask::from_brick(&read_brick(p)?)),
        None => None,
    };
    if mask.as_ref().is_some_and(|m| m.count() == 0) {
        log::warn!("the mask excludes every pixel; writing empty results");
    }

    let budget = cfg
        .memory_budget_mb
        .unwrap_or(crate::config::DEFAULT_MEMORY_BUDGET_MB);
    let mut parts = Vec::new();
    for (year, brick) in &bricks {
        let sub = match year {
            Some(y) => dir.join(format!("year_{y}")),
            None => dir.clone(),
        };
        log::info!(
            "fitting {} x {} brick with {} layers{} on {} worker(s)",
            brick.rows(),
            brick.cols(),
            brick.layers(),
            year.map(|y| format!(" for {y}")).unwrap_or_default(),
            opts.workers
        );
        let s = fit_one(
            brick,
            &opts,
            mask.as_ref(),
            &sub,
            &summaries,
            !args.no_samples,
            budget,
            &model.quadrature,
        )?;
        if s.fitted == 0 {
            log::warn!(
                "no pixel was fitted{}",
                year.map(|y| format!(" for {y}")).unwrap_or_default()
            );
        }
        let part = json!({
            "year": year,
            "dir": sub,
            "rows": brick.rows(),
            "cols": brick.cols(),
            "layers": brick.layers(),
            "fitted": s.fitted,
            "skipped": s.skipped,
            "masked": s.masked,
            "chunk_pixels": s.chunk,
        });
        if year.is_some() {
            metadata::write(
                &sub,
                "fit-brick",
                &cfg,
                json!({ "input": input, "mask": args.mask, "part": part }),
            )?;
        }
        parts.push(part);
    }
    prepare_dir(&dir)?;
    metadata::write(
        &dir,
        "fit-brick",
        &cfg,
        json!({
            "input": input,
            "mask": args.mask,
            "summaries": args.summaries,
            "samples_written": !args.no_samples,
            "parts": parts,
        }),
    )?;
    Ok(())
}
