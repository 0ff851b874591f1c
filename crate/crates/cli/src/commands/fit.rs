use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde_json::json;

use lsp_bayes::brick::{read_brick, LSPB_MAGIC};
use lsp_bayes::posterior::{write_summary_csv, Functional};
use lsp_bayes::prior::PARAM_NAMES;
use lsp_bayes::rng::pixel_seed;
use lsp_bayes::{run_chain, ObservationSeries};

use super::derive::summary_of;
use super::{create, prepare_dir, write_draws};
use crate::config::{echo_priors, Model};
use crate::{metadata, output_dir, ConfigArgs};

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Long-format CSV, or an LSPB brick together with --row and --col.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Brick row of the pixel to fit.
    #[arg(long, requires = "col")]
    row: Option<usize>,
    /// Brick column of the pixel to fit.
    #[arg(long, requires = "row")]
    col: Option<usize>,
    #[command(flatten)]
    select: SeriesSelect,
}

/// Column names and record filters for long CSV input.
#[derive(Args, Debug, Clone)]
pub struct SeriesSelect {
    /// Keep records whose pixel column equals this value.
    #[arg(long)]
    pub pixel: Option<String>,
    /// Keep records whose year column equals this value.
    #[arg(long)]
    pub year: Option<String>,
    #[arg(long, default_value = "pixel")]
    pub pixel_col: String,
    #[arg(long, default_value = "year")]
    pub year_col: String,
    #[arg(long, default_value = "doy")]
    pub doy_col: String,
    #[arg(long, default_value = "evi")]
    pub value_col: String,
}

pub fn is_lspb(path: &Path) -> Result<bool> {
    let mut head = [0u8; 4];
    let mut f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(f.read(&mut head)? == 4 && head == LSPB_MAGIC)
}

/// Reads one series from a long CSV. Missing or unparseable values are
/// dropped; a malformed day is an error.
pub fn read_series_csv(
    path: &Path,
    sel: &SeriesSelect,
    clamp_eps: Option<f64>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let doy_at = find(&sel.doy_col)
        .with_context(|| format!("no `{}` column in {}", sel.doy_col, path.display()))?;
    let value_at = find(&sel.value_col)
        .with_context(|| format!("no `{}` column in {}", sel.value_col, path.display()))?;
    let pixel_at = find(&sel.pixel_col);
    let year_at = find(&sel.year_col);
    if sel.pixel.is_some() && pixel_at.is_none() {
        bail!(
            "--pixel given but {} has no `{}` column",
            path.display(),
            sel.pixel_col
        );
    }
    if sel.year.is_some() && year_at.is_none() {
        bail!(
            "--year given but {} has no `{}` column",
            path.display(),
            sel.year_col
        );
    }

    let mut pixels = BTreeSet::new();
    let (mut times, mut values) = (Vec::new(), Vec::new());
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let field = |at: Option<usize>| at.and_then(|a| rec.get(a)).unwrap_or("");
        if let Some(p) = &sel.pixel {
            if field(pixel_at) != p {
                continue;
            }
        }
        if let Some(y) = &sel.year {
            if field(year_at) != y {
                continue;
            }
        }
        pixels.insert(field(pixel_at).to_string());
        let doy: f64 = field(Some(doy_at))
            .parse()
            .ok()
            .filter(|d: &f64| d.is_finite())
            .with_context(|| {
                format!(
                    "{} line {line}: bad day `{}`",
                    path.display(),
                    field(Some(doy_at))
                )
            })?;
        let Ok(mut v) = field(Some(value_at)).parse::<f64>() else {
            continue;
        };
        if !v.is_finite() {
            continue;
        }
        if let Some(eps) = clamp_eps {
            v = clamp_unit(v, eps);
        }
        times.push(doy);
        values.push(v);
    }
    if pixels.len() > 1 {
        bail!(
            "{} holds {} pixels; choose one with --pixel",
            path.display(),
            pixels.len()
        );
    }
    if times.is_empty() {
        bail!("no observations selected from {}", path.display());
    }
    Ok((times, values))
}

pub fn run(args: &FitArgs) -> Result<()> {
    let mut cfg = args.cfg.resolve()?;
    if let Some(p) = &args.input {
        cfg.input = Some(p.clone());
    }
    let mut cfg = cfg.with_defaults();
    let model = Model::from_config(&cfg)?;
    echo_priors(&mut cfg, &model.spec);
    let input = cfg.input.clone().context("no input; pass --input FILE")?;
    let dir = output_dir(&cfg)?;

    let mut chain_config = model.chain;
    let (series, source) = if is_lspb(&input)? {
        let (row, col) = match (args.row, args.col) {
            (Some(r), Some(c)) => (r, c),
            _ => bail!(
                "{} is a brick; choose a pixel with --row and --col",
                input.display()
            ),
        };
        let mut brick = read_brick(&input)?;
        if row >= brick.rows() || col >= brick.cols() {
            bail!(
                "pixel ({row}, {col}) is outside the {} x {} brick",
                brick.rows(),
                brick.cols()
            );
        }
        if let Some(eps) = cfg.clamp_beta_eps {
            for v in brick.pixel_mut(row, col) {
                if !v.is_nan() {
                    *v = clamp_unit(*v as f64, eps) as f32;
                }
            }
        }
        chain_config.seed = pixel_seed(chain_config.seed, row, col, brick.cols());
        let series = brick.series(row, col, model.bounds)?;
        (series, json!({ "brick": input, "row": row, "col": col }))
    } else {
        let (times, values) = read_series_csv(&input, &args.select, cfg.clamp_beta_eps)?;
        let series = ObservationSeries::new(times, values, model.bounds)?;
        (
            series,
            json!({ "csv": input, "pixel": args.select.pixel, "year": args.select.year }),
        )
    };
    if series.is_empty() {
        bail!("the selected pixel has no observations");
    }
    check_beta_support(&model, &series)?;

    log::info!(
        "fitting {} observations under the {} likelihood, {} iterations",
        series.len(),
        model.kind.name(),
        chain_config.n_samples
    );
    let chain = run_chain(
        model.kind,
        &series,
        &model.spec,
        &model.start,
        &model.tuning,
        &chain_config,
    )?;

    prepare_dir(&dir)?;
    write_draws(&dir.join("chain.csv"), &chain.draws)?;
    let rows = (0..PARAM_NAMES.len())
        .map(|j| {
            Ok((
                PARAM_NAMES[j].to_string(),
                summary_of(&chain.draws, Functional::Param(j), &model.quadrature)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    write_summary_csv(create(&dir.join("summary.csv"))?, &rows)?;
    let mut acc = create(&dir.join("acceptance.csv"))?;
    writeln!(
        acc,
        "acc_overall,acc_last_batch,accepted,n_samples,retained"
    )?;
    writeln!(
        acc,
        "{},{},{},{},{}",
        chain.acc_overall,
        chain.acc_last_batch,
        chain.accepted,
        chain.n_samples,
        chain.draws.len()
    )?;
    acc.flush()?;

    metadata::write(
        &dir,
        "fit",
        &cfg,
        json!({
            "source": source,
            "n_obs": series.len(),
            "chain_seed": chain_config.seed,
            "retained": chain.draws.len(),
            "acc_overall": chain.acc_overall,
            "acc_last_batch": chain.acc_last_batch,
        }),
    )?;
    log::info!(
        "acceptance {:.1}% overall, {:.1}% in the last {} iterations; {} draws kept",
        100.0 * chain.acc_overall,
        100.0 * chain.acc_last_batch,
        chain_config.batch_len,
        chain.draws.len()
    );
    Ok(())
}

/// Moves values at or beyond 0 and 1 to `eps` and `1 - eps`.
pub fn clamp_unit(v: f64, eps: f64) -> f64 {
    if v <= 0.0 {
        eps
    } else if v >= 1.0 {
        1.0 - eps
    } else {
        v
    }
}

/// The Beta likelihood needs every value strictly inside (0, 1).
fn check_beta_support(model: &Model, series: &ObservationSeries) -> Result<()> {
    if model.kind != lsp_bayes::LikelihoodKind::Beta {
        return Ok(());
    }
    if let Some(y) = series.values().iter().find(|y| !(**y > 0.0 && **y < 1.0)) {
        bail!("value {y} lies outside (0, 1), where the Beta likelihood is undefined; consider --clamp-beta-eps");
    }
    Ok(())
}
