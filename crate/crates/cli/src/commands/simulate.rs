use std::io::Write;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde_json::json;

use lsp_bayes::brick::{write_brick, Brick, Georef};
use lsp_bayes::likelihood::simulate_series;
use lsp_bayes::prior::PARAM_NAMES;
use lsp_bayes::rng::{chain_rng, pixel_seed};
use lsp_bayes::{CurveParams, NoiseParam};

use super::{create, fmt17, prepare_dir};
use crate::config::{parse_assignment, Likelihood};
use crate::{metadata, output_dir, ConfigArgs};

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Generating value `KEY=V` for each of alpha1..alpha7 and sigma2.
    #[arg(long = "param", value_parser = parse_assignment, allow_hyphen_values = true)]
    params: Vec<(String, f64)>,
    /// Observation days, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "n_obs")]
    doys: Vec<f64>,
    /// Number of evenly spaced observation days across 1..365.
    #[arg(long)]
    n_obs: Option<usize>,
    /// Replicate the series over a grid, one derived seed per pixel.
    #[arg(long, default_value_t = 1)]
    rows: usize,
    #[arg(long, default_value_t = 1)]
    cols: usize,
    /// Grid spacing of the emitted x, y coordinates.
    #[arg(long, default_value_t = 30.0)]
    cell_size: f64,
    /// Value of the year column.
    #[arg(long, default_value_t = 2000)]
    year: i64,
    /// Also write the grid as `brick.lspb`.
    #[arg(long)]
    brick: bool,
}

/// `n` days spread evenly over 1..365 and rounded.
pub fn even_schedule(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![183.0],
        _ => (0..n)
            .map(|k| (1.0 + k as f64 * 364.0 / (n - 1) as f64).round())
            .collect(),
    }
}

pub fn run(args: &SimulateArgs) -> Result<()> {
    let mut cfg = args.cfg.resolve()?;
    for (k, v) in &args.params {
        cfg.truth.insert(k.clone(), *v);
    }
    cfg = cfg.normalized()?;
    if let Some(n) = args.n_obs {
        cfg.doys = Some(even_schedule(n));
    } else if !args.doys.is_empty() {
        cfg.doys = Some(args.doys.clone());
    }
    let gamma = *cfg.gamma.get_or_insert([0.0, 1.0]);
    if *cfg.likelihood.get_or_insert(Likelihood::Normal) == Likelihood::Tnormal
        && cfg.tn_bounds.is_none()
    {
        cfg.tn_bounds = Some(gamma);
    }
    let seed = *cfg.seed.get_or_insert(0);
    let kind = cfg.kind()?;
    let bounds = cfg.bounds()?;

    let missing: Vec<&str> = PARAM_NAMES
        .iter()
        .copied()
        .filter(|n| !cfg.truth.contains_key(*n))
        .collect();
    if !missing.is_empty() {
        bail!(
            "missing generating values for {}; pass --param KEY=V",
            missing.join(", ")
        );
    }
    let truth: Vec<f64> = PARAM_NAMES.iter().map(|n| cfg.truth[*n]).collect();
    let curve = CurveParams::from_array(truth[..7].try_into().expect("seven curve values"));
    curve.validate()?;
    let sigma2 = NoiseParam::new(truth[7])?;

    let doys = match &cfg.doys {
        Some(d) if !d.is_empty() => d.clone(),
        _ => bail!("no observation days; pass --doys or --n-obs"),
    };
    let mut sorted = doys.clone();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        bail!("observation days must be distinct");
    }
    if args.rows == 0 || args.cols == 0 {
        bail!("grid needs at least one row and one column");
    }
    if !(args.cell_size > 0.0 && args.cell_size.is_finite()) {
        bail!("cell size must be positive");
    }

    let (rows, cols) = (args.rows, args.cols);
    let mut values = Vec::with_capacity(rows * cols * doys.len());
    for row in 0..rows {
        for col in 0..cols {
            let mut rng = chain_rng(pixel_seed(seed, row, col, cols));
            let series = simulate_series(kind, &curve, sigma2, &doys, bounds, &mut rng)?;
            values.extend_from_slice(series.values());
        }
    }

    let dir = output_dir(&cfg)?;
    prepare_dir(&dir)?;
    let georef = Georef {
        x_origin: 0.0,
        y_origin: (rows - 1) as f64 * args.cell_size,
        cell_size: args.cell_size,
    };
    let mut out = create(&dir.join("series.csv"))?;
    writeln!(out, "pixel,x,y,sat,year,doy,evi")?;
    let n_days = doys.len();
    for row in 0..rows {
        for col in 0..cols {
            let (x, y) = georef.cell_center(row, col);
            let pixel = row * cols + col + 1;
            for (k, t) in doys.iter().enumerate() {
                let v = values[(row * cols + col) * n_days + k];
                writeln!(out, "{pixel},{x},{y},SIM,{},{t},{}", args.year, fmt17(v))?;
            }
        }
    }
    out.flush().context("cannot write series.csv")?;

    if args.brick {
        let brick = Brick::new(
            rows,
            cols,
            doys.clone(),
            Some(georef),
            values.iter().map(|v| *v as f32).collect(),
        )?;
        write_brick(&brick, dir.join("brick.lspb"))?;
    }

    let truth_json: serde_json::Map<String, serde_json::Value> = PARAM_NAMES
        .iter()
        .zip(&truth)
        .map(|(n, v)| (n.to_string(), json!(v)))
        .collect();
    let mut t = create(&dir.join("truth.json"))?;
    serde_json::to_writer_pretty(&mut t, &truth_json)?;
    writeln!(t)?;
    t.flush()?;

    metadata::write(
        &dir,
        "simulate",
        &cfg,
        json!({
            "likelihood": kind.name(),
            "rows": rows,
            "cols": cols,
            "cell_size": args.cell_size,
            "year": args.year,
            "per_pixel_seeds": "pixel (row, col) draws from the derived pixel seed",
        }),
    )?;
    log::info!(
        "wrote {} observations for {} pixel(s) to {}",
        values.len(),
        rows * cols,
        dir.display()
    );
    Ok(())
}
