use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

use lsp_bayes::rng::GENERATOR_FAMILY;

use crate::config::RunConfig;

pub const FORMAT_VERSION: u32 = 1;
pub const FILE_NAME: &str = "metadata.json";

const PIXEL_SEED_RULE: &str =
    "mix64(seed + (row * cols + col + 1) * 0x9E3779B97F4A7C15), mix64 = SplitMix64 finalizer, wrapping u64";
const SIGMA2_PROPOSAL: &str = "random walk on log(sigma2) with Jacobian correction; \
     the reference implementation does not state its scale, so chains may differ in mixing";

#[derive(Serialize)]
struct Tolerances {
    auc_window: [f64; 2],
    auc_panels: usize,
    grid_lattice_relative: f64,
    sample_storage: &'static str,
    csv_digits: u32,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    format_version: u32,
    tool: &'static str,
    tool_version: &'static str,
    command: &'a str,
    seed: u64,
    generator_family: &'static str,
    pixel_seed: &'static str,
    sigma2_proposal: &'static str,
    tolerances: Tolerances,
    config: &'a RunConfig,
    #[serde(skip_serializing_if = "Value::is_null")]
    details: Value,
}

/// Writes `metadata.json` into `dir`. Contains nothing time- or
/// host-dependent, so identical runs give identical sidecars.
pub fn write(dir: &Path, command: &str, cfg: &RunConfig, details: Value) -> Result<()> {
    let sidecar = Sidecar {
        format_version: FORMAT_VERSION,
        tool: env!("CARGO_PKG_NAME"),
        tool_version: env!("CARGO_PKG_VERSION"),
        command,
        seed: cfg.seed.unwrap_or(0),
        generator_family: GENERATOR_FAMILY,
        pixel_seed: PIXEL_SEED_RULE,
        sigma2_proposal: SIGMA2_PROPOSAL,
        tolerances: Tolerances {
            auc_window: cfg.auc_window.unwrap_or([1.0, 365.0]),
            auc_panels: cfg.auc_panels.unwrap_or(728),
            grid_lattice_relative: 1e-6,
            sample_storage: "float32 in LSPB bricks, 17 significant digits in CSV",
            csv_digits: 17,
        },
        config: cfg,
        details,
    };
    let path = dir.join(FILE_NAME);
    let mut out = BufWriter::new(
        File::create(&path).with_context(|| format!("cannot create {}", path.display()))?,
    );
    serde_json::to_writer_pretty(&mut out, &sidecar)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}
