use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use lsp_bayes::brick::Grid;
use lsp_bayes::sampler::write_draws_csv;
use lsp_bayes::Draw;

pub mod brick;
pub mod derive;
pub mod fit;
pub mod simulate;

pub fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| {
        format!("cannot create {}", path.display())
    })?))
}

pub fn write_draws(path: &Path, draws: &[Draw]) -> Result<()> {
    write_draws_csv(create(path)?, draws)?;
    Ok(())
}

/// Writes `stem.csv` and `stem.lspb` and returns the CSV path.
pub fn write_grid(dir: &Path, stem: &str, grid: &Grid) -> Result<PathBuf> {
    let csv = dir.join(format!("{stem}.csv"));
    grid.write_csv(create(&csv)?)?;
    grid.write_lspb(dir.join(format!("{stem}.lspb")))?;
    Ok(csv)
}

/// Formats a real with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}
