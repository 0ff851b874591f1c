//! Per-pixel chains over a brick, result storage and gridded summaries.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::{read_brick, write_brick, Brick, EvalMask, Georef, LspbWriter};
use crate::error::{Error, Result};
use crate::likelihood::LikelihoodKind;
use crate::posterior::{summarize, Functional, QuadratureConfig, Statistic};
use crate::prior::{ParamVector, PriorSpec, PARAM_NAMES};
use crate::rng::pixel_seed;
use crate::sampler::{run_chain, ChainConfig, Draw, TuningSpec};

/// Everything a brick fit needs besides the brick and mask.
#[derive(Debug, Clone, PartialEq)]
pub struct BrickFitOptions {
    pub kind: LikelihoodKind,
    pub spec: PriorSpec,
    pub starting: ParamVector,
    pub tuning: TuningSpec,
    /// `seed` is the base seed; each pixel runs with a derived seed.
    pub config: ChainConfig,
    pub min_obs: usize,
    pub workers: usize,
}

impl BrickFitOptions {
    pub const DEFAULT_MIN_OBS: usize = 9;

    pub fn new(
        kind: LikelihoodKind,
        spec: PriorSpec,
        starting: ParamVector,
        tuning: TuningSpec,
        config: ChainConfig,
    ) -> Self {
        Self {
            kind,
            spec,
            starting,
            tuning,
            config,
            min_obs: Self::DEFAULT_MIN_OBS,
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kind.validate()?;
        self.spec.validate()?;
        self.config.validate()?;
        if self.workers == 0 {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        if self.min_obs == 0 {
            return Err(Error::InvalidConfig("min_obs must be at least 1".into()));
        }
        if !crate::prior::in_support(&self.spec, &self.starting) {
            return Err(Error::InvalidStartingValue(format!(
                "{:?} is outside the prior support",
                self.starting.to_array()
            )));
        }
        Ok(())
    }
}

/// Retained draws and acceptance rates of one pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelFit {
    pub draws: Vec<Draw>,
    pub acc_overall: f64,
    pub acc_last_batch: f64,
    pub n_obs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedPixel {
    pub row: usize,
    pub col: usize,
    pub n_obs: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PixelOutcome {
    Fitted(PixelFit),
    Skipped(SkippedPixel),
    Masked,
}

/// Fits one pixel with its derived seed. Pixels with fewer than `min_obs`
/// observations, and pixels whose chain fails, come back as `Skipped`.
pub fn fit_pixel(brick: &Brick, row: usize, col: usize, opts: &BrickFitOptions) -> PixelOutcome {
    let n_obs = brick.observation_count(row, col);
    let skip = |reason: String| {
        PixelOutcome::Skipped(SkippedPixel {
            row,
            col,
            n_obs,
            reason,
        })
    };
    if n_obs < opts.min_obs {
        return skip(format!(
            "{n_obs} observations, fewer than min_obs {}",
            opts.min_obs
        ));
    }
    let bounds = opts.spec.bounds;
    let series = match brick.series(row, col, bounds) {
        Ok(s) => s,
        Err(e) => return skip(e.to_string()),
    };
    let config = opts
        .config
        .with_seed(pixel_seed(opts.config.seed, row, col, brick.cols()));
    match run_chain(
        opts.kind,
        &series,
        &opts.spec,
        &opts.starting,
        &opts.tuning,
        &config,
    ) {
        Ok(chain) => PixelOutcome::Fitted(PixelFit {
            draws: chain.draws,
            acc_overall: chain.acc_overall,
            acc_last_batch: chain.acc_last_batch,
            n_obs,
        }),
        Err(e) => skip(e.to_string()),
    }
}

fn check_inputs(brick: &Brick, opts: &BrickFitOptions, mask: Option<&EvalMask>) -> Result<()> {
    opts.validate()?;
    brick.validate_doys()?;
    if let Some(m) = mask {
        if (m.rows(), m.cols()) != (brick.rows(), brick.cols()) {
            return Err(Error::DimensionMismatch(format!(
                "mask is {} x {}, brick is {} x {}",
                m.rows(),
                m.cols(),
                brick.rows(),
                brick.cols()
            )));
        }
    }
    Ok(())
}

/// Fits the brick in chunks of `chunk_pixels` row-major pixels and hands each
/// chunk's outcomes, in pixel order, to `on_chunk` along with the index of
/// its first pixel. Pixels within a chunk run on a pool of `opts.workers`
/// threads.
pub fn fit_brick_chunked<F>(
    brick: &Brick,
    opts: &BrickFitOptions,
    mask: Option<&EvalMask>,
    chunk_pixels: usize,
    mut on_chunk: F,
) -> Result<()>
where
    F: FnMut(usize, Vec<PixelOutcome>) -> Result<()>,
{
    check_inputs(brick, opts, mask)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    let cols = brick.cols();
    let total = brick.rows() * cols;
    let chunk = chunk_pixels.max(1);
    let mut start = 0;
    while start < total {
        let end = (start + chunk).min(total);
        let outcomes: Vec<PixelOutcome> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|i| {
                    let (row, col) = (i / cols, i % cols);
                    if mask.is_some_and(|m| !m.includes(row, col)) {
                        PixelOutcome::Masked
                    } else {
                        fit_pixel(brick, row, col, opts)
                    }
                })
                .collect()
        });
        on_chunk(start, outcomes)?;
        start = end;
    }
    Ok(())
}

/// Fits every unmasked pixel and keeps all results in memory.
pub fn fit_brick(
    brick: &Brick,
    opts: &BrickFitOptions,
    mask: Option<&EvalMask>,
) -> Result<BrickFitResult> {
    let mut result = BrickFitResult::new(
        brick.rows(),
        brick.cols(),
        brick.georef(),
        opts.config.retained_count(),
    );
    let total = brick.rows() * brick.cols();
    fit_brick_chunked(brick, opts, mask, total, |start, outcomes| {
        for (k, outcome) in outcomes.into_iter().enumerate() {
            result.record(start + k, outcome);
        }
        Ok(())
    })?;
    Ok(result)
}

/// Sample bricks, acceptance rates, observation counts and the skipped-pixel
/// log of a brick fit. `pixels` is row-major; `None` marks pixels that were
/// masked or skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct BrickFitResult {
    pub rows: usize,
    pub cols: usize,
    pub georef: Option<Georef>,
    pub retained_count: usize,
    pub pixels: Vec<Option<PixelFit>>,
    pub n_obs: Vec<usize>,
    pub skipped: Vec<SkippedPixel>,
}

const SAMPLE_DIR: &str = "samples";
const ACCEPTANCE_FILE: &str = "acceptance.lspb";
const N_OBS_FILE: &str = "n_obs.lspb";
const SKIPPED_FILE: &str = "skipped.csv";

impl BrickFitResult {
    pub fn new(rows: usize, cols: usize, georef: Option<Georef>, retained_count: usize) -> Self {
        Self {
            rows,
            cols,
            georef,
            retained_count,
            pixels: vec![None; rows * cols],
            n_obs: vec![0; rows * cols],
            skipped: Vec::new(),
        }
    }

    fn record(&mut self, index: usize, outcome: PixelOutcome) {
        match outcome {
            PixelOutcome::Fitted(fit) => {
                self.n_obs[index] = fit.n_obs;
                self.pixels[index] = Some(fit);
            }
            PixelOutcome::Skipped(s) => {
                self.n_obs[index] = s.n_obs;
                self.skipped.push(s);
            }
            PixelOutcome::Masked => {}
        }
    }

    pub fn pixel(&self, row: usize, col: usize) -> Option<&PixelFit> {
        self.pixels[row * self.cols + col].as_ref()
    }

    pub fn fitted_count(&self) -> usize {
        self.pixels.iter().filter(|p| p.is_some()).count()
    }

    /// Layer keys of a sample brick: draw numbers `1..=retained_count`.
    fn draw_keys(&self) -> Vec<f64> {
        (1..=self.retained_count.max(1)).map(|k| k as f64).collect()
    }

    /// Parameter `j` as a brick with one layer per retained draw.
    pub fn sample_brick(&self, j: usize) -> Result<Brick> {
        let mut b = Brick::empty(self.rows, self.cols, self.draw_keys(), self.georef)?;
        for (i, fit) in self.pixels.iter().enumerate() {
            if let Some(fit) = fit {
                let out = b.pixel_mut(i / self.cols, i % self.cols);
                for (o, d) in out.iter_mut().zip(&fit.draws) {
                    *o = d[j] as f32;
                }
            }
        }
        Ok(b)
    }

    /// Two layers per pixel: overall and last-batch acceptance, as fractions.
    pub fn acceptance_brick(&self) -> Result<Brick> {
        let mut b = Brick::empty(self.rows, self.cols, vec![1.0, 2.0], self.georef)?;
        for (i, fit) in self.pixels.iter().enumerate() {
            if let Some(fit) = fit {
                let out = b.pixel_mut(i / self.cols, i % self.cols);
                out[0] = fit.acc_overall as f32;
                out[1] = fit.acc_last_batch as f32;
            }
        }
        Ok(b)
    }

    /// Writes the result to `dir`; values are stored as `f32`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let mut sink =
            ResultSink::create(dir, self.rows, self.cols, self.georef, self.retained_count)?;
        for (i, fit) in self.pixels.iter().enumerate() {
            match fit {
                Some(fit) => sink.push(&PixelOutcome::Fitted(fit.clone()))?,
                None => sink.push_empty(self.n_obs[i])?,
            }
        }
        sink.skipped = self.skipped.clone();
        sink.finish()
    }

    /// Reads a result written by [`save`](Self::save) or [`ResultSink`].
    /// Pixels whose draws are all missing are treated as unfitted.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let samples: Vec<Brick> = PARAM_NAMES
            .iter()
            .map(|name| read_brick(dir.join(SAMPLE_DIR).join(format!("{name}.lspb"))))
            .collect::<Result<_>>()?;
        let acceptance = read_brick(dir.join(ACCEPTANCE_FILE))?;
        let n_obs = read_brick(dir.join(N_OBS_FILE))?;
        let first = &samples[0];
        let (rows, cols) = (first.rows(), first.cols());
        for b in samples.iter().chain([&acceptance, &n_obs]) {
            if (b.rows(), b.cols()) != (rows, cols) {
                return Err(Error::DimensionMismatch(format!(
                    "result files disagree on grid size in {}",
                    dir.display()
                )));
            }
        }
        let retained = first.layers();
        let mut result = Self::new(rows, cols, first.georef(), retained);
        for row in 0..rows {
            for col in 0..cols {
                let i = row * cols + col;
                result.n_obs[i] = n_obs.get(row, col, 0) as usize;
                if first.pixel(row, col).iter().all(|v| v.is_nan()) {
                    continue;
                }
                let draws = (0..retained)
                    .map(|k| {
                        let mut d = [0.0; 8];
                        for (j, b) in samples.iter().enumerate() {
                            d[j] = b.get(row, col, k) as f64;
                        }
                        d
                    })
                    .collect();
                result.pixels[i] = Some(PixelFit {
                    draws,
                    acc_overall: acceptance.get(row, col, 0) as f64,
                    acc_last_batch: acceptance.get(row, col, 1) as f64,
                    n_obs: result.n_obs[i],
                });
            }
        }
        result.skipped = read_skipped(&dir.join(SKIPPED_FILE))?;
        Ok(result)
    }
}

fn read_skipped(path: &Path) -> Result<Vec<SkippedPixel>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| -> Result<usize> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::MalformedRow {
                    path: path.to_path_buf(),
                    line,
                    message: format!("bad integer in column {}", i + 1),
                })
        };
        out.push(SkippedPixel {
            row: field(0)?,
            col: field(1)?,
            n_obs: field(2)?,
            reason: rec.get(3).unwrap_or("").to_string(),
        });
    }
    Ok(out)
}

/// Streams a brick fit to disk pixel by pixel, so results never need to be
/// held in memory at once. Pixels must be pushed in row-major order.
pub struct ResultSink {
    samples: Vec<LspbWriter>,
    acceptance: LspbWriter,
    n_obs: LspbWriter,
    skipped: Vec<SkippedPixel>,
    skipped_path: std::path::PathBuf,
    retained_count: usize,
}

impl ResultSink {
    pub fn create(
        dir: impl AsRef<Path>,
        rows: usize,
        cols: usize,
        georef: Option<Georef>,
        retained_count: usize,
    ) -> Result<Self> {
        Self::open(dir.as_ref(), rows, cols, georef, retained_count, true)
    }

    /// Like [`ResultSink::create`] but writes only acceptance rates,
    /// observation counts and the skipped-pixel log.
    pub fn create_without_samples(
        dir: impl AsRef<Path>,
        rows: usize,
        cols: usize,
        georef: Option<Georef>,
        retained_count: usize,
    ) -> Result<Self> {
        Self::open(dir.as_ref(), rows, cols, georef, retained_count, false)
    }

    fn open(
        dir: &Path,
        rows: usize,
        cols: usize,
        georef: Option<Georef>,
        retained_count: usize,
        keep_samples: bool,
    ) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let mut samples = Vec::new();
        if keep_samples {
            fs::create_dir_all(dir.join(SAMPLE_DIR))?;
            let keys: Vec<f64> = (1..=retained_count.max(1)).map(|k| k as f64).collect();
            for name in PARAM_NAMES {
                samples.push(LspbWriter::create(
                    dir.join(SAMPLE_DIR).join(format!("{name}.lspb")),
                    rows,
                    cols,
                    &keys,
                    georef,
                )?);
            }
        }
        Ok(Self {
            samples,
            acceptance: LspbWriter::create(
                dir.join(ACCEPTANCE_FILE),
                rows,
                cols,
                &[1.0, 2.0],
                georef,
            )?,
            n_obs: LspbWriter::create(dir.join(N_OBS_FILE), rows, cols, &[1.0], georef)?,
            skipped: Vec::new(),
            skipped_path: dir.join(SKIPPED_FILE),
            retained_count: retained_count.max(1),
        })
    }

    fn push_empty(&mut self, n_obs: usize) -> Result<()> {
        for w in &mut self.samples {
            w.write_missing()?;
        }
        self.acceptance.write_missing()?;
        self.n_obs.write_pixel(&[n_obs as f32])
    }

    pub fn push(&mut self, outcome: &PixelOutcome) -> Result<()> {
        match outcome {
            PixelOutcome::Fitted(fit) => {
                if fit.draws.len() != self.retained_count {
                    return Err(Error::DimensionMismatch(format!(
                        "pixel has {} draws, sink expects {}",
                        fit.draws.len(),
                        self.retained_count
                    )));
                }
                let mut column = vec![0f32; self.retained_count];
                for (j, w) in self.samples.iter_mut().enumerate() {
                    for (c, d) in column.iter_mut().zip(&fit.draws) {
                        *c = d[j] as f32;
                    }
                    w.write_pixel(&column)?;
                }
                self.acceptance
                    .write_pixel(&[fit.acc_overall as f32, fit.acc_last_batch as f32])?;
                self.n_obs.write_pixel(&[fit.n_obs as f32])
            }
            PixelOutcome::Skipped(s) => {
                self.skipped.push(s.clone());
                self.push_empty(s.n_obs)
            }
            PixelOutcome::Masked => self.push_empty(0),
        }
    }

    pub fn finish(self) -> Result<()> {
        for w in self.samples {
            w.finish()?;
        }
        self.acceptance.finish()?;
        self.n_obs.finish()?;
        let mut out = csv::Writer::from_path(&self.skipped_path)?;
        out.write_record(["row", "col", "n_obs", "reason"])?;
        for s in &self.skipped {
            out.write_record([
                s.row.to_string(),
                s.col.to_string(),
                s.n_obs.to_string(),
                s.reason.clone(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// One real value per pixel; NaN where the pixel was not fitted.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub rows: usize,
    pub cols: usize,
    pub georef: Option<Georef>,
    pub values: Vec<f64>,
}

impl Grid {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    /// Long CSV `row,col,x,y,value`; `x` and `y` are blank without a georef
    /// and `value` is `NA` where missing.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "row,col,x,y,value")?;
        for row in 0..self.rows {
            for col in 0..self.cols {
                let (x, y) = match self.georef {
                    Some(g) => {
                        let (x, y) = g.cell_center(row, col);
                        (x.to_string(), y.to_string())
                    }
                    None => (String::new(), String::new()),
                };
                let v = self.get(row, col);
                let v = if v.is_nan() {
                    "NA".to_string()
                } else {
                    format!("{v:.10e}")
                };
                writeln!(out, "{row},{col},{x},{y},{v}")?;
            }
        }
        Ok(())
    }

    pub fn to_brick(&self) -> Result<Brick> {
        Brick::new(
            self.rows,
            self.cols,
            vec![1.0],
            self.georef,
            self.values.iter().map(|v| *v as f32).collect(),
        )
    }

    pub fn write_lspb(&self, path: impl AsRef<Path>) -> Result<()> {
        write_brick(&self.to_brick()?, path)
    }
}

/// Reduces `functional` over one pixel's draws with `statistic`. A single
/// draw has zero spread; no draws give NaN.
pub fn summarize_draws(
    draws: &[Draw],
    functional: Functional,
    statistic: Statistic,
    q: &QuadratureConfig,
) -> Result<f64> {
    let samples = functional.samples(draws, q);
    Ok(match samples.len() {
        0 => f64::NAN,
        1 => match statistic {
            Statistic::Sd | Statistic::Width95 => 0.0,
            _ => samples[0],
        },
        _ => statistic.of(&summarize(&samples)?),
    })
}

/// Applies `functional` to each fitted pixel's draws and reduces the result
/// with `statistic`.
pub fn summarize_brick(
    result: &BrickFitResult,
    functional: Functional,
    statistic: Statistic,
    q: &QuadratureConfig,
) -> Result<Grid> {
    if let Functional::Param(j) = functional {
        if j >= PARAM_NAMES.len() {
            return Err(Error::UnknownFunctional(format!("parameter index {j}")));
        }
    }
    q.validate()?;
    let values = result
        .pixels
        .iter()
        .map(|fit| match fit {
            Some(fit) => summarize_draws(&fit.draws, functional, statistic, q),
            None => Ok(f64::NAN),
        })
        .collect::<Result<_>>()?;
    Ok(Grid {
        rows: result.rows,
        cols: result.cols,
        georef: result.georef,
        values,
    })
}
