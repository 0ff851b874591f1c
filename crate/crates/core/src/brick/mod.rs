//! Raster bricks: rows x cols grids with one layer per observation day.

mod fit;
mod format;
mod ingest;

pub use fit::{
    fit_brick, fit_brick_chunked, fit_pixel, summarize_brick, summarize_draws, BrickFitOptions,
    BrickFitResult, Grid, PixelFit, PixelOutcome, ResultSink, SkippedPixel,
};
pub use format::{read_brick, write_brick, LspbWriter, LSPB_MAGIC, LSPB_VERSION};
pub use ingest::{ingest_long_csv, ingest_long_csv_by_year, IngestOptions};

use crate::curve::IndexBounds;
use crate::error::{Error, Result};
use crate::likelihood::ObservationSeries;

/// Placement of the grid in map coordinates. The origin is the centre of the
/// top-left cell; rows run south (decreasing y) and columns east.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Georef {
    pub x_origin: f64,
    pub y_origin: f64,
    pub cell_size: f64,
}

impl Georef {
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.x_origin + col as f64 * self.cell_size,
            self.y_origin - row as f64 * self.cell_size,
        )
    }
}

/// A rows x cols x layers grid of index values. NaN marks a missing value.
///
/// Values are stored row-major with the layer index innermost, so each
/// pixel's time series is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct Brick {
    rows: usize,
    cols: usize,
    doys: Vec<f64>,
    georef: Option<Georef>,
    values: Vec<f32>,
}

impl Brick {
    pub fn new(
        rows: usize,
        cols: usize,
        doys: Vec<f64>,
        georef: Option<Georef>,
        values: Vec<f32>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 || doys.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "brick dimensions must be positive, got {rows} x {cols} x {}",
                doys.len()
            )));
        }
        let expected = rows * cols * doys.len();
        if values.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "expected {expected} values for {rows} x {cols} x {}, got {}",
                doys.len(),
                values.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            doys,
            georef,
            values,
        })
    }

    /// A brick with every value missing.
    pub fn empty(rows: usize, cols: usize, doys: Vec<f64>, georef: Option<Georef>) -> Result<Self> {
        let n = rows * cols * doys.len();
        Self::new(rows, cols, doys, georef, vec![f32::NAN; n])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn layers(&self) -> usize {
        self.doys.len()
    }

    pub fn doys(&self) -> &[f64] {
        &self.doys
    }

    pub fn georef(&self) -> Option<Georef> {
        self.georef
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    fn offset(&self, row: usize, col: usize) -> usize {
        (row * self.cols + col) * self.layers()
    }

    /// The time series of one pixel, one value per layer.
    pub fn pixel(&self, row: usize, col: usize) -> &[f32] {
        let start = self.offset(row, col);
        &self.values[start..start + self.layers()]
    }

    pub fn pixel_mut(&mut self, row: usize, col: usize) -> &mut [f32] {
        let start = self.offset(row, col);
        let layers = self.layers();
        &mut self.values[start..start + layers]
    }

    pub fn get(&self, row: usize, col: usize, layer: usize) -> f32 {
        self.values[self.offset(row, col) + layer]
    }

    pub fn set(&mut self, row: usize, col: usize, layer: usize, value: f32) {
        let i = self.offset(row, col) + layer;
        self.values[i] = value;
    }

    /// Number of non-missing observations at a pixel.
    pub fn observation_count(&self, row: usize, col: usize) -> usize {
        self.pixel(row, col).iter().filter(|v| !v.is_nan()).count()
    }

    /// The pixel's non-missing (day, value) pairs in layer order.
    pub fn series(&self, row: usize, col: usize, bounds: IndexBounds) -> Result<ObservationSeries> {
        let (times, values) = self
            .doys
            .iter()
            .zip(self.pixel(row, col))
            .filter(|(_, v)| !v.is_nan())
            .map(|(&t, &v)| (t, v as f64))
            .unzip();
        ObservationSeries::new(times, values, bounds)
    }

    /// Checks that every layer day lies in `[1, 365]`, as required before
    /// fitting.
    pub fn validate_doys(&self) -> Result<()> {
        match self
            .doys
            .iter()
            .find(|d| !(d.is_finite() && (1.0..=365.0).contains(*d)))
        {
            Some(d) => Err(Error::InvalidParameter(format!(
                "layer day {d} outside [1, 365]"
            ))),
            None => Ok(()),
        }
    }
}

/// Which pixels of a brick to fit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalMask {
    rows: usize,
    cols: usize,
    include: Vec<bool>,
}

impl EvalMask {
    pub fn new(rows: usize, cols: usize, include: Vec<bool>) -> Result<Self> {
        if include.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "mask has {} cells for a {rows} x {cols} grid",
                include.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            include,
        })
    }

    pub fn all(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            include: vec![true; rows * cols],
        }
    }

    /// Reads a mask from the first layer of a brick: non-zero, non-missing
    /// cells are included.
    pub fn from_brick(brick: &Brick) -> Self {
        let include = (0..brick.rows())
            .flat_map(|r| (0..brick.cols()).map(move |c| (r, c)))
            .map(|(r, c)| {
                let v = brick.get(r, c, 0);
                !v.is_nan() && v != 0.0
            })
            .collect();
        Self {
            rows: brick.rows(),
            cols: brick.cols(),
            include,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn includes(&self, row: usize, col: usize) -> bool {
        self.include[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, include: bool) {
        self.include[row * self.cols + col] = include;
    }

    pub fn count(&self) -> usize {
        self.include.iter().filter(|b| **b).count()
    }
}
