//! Long-format CSV ingestion.
//!
//! Each record carries one pixel's value on one day:
//! `pixel,x,y,sat,year,doy,evi`. Distinct `(x, y)` pairs become cells of a
//! regular lattice and distinct `(year, doy, sat)` keys become layers.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use super::{Brick, Georef};
use crate::error::{Error, Result};

/// Column names and value handling for long CSV ingestion.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestOptions {
    pub x_col: String,
    pub y_col: String,
    pub doy_col: String,
    pub value_col: String,
    /// Optional; ignored when absent from the header.
    pub year_col: String,
    /// Optional; ignored when absent from the header.
    pub sat_col: String,
    /// When set, finite values `<= 0` or `>= 1` are moved to `eps` or `1 - eps`.
    pub clamp_beta_eps: Option<f64>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            x_col: "x".into(),
            y_col: "y".into(),
            doy_col: "doy".into(),
            value_col: "evi".into(),
            year_col: "year".into(),
            sat_col: "sat".into(),
            clamp_beta_eps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct LayerKey {
    year: Option<i64>,
    // Bit pattern of a positive f64 sorts like the value.
    doy_bits: u64,
    sat: Option<String>,
}

struct Record {
    line: u64,
    x: f64,
    y: f64,
    layer: LayerKey,
    value: f32,
}

fn is_missing(s: &str) -> bool {
    matches!(s, "" | "NA" | "na" | "NaN" | "nan" | "null" | "NULL")
}

fn read_records(path: &Path, opts: &IngestOptions) -> Result<Vec<Record>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    let find = |name: &str| headers.iter().position(|h| h == name);
    let required = |name: &str| {
        find(name).ok_or_else(|| Error::MalformedRow {
            path: path.to_path_buf(),
            line: 1,
            message: format!("header lacks column `{name}`"),
        })
    };
    let x_i = required(&opts.x_col)?;
    let y_i = required(&opts.y_col)?;
    let doy_i = required(&opts.doy_col)?;
    let v_i = required(&opts.value_col)?;
    let year_i = find(&opts.year_col);
    let sat_i = find(&opts.sat_col);

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::MalformedRow {
                path: path.to_path_buf(),
                line,
                message: e.to_string(),
            }
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::MalformedRow {
            path: path.to_path_buf(),
            line,
            message,
        };
        let num = |i: usize, what: &str| -> Result<f64> {
            let s = row.get(i).unwrap_or("");
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(bad(format!("cannot parse {what} `{s}`"))),
            }
        };
        let x = num(x_i, "x")?;
        let y = num(y_i, "y")?;
        let doy = num(doy_i, "doy")?;
        if !(1.0..=365.0).contains(&doy) {
            return Err(bad(format!("doy {doy} outside [1, 365]")));
        }
        let year = match year_i {
            Some(i) => {
                let s = row.get(i).unwrap_or("");
                Some(
                    s.parse::<i64>()
                        .map_err(|_| bad(format!("cannot parse year `{s}`")))?,
                )
            }
            None => None,
        };
        let sat = sat_i.map(|i| row.get(i).unwrap_or("").to_string());
        let raw = row.get(v_i).unwrap_or("");
        let mut value = if is_missing(raw) {
            f64::NAN
        } else {
            raw.parse::<f64>().unwrap_or(f64::NAN)
        };
        if let Some(eps) = opts.clamp_beta_eps {
            if value.is_finite() {
                value = value.clamp(eps, 1.0 - eps);
            }
        }
        records.push(Record {
            line,
            x,
            y,
            layer: LayerKey {
                year,
                doy_bits: doy.to_bits(),
                sat,
            },
            value: value as f32,
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    Ok(records)
}

/// Origin, step and count of a 1-D lattice through the given coordinates.
fn lattice(coords: &mut Vec<f64>, axis: &str) -> Result<(f64, Option<f64>, usize)> {
    coords.sort_by(f64::total_cmp);
    coords.dedup();
    let min = coords[0];
    if coords.len() == 1 {
        return Ok((min, None, 1));
    }
    let step = coords
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let max = coords[coords.len() - 1];
    let count = ((max - min) / step).round() + 1.0;
    if count > 1e8 {
        return Err(Error::IrregularGrid(format!(
            "{axis} spacing {step} over span {} implies {count} cells",
            max - min
        )));
    }
    for &c in coords.iter() {
        let k = (c - min) / step;
        if (k - k.round()).abs() > 1e-6 {
            return Err(Error::IrregularGrid(format!(
                "{axis} = {c} is not a multiple of spacing {step} from {min}"
            )));
        }
    }
    Ok((min, Some(step), count as usize))
}

struct GridLayout {
    rows: usize,
    cols: usize,
    georef: Georef,
}

impl GridLayout {
    fn infer(records: &[Record]) -> Result<Self> {
        let mut xs: Vec<f64> = records.iter().map(|r| r.x).collect();
        let mut ys: Vec<f64> = records.iter().map(|r| r.y).collect();
        let (x_min, x_step, cols) = lattice(&mut xs, "x")?;
        let (y_min, y_step, rows) = lattice(&mut ys, "y")?;
        let cell_size = match (x_step, y_step) {
            (Some(a), Some(b)) => {
                if ((a - b) / a).abs() > 1e-9 {
                    return Err(Error::IrregularGrid(format!(
                        "x spacing {a} differs from y spacing {b}"
                    )));
                }
                a
            }
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => 1.0,
        };
        // Rows run from the northernmost y downwards.
        let y_max = y_min + (rows - 1) as f64 * y_step.unwrap_or(cell_size);
        Ok(Self {
            rows,
            cols,
            georef: Georef {
                x_origin: x_min,
                y_origin: y_max,
                cell_size,
            },
        })
    }

    fn cell(&self, r: &Record) -> (usize, usize) {
        let g = &self.georef;
        let col = ((r.x - g.x_origin) / g.cell_size).round() as usize;
        let row = ((g.y_origin - r.y) / g.cell_size).round() as usize;
        (row, col)
    }
}

fn assemble<'a>(
    path: &Path,
    layout: &GridLayout,
    records: impl Iterator<Item = &'a Record> + Clone,
) -> Result<Brick> {
    let mut keys: Vec<&LayerKey> = records.clone().map(|r| &r.layer).collect();
    keys.sort();
    keys.dedup();
    let layer_of: HashMap<&LayerKey, usize> =
        keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
    let doys = keys.iter().map(|k| f64::from_bits(k.doy_bits)).collect();
    let mut brick = Brick::empty(layout.rows, layout.cols, doys, Some(layout.georef))?;
    let mut seen = vec![false; brick.values().len()];
    for r in records {
        let (row, col) = layout.cell(r);
        let layer = layer_of[&r.layer];
        let idx = (row * layout.cols + col) * brick.layers() + layer;
        if std::mem::replace(&mut seen[idx], true) {
            return Err(Error::MalformedRow {
                path: path.to_path_buf(),
                line: r.line,
                message: format!(
                    "duplicate record for x={}, y={} on the same layer",
                    r.x, r.y
                ),
            });
        }
        brick.set(row, col, layer, r.value);
    }
    Ok(brick)
}

/// Pools all records into one brick. Layers are the distinct
/// `(year, doy, sat)` keys in sorted order, so the same day in different
/// years becomes separate layers.
pub fn ingest_long_csv(path: impl AsRef<Path>, opts: &IngestOptions) -> Result<Brick> {
    let path = path.as_ref();
    let records = read_records(path, opts)?;
    let layout = GridLayout::infer(&records)?;
    assemble(path, &layout, records.iter())
}

/// One brick per year, all on the same grid. Records without a year column
/// are grouped under year 0.
pub fn ingest_long_csv_by_year(
    path: impl AsRef<Path>,
    opts: &IngestOptions,
) -> Result<BTreeMap<i64, Brick>> {
    let path = path.as_ref();
    let records = read_records(path, opts)?;
    let layout = GridLayout::infer(&records)?;
    let years: std::collections::BTreeSet<i64> =
        records.iter().map(|r| r.layer.year.unwrap_or(0)).collect();
    years
        .into_iter()
        .map(|year| {
            let subset = records
                .iter()
                .filter(move |r| r.layer.year.unwrap_or(0) == year);
            Ok((year, assemble(path, &layout, subset)?))
        })
        .collect()
}
