//! `LSPB` binary brick format.
//!
//! Layout, all integers and floats little-endian:
//!
//! | bytes      | content                                             |
//! |------------|-----------------------------------------------------|
//! | 4          | magic `LSPB`                                        |
//! | 2          | format version, `u16`                               |
//! | 4 + 4 + 4  | rows, cols, layers, `u32`                           |
//! | 1          | georef flag, `u8` (0 absent, 1 present)             |
//! | 3 x 8      | x origin, y origin, cell size, `f64` (zero if absent) |
//! | layers x 8 | layer day keys, `f64`                               |
//! | payload    | values, `f32`, row-major with layer innermost       |
//!
//! The header is therefore `43 + 8 * layers` bytes. Missing values are NaN.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::{Path, PathBuf};

use super::{Brick, Georef};
use crate::error::{Error, Result};

pub const LSPB_MAGIC: [u8; 4] = *b"LSPB";
pub const LSPB_VERSION: u16 = 1;

fn write_header<W: Write>(
    out: &mut W,
    rows: usize,
    cols: usize,
    doys: &[f64],
    georef: Option<Georef>,
) -> Result<()> {
    let dim = |v: usize, what: &str| {
        u32::try_from(v)
            .map_err(|_| Error::DimensionMismatch(format!("{what} {v} exceeds u32 range")))
    };
    out.write_all(&LSPB_MAGIC)?;
    out.write_all(&LSPB_VERSION.to_le_bytes())?;
    out.write_all(&dim(rows, "rows")?.to_le_bytes())?;
    out.write_all(&dim(cols, "cols")?.to_le_bytes())?;
    out.write_all(&dim(doys.len(), "layers")?.to_le_bytes())?;
    let g = georef.unwrap_or(Georef {
        x_origin: 0.0,
        y_origin: 0.0,
        cell_size: 0.0,
    });
    out.write_all(&[georef.is_some() as u8])?;
    for v in [g.x_origin, g.y_origin, g.cell_size] {
        out.write_all(&v.to_le_bytes())?;
    }
    for d in doys {
        out.write_all(&d.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_brick(brick: &Brick, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_header(&mut out, brick.rows, brick.cols, &brick.doys, brick.georef)?;
    for v in &brick.values {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

struct HeaderReader<R> {
    inner: R,
    path: PathBuf,
}

impl<R: Read> HeaderReader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| match e.kind() {
                ErrorKind::UnexpectedEof => Error::TruncatedFile {
                    path: self.path.clone(),
                },
                _ => Error::Io(e),
            })?;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.bytes()?) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
}

pub fn read_brick(path: impl AsRef<Path>) -> Result<Brick> {
    let path = path.as_ref();
    let mut r = HeaderReader {
        inner: BufReader::new(File::open(path)?),
        path: path.to_path_buf(),
    };
    let magic: [u8; 4] = match r.bytes() {
        Ok(m) => m,
        Err(Error::TruncatedFile { .. }) => {
            return Err(Error::BadMagic {
                path: path.to_path_buf(),
            })
        }
        Err(e) => return Err(e),
    };
    if magic != LSPB_MAGIC {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
        });
    }
    let version = u16::from_le_bytes(r.bytes()?);
    if version != LSPB_VERSION {
        return Err(Error::VersionMismatch {
            path: path.to_path_buf(),
            found: version,
        });
    }
    let rows = r.u32()?;
    let cols = r.u32()?;
    let layers = r.u32()?;
    let [flag] = r.bytes::<1>()?;
    let (x_origin, y_origin, cell_size) = (r.f64()?, r.f64()?, r.f64()?);
    let georef = (flag != 0).then_some(Georef {
        x_origin,
        y_origin,
        cell_size,
    });
    let doys = (0..layers).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let n = rows
        .checked_mul(cols)
        .and_then(|v| v.checked_mul(layers))
        .ok_or_else(|| Error::DimensionMismatch("brick size overflows".into()))?;
    let mut payload = Vec::new();
    r.inner.read_to_end(&mut payload)?;
    if payload.len() < n * 4 {
        return Err(Error::TruncatedFile {
            path: path.to_path_buf(),
        });
    }
    let values = payload[..n * 4]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Brick::new(rows, cols, doys, georef, values)
}

/// Writes an `LSPB` file one pixel at a time, in row-major pixel order.
pub struct LspbWriter {
    out: BufWriter<File>,
    layers: usize,
    remaining: usize,
}

impl LspbWriter {
    pub fn create(
        path: impl AsRef<Path>,
        rows: usize,
        cols: usize,
        doys: &[f64],
        georef: Option<Georef>,
    ) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        write_header(&mut out, rows, cols, doys, georef)?;
        Ok(Self {
            out,
            layers: doys.len(),
            remaining: rows * cols,
        })
    }

    /// Appends the next pixel's layer values.
    pub fn write_pixel(&mut self, values: &[f32]) -> Result<()> {
        if values.len() != self.layers || self.remaining == 0 {
            return Err(Error::DimensionMismatch(format!(
                "pixel with {} layers written to a {}-layer brick ({} pixels remaining)",
                values.len(),
                self.layers,
                self.remaining
            )));
        }
        for v in values {
            self.out.write_all(&v.to_le_bytes())?;
        }
        self.remaining -= 1;
        Ok(())
    }

    /// Appends a pixel whose layers are all missing.
    pub fn write_missing(&mut self) -> Result<()> {
        let nan = vec![f32::NAN; self.layers];
        self.write_pixel(&nan)
    }

    pub fn finish(mut self) -> Result<()> {
        if self.remaining != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} pixels were never written",
                self.remaining
            )));
        }
        self.out.flush()?;
        Ok(())
    }
}
