//! `GRD1` grid files.
//!
//! One ASCII header line `GRD1 <rows> <cols> <dtype>` (dtype `f64` or `u8`)
//! followed by `rows * cols` little-endian values in row-major order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{ImageGrid, Modality, RegionMask};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub enum GridData {
    F64(Vec<f64>),
    U8(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub rows: usize,
    pub cols: usize,
    pub data: GridData,
}

pub fn write_f64<W: Write>(mut w: W, rows: usize, cols: usize, values: &[f64]) -> Result<()> {
    check_len(rows, cols, values.len())?;
    writeln!(w, "GRD1 {rows} {cols} f64")?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_u8<W: Write>(mut w: W, rows: usize, cols: usize, values: &[u8]) -> Result<()> {
    check_len(rows, cols, values.len())?;
    writeln!(w, "GRD1 {rows} {cols} u8")?;
    w.write_all(values)?;
    w.flush()?;
    Ok(())
}

fn check_len(rows: usize, cols: usize, len: usize) -> Result<()> {
    if rows == 0 || cols == 0 || rows * cols != len {
        return Err(Error::InvalidGrid(format!(
            "{len} values for a {rows}x{cols} grid"
        )));
    }
    Ok(())
}

pub fn read<R: Read>(r: R) -> Result<Grid> {
    let mut r = BufReader::new(r);
    let mut header = String::new();
    r.read_line(&mut header)?;
    if !header.ends_with('\n') {
        return Err(Error::Format("missing GRD1 header line".into()));
    }
    let fields: Vec<&str> = header.trim_end_matches('\n').split(' ').collect();
    let [magic, rows, cols, dtype] = fields.as_slice() else {
        return Err(Error::Format(format!("bad header {header:?}")));
    };
    if *magic != "GRD1" {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Format(format!("bad dimension {s:?}")))
    };
    let (rows, cols) = (parse(rows)?, parse(cols)?);
    if rows == 0 || cols == 0 {
        return Err(Error::Format(format!("empty grid {rows}x{cols}")));
    }
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("grid too large".into()))?;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    let data = match *dtype {
        "f64" => {
            if body.len() != n * 8 {
                return Err(Error::Format(format!(
                    "expected {} bytes of f64 data, found {}",
                    n * 8,
                    body.len()
                )));
            }
            GridData::F64(
                body.chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                    .collect(),
            )
        }
        "u8" => {
            if body.len() != n {
                return Err(Error::Format(format!(
                    "expected {n} bytes of u8 data, found {}",
                    body.len()
                )));
            }
            GridData::U8(body)
        }
        other => return Err(Error::Format(format!("unknown dtype {other:?}"))),
    };
    Ok(Grid { rows, cols, data })
}

pub fn read_path(path: impl AsRef<Path>) -> Result<Grid> {
    read(File::open(path)?)
}

pub fn write_f64_path(
    path: impl AsRef<Path>,
    rows: usize,
    cols: usize,
    values: &[f64],
) -> Result<()> {
    write_f64(BufWriter::new(File::create(path)?), rows, cols, values)
}

pub fn write_u8_path(
    path: impl AsRef<Path>,
    rows: usize,
    cols: usize,
    values: &[u8],
) -> Result<()> {
    write_u8(BufWriter::new(File::create(path)?), rows, cols, values)
}

pub fn read_image<T: Real>(path: impl AsRef<Path>, modality: Modality) -> Result<ImageGrid<T>> {
    let grid = read_path(path)?;
    let values = match grid.data {
        GridData::F64(v) => v.into_iter().map(T::of).collect(),
        GridData::U8(v) => v.into_iter().map(|b| T::of(b as f64)).collect(),
    };
    ImageGrid::new(grid.rows, grid.cols, values, modality)
}

pub fn write_image<T: Real>(path: impl AsRef<Path>, img: &ImageGrid<T>) -> Result<()> {
    let values: Vec<f64> = img.values().iter().map(|v| v.as_f64()).collect();
    write_f64_path(path, img.rows(), img.cols(), &values)
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<RegionMask> {
    let grid = read_path(path)?;
    match grid.data {
        GridData::U8(codes) => RegionMask::from_codes(grid.rows, grid.cols, &codes),
        GridData::F64(_) => Err(Error::Format("masks must use the u8 dtype".into())),
    }
}

pub fn write_mask(path: impl AsRef<Path>, mask: &RegionMask) -> Result<()> {
    write_u8_path(path, mask.rows(), mask.cols(), &mask.codes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_layout_are_exact() {
        let mut buf = Vec::new();
        write_f64(&mut buf, 1, 2, &[1.0, -2.5]).unwrap();
        assert_eq!(&buf[..13], b"GRD1 1 2 f64\n");
        assert_eq!(&buf[13..21], &1.0f64.to_le_bytes());
        assert_eq!(buf.len(), 13 + 16);

        let mut buf = Vec::new();
        write_u8(&mut buf, 2, 1, &[0, 2]).unwrap();
        assert_eq!(buf, b"GRD1 2 1 u8\n\x00\x02");
    }

    #[test]
    fn reads_back_what_it_writes() {
        let mut buf = Vec::new();
        write_f64(&mut buf, 2, 2, &[0.0, 1.0, f64::NAN, 3.0]).unwrap();
        let g = read(buf.as_slice()).unwrap();
        assert_eq!((g.rows, g.cols), (2, 2));
        let GridData::F64(v) = g.data else { panic!() };
        assert!(v[2].is_nan());
        assert_eq!(v[3], 3.0);
    }

    #[test]
    fn rejects_truncated_and_unknown() {
        let mut buf = Vec::new();
        write_f64(&mut buf, 2, 2, &[0.0; 4]).unwrap();
        buf.pop();
        assert!(matches!(read(buf.as_slice()), Err(Error::Format(_))));
        assert!(read(&b"GRD1 1 1 i32\n\0\0\0\0"[..]).is_err());
        assert!(read(&b"GRD2 1 1 u8\n\0"[..]).is_err());
    }
}
