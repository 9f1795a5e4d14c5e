//! Image and mask grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Continuum,
    Magnetogram,
}

/// One modality as a row-major grid of finite intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid<T> {
    rows: usize,
    cols: usize,
    values: Vec<T>,
    modality: Modality,
}

impl<T: Real> ImageGrid<T> {
    pub fn new(rows: usize, cols: usize, values: Vec<T>, modality: Modality) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidGrid(format!("empty grid {rows}x{cols}")));
        }
        if values.len() != rows * cols {
            return Err(Error::InvalidGrid(format!(
                "{} values for a {rows}x{cols} grid",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite value at index {i}")));
        }
        Ok(Self {
            rows,
            cols,
            values,
            modality,
        })
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        modality: Modality,
        mut f: impl FnMut(usize, usize) -> T,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                values.push(f(r, c));
            }
        }
        Self::new(rows, cols, values, modality)
    }

    pub fn filled(rows: usize, cols: usize, value: T, modality: Modality) -> Result<Self> {
        Self::new(rows, cols, vec![value; rows * cols], modality)
    }

    /// Converts to another scalar type.
    pub fn cast<U: Real>(&self) -> ImageGrid<U> {
        ImageGrid {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|v| U::of(v.as_f64())).collect(),
            modality: self.modality,
        }
    }

    pub fn mean(&self) -> T {
        let sum = self.values.iter().fold(T::zero(), |acc, &v| acc + v);
        sum / T::of_usize(self.values.len())
    }

    /// Population standard deviation.
    pub fn std_dev(&self) -> T {
        let mean = self.mean();
        let ss = self
            .values
            .iter()
            .fold(T::zero(), |acc, &v| acc + (v - mean) * (v - mean));
        (ss / T::of_usize(self.values.len())).sqrt()
    }
}

impl<T> ImageGrid<T> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> &T {
        &self.values[r * self.cols + c]
    }
}

/// Co-registered continuum and magnetogram images.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePair<T> {
    cont: ImageGrid<T>,
    mag: ImageGrid<T>,
}

impl<T: Real> ImagePair<T> {
    pub fn new(cont: ImageGrid<T>, mag: ImageGrid<T>) -> Result<Self> {
        if cont.shape() != mag.shape() {
            return Err(Error::DimensionMismatch {
                expected: cont.shape(),
                found: mag.shape(),
            });
        }
        Ok(Self { cont, mag })
    }

    pub fn cast<U: Real>(&self) -> ImagePair<U> {
        ImagePair {
            cont: self.cont.cast(),
            mag: self.mag.cast(),
        }
    }
}

impl<T> ImagePair<T> {
    pub fn cont(&self) -> &ImageGrid<T> {
        &self.cont
    }

    pub fn mag(&self) -> &ImageGrid<T> {
        &self.mag
    }

    pub fn shape(&self) -> (usize, usize) {
        self.cont.shape()
    }

    pub fn into_parts(self) -> (ImageGrid<T>, ImageGrid<T>) {
        (self.cont, self.mag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Background = 0,
    Penumbra = 1,
    Umbra = 2,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Background, Region::Penumbra, Region::Umbra];

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Region::Background),
            1 => Some(Region::Penumbra),
            2 => Some(Region::Umbra),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            Region::Background => "background",
            Region::Penumbra => "penumbra",
            Region::Umbra => "umbra",
        }
    }
}

/// Per-pixel region labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask {
    rows: usize,
    cols: usize,
    labels: Vec<Region>,
}

impl RegionMask {
    pub fn new(rows: usize, cols: usize, labels: Vec<Region>) -> Result<Self> {
        if rows == 0 || cols == 0 || labels.len() != rows * cols {
            return Err(Error::InvalidGrid(format!(
                "{} labels for a {rows}x{cols} mask",
                labels.len()
            )));
        }
        Ok(Self { rows, cols, labels })
    }

    pub fn from_codes(rows: usize, cols: usize, codes: &[u8]) -> Result<Self> {
        let labels = codes
            .iter()
            .map(|&c| {
                Region::from_code(c)
                    .ok_or_else(|| Error::InvalidGrid(format!("mask label {c} not in {{0,1,2}}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows, cols, labels)
    }

    pub fn uniform(rows: usize, cols: usize, region: Region) -> Result<Self> {
        Self::new(rows, cols, vec![region; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn labels(&self) -> &[Region] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Region {
        self.labels[r * self.cols + c]
    }

    pub fn count(&self, region: Region) -> usize {
        self.labels.iter().filter(|&&l| l == region).count()
    }

    pub fn codes(&self) -> Vec<u8> {
        self.labels.iter().map(|l| l.code()).collect()
    }

    pub fn check_shape(&self, shape: (usize, usize)) -> Result<()> {
        if self.shape() != shape {
            return Err(Error::DimensionMismatch {
                expected: shape,
                found: self.shape(),
            });
        }
        Ok(())
    }
}
