//! Deterministic synthetic sunspot phantoms with known structure.
//!
//! Continuum: quiet background `1 + 0.03 N(0,1)`, a smooth radial drop to a
//! textured penumbra (about 0.7) and a flat umbra (about 0.3). Magnetogram:
//! inside a spot it is an exact linear function of the continuum, outside it
//! holds Gaussian "fragments" of random polarity plus independent noise. The
//! mask follows the geometry: penumbra for `r < R`, umbra for `r < R / 2`.
//!
//! The single spot sits in the center with a field equal to the horizontal
//! central difference of the continuum, a signed dipole across the spot. The
//! multi-spot group is a fixed bipolar layout of three spots whose field is
//! proportional to the continuum depth `1 - I`, with opposite signs on the
//! leading and following spots. Seeds change noise, texture and fragments,
//! never the spot geometry.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ImageGrid, ImagePair, Modality, Region, RegionMask};
use crate::patches::mirror_index;

pub const MIN_SIZE: usize = 64;

const NOISE: f64 = 0.03;
const TEXTURE: f64 = 0.05;
const COUPLING: f64 = 5.0;
const DEPTH_COUPLING: f64 = 1.5;
const UMBRA_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhantomKind {
    SingleSpot,
    MultiSpot,
    Noise,
}

impl FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single_spot" => Ok(Self::SingleSpot),
            "multi_spot" => Ok(Self::MultiSpot),
            "noise" => Ok(Self::Noise),
            _ => Err(Error::InvalidParameter(format!(
                "unknown phantom kind {s:?}"
            ))),
        }
    }
}

impl fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SingleSpot => "single_spot",
            Self::MultiSpot => "multi_spot",
            Self::Noise => "noise",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub pair: ImagePair<f64>,
    pub mask: RegionMask,
}

#[derive(Debug, Clone, Copy)]
struct Spot {
    row: f64,
    col: f64,
    radius: f64,
    /// Sign of a depth-coupled field; `None` couples to the horizontal
    /// continuum gradient instead.
    polarity: Option<f64>,
}

impl Spot {
    fn r(&self, row: usize, col: usize) -> f64 {
        (row as f64 - self.row).hypot(col as f64 - self.col) / self.radius
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + x.exp())
}

fn normal_field(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Separable Gaussian blur with mirror boundaries, kernel truncated at 4 sigma.
pub fn gaussian_blur(values: &[f64], rows: usize, cols: usize, sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).round() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);

    let mut tmp = vec![0.0; values.len()];
    for r in 0..rows {
        for c in 0..cols {
            tmp[r * cols + c] = kernel
                .iter()
                .enumerate()
                .map(|(i, k)| {
                    k * values[r * cols + mirror_index(c as isize + i as isize - radius, cols)]
                })
                .sum();
        }
    }
    let mut out = vec![0.0; values.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[r * cols + c] = kernel
                .iter()
                .enumerate()
                .map(|(i, k)| {
                    k * tmp[mirror_index(r as isize + i as isize - radius, rows) * cols + c]
                })
                .sum();
        }
    }
    out
}

fn place_spots(kind: PhantomKind, size: usize) -> Vec<Spot> {
    let s = size as f64;
    match kind {
        PhantomKind::Noise => Vec::new(),
        PhantomKind::SingleSpot => vec![Spot {
            row: (s - 1.0) / 2.0,
            col: (s - 1.0) / 2.0,
            radius: 0.3 * s,
            polarity: None,
        }],
        PhantomKind::MultiSpot => [
            (0.5, 0.3, 0.14, 1.0),
            (0.45, 0.62, 0.1, -1.0),
            (0.62, 0.78, 0.06, 1.0),
        ]
        .iter()
        .map(|&(row, col, radius, sign)| Spot {
            row: row * s,
            col: col * s,
            radius: radius * s,
            polarity: Some(sign),
        })
        .collect(),
    }
}

/// Generates a phantom; identical `(kind, size, seed)` give identical output.
pub fn synthesize(kind: PhantomKind, size: usize, seed: u64) -> Result<Phantom> {
    if size < MIN_SIZE {
        return Err(Error::InvalidParameter(format!(
            "phantom size must be at least {MIN_SIZE}, got {size}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = size * size;
    let spots = place_spots(kind, size);

    let mut labels = vec![Region::Background; n];
    let mut owner = vec![None; n];
    let mut cont = vec![1.0; n];
    for r in 0..size {
        for c in 0..size {
            let i = r * size + c;
            for (k, s) in spots.iter().enumerate() {
                let d = s.r(r, c);
                cont[i] -=
                    0.3 * logistic((d - 1.0) / 0.06) + 0.4 * logistic((d - UMBRA_FRACTION) / 0.05);
                let region = if d < UMBRA_FRACTION {
                    Region::Umbra
                } else if d < 1.0 {
                    Region::Penumbra
                } else {
                    Region::Background
                };
                if region != Region::Background {
                    owner[i] = Some(k);
                }
                labels[i] = labels[i].max(region);
            }
        }
    }

    let texture = gaussian_blur(&normal_field(&mut rng, n), size, size, 1.0);
    let mean = texture.iter().sum::<f64>() / n as f64;
    let sd = (texture.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
    let quiet = normal_field(&mut rng, n);
    for i in 0..n {
        match labels[i] {
            Region::Penumbra => cont[i] += TEXTURE * texture[i] / sd,
            Region::Background => cont[i] = 1.0 + NOISE * quiet[i],
            Region::Umbra => {}
        }
    }

    let mut mag = vec![0.0; n];
    for r in 0..size {
        for c in 0..size {
            let i = r * size + c;
            mag[i] = match owner[i].map(|k| spots[k].polarity) {
                Some(Some(sign)) => sign * DEPTH_COUPLING * (1.0 - cont[i]),
                Some(None) if c > 0 && c + 1 < size => COUPLING * (cont[i + 1] - cont[i - 1]),
                _ => 0.0,
            };
        }
    }

    let fragments = if kind == PhantomKind::Noise {
        0
    } else {
        (6.0 * n as f64 / (64.0 * 64.0)).round() as usize
    };
    let mut field = vec![0.0; n];
    let mut placed = 0;
    while placed < fragments {
        let fr = rng.random_range(0.0..size as f64);
        let fc = rng.random_range(0.0..size as f64);
        let width: f64 = rng.random_range(1.5..3.0);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let amp = sign * rng.random_range(0.5..1.0);
        if spots
            .iter()
            .any(|s| (fr - s.row).hypot(fc - s.col) < 1.3 * s.radius)
        {
            continue;
        }
        for r in 0..size {
            for c in 0..size {
                let d2 = (r as f64 - fr).powi(2) + (c as f64 - fc).powi(2);
                field[r * size + c] += amp * (-d2 / (2.0 * width * width)).exp();
            }
        }
        placed += 1;
    }
    let quiet_mag = normal_field(&mut rng, n);
    for i in 0..n {
        if labels[i] == Region::Background {
            mag[i] = field[i] + NOISE * quiet_mag[i];
        }
    }

    Ok(Phantom {
        pair: ImagePair::new(
            ImageGrid::new(size, size, cont, Modality::Continuum)?,
            ImageGrid::new(size, size, mag, Modality::Magnetogram)?,
        )?,
        mask: RegionMask::new(size, size, labels)?,
    })
}
