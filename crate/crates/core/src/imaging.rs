//! Display-path post-processing: background subtraction, Gaussian
//! smoothing, normalization and PGM/PPM export.
//!
//! Nothing here feeds back into tomography, which only accepts
//! [`CountFrame`](crate::frames::CountFrame)s.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::RealImage;

/// Side of the square corner blocks used for the background estimate.
pub const CORNER_BLOCK: usize = 4;
pub const MIN_SIGMA: f64 = 0.5;
pub const MAX_SIGMA: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Background {
    /// Median of the four corner blocks.
    CornerMedian,
    Fixed(f64),
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoothing {
    Fixed(f64),
    Adaptive,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Colormap {
    Gray,
    /// Black through red and yellow to white.
    Hot,
}

impl FromStr for Colormap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gray" | "grey" => Ok(Colormap::Gray),
            "hot" => Ok(Colormap::Hot),
            _ => Err(Error::param(
                "colormap",
                format!("unknown colormap `{s}` (gray, hot)"),
            )),
        }
    }
}

impl fmt::Display for Colormap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Colormap::Gray => "gray",
            Colormap::Hot => "hot",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    /// P5 / P6
    Binary,
    /// P2 / P3
    Ascii,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub background: Background,
    pub smoothing: Smoothing,
    pub colormap: Colormap,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            background: Background::CornerMedian,
            smoothing: Smoothing::Adaptive,
            colormap: Colormap::Gray,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if let Smoothing::Fixed(s) = self.smoothing {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::param("sigma", "must be positive and finite"));
            }
        }
        if let Background::Fixed(b) = self.background {
            if !b.is_finite() {
                return Err(Error::param("background", "must be finite"));
            }
        }
        Ok(())
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median of the four `4x4` corner blocks.
pub fn corner_median(img: &RealImage) -> Result<f64> {
    let (w, h) = (img.width(), img.height());
    if w < 2 * CORNER_BLOCK || h < 2 * CORNER_BLOCK {
        return Err(Error::param(
            "background",
            format!("corner-median needs at least 8x8 pixels, got {w}x{h}"),
        ));
    }
    let b = CORNER_BLOCK;
    let mut values = Vec::with_capacity(4 * b * b);
    for (i0, j0) in [(0, 0), (w - b, 0), (0, h - b), (w - b, h - b)] {
        for j in j0..j0 + b {
            for i in i0..i0 + b {
                values.push(img.get(i, j));
            }
        }
    }
    Ok(median(&mut values))
}

/// Subtracts the configured background level and clamps at zero.
pub fn subtract_background(img: &RealImage, background: Background) -> Result<RealImage> {
    let level = match background {
        Background::CornerMedian => corner_median(img)?,
        Background::Fixed(b) => b,
        Background::None => return Ok(img.clone()),
    };
    Ok(RealImage {
        grid: img.grid,
        data: img.data.iter().map(|v| (v - level).max(0.0)).collect(),
    })
}

/// Normalized Gaussian kernel over `-ceil(3 sigma)..=ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-r..=r)
        .map(|x| (-(x * x) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Half-sample symmetric reflection: `-1 -> 0`, `n -> n - 1`.
#[inline]
fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let m = i.rem_euclid(2 * n);
    (if m < n { m } else { 2 * n - 1 - m }) as usize
}

fn convolve_rows(data: &[f64], w: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as i64;
    let mut out = vec![0.0; data.len()];
    out.par_chunks_mut(w)
        .zip(data.par_chunks(w))
        .for_each(|(dst, src)| {
            for (i, d) in dst.iter_mut().enumerate() {
                *d = kernel
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c * src[reflect(i as i64 + k as i64 - r, w)])
                    .sum();
            }
        });
    out
}

/// Separable Gaussian convolution with reflected edges.
pub fn gaussian_filter(img: &RealImage, sigma: f64) -> Result<RealImage> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param("sigma", "must be positive and finite"));
    }
    let kernel = gaussian_kernel(sigma);
    let rows = RealImage {
        grid: img.grid,
        data: convolve_rows(&img.data, img.width(), &kernel),
    };
    // columns: transpose, filter rows, transpose back
    let t = rows.transpose();
    let cols = RealImage {
        grid: t.grid,
        data: convolve_rows(&t.data, t.width(), &kernel),
    };
    Ok(cols.transpose())
}

/// `clamp(5 / sqrt(m), 0.5, 3)` where `m` is the median of the brightest
/// tenth of the pixels: fewer counts, more smoothing.
pub fn adaptive_sigma(img: &RealImage) -> f64 {
    let mut values = img.data.clone();
    values.sort_by(|a, b| b.total_cmp(a));
    let top = values.len().div_ceil(10).max(1);
    let m = median(&mut values[..top]).max(0.0);
    (5.0 / m.sqrt()).clamp(MIN_SIGMA, MAX_SIGMA)
}

/// Divides by the maximum.
pub fn normalize(img: &RealImage) -> Result<RealImage> {
    let max = img.max();
    if max.is_nan() || max <= 0.0 {
        return Err(Error::DegenerateImage(format!(
            "maximum is {max}, cannot normalize"
        )));
    }
    Ok(RealImage {
        grid: img.grid,
        data: img.data.iter().map(|v| v / max).collect(),
    })
}

/// 256-entry RGB ramp.
pub fn colormap_table(map: Colormap) -> [[u8; 3]; 256] {
    std::array::from_fn(|k| {
        let t = k as f64 / 255.0;
        let q = |x: f64| (x.clamp(0.0, 1.0) * 255.0).round() as u8;
        match map {
            Colormap::Gray => [k as u8; 3],
            Colormap::Hot => [q(3.0 * t), q(3.0 * t - 1.0), q(3.0 * t - 2.0)],
        }
    })
}

/// Quantizes `[0, 1]` values to 8 bits and encodes them as PGM (gray) or
/// PPM (color).
pub fn render(img: &RealImage, colormap: Colormap, encoding: Encoding) -> Result<Vec<u8>> {
    if let Some(k) = img.data.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::param(
            "image",
            format!("value {} at pixel {k} is outside [0, 1]", img.data[k]),
        ));
    }
    let levels: Vec<u8> = img.data.iter().map(|v| (v * 255.0).round() as u8).collect();
    let (w, h) = (img.width(), img.height());
    let table = colormap_table(colormap);
    let magic = match (colormap, encoding) {
        (Colormap::Gray, Encoding::Binary) => "P5",
        (Colormap::Gray, Encoding::Ascii) => "P2",
        (_, Encoding::Binary) => "P6",
        (_, Encoding::Ascii) => "P3",
    };
    let mut out = format!("{magic}\n{w} {h}\n255\n").into_bytes();
    let sample = |l: u8| -> Vec<u8> {
        match colormap {
            Colormap::Gray => vec![l],
            _ => table[l as usize].to_vec(),
        }
    };
    match encoding {
        Encoding::Binary => levels.iter().for_each(|&l| out.extend(sample(l))),
        Encoding::Ascii => {
            for row in levels.chunks(w) {
                let line: Vec<String> = row
                    .iter()
                    .flat_map(|&l| sample(l))
                    .map(|v| v.to_string())
                    .collect();
                out.extend(line.join(" ").into_bytes());
                out.push(b'\n');
            }
        }
    }
    Ok(out)
}

/// Background subtraction, smoothing and normalization.
pub fn process(img: &RealImage, config: &FilterConfig) -> Result<RealImage> {
    config.validate()?;
    let img = subtract_background(img, config.background)?;
    let img = match config.smoothing {
        Smoothing::Fixed(s) => gaussian_filter(&img, s)?,
        Smoothing::Adaptive => gaussian_filter(&img, adaptive_sigma(&img))?,
        Smoothing::None => img,
    };
    normalize(&img)
}
