//! Bell-fidelity maps, the highest-fidelity histogram, the entanglement
//! witness fraction and the lattice-spacing estimate.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GridGeometry, RealImage};
use crate::qstate::{fidelity, BellState};
use crate::tomography::{TomographyMap, TomographyStatus};

pub const DEFAULT_HISTOGRAM_BINS: usize = 50;
pub const DEFAULT_WITNESS_THRESHOLD: f64 = 0.5;
/// Minimum height of the first off-center autocorrelation peak, relative
/// to the central peak.
pub const MIN_PEAK_RATIO: f64 = 0.1;

/// Fidelity with one Bell state at every pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelityMap {
    pub target: BellState,
    pub image: RealImage,
}

impl FidelityMap {
    pub fn grid(&self) -> &GridGeometry {
        &self.image.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.image.data
    }
}

/// Per-pixel maximum over the four Bell fidelities and the state attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxFidelity {
    pub max: RealImage,
    pub argmax: Vec<BellState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidelityHistogram {
    /// `n_bins + 1` uniform edges over `[0, 1]`.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessSummary {
    pub threshold: f64,
    pub entangled_fraction: f64,
    pub entangled_pixels: usize,
    pub total_pixels: usize,
    /// Pixels whose highest fidelity is with each Bell state, in
    /// [`BellState::ALL`] order.
    pub argmax_counts: [usize; 4],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacingEstimate {
    /// Metres.
    pub spacing: f64,
    /// Metres.
    pub uncertainty: f64,
    /// Per-axis period estimates in pixels, `(x, y)`.
    pub axis_periods: (f64, f64),
    pub method: &'static str,
}

fn pixel_fidelity(map: &TomographyMap, k: usize, bell: BellState) -> f64 {
    let px = &map.pixels[k];
    if px.status == TomographyStatus::DegenerateZeroCounts {
        0.25
    } else {
        fidelity(&px.rho, &bell.ket())
    }
}

/// `F = <bell| rho |bell>` at every pixel; degenerate pixels count as
/// maximally mixed.
pub fn bell_fidelity_map(map: &TomographyMap, bell: BellState) -> FidelityMap {
    let data = (0..map.grid.len())
        .into_par_iter()
        .map(|k| pixel_fidelity(map, k, bell))
        .collect();
    FidelityMap {
        target: bell,
        image: RealImage {
            grid: map.grid,
            data,
        },
    }
}

/// Index of the largest value; earlier entries win ties.
fn argmax4(f: &[f64; 4]) -> usize {
    let mut best = 0;
    for k in 1..4 {
        if f[k] > f[best] {
            best = k;
        }
    }
    best
}

pub fn max_bell_fidelity(map: &TomographyMap) -> MaxFidelity {
    let (data, argmax): (Vec<f64>, Vec<BellState>) = (0..map.grid.len())
        .into_par_iter()
        .map(|k| {
            let f = BellState::ALL.map(|b| pixel_fidelity(map, k, b));
            let best = argmax4(&f);
            (f[best], BellState::ALL[best])
        })
        .unzip();
    MaxFidelity {
        max: RealImage {
            grid: map.grid,
            data,
        },
        argmax,
    }
}

/// Uniform histogram over `[0, 1]`; the last bin is closed on the right.
/// Values outside the unit interval (rounding) are clamped into the end bins.
pub fn fidelity_histogram(values: &RealImage, n_bins: usize) -> Result<FidelityHistogram> {
    if n_bins == 0 {
        return Err(Error::param("n_bins", "must be at least 1"));
    }
    let mut counts = vec![0u64; n_bins];
    for &v in &values.data {
        let b = ((v * n_bins as f64).floor().max(0.0) as usize).min(n_bins - 1);
        counts[b] += 1;
    }
    let edges = (0..=n_bins).map(|k| k as f64 / n_bins as f64).collect();
    Ok(FidelityHistogram {
        edges,
        counts,
        total: values.data.len() as u64,
    })
}

/// Fraction of pixels whose highest Bell fidelity strictly exceeds `threshold`.
pub fn entangled_fraction(max: &MaxFidelity, threshold: f64) -> Result<WitnessSummary> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::param("threshold", "must lie in (0, 1)"));
    }
    let entangled = max.max.data.iter().filter(|&&v| v > threshold).count();
    let mut argmax_counts = [0usize; 4];
    for b in &max.argmax {
        argmax_counts[b.index()] += 1;
    }
    let total = max.max.data.len();
    Ok(WitnessSummary {
        threshold,
        entangled_fraction: entangled as f64 / total as f64,
        entangled_pixels: entangled,
        total_pixels: total,
        argmax_counts,
    })
}

/// Mean and max absolute pixel difference.
pub fn map_difference(a: &FidelityMap, b: &FidelityMap) -> Result<(f64, f64)> {
    if !a.grid().same_shape(b.grid()) {
        return Err(Error::GeometryMismatch(format!(
            "{}x{} vs {}x{}",
            a.grid().width,
            a.grid().height,
            b.grid().width,
            b.grid().height
        )));
    }
    let (sum, max) = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold((0.0, 0.0f64), |(s, m), d| (s + d, m.max(d)));
    Ok((sum / a.values().len() as f64, max))
}

/// Normalized autocorrelation along one axis for lags `0..=max_lag`: the
/// Pearson correlation between the image and its shifted copy over their
/// overlap.
fn axis_autocorrelation(img: &RealImage, along_x: bool, max_lag: usize) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    (0..=max_lag)
        .into_par_iter()
        .map(|lag| {
            let (di, dj) = if along_x { (lag, 0) } else { (0, lag) };
            let (ni, nj) = (w - di, h - dj);
            let n = (ni * nj) as f64;
            let (mut sa, mut sb) = (0.0, 0.0);
            for j in 0..nj {
                for i in 0..ni {
                    sa += img.get(i, j);
                    sb += img.get(i + di, j + dj);
                }
            }
            let (ma, mb) = (sa / n, sb / n);
            let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
            for j in 0..nj {
                for i in 0..ni {
                    let a = img.get(i, j) - ma;
                    let b = img.get(i + di, j + dj) - mb;
                    ab += a * b;
                    aa += a * a;
                    bb += b * b;
                }
            }
            let denom = (aa * bb).sqrt();
            if denom > 0.0 {
                ab / denom
            } else {
                0.0
            }
        })
        .collect()
}

/// First off-center peak of an autocorrelation curve, in fractional lags.
fn first_peak(r: &[f64], axis: &str) -> Result<f64> {
    let last = r.len() - 2;
    let mut k = 1;
    while k <= last && !(r[k] <= r[k - 1] && r[k] <= r[k + 1]) {
        k += 1;
    }
    while k <= last && !(r[k] >= r[k - 1] && r[k] >= r[k + 1]) {
        k += 1;
    }
    if k > last {
        return Err(Error::EstimationFailed(format!(
            "no off-center peak along {axis}"
        )));
    }
    if r[k] < MIN_PEAK_RATIO * r[0] {
        return Err(Error::EstimationFailed(format!(
            "peak along {axis} at lag {k} is {:.3} of the central peak",
            r[k] / r[0]
        )));
    }
    let curvature = r[k - 1] - 2.0 * r[k] + r[k + 1];
    let shift = if curvature < 0.0 {
        (r[k - 1] - r[k + 1]) / (2.0 * curvature)
    } else {
        0.0
    };
    Ok(k as f64 + shift)
}

/// Lattice period from the normalized autocorrelation of the map.
///
/// Along each axis the first local maximum after the first local minimum
/// is refined by a parabola through it and its two neighbours. The spacing
/// is the mean of the two axis periods times `pixel_pitch`; the
/// uncertainty is half their difference plus one pixel, the half-width of
/// the three-point interpolation window.
pub fn estimate_lattice_spacing(img: &RealImage, pixel_pitch: f64) -> Result<SpacingEstimate> {
    if !(pixel_pitch > 0.0 && pixel_pitch.is_finite()) {
        return Err(Error::param("pixel_pitch", "must be positive and finite"));
    }
    if img.width() < 6 || img.height() < 6 {
        return Err(Error::EstimationFailed(format!(
            "{}x{} map is too small",
            img.width(),
            img.height()
        )));
    }
    let mean = img.mean();
    if img
        .data
        .iter()
        .all(|v| (v - mean).abs() <= 1e-12 * mean.abs().max(1.0))
    {
        return Err(Error::EstimationFailed("map is uniform".into()));
    }
    let rx = axis_autocorrelation(img, true, img.width() / 2 + 1);
    let ry = axis_autocorrelation(img, false, img.height() / 2 + 1);
    let px = first_peak(&rx, "x")?;
    let py = first_peak(&ry, "y")?;
    Ok(SpacingEstimate {
        spacing: 0.5 * (px + py) * pixel_pitch,
        uncertainty: (0.5 * (px - py).abs() + 1.0) * pixel_pitch,
        axis_periods: (px, py),
        method: "normalized-autocorrelation",
    })
}
