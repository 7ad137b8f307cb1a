//! Per-pixel spin-orbit field and the theoretical intensity patterns of
//! the 16 polarization projections.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GridGeometry, RealImage};
use crate::lattice::{lov_state, LatticeParams};
use crate::qstate::{Polarization, TwoQubitKet};

/// Default detector geometry: 140x140 pixels of 13 um.
pub const DEFAULT_GRID_SIDE: usize = 140;
pub const DEFAULT_PIXEL_PITCH: f64 = 13e-6;
/// Lattice spacing seen on the detector, metres.
pub const DEFAULT_DETECTOR_SPACING: f64 = 0.519e-3;
/// Prism plane to detector is a 4x demagnifying relay.
pub const DEFAULT_MAGNIFICATION: f64 = 4.0;
pub const DEFAULT_WAVELENGTH: f64 = 808e-9;
pub const DEFAULT_INCLINE_THETA: f64 = PI / 4.0;
pub const DEFAULT_N_PASSES: u32 = 2;
/// Beam waist as a fraction of the grid side length.
pub const DEFAULT_WAIST_FRACTION: f64 = 0.45;

/// Gaussian intensity envelope `exp(-2 r^2 / w^2)` in field coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamEnvelope {
    pub waist: f64,
    pub center_x: f64,
    pub center_y: f64,
}

impl BeamEnvelope {
    pub fn validate(&self) -> Result<()> {
        if !(self.waist > 0.0 && self.waist.is_finite()) {
            return Err(Error::param("waist", "must be positive and finite"));
        }
        if !(self.center_x.is_finite() && self.center_y.is_finite()) {
            return Err(Error::param("center_x/center_y", "must be finite"));
        }
        Ok(())
    }

    /// Unnormalized intensity weight at a field-plane point.
    #[inline]
    pub fn intensity(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.center_x;
        let dy = y - self.center_y;
        (-2.0 * (dx * dx + dy * dy) / (self.waist * self.waist)).exp()
    }

    /// Centered on the grid with the default waist fraction.
    pub fn default_for(grid: &GridGeometry) -> Self {
        let (cx, cy) = grid.field_center();
        let side = grid.width.max(grid.height) as f64 * grid.pixel_pitch * grid.magnification;
        BeamEnvelope {
            waist: DEFAULT_WAIST_FRACTION * side,
            center_x: cx,
            center_y: cy,
        }
    }
}

impl GridGeometry {
    pub fn standard() -> Self {
        GridGeometry {
            width: DEFAULT_GRID_SIDE,
            height: DEFAULT_GRID_SIDE,
            pixel_pitch: DEFAULT_PIXEL_PITCH,
            magnification: DEFAULT_MAGNIFICATION,
        }
    }
}

impl LatticeParams {
    /// 808 nm, 45 degree incline, origin at the grid center, and a
    /// birefringence chosen so the detector-plane spacing is 0.519 mm.
    pub fn standard(grid: &GridGeometry) -> Self {
        let spacing = DEFAULT_DETECTOR_SPACING * grid.magnification;
        LatticeParams::with_spacing(
            DEFAULT_WAVELENGTH,
            spacing,
            DEFAULT_INCLINE_THETA,
            grid.field_center(),
            DEFAULT_N_PASSES,
        )
        .expect("default lattice parameters are valid")
    }

    /// Lattice spacing projected onto the detector plane.
    pub fn detector_spacing(&self, grid: &GridGeometry) -> f64 {
        grid.to_detector(self.spacing())
    }
}

/// Normalized per-pixel states plus the envelope weights `|alpha|^2`.
#[derive(Debug, Clone)]
pub struct SpinOrbitField {
    pub grid: GridGeometry,
    pub kets: Vec<TwoQubitKet>,
    /// Nonnegative, summing to one over the grid.
    pub weights: Vec<f64>,
}

impl SpinOrbitField {
    pub fn ket(&self, i: usize, j: usize) -> &TwoQubitKet {
        &self.kets[self.grid.index(i, j)]
    }

    pub fn weight_map(&self) -> RealImage {
        RealImage {
            grid: self.grid,
            data: self.weights.clone(),
        }
    }
}

/// Evaluates the lattice state at every pixel center.
pub fn evaluate_field(
    params: &LatticeParams,
    grid: &GridGeometry,
    envelope: &BeamEnvelope,
) -> Result<SpinOrbitField> {
    params.validate()?;
    grid.validate()?;
    envelope.validate()?;

    let (kets, mut weights): (Vec<_>, Vec<_>) = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j) = grid.coords(idx);
            let (x, y) = grid.pixel_center(i, j);
            (lov_state(x, y, params), envelope.intensity(x, y))
        })
        .unzip();

    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::param(
            "waist",
            "beam envelope vanishes over the whole grid",
        ));
    }
    weights.iter_mut().for_each(|w| *w /= total);

    Ok(SpinOrbitField {
        grid: *grid,
        kets,
        weights,
    })
}

/// `|(<s| ⊗ <i|) |psi>|^2`
pub fn projection_probability(
    state: &TwoQubitKet,
    signal: Polarization,
    idler: Polarization,
) -> f64 {
    let s = signal.ket().amplitudes();
    let i = idler.ket().amplitudes();
    let a = state.amplitudes();
    let amp = s[0].conj() * (i[0].conj() * a[0] + i[1].conj() * a[1])
        + s[1].conj() * (i[0].conj() * a[2] + i[1].conj() * a[3]);
    amp.norm_sqr()
}

/// Envelope-weighted projection intensity for one setting.
pub fn theoretical_intensity(
    field: &SpinOrbitField,
    signal: Polarization,
    idler: Polarization,
) -> RealImage {
    let data = field
        .kets
        .par_iter()
        .zip(field.weights.par_iter())
        .map(|(ket, w)| w * projection_probability(ket, signal, idler))
        .collect();
    RealImage {
        grid: field.grid,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::BellState;
    use approx::assert_abs_diff_eq;
    use Polarization::*;

    fn default_field() -> (LatticeParams, SpinOrbitField) {
        let grid = GridGeometry::standard();
        let params = LatticeParams::standard(&grid);
        let env = BeamEnvelope::default_for(&grid);
        (params, evaluate_field(&params, &grid, &env).unwrap())
    }

    #[test]
    fn default_geometry_detector_spacing() {
        let grid = GridGeometry::standard();
        let p = LatticeParams::standard(&grid);
        assert_abs_diff_eq!(p.detector_spacing(&grid), 0.519e-3, epsilon = 1e-15);
        assert_abs_diff_eq!(p.spacing(), 4.0 * 0.519e-3, epsilon = 1e-15);
    }

    #[test]
    fn single_pixel_at_origin() {
        let grid = GridGeometry::new(1, 1, 13e-6, 4.0).unwrap();
        let params = LatticeParams::standard(&grid);
        let env = BeamEnvelope::default_for(&grid);
        let field = evaluate_field(&params, &grid, &env).unwrap();
        assert_abs_diff_eq!(field.weights[0], 1.0);
        assert_abs_diff_eq!(
            field.kets[0].overlap(&BellState::PhiPlus.ket()),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn weights_normalized() {
        let (_, field) = default_field();
        assert_eq!(field.kets.len(), 19600);
        assert_abs_diff_eq!(field.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        assert!(field.weights.iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn origin_translation_by_one_period() {
        let grid = GridGeometry::new(40, 30, 13e-6, 4.0).unwrap();
        let params = LatticeParams::standard(&grid);
        let a = params.spacing();
        let moved = LatticeParams {
            origin_x0: params.origin_x0 + a,
            origin_y0: params.origin_y0 + a,
            ..params
        };
        let env = BeamEnvelope::default_for(&grid);
        let f0 = evaluate_field(&params, &grid, &env).unwrap();
        let f1 = evaluate_field(&moved, &grid, &env).unwrap();
        for (a, b) in f0.kets.iter().zip(&f1.kets) {
            for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
                assert!((x - y).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn projection_examples() {
        let phi = BellState::PhiPlus.ket();
        assert_abs_diff_eq!(projection_probability(&phi, H, H), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(projection_probability(&phi, H, V), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(projection_probability(&phi, R, R), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(projection_probability(&phi, R, L), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn intensity_completeness() {
        let (_, field) = default_field();
        let pairs = [
            [(H, H), (H, V), (V, H), (V, V)],
            [(D, D), (D, A), (A, D), (A, A)],
            [(R, R), (R, L), (L, R), (L, L)],
        ];
        for set in pairs {
            let maps: Vec<_> = set
                .iter()
                .map(|&(s, i)| theoretical_intensity(&field, s, i))
                .collect();
            for (px, w) in field.weights.iter().enumerate() {
                let total: f64 = maps.iter().map(|m| m.data[px]).sum();
                assert!((total - w).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn rl_map_at_origin_pixel() {
        // even grid: the origin sits on a pixel corner, so use an odd grid
        let grid = GridGeometry::new(41, 41, 13e-6, 4.0).unwrap();
        let params = LatticeParams::standard(&grid);
        let env = BeamEnvelope::default_for(&grid);
        let field = evaluate_field(&params, &grid, &env).unwrap();
        let map = theoretical_intensity(&field, R, L);
        let idx = grid.index(20, 20);
        assert_abs_diff_eq!(map.data[idx], field.weights[idx] * 0.5, epsilon = 1e-15);
    }

    #[test]
    fn maps_periodic_in_lattice_spacing() {
        // every projection map is invariant under a one-period translation
        let grid = GridGeometry::new(24, 24, 13e-6, 4.0).unwrap();
        let params = LatticeParams::standard(&grid);
        let a = params.spacing();
        let moved = LatticeParams {
            origin_x0: params.origin_x0 - a,
            ..params
        };
        let moved_y = LatticeParams {
            origin_y0: params.origin_y0 - a,
            ..params
        };
        let env = BeamEnvelope::default_for(&grid);
        let f0 = evaluate_field(&params, &grid, &env).unwrap();
        for p in [moved, moved_y] {
            let f1 = evaluate_field(&p, &grid, &env).unwrap();
            for s in Polarization::TOMOGRAPHIC {
                for i in Polarization::TOMOGRAPHIC {
                    let m0 = theoretical_intensity(&f0, s, i);
                    let m1 = theoretical_intensity(&f1, s, i);
                    for (x, y) in m0.data.iter().zip(&m1.data) {
                        assert!((x - y).abs() < 1e-12);
                    }
                }
            }
        }
    }
}
