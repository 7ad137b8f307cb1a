//! Pixel-wise two-qubit state tomography from the 16-setting count frames.
//!
//! Each pixel is reconstructed independently: linear inversion of the Born
//! probabilities, projection onto the physical set, then Poisson
//! maximum-likelihood refinement over a Cholesky parametrization.

mod linear;
mod mle;

pub use linear::{estimate_flux, linear_inversion, project_to_physical, HV_SUBBASIS};
pub use mle::{
    mle_reconstruct, mle_reconstruct_ordered, mle_reconstruct_traced, negative_log_likelihood,
    CholeskyParams, MleOptions, PixelTomographyResult, TomographyStatus, DEFAULT_MAX_ITER,
    DEFAULT_REL_TOL, LOG_GUARD, SEED_JITTER,
};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frames::{CountFrame, Setting};
use crate::grid::GridGeometry;

/// The 16 canonical frames of one acquisition, stored in canonical order.
#[derive(Debug, Clone)]
pub struct MeasurementSet {
    grid: GridGeometry,
    frames: Vec<CountFrame>,
}

impl MeasurementSet {
    /// Accepts frames in any order; requires each canonical setting exactly
    /// once and identical dimensions.
    pub fn new(frames: Vec<CountFrame>) -> Result<Self> {
        let canonical = Setting::canonical();
        let mut slots: [Option<CountFrame>; 16] = Default::default();
        for frame in frames {
            let Some(k) = frame.setting.canonical_index() else {
                return Err(Error::InvalidMeasurementSet(format!(
                    "setting {} is not in the {{H,V,D,R}}x{{H,V,D,R}} set",
                    frame.setting.code()
                )));
            };
            if slots[k].is_some() {
                return Err(Error::InvalidMeasurementSet(format!(
                    "duplicate setting {}",
                    frame.setting.code()
                )));
            }
            slots[k] = Some(frame);
        }
        let missing: Vec<String> = canonical
            .iter()
            .zip(&slots)
            .filter(|(_, f)| f.is_none())
            .map(|(s, _)| s.code())
            .collect();
        if !missing.is_empty() {
            return Err(Error::InvalidMeasurementSet(format!(
                "missing setting(s) {}",
                missing.join(", ")
            )));
        }
        let frames: Vec<CountFrame> = slots.into_iter().map(Option::unwrap).collect();
        let grid = frames[0].grid;
        for f in &frames[1..] {
            if !f.grid.same_shape(&grid) {
                return Err(Error::GeometryMismatch(format!(
                    "frame {} is {}x{} but frame {} is {}x{}",
                    f.setting.code(),
                    f.grid.width,
                    f.grid.height,
                    frames[0].setting.code(),
                    grid.width,
                    grid.height
                )));
            }
        }
        Ok(MeasurementSet { grid, frames })
    }

    pub fn grid(&self) -> &GridGeometry {
        &self.grid
    }

    pub fn frames(&self) -> &[CountFrame] {
        &self.frames
    }

    /// Raw counts of one pixel in canonical order.
    pub fn pixel_counts(&self, index: usize) -> [f64; 16] {
        std::array::from_fn(|k| self.frames[k].counts[index] as f64)
    }
}

/// Per-pixel reconstruction results on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TomographyMap {
    pub grid: GridGeometry,
    pub pixels: Vec<PixelTomographyResult>,
}

impl TomographyMap {
    pub fn new(grid: GridGeometry, pixels: Vec<PixelTomographyResult>) -> Result<Self> {
        if pixels.len() != grid.len() {
            return Err(Error::GeometryMismatch(format!(
                "{} pixel results for a {}x{} grid",
                pixels.len(),
                grid.width,
                grid.height
            )));
        }
        Ok(TomographyMap { grid, pixels })
    }

    pub fn count_status(&self, status: TomographyStatus) -> usize {
        self.pixels.iter().filter(|p| p.status == status).count()
    }
}

/// Reconstructs every pixel of a measurement set from its raw counts.
pub fn pixelwise_tomography(set: &MeasurementSet) -> Result<TomographyMap> {
    reconstruct_with(set.grid, |k| set.pixel_counts(k))
}

/// Reconstructs every pixel from real-valued counts, `counts[pixel][setting]`.
pub fn reconstruct_counts(grid: GridGeometry, counts: &[[f64; 16]]) -> Result<TomographyMap> {
    if counts.len() != grid.len() {
        return Err(Error::GeometryMismatch(format!(
            "{} pixels of counts for a {}x{} grid",
            counts.len(),
            grid.width,
            grid.height
        )));
    }
    reconstruct_with(grid, |k| counts[k])
}

fn reconstruct_with<F>(grid: GridGeometry, counts_at: F) -> Result<TomographyMap>
where
    F: Fn(usize) -> [f64; 16] + Sync,
{
    let pixels = (0..grid.len())
        .into_par_iter()
        .map(|k| mle_reconstruct(&counts_at(k)))
        .collect::<Result<Vec<_>>>()?;
    TomographyMap::new(grid, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{evaluate_field, BeamEnvelope};
    use crate::frames::{expected_counts, simulate_frame};
    use crate::lattice::LatticeParams;
    use crate::qstate::{fidelity, BellState, Polarization};

    fn set_for(grid: GridGeometry, mean: f64, bg: f64) -> MeasurementSet {
        let params = LatticeParams::standard(&grid);
        let field = evaluate_field(&params, &grid, &BeamEnvelope::default_for(&grid)).unwrap();
        let frames = Setting::canonical()
            .iter()
            .map(|&s| simulate_frame(&field, s, mean, bg, 5, 2000).unwrap())
            .collect();
        MeasurementSet::new(frames).unwrap()
    }

    #[test]
    fn set_validation() {
        let grid = GridGeometry::new(3, 2, 13e-6, 4.0).unwrap();
        let frame = |s: Setting| CountFrame::new(s, grid, vec![1; 6], 1, 0).unwrap();
        let all: Vec<_> = Setting::canonical().into_iter().map(frame).collect();

        let mut reversed = all.clone();
        reversed.reverse();
        let set = MeasurementSet::new(reversed).unwrap();
        assert_eq!(set.frames()[0].setting.code(), "HH");

        let err = MeasurementSet::new(all[..15].to_vec()).unwrap_err();
        assert!(err.to_string().contains("RR"), "{err}");

        let mut dup = all.clone();
        dup[15] = dup[14].clone();
        assert!(MeasurementSet::new(dup)
            .unwrap_err()
            .to_string()
            .contains("duplicate"));

        let mut mixed = all.clone();
        let other = GridGeometry::new(2, 3, 13e-6, 4.0).unwrap();
        mixed[7] = CountFrame::new(Setting::canonical()[7], other, vec![1; 6], 1, 0).unwrap();
        assert!(matches!(
            MeasurementSet::new(mixed),
            Err(Error::GeometryMismatch(_))
        ));

        let mut foreign = all;
        foreign[0] = CountFrame::new(
            Setting::new(Polarization::A, Polarization::H),
            grid,
            vec![1; 6],
            1,
            0,
        )
        .unwrap();
        assert!(MeasurementSet::new(foreign).is_err());
    }

    #[test]
    fn single_pixel_noiseless_phi_plus() {
        let grid = GridGeometry::new(1, 1, 13e-6, 4.0).unwrap();
        let params = LatticeParams::standard(&grid);
        let field = evaluate_field(&params, &grid, &BeamEnvelope::default_for(&grid)).unwrap();
        let counts = expected_counts(&field, 1e6);
        let map = reconstruct_counts(grid, &counts).unwrap();
        assert!(fidelity(&map.pixels[0].rho, &BellState::PhiPlus.ket()) >= 0.9999);
    }

    #[test]
    fn order_independent_results() {
        let grid = GridGeometry::new(12, 10, 13e-6, 4.0).unwrap();
        let set = set_for(grid, 4e4, 1.0);
        let map = pixelwise_tomography(&set).unwrap();
        // reverse visitation, sequential
        let mut reversed: Vec<_> = (0..grid.len())
            .rev()
            .map(|k| (k, mle_reconstruct(&set.pixel_counts(k)).unwrap()))
            .collect();
        reversed.sort_by_key(|(k, _)| *k);
        let sequential: Vec<_> = reversed.into_iter().map(|(_, r)| r).collect();
        assert_eq!(map.pixels, sequential);
        assert_eq!(pixelwise_tomography(&set).unwrap(), map);
    }

    #[test]
    fn noisy_results_are_physical() {
        let grid = GridGeometry::new(16, 16, 13e-6, 4.0).unwrap();
        let set = set_for(grid, 30.0 * 256.0, 3.0);
        let map = pixelwise_tomography(&set).unwrap();
        for px in &map.pixels {
            if px.status != TomographyStatus::DegenerateZeroCounts {
                assert!(crate::qstate::DensityMatrix::new(*px.rho.matrix()).is_ok());
            }
        }
        assert_eq!(map.count_status(TomographyStatus::MaxIter), 0);
    }
}
