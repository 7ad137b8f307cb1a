//! Photon-count frames for the 16 polarization settings and their
//! Poisson simulation.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{projection_probability, SpinOrbitField};
use crate::grid::GridGeometry;
use crate::qstate::Polarization;

/// One (signal, idler) projection setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Setting {
    pub signal: Polarization,
    pub idler: Polarization,
}

impl Setting {
    pub const fn new(signal: Polarization, idler: Polarization) -> Self {
        Setting { signal, idler }
    }

    /// Row-major `{H,V,D,R} x {H,V,D,R}`, signal outer.
    pub fn canonical() -> [Setting; 16] {
        let t = Polarization::TOMOGRAPHIC;
        std::array::from_fn(|k| Setting::new(t[k / 4], t[k % 4]))
    }

    /// Position in the canonical order, if this is a tomographic setting.
    pub fn canonical_index(&self) -> Option<usize> {
        let pos = |p: Polarization| Polarization::TOMOGRAPHIC.iter().position(|&q| q == p);
        Some(pos(self.signal)? * 4 + pos(self.idler)?)
    }

    /// Two-letter code, e.g. `HD`.
    pub fn code(&self) -> String {
        format!("{}{}", self.signal.symbol(), self.idler.symbol())
    }

    pub fn parse_code(code: &str) -> Result<Self> {
        let mut chars = code.chars();
        match (chars.next(), chars.next(), chars.next()) {
            (Some(s), Some(i), None) => {
                Ok(Setting::new(s.to_string().parse()?, i.to_string().parse()?))
            }
            _ => Err(Error::UnknownPolarization(code.to_string())),
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.signal, self.idler)
    }
}

/// Integer photon counts for one setting over the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CountFrame {
    pub setting: Setting,
    pub grid: GridGeometry,
    pub counts: Vec<u64>,
    pub exposures: u32,
    pub seed: u64,
}

impl CountFrame {
    pub fn new(
        setting: Setting,
        grid: GridGeometry,
        counts: Vec<u64>,
        exposures: u32,
        seed: u64,
    ) -> Result<Self> {
        if counts.len() != grid.len() {
            return Err(Error::GeometryMismatch(format!(
                "frame {} holds {} counts for a {}x{} grid",
                setting.code(),
                counts.len(),
                grid.width,
                grid.height
            )));
        }
        if exposures == 0 {
            return Err(Error::param("exposures", "must be positive"));
        }
        Ok(CountFrame {
            setting,
            grid,
            counts,
            exposures,
            seed,
        })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Stream id for the per-pixel generator: setting in the high word,
/// pixel index in the low word.
fn stream_id(setting: Setting, pixel: usize) -> u64 {
    let s = setting.signal as u64 * 8 + setting.idler as u64;
    (s << 32) | pixel as u64
}

/// Draws one Poisson-noisy frame.
///
/// Pixel `k` receives `Poisson(mean_total_counts * I_k + background_rate)`,
/// where `I_k` is the envelope-weighted projection intensity. Each pixel
/// draws from its own ChaCha stream keyed by `(seed, setting, k)`, so the
/// frame does not depend on how pixels are scheduled.
pub fn simulate_frame(
    field: &SpinOrbitField,
    setting: Setting,
    mean_total_counts: f64,
    background_rate: f64,
    seed: u64,
    exposures: u32,
) -> Result<CountFrame> {
    if !(mean_total_counts >= 0.0 && mean_total_counts.is_finite()) {
        return Err(Error::param("mean_total_counts", "must be finite and >= 0"));
    }
    if !(background_rate >= 0.0 && background_rate.is_finite()) {
        return Err(Error::param("background_rate", "must be finite and >= 0"));
    }
    let counts = field
        .kets
        .par_iter()
        .zip(field.weights.par_iter())
        .enumerate()
        .map(|(k, (ket, w))| {
            let p = projection_probability(ket, setting.signal, setting.idler);
            let lambda = mean_total_counts * w * p + background_rate;
            if lambda <= 0.0 {
                return 0;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream_id(setting, k));
            let poisson = Poisson::new(lambda).expect("positive finite rate");
            rng.sample(poisson) as u64
        })
        .collect();
    CountFrame::new(setting, field.grid, counts, exposures, seed)
}

/// Noiseless expected counts `flux * p_k` for every pixel and every
/// canonical setting, ignoring the envelope. Indexed `[pixel][setting]`.
pub fn expected_counts(field: &SpinOrbitField, flux_per_pixel: f64) -> Vec<[f64; 16]> {
    let settings = Setting::canonical();
    field
        .kets
        .par_iter()
        .map(|ket| {
            std::array::from_fn(|k| {
                flux_per_pixel * projection_probability(ket, settings[k].signal, settings[k].idler)
            })
        })
        .collect()
}
