//! Flat `key = value` simulation config.
//!
//! One pair per line, `#` starts a comment. Missing keys take the default
//! geometry; origin, beam center, waist and `delta_n` defaults follow the
//! grid actually configured.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use spinlattice::field::DEFAULT_N_PASSES;
use spinlattice::{BeamEnvelope, GridGeometry, LatticeParams};

use crate::error::CliError;

/// Per-pixel pair flux (sum over an H/V x H/V basis) averaged over the
/// default grid is 50.
pub const DEFAULT_MEAN_TOTAL_COUNTS: f64 = 980_000.0;
pub const DEFAULT_BACKGROUND_RATE: f64 = 5.0;
pub const DEFAULT_EXPOSURES: u32 = 2000;
pub const DEFAULT_SEED: u64 = 20_240_601;
pub const DEFAULT_OUTPUT_DIR: &str = "out";

pub const KEYS: [&str; 18] = [
    "width",
    "height",
    "pixel_pitch",
    "magnification",
    "wavelength",
    "delta_n",
    "incline_theta",
    "origin_x0",
    "origin_y0",
    "n_passes",
    "waist",
    "center_x",
    "center_y",
    "mean_total_counts",
    "background_rate",
    "exposures",
    "seed",
    "output_dir",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub grid: GridGeometry,
    pub lattice: LatticeParams,
    pub envelope: BeamEnvelope,
    /// Expected photon pairs per setting over the whole grid.
    pub mean_total_counts: f64,
    /// Expected background counts per pixel per setting.
    pub background_rate: f64,
    pub exposures: u32,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let grid = GridGeometry::standard();
        SimulationConfig {
            lattice: LatticeParams::standard(&grid),
            envelope: BeamEnvelope::default_for(&grid),
            grid,
            mean_total_counts: DEFAULT_MEAN_TOTAL_COUNTS,
            background_rate: DEFAULT_BACKGROUND_RATE,
            exposures: DEFAULT_EXPOSURES,
            seed: DEFAULT_SEED,
            output_dir: PathBuf::from(DEFAULT_OUTPUT_DIR),
        }
    }
}

struct Entries(BTreeMap<String, String>);

impl Entries {
    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.0
            .get(key)
            .map(|raw| {
                raw.parse()
                    .map_err(|_| CliError::config(key, format!("cannot parse `{raw}`")))
            })
            .transpose()
    }

    fn get_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        Ok(self.get(key)?.unwrap_or(default))
    }
}

impl SimulationConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::config("", format!("line {}: expected `key = value`", n + 1))
            })?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(CliError::config(k, "unknown key"));
            }
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(CliError::config(k, "given more than once"));
            }
        }
        let e = Entries(map);
        let base = GridGeometry::standard();
        let grid = GridGeometry {
            width: e.get_or("width", base.width)?,
            height: e.get_or("height", base.height)?,
            pixel_pitch: e.get_or("pixel_pitch", base.pixel_pitch)?,
            magnification: e.get_or("magnification", base.magnification)?,
        };
        check("width", grid.width > 0, "must be positive")?;
        check("height", grid.height > 0, "must be positive")?;
        check(
            "pixel_pitch",
            positive(grid.pixel_pitch),
            "must be positive and finite",
        )?;
        check(
            "magnification",
            positive(grid.magnification),
            "must be positive and finite",
        )?;

        let default_lattice = LatticeParams::standard(&grid);
        let lattice = LatticeParams {
            wavelength: e.get_or("wavelength", default_lattice.wavelength)?,
            delta_n: e.get_or("delta_n", default_lattice.delta_n)?,
            incline_theta: e.get_or("incline_theta", default_lattice.incline_theta)?,
            origin_x0: e.get_or("origin_x0", default_lattice.origin_x0)?,
            origin_y0: e.get_or("origin_y0", default_lattice.origin_y0)?,
            n_passes: e.get_or("n_passes", DEFAULT_N_PASSES)?,
        };
        check(
            "wavelength",
            positive(lattice.wavelength),
            "must be positive and finite",
        )?;
        check(
            "delta_n",
            positive(lattice.delta_n * lattice.incline_theta.tan()),
            "delta_n * tan(incline_theta) must be positive and finite",
        )?;
        check("origin_x0", lattice.origin_x0.is_finite(), "must be finite")?;
        check("origin_y0", lattice.origin_y0.is_finite(), "must be finite")?;
        check("n_passes", lattice.n_passes >= 1, "must be at least 1")?;

        let default_env = BeamEnvelope::default_for(&grid);
        let envelope = BeamEnvelope {
            waist: e.get_or("waist", default_env.waist)?,
            center_x: e.get_or("center_x", default_env.center_x)?,
            center_y: e.get_or("center_y", default_env.center_y)?,
        };
        check(
            "waist",
            positive(envelope.waist),
            "must be positive and finite",
        )?;
        check("center_x", envelope.center_x.is_finite(), "must be finite")?;
        check("center_y", envelope.center_y.is_finite(), "must be finite")?;

        let cfg = SimulationConfig {
            grid,
            lattice,
            envelope,
            mean_total_counts: e.get_or("mean_total_counts", DEFAULT_MEAN_TOTAL_COUNTS)?,
            background_rate: e.get_or("background_rate", DEFAULT_BACKGROUND_RATE)?,
            exposures: e.get_or("exposures", DEFAULT_EXPOSURES)?,
            seed: e.get_or("seed", DEFAULT_SEED)?,
            output_dir: e.get_or("output_dir", PathBuf::from(DEFAULT_OUTPUT_DIR))?,
        };
        let nonneg = |v: f64| v >= 0.0 && v.is_finite();
        check(
            "mean_total_counts",
            nonneg(cfg.mean_total_counts),
            "must be finite and >= 0",
        )?;
        check(
            "background_rate",
            nonneg(cfg.background_rate),
            "must be finite and >= 0",
        )?;
        check("exposures", cfg.exposures > 0, "must be positive")?;
        Ok(cfg)
    }

    /// Every key with its resolved value; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: &dyn std::fmt::Display| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("width", &self.grid.width);
        put("height", &self.grid.height);
        put("pixel_pitch", &self.grid.pixel_pitch);
        put("magnification", &self.grid.magnification);
        put("wavelength", &self.lattice.wavelength);
        put("delta_n", &self.lattice.delta_n);
        put("incline_theta", &self.lattice.incline_theta);
        put("origin_x0", &self.lattice.origin_x0);
        put("origin_y0", &self.lattice.origin_y0);
        put("n_passes", &self.lattice.n_passes);
        put("waist", &self.envelope.waist);
        put("center_x", &self.envelope.center_x);
        put("center_y", &self.envelope.center_y);
        put("mean_total_counts", &self.mean_total_counts);
        put("background_rate", &self.background_rate);
        put("exposures", &self.exposures);
        put("seed", &self.seed);
        put("output_dir", &self.output_dir.display());
        s
    }
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

fn check(key: &str, ok: bool, reason: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::config(key, reason))
    }
}
