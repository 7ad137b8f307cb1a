//! The four pipeline commands.
//!
//! Output file names are fixed:
//!
//! | command       | writes                                                   |
//! |---------------|----------------------------------------------------------|
//! | `simulate`    | `frame_<s><i>.txt`, `intensity_<s><i>.csv`, `config.txt` |
//! | `reconstruct` | `tomography.tomo`                                        |
//! | `analyze`     | `fidelity_<Bell>.csv`, `max_fidelity.csv`, `argmax.csv`, `histogram.csv`, `summary.txt` |
//! | `render`      | `<input stem>.pgm` or `.ppm`                             |

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use spinlattice::analysis::{
    bell_fidelity_map, entangled_fraction, estimate_lattice_spacing, fidelity_histogram,
    max_bell_fidelity,
};
use spinlattice::imaging::{process, render, Background, Encoding, FilterConfig, Smoothing};
use spinlattice::io::{read_csv, read_frame, read_tomo, write_csv, write_frame, write_tomo};
use spinlattice::{
    evaluate_field, pixelwise_tomography, simulate_frame, theoretical_intensity, BellState,
    Colormap, MeasurementSet, RealImage, Setting, TomographyStatus,
};

use crate::config::SimulationConfig;
use crate::error::CliError;

pub const TOMO_FILE: &str = "tomography.tomo";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const CONFIG_COPY: &str = "config.txt";

pub fn frame_file(s: Setting) -> String {
    format!("frame_{}.txt", s.code())
}

pub fn intensity_file(s: Setting) -> String {
    format!("intensity_{}.csv", s.code())
}

pub fn fidelity_file(b: BellState) -> String {
    format!("fidelity_{}.csv", b.name())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::io(path, e))
}

/// Creates `path` and hands a buffered writer to `body`.
fn write_with<F>(path: &Path, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> spinlattice::Result<()>,
{
    let mut w = create(path)?;
    body(&mut w).map_err(|e| CliError::input(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn load_config(path: &Path) -> Result<SimulationConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    SimulationConfig::parse(&text)
}

/// Writes the 16 noisy frames and the 16 noiseless intensity maps.
pub fn simulate(config: &Path, out: Option<&Path>) -> Result<PathBuf, CliError> {
    let cfg = load_config(config)?;
    let dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.output_dir.clone());
    ensure_dir(&dir)?;
    let field = evaluate_field(&cfg.lattice, &cfg.grid, &cfg.envelope)?;
    for s in Setting::canonical() {
        let frame = simulate_frame(
            &field,
            s,
            cfg.mean_total_counts,
            cfg.background_rate,
            cfg.seed,
            cfg.exposures,
        )?;
        write_with(&dir.join(frame_file(s)), |w| write_frame(w, &frame))?;
        let intensity = theoretical_intensity(&field, s.signal, s.idler);
        write_with(&dir.join(intensity_file(s)), |w| write_csv(w, &intensity))?;
    }
    let copy = dir.join(CONFIG_COPY);
    fs::write(&copy, cfg.to_text()).map_err(|e| CliError::io(&copy, e))?;
    info!(
        "simulated {}x{} grid, detector spacing {:.4} mm",
        cfg.grid.width,
        cfg.grid.height,
        cfg.lattice.detector_spacing(&cfg.grid) * 1e3
    );
    Ok(dir)
}

/// Reads every `frame_*.txt` in `dir` and reconstructs all pixels.
pub fn reconstruct(dir: &Path, output: Option<&Path>) -> Result<PathBuf, CliError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("frame_") && n.ends_with(".txt"))
        })
        .collect();
    paths.sort();
    let frames = paths
        .iter()
        .map(|p| read_frame(&mut open(p)?).map_err(|e| CliError::input(p, e)))
        .collect::<Result<Vec<_>, _>>()?;
    let set = MeasurementSet::new(frames)?;
    let map = pixelwise_tomography(&set)?;

    let max_iter = map.count_status(TomographyStatus::MaxIter);
    let degenerate = map.count_status(TomographyStatus::DegenerateZeroCounts);
    if max_iter > 0 {
        warn!("{max_iter} pixel(s) hit the iteration limit");
    }
    if degenerate > 0 {
        warn!("{degenerate} pixel(s) had no counts and were set to I/4");
    }
    info!("reconstructed {} pixels", map.pixels.len());

    let path = output
        .map(Path::to_path_buf)
        .unwrap_or_else(|| dir.join(TOMO_FILE));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    write_with(&path, |w| write_tomo(w, &map))?;
    Ok(path)
}

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub intensity: Option<PathBuf>,
    pub bins: usize,
    pub threshold: f64,
    pub out: Option<PathBuf>,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            intensity: None,
            bins: spinlattice::analysis::DEFAULT_HISTOGRAM_BINS,
            threshold: spinlattice::analysis::DEFAULT_WITNESS_THRESHOLD,
            out: None,
        }
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Fidelity maps, histogram and summary from a TOMO file. Returns the
/// summary text.
pub fn analyze(tomo: &Path, opts: &AnalyzeOptions) -> Result<String, CliError> {
    let map = read_tomo(&mut open(tomo)?).map_err(|e| CliError::input(tomo, e))?;
    let dir = match &opts.out {
        Some(d) => d.clone(),
        None => tomo.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    ensure_dir(&dir)?;

    for b in BellState::ALL {
        let f = bell_fidelity_map(&map, b);
        write_with(&dir.join(fidelity_file(b)), |w| write_csv(w, &f.image))?;
    }
    let max = max_bell_fidelity(&map);
    write_with(&dir.join("max_fidelity.csv"), |w| write_csv(w, &max.max))?;
    let argmax = RealImage {
        grid: map.grid,
        data: max.argmax.iter().map(|b| b.index() as f64).collect(),
    };
    write_with(&dir.join("argmax.csv"), |w| write_csv(w, &argmax))?;

    let hist = fidelity_histogram(&max.max, opts.bins)?;
    let mut h = String::from("bin_low,bin_high,count\n");
    for (k, count) in hist.counts.iter().enumerate() {
        let _ = writeln!(h, "{},{},{}", hist.edges[k], hist.edges[k + 1], count);
    }
    let hist_path = dir.join("histogram.csv");
    fs::write(&hist_path, h).map_err(|e| CliError::io(&hist_path, e))?;

    let witness = entangled_fraction(&max, opts.threshold)?;
    let mut s = String::new();
    let _ = writeln!(s, "pixels = {}", witness.total_pixels);
    let _ = writeln!(
        s,
        "degenerate_pixels = {}",
        map.count_status(TomographyStatus::DegenerateZeroCounts)
    );
    let _ = writeln!(
        s,
        "max_iter_pixels = {}",
        map.count_status(TomographyStatus::MaxIter)
    );
    let _ = writeln!(s, "threshold = {}", witness.threshold);
    let _ = writeln!(s, "entangled_pixels = {}", witness.entangled_pixels);
    let _ = writeln!(s, "entangled_fraction = {:.6}", witness.entangled_fraction);
    for b in BellState::ALL {
        let _ = writeln!(
            s,
            "argmax_{} = {}",
            b.name(),
            witness.argmax_counts[b.index()]
        );
    }
    let _ = writeln!(s, "mean_max_fidelity = {:.6}", max.max.mean());
    let _ = writeln!(s, "median_max_fidelity = {:.6}", median(&max.max.data));
    let _ = writeln!(s, "histogram_bins = {}", opts.bins);

    if let Some(path) = &opts.intensity {
        let img = read_csv(&mut open(path)?).map_err(|e| CliError::input(path, e))?;
        // file name only, so summaries of identical runs compare equal
        let name = path
            .file_name()
            .map_or(path.as_os_str(), |n| n)
            .to_string_lossy();
        let _ = writeln!(s, "spacing_source = {name}");
        match estimate_lattice_spacing(&img, img.grid.pixel_pitch) {
            Ok(est) => {
                let _ = writeln!(s, "spacing_mm = {:.4}", est.spacing * 1e3);
                let _ = writeln!(s, "spacing_uncertainty_mm = {:.4}", est.uncertainty * 1e3);
                let _ = writeln!(
                    s,
                    "spacing_axis_periods_px = {:.3} {:.3}",
                    est.axis_periods.0, est.axis_periods.1
                );
            }
            Err(e) => {
                warn!("{e}");
                let _ = writeln!(s, "spacing_error = {e}");
            }
        }
    }
    let summary_path = dir.join(SUMMARY_FILE);
    fs::write(&summary_path, &s).map_err(|e| CliError::io(&summary_path, e))?;
    Ok(s)
}

#[derive(Debug, Clone)]
pub struct RenderOptions {
    pub output: Option<PathBuf>,
    pub sigma: Option<f64>,
    pub adaptive: bool,
    pub colormap: Colormap,
    pub no_background: bool,
    pub ascii: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            output: None,
            sigma: None,
            adaptive: false,
            colormap: Colormap::Gray,
            no_background: false,
            ascii: false,
        }
    }
}

/// Loads a geometry-tagged CSV or a FRAME file as a real image.
pub fn load_image(path: &Path) -> Result<RealImage, CliError> {
    let mut r = open(path)?;
    let head = r.fill_buf().map_err(|e| CliError::io(path, e))?;
    let image = if head.starts_with(b"FRAME") {
        read_frame(&mut r).map(|f| RealImage {
            grid: f.grid,
            data: f.counts.iter().map(|&c| c as f64).collect(),
        })
    } else {
        read_csv(&mut r)
    };
    image.map_err(|e| CliError::input(path, e))
}

/// Background subtraction, smoothing, normalization and PGM/PPM export.
pub fn render_image(input: &Path, opts: &RenderOptions) -> Result<PathBuf, CliError> {
    let smoothing = match (opts.sigma, opts.adaptive) {
        (Some(_), true) => {
            return Err(CliError::Usage(
                "--sigma and --adaptive are mutually exclusive".into(),
            ))
        }
        (Some(s), false) => Smoothing::Fixed(s),
        (None, true) => Smoothing::Adaptive,
        (None, false) => Smoothing::None,
    };
    let config = FilterConfig {
        background: if opts.no_background {
            Background::None
        } else {
            Background::CornerMedian
        },
        smoothing,
        colormap: opts.colormap,
    };
    let img = load_image(input)?;
    let processed = process(&img, &config)?;
    let encoding = if opts.ascii {
        Encoding::Ascii
    } else {
        Encoding::Binary
    };
    let bytes = render(&processed, config.colormap, encoding)?;
    let ext = match config.colormap {
        Colormap::Gray => "pgm",
        Colormap::Hot => "ppm",
    };
    let path = opts
        .output
        .clone()
        .unwrap_or_else(|| input.with_extension(ext));
    fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}
