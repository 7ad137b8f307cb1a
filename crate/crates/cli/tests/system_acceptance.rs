//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any fails.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::Matrix4;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Poisson, StandardNormal};
use spinlattice::analysis::{entangled_fraction, estimate_lattice_spacing, max_bell_fidelity};
use spinlattice::frames::expected_counts;
use spinlattice::tomography::{estimate_flux, linear_inversion};
use spinlattice::{
    evaluate_field, fidelity, gradient_unitary_x, gradient_unitary_y, lov_operator,
    mle_reconstruct, partial_trace, pixelwise_tomography, reconstruct_counts, simulate_frame,
    theoretical_intensity, BeamEnvelope, BellState, DensityMatrix, GridGeometry, LatticeParams,
    MeasurementSet, Polarization, RealImage, Setting, SpinOrbitField, Subsystem, Tensor,
    TomographyMap,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn default_setup() -> (GridGeometry, LatticeParams, SpinOrbitField) {
    let grid = GridGeometry::standard();
    let params = LatticeParams::standard(&grid);
    let field = evaluate_field(&params, &grid, &BeamEnvelope::default_for(&grid)).unwrap();
    (grid, params, field)
}

fn canonical_counts(rho: &DensityMatrix, flux: f64) -> [f64; 16] {
    let s = Setting::canonical();
    std::array::from_fn(|k| flux * rho.expectation(&s[k].signal.ket().tensor(&s[k].idler.ket())))
}

fn random_density(rng: &mut ChaCha8Rng) -> DensityMatrix {
    let g = Matrix4::from_fn(|_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let m = g * g.adjoint();
    let m = m / m.trace();
    DensityMatrix::new((m + m.adjoint()) * Complex64::new(0.5, 0.0)).unwrap()
}

fn max_abs(m: &Matrix4<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn operators() -> Outcome {
    let grid = GridGeometry::standard();
    let p = LatticeParams::standard(&grid);
    let a = p.spacing();
    let side = grid.width as f64 * grid.pixel_pitch * grid.magnification;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut unitary, mut periodic) = (0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let x = rng.random_range(0.0..side);
        let y = rng.random_range(0.0..side);
        let u = lov_operator(x, y, &p);
        unitary = unitary
            .max(gradient_unitary_x(x, &p).unitarity_residual())
            .max(gradient_unitary_y(y, &p).unitarity_residual())
            .max(u.unitarity_residual());
        periodic = periodic.max(lov_operator(x + a, y, &p).max_abs_diff(&u));
    }
    outcome(
        unitary <= 1e-12 && periodic <= 1e-12,
        format!("max unitarity residual {unitary:.1e}, max periodicity residual {periodic:.1e}"),
    )
}

fn maximal_entanglement(field: &SpinOrbitField) -> Outcome {
    let half = nalgebra::Matrix2::identity() * Complex64::new(0.5, 0.0);
    let (mut marginal, mut completeness) = (0.0f64, 0.0f64);
    for ket in &field.kets {
        let rho = DensityMatrix::from_pure(ket);
        marginal = marginal.max(partial_trace(&rho, Subsystem::Signal).max_abs_diff(&half));
        let s: f64 = BellState::ALL
            .iter()
            .map(|b| fidelity(&rho, &b.ket()))
            .sum();
        completeness = completeness.max((s - 1.0).abs());
    }
    outcome(
        marginal <= 1e-12 && completeness <= 1e-9,
        format!(
            "{} pixels, max |rho_idler - I/2| {marginal:.1e}, max |sum F - 1| {completeness:.1e}",
            field.kets.len()
        ),
    )
}

fn intensity_completeness(field: &SpinOrbitField) -> Outcome {
    use Polarization::{H, V};
    let maps: Vec<RealImage> = [(H, H), (H, V), (V, H), (V, V)]
        .iter()
        .map(|&(s, i)| theoretical_intensity(field, s, i))
        .collect();
    let worst = (0..field.grid.len())
        .map(|k| (maps.iter().map(|m| m.data[k]).sum::<f64>() - field.weights[k]).abs())
        .fold(0.0, f64::max);
    outcome(worst <= 1e-9, format!("max |sum - envelope| {worst:.1e}"))
}

fn tomography_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut min_fid, mut lin_err) = (1.0f64, 0.0f64);
    for _ in 0..100 {
        let rho = random_density(&mut rng);
        let counts = canonical_counts(&rho, 1e5);
        let flux = estimate_flux(&counts).unwrap();
        lin_err = lin_err.max(max_abs(
            &(linear_inversion(&counts, flux).unwrap() - rho.matrix()),
        ));
        let fit = mle_reconstruct(&counts).unwrap();
        min_fid = min_fid.min(uhlmann(&rho, &fit.rho));
    }
    outcome(
        min_fid >= 0.9999 && lin_err <= 1e-8,
        format!("100 random states: min MLE fidelity {min_fid:.6}, max linear-inversion error {lin_err:.1e}"),
    )
}

fn psd_sqrt(m: &Matrix4<Complex64>) -> Matrix4<Complex64> {
    let e = spinlattice::eigen_hermitian(m).unwrap();
    let mut out = Matrix4::zeros();
    for k in 0..4 {
        let v = e.vectors.column(k);
        out += v * v.adjoint() * Complex64::new(e.values[k].max(0.0).sqrt(), 0.0);
    }
    out
}

/// `(Tr sqrt(sqrt(a) b sqrt(a)))^2`
fn uhlmann(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    let s = psd_sqrt(a.matrix());
    let inner = s * b.matrix() * s;
    let inner = (inner + inner.adjoint()) * Complex64::new(0.5, 0.0);
    psd_sqrt(&inner).trace().re.powi(2)
}

fn noiseless_pipeline(field: &SpinOrbitField) -> (Outcome, TomographyMap) {
    let start = Instant::now();
    let map = reconstruct_counts(field.grid, &expected_counts(field, 1e6)).unwrap();
    let elapsed = start.elapsed();
    let worst = map
        .pixels
        .iter()
        .zip(&field.kets)
        .map(|(px, ket)| fidelity(&px.rho, ket))
        .fold(1.0, f64::min);
    let pass = worst >= 0.999 && elapsed < Duration::from_secs(120);
    (
        outcome(
            pass,
            format!(
                "{} pixels reconstructed in {:.2} s, min fidelity to the generating state {worst:.6}",
                map.pixels.len(),
                elapsed.as_secs_f64()
            ),
        ),
        map,
    )
}

fn theoretical_fraction(map: &TomographyMap) -> (Outcome, f64) {
    let w = entangled_fraction(&max_bell_fidelity(map), 0.5).unwrap();
    let f = w.entangled_fraction;
    (
        outcome(
            (f - 0.857).abs() <= 0.05,
            format!("entangled fraction {f:.4} (target 0.857 +- 0.05)"),
        ),
        f,
    )
}

fn cos2_lattice(n: usize, period: f64, phase: (f64, f64)) -> RealImage {
    let grid = GridGeometry::new(n, n, 13e-6, 1.0).unwrap();
    let data = (0..grid.len())
        .map(|k| {
            let (i, j) = grid.coords(k);
            let cx = (PI * (i as f64 - phase.0) / period).cos();
            let cy = (PI * (j as f64 - phase.1) / period).cos();
            cx * cx * cy * cy
        })
        .collect();
    RealImage::new(grid, data).unwrap()
}

fn lattice_spacing(grid: &GridGeometry, field: &SpinOrbitField) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let period = 0.519e-3 / grid.pixel_pitch;
    let mut synthetic = 0.0f64;
    for _ in 0..20 {
        let phase = (rng.random_range(0.0..period), rng.random_range(0.0..period));
        let est =
            estimate_lattice_spacing(&cos2_lattice(grid.width, period, phase), grid.pixel_pitch);
        let err = est.map_or(f64::INFINITY, |e| (e.spacing / 0.519e-3 - 1.0).abs());
        synthetic = synthetic.max(err);
    }
    let dd = theoretical_intensity(field, Polarization::D, Polarization::D);
    let (dd_pass, dd_detail) = match estimate_lattice_spacing(&dd, grid.pixel_pitch) {
        Ok(e) => (
            (e.spacing / 0.519e-3 - 1.0).abs() <= 0.03,
            format!(
                "(D,D) {:.4} +- {:.4} mm, axis periods {:.2}/{:.2} px",
                e.spacing * 1e3,
                e.uncertainty * 1e3,
                e.axis_periods.0,
                e.axis_periods.1
            ),
        ),
        Err(e) => (false, format!("(D,D) {e}")),
    };
    outcome(
        synthetic <= 0.03 && dd_pass,
        format!(
            "synthetic cos^2 worst relative error {:.2}% over 20 phases; {dd_detail} (target 0.519 mm +- 3%)",
            synthetic * 100.0
        ),
    )
}

fn noise_degradation(field: &SpinOrbitField, noiseless: f64) -> Outcome {
    // grid-averaged pair flux of 50 per pixel per setting, 5 background counts
    let mean_total = 50.0 * field.grid.len() as f64;
    let frames = Setting::canonical()
        .iter()
        .map(|&s| simulate_frame(field, s, mean_total, 5.0, 11, 2000).unwrap())
        .collect();
    let map = pixelwise_tomography(&MeasurementSet::new(frames).unwrap()).unwrap();
    let max = max_bell_fidelity(&map);
    let f = entangled_fraction(&max, 0.5).unwrap().entangled_fraction;
    let med = median(max.max.data.clone());
    outcome(
        f < noiseless && med > 0.25,
        format!("noisy fraction {f:.4} < noiseless {noiseless:.4}, median max fidelity {med:.4}"),
    )
}

fn statistical_consistency(field: &SpinOrbitField) -> Outcome {
    let (i, j) = (52, 81);
    let ket = field.ket(i, j);
    let rho = DensityMatrix::from_pure(ket);
    let probs = canonical_counts(&rho, 1.0);
    let mut medians = Vec::new();
    for (d, flux) in [1e2, 1e3, 1e4, 1e5].into_iter().enumerate() {
        let infid = (0..100u64)
            .map(|seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(1000 * d as u64 + seed);
                let counts = probs.map(|p| {
                    if p * flux > 0.0 {
                        rng.sample(Poisson::new(p * flux).unwrap())
                    } else {
                        0.0
                    }
                });
                1.0 - fidelity(&mle_reconstruct(&counts).unwrap().rho, ket)
            })
            .collect();
        medians.push(median(infid));
    }
    let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
    let shown: Vec<String> = medians.iter().map(|m| format!("{m:.2e}")).collect();
    outcome(
        decreasing,
        format!(
            "pixel ({i},{j}) median infidelity at flux 1e2..1e5: {}",
            shown.join(", ")
        ),
    )
}

fn run_cli(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_spinlattice"))
        .args(args)
        .status()
        .is_ok_and(|s| s.success())
}

fn pipeline(config: &Path, dir: &Path) -> bool {
    let d = dir.to_str().unwrap();
    let c = config.to_str().unwrap();
    run_cli(&["simulate", c, "--out", d])
        && run_cli(&["reconstruct", d])
        && run_cli(&[
            "analyze",
            &format!("{d}/tomography.tomo"),
            "--intensity",
            &format!("{d}/intensity_DH.csv"),
        ])
        && run_cli(&["render", &format!("{d}/intensity_DD.csv"), "--adaptive"])
        && run_cli(&[
            "render",
            &format!("{d}/frame_HH.txt"),
            "--sigma",
            "1.5",
            "--colormap",
            "hot",
        ])
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.cfg");
    fs::write(&config, "seed = 99\n").unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    if !(pipeline(&config, &a) && pipeline(&config, &b)) {
        return outcome(false, "pipeline command failed".into());
    }
    let mut names: Vec<_> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    let differing: Vec<String> = names
        .iter()
        .filter(|n| fs::read(a.join(n)).ok() != fs::read(b.join(n)).ok())
        .map(|n| n.to_string_lossy().into_owned())
        .collect();
    let kinds = ["frame_", ".tomo", ".csv", ".pgm"]
        .iter()
        .all(|k| names.iter().any(|n| n.to_string_lossy().contains(k)));
    outcome(
        differing.is_empty() && kinds,
        if differing.is_empty() {
            format!(
                "{} files (FRAME, TOMO, CSV, PGM, PPM, summary) byte-identical across two runs",
                names.len()
            )
        } else {
            format!("differing files: {}", differing.join(", "))
        },
    )
}

fn main() {
    let (grid, _params, field) = default_setup();
    let mut results: Vec<(u32, &str, Outcome, Duration)> = Vec::new();
    let mut timed = |n: u32, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        results.push((n, name, o, start.elapsed()));
    };

    timed(1, "operator correctness", &mut || {
        let start = Instant::now();
        let mut o = operators();
        if start.elapsed() >= Duration::from_secs(1) {
            o.pass = false;
            o.detail.push_str(" (over 1 s)");
        }
        o
    });
    timed(2, "per-pixel maximal entanglement", &mut || {
        let start = Instant::now();
        let mut o = maximal_entanglement(&field);
        if start.elapsed() >= Duration::from_secs(5) {
            o.pass = false;
            o.detail.push_str(" (over 5 s)");
        }
        o
    });
    timed(3, "intensity completeness", &mut || {
        intensity_completeness(&field)
    });
    timed(4, "tomography oracle", &mut || {
        let start = Instant::now();
        let mut o = tomography_oracle();
        if start.elapsed() >= Duration::from_secs(30) {
            o.pass = false;
            o.detail.push_str(" (over 30 s)");
        }
        o
    });
    let mut noiseless_map = None;
    timed(5, "end-to-end noiseless pipeline", &mut || {
        let (o, map) = noiseless_pipeline(&field);
        noiseless_map = Some(map);
        o
    });
    let map = noiseless_map.unwrap();
    let mut noiseless_fraction = 0.0;
    timed(6, "theoretical entangled fraction", &mut || {
        let (o, f) = theoretical_fraction(&map);
        noiseless_fraction = f;
        o
    });
    timed(7, "lattice spacing", &mut || lattice_spacing(&grid, &field));
    timed(8, "noise degradation", &mut || {
        noise_degradation(&field, noiseless_fraction)
    });
    timed(9, "statistical consistency", &mut || {
        statistical_consistency(&field)
    });
    timed(10, "determinism", &mut determinism);

    println!();
    for (n, name, o, t) in &results {
        println!(
            "{} {n:>2} {name}: {} [{:.2} s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.as_secs_f64()
        );
    }
    let passed = results.iter().filter(|r| r.2.pass).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
