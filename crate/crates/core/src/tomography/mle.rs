//! Poisson maximum-likelihood refinement over the Cholesky parametrization
//! `rho = T^dagger T / Tr(T^dagger T)` with `T` lower triangular.

use std::sync::OnceLock;

use nalgebra::{Cholesky, Matrix4};

use crate::error::{Error, Result};
use crate::frames::Setting;
use crate::qstate::{c, eigen_hermitian, DensityMatrix, Tensor, C64};

use super::linear::{estimate_flux, linear_inversion, project_to_physical};

/// Guard added to every expected count before taking its logarithm.
pub const LOG_GUARD: f64 = 1e-12;
/// Diagonal jitter applied to rank-deficient seeds.
pub const SEED_JITTER: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;
pub const DEFAULT_REL_TOL: f64 = 1e-13;

const N: usize = 16;

/// Off-diagonal positions of `T`, in parameter order.
const LOWER: [(usize, usize); 6] = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)];

/// 16 reals: the diagonal of `T` followed by `(re, im)` of each
/// sub-diagonal entry in the order (1,0), (2,0), (2,1), (3,0), (3,1), (3,2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CholeskyParams(pub [f64; N]);

type Tri = [[C64; 4]; 4];

impl CholeskyParams {
    fn lower(&self) -> Tri {
        let t = &self.0;
        let mut m = [[c(0.0, 0.0); 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = c(t[i], 0.0);
        }
        for (k, &(i, j)) in LOWER.iter().enumerate() {
            m[i][j] = c(t[4 + 2 * k], t[5 + 2 * k]);
        }
        m
    }

    /// `Tr(T^dagger T)`, the squared Frobenius norm of the parameters.
    pub fn scale(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    /// Maps to `T^dagger T / Tr(T^dagger T)`; `None` for the zero vector.
    pub fn to_density(&self) -> Option<DensityMatrix> {
        let tau = self.scale();
        if !(tau > 0.0 && tau.is_finite()) {
            return None;
        }
        let t = self.lower();
        let tm = Matrix4::from_fn(|i, j| t[i][j]);
        let rho = tm.adjoint() * tm / c(tau, 0.0);
        Some(DensityMatrix::new_unchecked(
            (rho + rho.adjoint()) * c(0.5, 0.0),
        ))
    }

    /// Parameters whose image is `rho`. Rank-deficient inputs receive a
    /// `1e-8` diagonal jitter first so every diagonal entry of `T` is
    /// strictly positive.
    pub fn from_density(rho: &DensityMatrix) -> Result<Self> {
        let eig = eigen_hermitian(rho.matrix())?;
        let mut m = *rho.matrix();
        if eig.values[3] < SEED_JITTER {
            m = (m + Matrix4::identity() * c(SEED_JITTER, 0.0)) / c(1.0 + 4.0 * SEED_JITTER, 0.0);
        }
        // T^dagger T = rho with T lower  <=>  J rho J = L L^dagger, T = J L^dagger J
        let reversed = Matrix4::from_fn(|i, j| m[(3 - i, 3 - j)]);
        let chol = Cholesky::new(reversed)
            .ok_or_else(|| Error::NotPhysical("seed is not positive definite".into()))?;
        let l = chol.l();
        let t = Matrix4::from_fn(|i, j| l[(3 - j, 3 - i)].conj());
        let mut p = [0.0; N];
        for i in 0..4 {
            p[i] = t[(i, i)].re;
        }
        for (k, &(i, j)) in LOWER.iter().enumerate() {
            p[4 + 2 * k] = t[(i, j)].re;
            p[5 + 2 * k] = t[(i, j)].im;
        }
        let params = CholeskyParams(p);
        let norm = params.scale().sqrt();
        Ok(CholeskyParams(p.map(|v| v / norm)))
    }
}

/// Product kets of the 16 canonical settings.
fn projector_kets() -> &'static [[C64; 4]; N] {
    static KETS: OnceLock<[[C64; 4]; N]> = OnceLock::new();
    KETS.get_or_init(|| {
        let s = Setting::canonical();
        std::array::from_fn(|k| s[k].signal.ket().tensor(&s[k].idler.ket()).amplitudes())
    })
}

/// `T psi` for lower-triangular `T`.
#[inline]
fn apply_lower(t: &Tri, psi: &[C64; 4]) -> [C64; 4] {
    let mut out = [c(0.0, 0.0); 4];
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = c(0.0, 0.0);
        for j in 0..=i {
            acc += t[i][j] * psi[j];
        }
        *o = acc;
    }
    out
}

/// `sum_k [nbar_k - n_k ln nbar_k]`, `nbar_k = flux <Pi_k> + 1e-12`.
pub fn negative_log_likelihood(params: &CholeskyParams, counts: &[f64; 16], flux: f64) -> f64 {
    objective(params, counts, flux, None)
}

/// Evaluates the NLL and, when requested, its gradient in parameter space.
fn objective(
    params: &CholeskyParams,
    counts: &[f64; 16],
    flux: f64,
    mut grad: Option<&mut [f64; N]>,
) -> f64 {
    let tau = params.scale();
    let t = params.lower();
    let kets = projector_kets();
    if let Some(g) = grad.as_deref_mut() {
        g.fill(0.0);
    }
    let mut nll = 0.0;
    for (psi, &n) in kets.iter().zip(counts) {
        let v = apply_lower(&t, psi);
        let q: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let p = q / tau;
        let nbar = flux * p + LOG_GUARD;
        nll += nbar - n * nbar.ln();

        if let Some(g) = grad.as_deref_mut() {
            // dNLL/dp * dp/dtheta, dp = (dq - p dtau) / tau
            let w = flux * (1.0 - n / nbar) / tau;
            let d = |i: usize, j: usize| v[i].conj() * psi[j];
            for (i, gi) in g.iter_mut().take(4).enumerate() {
                *gi += w * (2.0 * d(i, i).re - p * 2.0 * params.0[i]);
            }
            for (k, &(i, j)) in LOWER.iter().enumerate() {
                let z = d(i, j);
                g[4 + 2 * k] += w * (2.0 * z.re - p * 2.0 * params.0[4 + 2 * k]);
                g[5 + 2 * k] += w * (-2.0 * z.im - p * 2.0 * params.0[5 + 2 * k]);
            }
        }
    }
    nll
}

/// Outcome of a single-pixel reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TomographyStatus {
    Converged,
    MaxIter,
    DegenerateZeroCounts,
}

impl TomographyStatus {
    pub fn code(self) -> u8 {
        match self {
            TomographyStatus::Converged => 0,
            TomographyStatus::MaxIter => 1,
            TomographyStatus::DegenerateZeroCounts => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(TomographyStatus::Converged),
            1 => Some(TomographyStatus::MaxIter),
            2 => Some(TomographyStatus::DegenerateZeroCounts),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelTomographyResult {
    pub rho: DensityMatrix,
    pub nll: f64,
    pub iterations: usize,
    pub flux_estimate: f64,
    pub status: TomographyStatus,
}

impl PixelTomographyResult {
    pub fn degenerate() -> Self {
        PixelTomographyResult {
            rho: DensityMatrix::maximally_mixed(),
            nll: 0.0,
            iterations: 0,
            flux_estimate: 0.0,
            status: TomographyStatus::DegenerateZeroCounts,
        }
    }
}

/// Optimizer limits.
#[derive(Debug, Clone, Copy)]
pub struct MleOptions {
    pub max_iter: usize,
    /// Stop once `(f_prev - f) <= rel_tol * max(|f|, 1)`.
    pub rel_tol: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            max_iter: DEFAULT_MAX_ITER,
            rel_tol: DEFAULT_REL_TOL,
        }
    }
}

/// Reconstructs one pixel from its 16 counts in canonical setting order.
pub fn mle_reconstruct(counts: &[f64; 16]) -> Result<PixelTomographyResult> {
    mle_reconstruct_traced(counts, &MleOptions::default(), None)
}

/// As [`mle_reconstruct`], but checks that `settings` is the canonical order.
pub fn mle_reconstruct_ordered(
    settings: &[Setting],
    counts: &[f64],
) -> Result<PixelTomographyResult> {
    let canonical = Setting::canonical();
    if settings.len() != 16 || counts.len() != 16 {
        return Err(Error::InvalidMeasurementSet(format!(
            "expected 16 settings and counts, got {} and {}",
            settings.len(),
            counts.len()
        )));
    }
    if let Some(k) = (0..16).find(|&k| settings[k] != canonical[k]) {
        return Err(Error::InvalidMeasurementSet(format!(
            "setting {} at position {k} where {} is required",
            settings[k].code(),
            canonical[k].code()
        )));
    }
    let mut arr = [0.0; 16];
    arr.copy_from_slice(counts);
    mle_reconstruct(&arr)
}

/// Full reconstruction; when `history` is given, every accepted NLL value
/// (starting with the seed) is appended to it.
pub fn mle_reconstruct_traced(
    counts: &[f64; 16],
    options: &MleOptions,
    mut history: Option<&mut Vec<f64>>,
) -> Result<PixelTomographyResult> {
    if let Some(bad) = counts.iter().position(|n| !(n.is_finite() && *n >= 0.0)) {
        return Err(Error::param(
            "counts",
            format!("count {bad} is negative or non-finite"),
        ));
    }
    let Some(flux) = estimate_flux(counts) else {
        return Ok(PixelTomographyResult::degenerate());
    };

    let seed_rho = project_to_physical(&linear_inversion(counts, flux)?)?;
    let seed = CholeskyParams::from_density(&seed_rho)?;

    // optimize NLL / flux so the gradient is O(1) at any count level
    let f = |p: &CholeskyParams, g: Option<&mut [f64; N]>| match g {
        Some(g) => {
            let v = objective(p, counts, flux, Some(&mut *g));
            g.iter_mut().for_each(|gi| *gi /= flux);
            v / flux
        }
        None => objective(p, counts, flux, None) / flux,
    };
    let (best, iterations, converged) = bfgs(seed, &f, options, |v| {
        if let Some(h) = history.as_deref_mut() {
            h.push(v * flux);
        }
    });

    let rho = best
        .to_density()
        .unwrap_or_else(DensityMatrix::maximally_mixed);
    Ok(PixelTomographyResult {
        rho,
        nll: negative_log_likelihood(&best, counts, flux),
        iterations,
        flux_estimate: flux,
        status: if converged {
            TomographyStatus::Converged
        } else {
            TomographyStatus::MaxIter
        },
    })
}

fn dot(a: &[f64; N], b: &[f64; N]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// BFGS with Armijo backtracking. Only decreasing steps are accepted, so the
/// reported objective sequence is non-increasing. Returns
/// `(argmin, iterations, converged)`.
fn bfgs<F, H>(
    start: CholeskyParams,
    f: &F,
    options: &MleOptions,
    mut on_accept: H,
) -> (CholeskyParams, usize, bool)
where
    F: Fn(&CholeskyParams, Option<&mut [f64; N]>) -> f64,
    H: FnMut(f64),
{
    const ARMIJO: f64 = 1e-4;
    const MAX_HALVINGS: usize = 60;

    let mut x = start;
    let mut g = [0.0; N];
    let mut fx = f(&x, Some(&mut g));
    on_accept(fx);
    let mut hinv = identity();
    let mut fresh = true;

    for iter in 0..options.max_iter {
        if dot(&g, &g).sqrt() < 1e-14 {
            return (x, iter, true);
        }
        let mut d = matvec_neg(&hinv, &g);
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            hinv = identity();
            fresh = true;
            d = g.map(|v| -v);
            slope = -dot(&g, &g);
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial = CholeskyParams(std::array::from_fn(|i| x.0[i] + step * d[i]));
            let ft = f(&trial, None);
            if ft.is_finite() && ft <= fx + ARMIJO * step * slope && ft < fx {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            if fresh {
                // steepest descent cannot improve: stationary to precision
                return (x, iter, true);
            }
            hinv = identity();
            fresh = true;
            continue;
        };

        let mut g_new = [0.0; N];
        f(&x_new, Some(&mut g_new));
        let improvement = fx - f_new;

        let s: [f64; N] = std::array::from_fn(|i| x_new.0[i] - x.0[i]);
        let y: [f64; N] = std::array::from_fn(|i| g_new[i] - g[i]);
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if fresh {
                // scale the initial inverse Hessian to the observed curvature
                let gamma = sy / dot(&y, &y);
                hinv = identity().map(|row| row.map(|v| v * gamma));
            }
            bfgs_update(&mut hinv, &s, &y, sy);
            fresh = false;
        }

        x = x_new;
        fx = f_new;
        g = g_new;
        on_accept(fx);

        // parameters are scale-free; keep them near unit norm
        let norm = x.scale().sqrt();
        if !(1e-3..=1e3).contains(&norm) {
            x = CholeskyParams(x.0.map(|v| v / norm));
            g = g.map(|v| v * norm);
            hinv = identity();
            fresh = true;
        }

        if improvement <= options.rel_tol * fx.abs().max(1.0) {
            return (x, iter + 1, true);
        }
    }
    (x, options.max_iter, false)
}

type Dense = [[f64; N]; N];

fn identity() -> Dense {
    let mut m = [[0.0; N]; N];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

fn matvec_neg(m: &Dense, v: &[f64; N]) -> [f64; N] {
    std::array::from_fn(|i| -dot(&m[i], v))
}

/// `H <- (I - r s y^T) H (I - r y s^T) + r s s^T`, `r = 1 / s.y`
fn bfgs_update(h: &mut Dense, s: &[f64; N], y: &[f64; N], sy: f64) {
    let r = 1.0 / sy;
    let hy: [f64; N] = std::array::from_fn(|i| dot(&h[i], y));
    let yhy = dot(y, &hy);
    for i in 0..N {
        for j in 0..N {
            h[i][j] += -r * (s[i] * hy[j] + hy[i] * s[j]) + (r * r * yhy + r) * s[i] * s[j];
        }
    }
}
