use std::sync::OnceLock;

use nalgebra::{Matrix4, SMatrix, SVector};

use crate::error::{Error, Result};
use crate::frames::Setting;
use crate::qstate::{c, eigen_hermitian, DensityMatrix, Operator2, Tensor, C64};

type Design = SMatrix<f64, 16, 16>;

/// Index of the H/V ⊗ H/V settings in the canonical order.
pub const HV_SUBBASIS: [usize; 4] = [0, 1, 4, 5];

fn paulis() -> [Operator2; 4] {
    [
        Operator2::identity(),
        Operator2::pauli_x(),
        Operator2::pauli_y(),
        Operator2::pauli_z(),
    ]
}

/// Maps the 16 Pauli-product coefficients `r_ab` of
/// `rho = sum r_ab (sigma_a ⊗ sigma_b) / 4` to the 16 canonical Born
/// probabilities, and its inverse.
struct LinearModel {
    inverse: Design,
    basis: [Matrix4<C64>; 16],
}

fn model() -> &'static LinearModel {
    static MODEL: OnceLock<LinearModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let p = paulis();
        let basis: [Matrix4<C64>; 16] =
            std::array::from_fn(|ab| *p[ab / 4].tensor(&p[ab % 4]).matrix() * c(0.25, 0.0));
        let settings = Setting::canonical();
        let mut design = Design::zeros();
        for (k, s) in settings.iter().enumerate() {
            let ket = s.signal.ket().tensor(&s.idler.ket());
            let v = ket.vector();
            for (ab, b) in basis.iter().enumerate() {
                design[(k, ab)] = v.dotc(&(b * v)).re;
            }
        }
        let inverse = design
            .try_inverse()
            .expect("the {H,V,D,R}^2 design matrix is tomographically complete");
        LinearModel { inverse, basis }
    })
}

/// Total counts over the complete H/V ⊗ H/V sub-basis. Returns `None`
/// for a degenerate pixel whose four counts are all zero.
pub fn estimate_flux(counts: &[f64; 16]) -> Option<f64> {
    let flux: f64 = HV_SUBBASIS.iter().map(|&k| counts[k]).sum();
    (flux > 0.0).then_some(flux)
}

/// Unique Hermitian matrix reproducing `counts / flux` on the 16 canonical
/// projectors. May have negative eigenvalues.
pub fn linear_inversion(counts: &[f64; 16], flux: f64) -> Result<Matrix4<C64>> {
    if !(flux > 0.0 && flux.is_finite()) {
        return Err(Error::param("flux", "must be positive and finite"));
    }
    let m = model();
    let probs = SVector::<f64, 16>::from_iterator(counts.iter().map(|n| n / flux));
    let coeffs = m.inverse * probs;
    let mut rho = Matrix4::zeros();
    for (r, b) in coeffs.iter().zip(&m.basis) {
        rho += b * c(*r, 0.0);
    }
    Ok(rho)
}

/// Clamps negative eigenvalues to zero and renormalizes the trace.
/// Falls back to `I/4` when nothing positive remains.
pub fn project_to_physical(h: &Matrix4<C64>) -> Result<DensityMatrix> {
    let eig = eigen_hermitian(h)?;
    let clamped: Vec<f64> = eig.values.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if total <= 0.0 {
        return Ok(DensityMatrix::maximally_mixed());
    }
    let mut rho = Matrix4::zeros();
    for (i, lambda) in clamped.iter().enumerate() {
        if *lambda > 0.0 {
            let v = eig.vectors.column(i);
            rho += v * v.adjoint() * c(lambda / total, 0.0);
        }
    }
    // remove rounding asymmetry
    let rho = (rho + rho.adjoint()) * c(0.5, 0.0);
    Ok(DensityMatrix::new_unchecked(rho))
}

#[cfg(test)]
pub(crate) fn born_probabilities(rho: &DensityMatrix) -> [f64; 16] {
    let settings = Setting::canonical();
    std::array::from_fn(|k| {
        let s = settings[k];
        rho.expectation(&s.signal.ket().tensor(&s.idler.ket()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::testing::{random_density, random_hermitian};
    use crate::qstate::{max_abs_entry, BellState};
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector4;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn counts_for(rho: &DensityMatrix, flux: f64) -> [f64; 16] {
        born_probabilities(rho).map(|p| p * flux)
    }

    #[test]
    fn flux_from_hv_subbasis() {
        let mut counts = [7.0; 16];
        counts[0] = 25.0;
        counts[1] = 0.0;
        counts[4] = 0.0;
        counts[5] = 25.0;
        assert_eq!(estimate_flux(&counts), Some(50.0));

        let phi = DensityMatrix::from_pure(&BellState::PhiPlus.ket());
        assert_abs_diff_eq!(
            estimate_flux(&counts_for(&phi, 1000.0)).unwrap(),
            1000.0,
            epsilon = 1e-9
        );

        let mut degenerate = [3.0; 16];
        for k in HV_SUBBASIS {
            degenerate[k] = 0.0;
        }
        assert_eq!(estimate_flux(&degenerate), None);
    }

    #[test]
    fn inverts_exact_probabilities() {
        let mixed = DensityMatrix::maximally_mixed();
        let back = linear_inversion(&counts_for(&mixed, 1.0), 1.0).unwrap();
        assert!(max_abs_entry(&(back - mixed.matrix())) < 1e-10);

        let phi = DensityMatrix::from_pure(&BellState::PhiPlus.ket());
        let back = linear_inversion(&counts_for(&phi, 1.0), 1.0).unwrap();
        assert!(max_abs_entry(&(back - phi.matrix())) < 1e-10);

        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let rho = random_density(&mut rng);
            let counts = counts_for(&rho, 5e4);
            let flux = estimate_flux(&counts).unwrap();
            let back = linear_inversion(&counts, flux).unwrap();
            assert!(max_abs_entry(&(back - rho.matrix())) < 1e-10);
        }
    }

    #[test]
    fn perturbed_counts_may_be_unphysical() {
        // a pure state with a few counts knocked out leaves negative eigenvalues
        let phi = DensityMatrix::from_pure(&BellState::PhiPlus.ket());
        let mut counts = counts_for(&phi, 100.0);
        counts[10] = 0.0;
        counts[15] += 30.0;
        let flux = estimate_flux(&counts).unwrap();
        let h = linear_inversion(&counts, flux).unwrap();
        let eig = eigen_hermitian(&h).unwrap();
        assert!(eig.values[3] < 0.0);
    }

    #[test]
    fn zero_flux_rejected() {
        assert!(linear_inversion(&[0.0; 16], 0.0).is_err());
    }

    #[test]
    fn projection_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho = random_density(&mut rng);
        let same = project_to_physical(rho.matrix()).unwrap();
        assert!(max_abs_entry(&(same.matrix() - rho.matrix())) < 1e-10);

        let h = Matrix4::from_diagonal(&Vector4::new(
            c(1.2, 0.0),
            c(0.2, 0.0),
            c(-0.2, 0.0),
            c(-0.2, 0.0),
        ));
        let p = project_to_physical(&h).unwrap();
        let want = [1.2 / 1.4, 0.2 / 1.4, 0.0, 0.0];
        for (i, w) in want.iter().enumerate() {
            assert_abs_diff_eq!(p.matrix()[(i, i)].re, *w, epsilon = 1e-12);
        }

        let all_negative = Matrix4::identity() * c(-1.0, 0.0);
        assert_eq!(
            project_to_physical(&all_negative).unwrap(),
            DensityMatrix::maximally_mixed()
        );
    }

    #[test]
    fn projection_always_physical() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..1000 {
            let h = random_hermitian(&mut rng);
            let p = project_to_physical(&h).unwrap();
            assert!(DensityMatrix::new(*p.matrix()).is_ok());
            assert!(eigen_hermitian(p.matrix()).unwrap().values[3] >= -1e-12);
        }
    }
}
