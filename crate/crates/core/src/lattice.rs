//! Birefringent gradient operators of the lattice-of-optical-vortices
//! prism pairs and the resulting two-photon spin-orbit state.
//!
//! Coordinates here are prism-plane (field) coordinates in metres.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector4};

use crate::error::{Error, Result};
use crate::qstate::{c, BellState, Operator2, Polarization, TwoQubitKet, C64};

/// Physical parameters of the prism-pair lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeParams {
    /// Wavelength in metres.
    pub wavelength: f64,
    /// Prism birefringence.
    pub delta_n: f64,
    /// Prism incline angle in radians.
    pub incline_theta: f64,
    /// Gradient origin in the field plane, metres.
    pub origin_x0: f64,
    pub origin_y0: f64,
    /// Number of prism-pair sets the signal photon passes through.
    pub n_passes: u32,
}

impl LatticeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::param("wavelength", "must be positive and finite"));
        }
        let denom = self.delta_n * self.incline_theta.tan();
        if !(denom > 0.0 && denom.is_finite()) {
            return Err(Error::param(
                "delta_n",
                format!(
                    "delta_n * tan(incline_theta) = {denom} must be positive (lattice spacing would be infinite)"
                ),
            ));
        }
        if !(self.origin_x0.is_finite() && self.origin_y0.is_finite()) {
            return Err(Error::param("origin_x0/origin_y0", "must be finite"));
        }
        if self.n_passes == 0 {
            return Err(Error::param("n_passes", "must be at least 1"));
        }
        Ok(())
    }

    /// Back-computes the birefringence that yields `spacing` for the
    /// given wavelength and incline angle.
    pub fn with_spacing(
        wavelength: f64,
        spacing: f64,
        incline_theta: f64,
        origin: (f64, f64),
        n_passes: u32,
    ) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::param("spacing", "must be positive and finite"));
        }
        let params = LatticeParams {
            wavelength,
            delta_n: wavelength / (spacing * incline_theta.tan()),
            incline_theta,
            origin_x0: origin.0,
            origin_y0: origin.1,
            n_passes,
        };
        params.validate()?;
        Ok(params)
    }

    /// `a = lambda / (delta_n tan theta)`, without validation.
    #[inline]
    pub fn spacing(&self) -> f64 {
        self.wavelength / (self.delta_n * self.incline_theta.tan())
    }
}

/// Lattice spacing `a = lambda / (delta_n tan theta)` in metres.
pub fn lattice_spacing(params: &LatticeParams) -> Result<f64> {
    params.validate()?;
    Ok(params.spacing())
}

/// `exp(i phi sigma_x) = cos(phi) I + i sin(phi) sigma_x`
#[inline]
fn exp_i_sigma_x(phi: f64) -> Operator2 {
    let (s, co) = phi.sin_cos();
    Operator2::from_matrix(Matrix2::new(c(co, 0.0), c(0.0, s), c(0.0, s), c(co, 0.0)))
}

/// `exp(i psi sigma_z) = diag(e^{i psi}, e^{-i psi})`
#[inline]
fn exp_i_sigma_z(psi: f64) -> Operator2 {
    let (s, co) = psi.sin_cos();
    Operator2::from_matrix(Matrix2::new(c(co, s), c(0.0, 0.0), c(0.0, 0.0), c(co, -s)))
}

/// Horizontal gradient `U_x = exp(i (pi/a)(x - x0) sigma_x)`.
pub fn gradient_unitary_x(x: f64, params: &LatticeParams) -> Operator2 {
    exp_i_sigma_x(PI * (x - params.origin_x0) / params.spacing())
}

/// Vertical gradient `U_y = exp(i (pi/a)(y - y0) sigma_z)`.
pub fn gradient_unitary_y(y: f64, params: &LatticeParams) -> Operator2 {
    exp_i_sigma_z(PI * (y - params.origin_y0) / params.spacing())
}

/// `(U_x U_y)^N` with `N = n_passes`.
pub fn lov_operator(x: f64, y: f64, params: &LatticeParams) -> Operator2 {
    let single = gradient_unitary_x(x, params) * gradient_unitary_y(y, params);
    single.pow(params.n_passes)
}

/// Circular-basis amplitudes `(A, B)` with `U|L> = A|L> + B|R>`.
pub fn circular_amplitudes(x: f64, y: f64, params: &LatticeParams) -> (C64, C64) {
    let u = lov_operator(x, y, params);
    let l = Polarization::L.ket();
    let r = Polarization::R.ket();
    (u.element(&l, &l), u.element(&r, &l))
}

/// The normalized two-photon state `(U ⊗ I)|Phi+>` at one point; the
/// beam envelope is kept separately.
pub fn lov_state(x: f64, y: f64, params: &LatticeParams) -> TwoQubitKet {
    state_from_operator(&lov_operator(x, y, params))
}

/// `(U ⊗ I)|Phi+>` for an arbitrary signal operator.
pub(crate) fn state_from_operator(u: &Operator2) -> TwoQubitKet {
    let phi = BellState::PhiPlus.ket();
    let a = phi.amplitudes();
    let m = u.matrix();
    // |Phi+> = (|HH> + |VV>)/sqrt2, so (U ⊗ I)|Phi+> has amplitude
    // U[s, k] * a[2k + k] on |s k>
    let v = Vector4::new(
        m[(0, 0)] * a[0],
        m[(0, 1)] * a[3],
        m[(1, 0)] * a[0],
        m[(1, 1)] * a[3],
    );
    TwoQubitKet::from_vector_unchecked(v)
}
