//! Simulation and pixel-wise tomography of a remotely prepared spin-orbit
//! lattice two-photon state.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`lattice`] and [`field`] evaluate the prism-pair operators and the
//!    per-pixel two-photon state, plus the theoretical projection
//!    intensities of all 16 polarization settings.
//! 2. [`frames`] draws Poisson photon-count frames for those settings.
//! 3. [`tomography`] reconstructs a physical density matrix at every pixel.
//! 4. [`analysis`] turns the reconstruction into Bell-fidelity maps, the
//!    highest-fidelity histogram, the entangled-pixel fraction, and the
//!    lattice-spacing estimate. [`imaging`] handles the display path.

pub mod analysis;
pub mod error;
pub mod field;
pub mod frames;
pub mod grid;
pub mod imaging;
pub mod io;
pub mod lattice;
pub mod qstate;
pub mod tomography;

pub use analysis::{
    bell_fidelity_map, entangled_fraction, estimate_lattice_spacing, fidelity_histogram,
    map_difference, max_bell_fidelity, FidelityHistogram, FidelityMap, MaxFidelity,
    SpacingEstimate, WitnessSummary,
};
pub use error::{Error, Result};
pub use field::{
    evaluate_field, projection_probability, theoretical_intensity, BeamEnvelope, SpinOrbitField,
};
pub use frames::{expected_counts, simulate_frame, CountFrame, Setting};
pub use grid::{GridGeometry, RealImage};
pub use imaging::{
    adaptive_sigma, gaussian_filter, normalize, render, subtract_background, Background, Colormap,
    Encoding, FilterConfig, Smoothing,
};
pub use lattice::{
    circular_amplitudes, gradient_unitary_x, gradient_unitary_y, lattice_spacing, lov_operator,
    lov_state, LatticeParams,
};
pub use qstate::{
    bell_state, eigen_hermitian, fidelity, partial_trace, polarization_ket, tensor, BellState,
    DensityMatrix, Ket2, Operator2, Operator4, Polarization, Subsystem, Tensor, TwoQubitKet,
};
pub use tomography::{
    mle_reconstruct, pixelwise_tomography, reconstruct_counts, MeasurementSet,
    PixelTomographyResult, TomographyMap, TomographyStatus,
};
