//! Lagged association and lagged coherence between two multivariate time
//! series in the frequency domain.
//!
//! The lagged part of the association from `X` to `Y` compares two
//! least-squares fits of `Y(ω)` on `X(ω)`: one with unrestricted complex
//! coefficients and one restricted to real (zero-lag) coefficients. Measures
//! built from the two residual covariances are invariant to real
//! nonsingular transforms of either block and to instantaneous coupling.

pub mod cli_io;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod measures;
pub mod regression;
pub mod simulate;
pub mod special;
pub mod spectra;

pub use nalgebra;
pub use ndarray;
pub use num_complex;

pub use error::{Error, ErrorClass, Result};
pub use inference::{f_test_bivariate, lrt_chi_square, TestKind, TestReport};
pub use measures::{
    bivariate_lagged, lagged_measures, legacy_lag_c, measures_from_cross_spectra, multiple_correlations,
    univariate_multivariate_lagged, LaggedResult,
};
pub use regression::{constrained_fit, fit, psd_order_check, unconstrained_fit, FitOptions, RegressionFit};
pub use simulate::{generate_spectral, generate_var, random_mixing, GenerativeModel, PopulationSpectra, XSpec};
pub use spectra::{
    band_aggregate, cross_spectra, dft_epochs, normalize_to_phase, CrossSpectra, EpochedTimeSeries, SpectralLabel,
    SpectralTensor,
};
