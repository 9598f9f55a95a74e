//! Spectral purity of heralded single photons from the temporal width of
//! Hong-Ou-Mandel interference with a weak coherent reference.
//!
//! Angular frequencies are detunings in rad/s, times and delays in seconds.

pub mod error;
pub mod estimator;
pub mod fit;
pub mod grid;
pub mod hom;
pub mod pdc;
pub mod scenario;
pub mod spectral;
pub mod width;

pub use error::{Error, Result};
pub use estimator::{
    analyze, dip_width_analytic, overlap_analytic, overlap_from_visibility, purity_from_width, AnalysisInput,
    DipSamples, PurityReport, SpectrumInput,
};
pub use fit::{fit_gaussian, fit_gaussian_with, FitOptions, GaussianFitResult, GaussianShape, OffsetMode};
pub use grid::{DelayGrid, FrequencyGrid, TimeGrid};
pub use hom::{
    background_terms, coincidence_curve, interference_profile, overlap_at_zero, visibility, CoincidenceCurve,
    DipCurve, PhotonStatistics,
};
pub use pdc::{
    build_jsa, heralded_density, pm_from_material, GaussianFilter, JointSpectralAmplitude, PhaseMatchingSpec,
    PumpEnvelope,
};
pub use spectral::{
    gaussian_model_density, gaussian_reference, marginal_spectrum, purity_direct, temporal_correlation,
    ComplexSpectrum, MarginalSpectrum, SpectralDensity, TemporalCorrelation,
};
pub use width::{convert_width, WidthConvention, WidthSpec};
