//! Purity and overlap from the dip width, plus the analysis pipeline that turns
//! a measured or simulated dip into a [`PurityReport`].
//!
//! Width bookkeeping: a Gaussian-model state probed by a Gaussian reference
//! gives `I(tau) = T exp(-tau^2 / delta^2)` with
//! `delta^2 = 1/(2 sigma_g2^2) + 1/(2 sigma_beta^2)`, so `delta` is `sqrt 2` times
//! the fitted standard deviation of the dip and the dip FWHM is `2 sqrt(ln 2) delta`.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::fit::{fit_gaussian_with, FitOptions, GaussianFitResult, GaussianShape};
use crate::hom::{background_terms, outer_ranges, PhotonStatistics};

/// Closed-form purities in `(1, 1 + PURITY_CLAMP]` are clamped to 1 and flagged.
pub const PURITY_CLAMP: f64 = 0.05;
/// Far-delay samples must sit at least this many fitted sigmas from the dip center.
pub const PLATEAU_SIGMAS: f64 = 3.0;

pub fn delta_from_fitted_sigma(sigma_tau: f64) -> f64 {
    std::f64::consts::SQRT_2 * sigma_tau
}

pub fn fitted_sigma_from_delta(delta: f64) -> f64 {
    delta / std::f64::consts::SQRT_2
}

/// `delta = w / (2 sqrt(ln 2))` for a dip of intensity FWHM `w`.
pub fn delta_from_fwhm(fwhm: f64) -> f64 {
    fwhm / (2.0 * LN_2.sqrt())
}

pub fn fwhm_from_delta(delta: f64) -> f64 {
    2.0 * LN_2.sqrt() * delta
}

/// `delta^2 = 1/(2 sigma_g2^2) + 1/(2 sigma_beta^2)`.
pub fn dip_width_analytic(sigma_g2: f64, sigma_beta: f64) -> Result<f64> {
    require_positive("sigma_g2", sigma_g2)?;
    require_positive("sigma_beta", sigma_beta)?;
    Ok((0.5 / (sigma_g2 * sigma_g2) + 0.5 / (sigma_beta * sigma_beta)).sqrt())
}

/// `T = sqrt(2 / (sigma_g1^2 + sigma_beta^2)) / delta`.
pub fn overlap_analytic(sigma_g1: f64, sigma_beta: f64, delta: f64) -> Result<f64> {
    require_positive("sigma_g1", sigma_g1)?;
    require_positive("sigma_beta", sigma_beta)?;
    require_positive("delta", delta)?;
    let t = (2.0 / (sigma_g1 * sigma_g1 + sigma_beta * sigma_beta)).sqrt() / delta;
    if t > 1.0 + 1e-6 {
        return Err(Error::InconsistentWidths(format!(
            "overlap {t:.6} exceeds 1 for sigma_g1 = {sigma_g1:e}, sigma_beta = {sigma_beta:e}, delta = {delta:e}"
        )));
    }
    Ok(t.min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PurityEstimate {
    pub value: f64,
    /// The closed form gave a value in `(1, 1.05]` that was clamped to 1.
    pub clamped: bool,
}

/// `P = 1 / sqrt(2 sigma_g1^2 (delta^2 - 1/(2 sigma_beta^2)))`.
pub fn purity_from_width(sigma_g1: f64, sigma_beta: f64, delta: f64) -> Result<PurityEstimate> {
    require_positive("sigma_g1", sigma_g1)?;
    require_positive("sigma_beta", sigma_beta)?;
    require_positive("delta", delta)?;
    let limit = 0.5 / (sigma_beta * sigma_beta);
    let delta_sq = delta * delta;
    if delta_sq <= limit {
        return Err(Error::ReferenceLimited { delta_sq, limit });
    }
    let p = 1.0 / (2.0 * sigma_g1 * sigma_g1 * (delta_sq - limit)).sqrt();
    if p > 1.0 + PURITY_CLAMP {
        return Err(Error::InconsistentWidths(format!(
            "purity {p:.4} from widths exceeds 1 by more than {PURITY_CLAMP}"
        )));
    }
    Ok(PurityEstimate {
        value: p.min(1.0),
        clamped: p > 1.0,
    })
}

/// `T_vis = V (B + S) / S`; not clamped.
pub fn overlap_from_visibility(visibility: f64, stats: &PhotonStatistics) -> Result<f64> {
    stats.validate()?;
    let bt = background_terms(stats);
    if !(bt.s > 0.0) {
        return Err(Error::InvalidParameter {
            name: "p1 |beta|^2",
            reason: "interference weight S is zero".into(),
        });
    }
    Ok(visibility * (bt.b + bt.s) / bt.s)
}

/// Time scale of first-order coherence, `1 / sqrt(sigma_g1^2 - sigma_g2^2)`:
/// `|gamma(t, t')| = exp(-(t - t')^2 / (2 t_c^2))` for the Gaussian model.
/// `None` for a pure state.
pub fn coherence_time_scale(sigma_g1: f64, sigma_g2: f64) -> Option<f64> {
    let d = sigma_g1 * sigma_g1 - sigma_g2 * sigma_g2;
    (d > 0.0).then(|| 1.0 / d.sqrt())
}

/// Dip samples handed to [`analyze`].
#[derive(Debug, Clone, Copy)]
pub enum DipSamples<'a> {
    /// The interference term `I(tau)` itself.
    Interference { delay_s: &'a [f64], values: &'a [f64] },
    /// Raw or background-subtracted coincidences with a far-delay plateau.
    Coincidences { delay_s: &'a [f64], counts: &'a [f64] },
}

/// Source of `sigma_g1`.
#[derive(Debug, Clone, Copy)]
pub enum SpectrumInput<'a> {
    Sigma(f64),
    Samples { nu_rad_s: &'a [f64], density: &'a [f64] },
}

#[derive(Debug, Clone, Copy)]
pub struct AnalysisInput<'a> {
    pub dip: DipSamples<'a>,
    pub spectrum: SpectrumInput<'a>,
    pub sigma_beta: f64,
    pub statistics: Option<PhotonStatistics>,
    /// Measured visibility; when absent for coincidence data it is taken from the fit.
    pub visibility: Option<f64>,
    /// Purity from a direct computation, carried through for comparison.
    pub p_direct: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFlag {
    DipNonGaussian,
    SpectrumNonGaussian,
    PurityClamped,
    ReferenceLimited,
    InconsistentWidths,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurityReport {
    pub sigma_g1: f64,
    pub sigma_beta: f64,
    pub delta: f64,
    pub dip_fwhm_s: f64,
    pub dip_center_s: f64,
    #[serde(rename = "T_width")]
    pub t_width: Option<f64>,
    #[serde(rename = "P_width")]
    pub p_width: Option<f64>,
    #[serde(rename = "P_direct")]
    pub p_direct: Option<f64>,
    #[serde(rename = "V")]
    pub visibility: Option<f64>,
    #[serde(rename = "T_vis")]
    pub t_vis: Option<f64>,
    pub coherence_time_scale: Option<f64>,
    pub dip_fit: GaussianFitResult,
    pub flags: Vec<ReportFlag>,
}

/// Fit a coincidence dip with free plateau; errors when the outer delays are
/// still inside the dip.
pub fn fit_coincidence_dip(delay_s: &[f64], counts: &[f64]) -> Result<GaussianFitResult> {
    let fit = fit_gaussian_with(delay_s, counts, GaussianShape::Dip, &FitOptions::default())?;
    let mut sorted: Vec<f64> = delay_s.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = outer_ranges(sorted.len());
    let reach = (fit.center - sorted[lo - 1]).min(sorted[hi] - fit.center);
    if reach < PLATEAU_SIGMAS * fit.sigma {
        return Err(Error::NoPlateau(format!(
            "outer delays are only {:.2} fitted sigmas from the dip center (need {PLATEAU_SIGMAS})",
            reach / fit.sigma
        )));
    }
    Ok(fit)
}

pub fn analyze(input: &AnalysisInput<'_>) -> Result<PurityReport> {
    require_positive("sigma_beta", input.sigma_beta)?;
    let mut flags = Vec::new();

    let sigma_g1 = match input.spectrum {
        SpectrumInput::Sigma(s) => require_positive("sigma_g1", s)?,
        SpectrumInput::Samples { nu_rad_s, density } => {
            let fit = fit_gaussian_with(nu_rad_s, density, GaussianShape::Peak, &FitOptions::zero_offset())?;
            if fit.non_gaussian {
                flags.push(ReportFlag::SpectrumNonGaussian);
            }
            fit.sigma
        }
    };

    let (dip_fit, fitted_visibility) = match input.dip {
        DipSamples::Interference { delay_s, values } => (
            fit_gaussian_with(delay_s, values, GaussianShape::Peak, &FitOptions::zero_offset())?,
            None,
        ),
        DipSamples::Coincidences { delay_s, counts } => {
            let fit = fit_coincidence_dip(delay_s, counts)?;
            let v = fit.amplitude / fit.offset;
            (fit, Some(v))
        }
    };
    if dip_fit.non_gaussian {
        flags.push(ReportFlag::DipNonGaussian);
    }
    let delta = delta_from_fitted_sigma(dip_fit.sigma);

    let t_width = match overlap_analytic(sigma_g1, input.sigma_beta, delta) {
        Ok(t) => Some(t),
        Err(Error::InconsistentWidths(_)) => {
            flags.push(ReportFlag::InconsistentWidths);
            None
        }
        Err(e) => return Err(e),
    };
    let p_width = match purity_from_width(sigma_g1, input.sigma_beta, delta) {
        Ok(p) => {
            if p.clamped {
                flags.push(ReportFlag::PurityClamped);
            }
            Some(p.value)
        }
        Err(Error::ReferenceLimited { .. }) => {
            flags.push(ReportFlag::ReferenceLimited);
            None
        }
        Err(Error::InconsistentWidths(_)) => {
            if !flags.contains(&ReportFlag::InconsistentWidths) {
                flags.push(ReportFlag::InconsistentWidths);
            }
            None
        }
        Err(e) => return Err(e),
    };

    let visibility = input.visibility.or(fitted_visibility);
    let t_vis = match (visibility, input.statistics) {
        (Some(v), Some(stats)) => Some(overlap_from_visibility(v, &stats)?),
        _ => None,
    };
    let coherence = p_width.and_then(|p| coherence_time_scale(sigma_g1, sigma_g1 * p));

    Ok(PurityReport {
        sigma_g1,
        sigma_beta: input.sigma_beta,
        delta,
        dip_fwhm_s: fwhm_from_delta(delta),
        dip_center_s: dip_fit.center,
        t_width,
        p_width,
        p_direct: input.p_direct,
        visibility,
        t_vis,
        coherence_time_scale: coherence,
        dip_fit,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dip_width_cases() {
        let s = 2.5e12;
        assert!((dip_width_analytic(s, s).unwrap() * s - 1.0).abs() < 1e-14);
        let limit = dip_width_analytic(1e30, s).unwrap();
        assert!((limit - 1.0 / (s * 2f64.sqrt())).abs() < 1e-14 * limit);
        let d = dip_width_analytic(s / 2.0, s).unwrap();
        assert!((d * s - 2.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn matched_pure_case() {
        let s = 1.3e12;
        assert!((overlap_analytic(s, s, 1.0 / s).unwrap() - 1.0).abs() < 1e-12);
        let p = purity_from_width(s, s, 1.0 / s).unwrap();
        assert!((p.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reference_limited_and_inconsistent() {
        let s = 1.0;
        assert!(matches!(
            purity_from_width(s, s, 0.5),
            Err(Error::ReferenceLimited { .. })
        ));
        assert!(overlap_analytic(1.0, 1.0, 0.5).is_err());
        // Slightly too narrow: clamped.
        let p = purity_from_width(1.0, 1.0, 0.99).unwrap();
        assert!(p.clamped && p.value == 1.0);
        assert!(purity_from_width(1.0, 1.0, 0.85).is_err());
    }

    #[test]
    fn purity_decreases_with_width() {
        let mut last = f64::INFINITY;
        for k in 0..20 {
            let d = 1.0 + 0.1 * k as f64;
            let p = purity_from_width(1.0, 1.0, d).unwrap().value;
            assert!(p < last || (k == 0 && p <= 1.0));
            last = p;
        }
    }

    #[test]
    fn visibility_inversion() {
        let stats = PhotonStatistics::new(0.997015, 0.002978, 0.000006, 0.0030).unwrap();
        assert_eq!(overlap_from_visibility(0.0, &stats).unwrap(), 0.0);
        let bt = background_terms(&stats);
        let v = 0.46 * bt.s / (bt.b + bt.s);
        assert!((v - 0.2117).abs() < 5e-4);
        assert!((overlap_from_visibility(v, &stats).unwrap() - 0.46).abs() < 1e-12);
        let clean = PhotonStatistics::new(0.0, 0.5, 0.0, 1.0).unwrap();
        assert!((overlap_from_visibility(0.3, &clean).unwrap() - 0.3).abs() < 1e-15);
        let dark = PhotonStatistics::new(1.0, 0.0, 0.0, 1.0).unwrap();
        assert!(overlap_from_visibility(0.3, &dark).is_err());
    }

    #[test]
    fn fwhm_round_trip() {
        let w = 1.75e-12;
        assert!((fwhm_from_delta(delta_from_fwhm(w)) - w).abs() < 1e-27);
        let s = w / crate::width::fwhm_per_sigma();
        assert!((delta_from_fitted_sigma(s) - delta_from_fwhm(w)).abs() < 1e-12 * w);
    }
}
