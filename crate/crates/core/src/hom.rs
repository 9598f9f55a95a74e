//! Hong-Ou-Mandel interference between a single-photon state and a weak
//! coherent reference: dip profile, coincidence probabilities and visibility.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_gaussian_with, FitOptions, GaussianFitResult, GaussianShape};
use crate::grid::{DelayGrid, FrequencyGrid};
use crate::spectral::{ComplexSpectrum, SpectralDensity};

/// Largest tolerated imaginary part of `I(tau)`.
pub const IMAGINARY_TOLERANCE: f64 = 1e-9;
/// Fraction of the delay range (split over both ends) used as the far-delay plateau.
pub const PLATEAU_FRACTION: f64 = 0.10;
/// Interference remaining on the plateau, relative to the dip depth, above which
/// the plateau is considered missing.
pub const PLATEAU_TOLERANCE: f64 = 0.01;

/// Sampled interference term `I(tau)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DipCurve {
    delays: DelayGrid,
    values: Vec<f64>,
    imag_residue: f64,
}

impl DipCurve {
    pub fn new(delays: DelayGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != delays.len() {
            return Err(Error::GridMismatch(format!(
                "{} values on a {}-point delay grid",
                values.len(),
                delays.len()
            )));
        }
        Ok(DipCurve {
            delays,
            values,
            imag_residue: 0.0,
        })
    }

    pub fn delays(&self) -> &DelayGrid {
        &self.delays
    }

    pub fn delay_points(&self) -> Vec<f64> {
        self.delays.points()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest `|Im I(tau)|` discarded when the curve was computed.
    pub fn imag_residue(&self) -> f64 {
        self.imag_residue
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Gaussian fit of `I(tau)` (a peak on zero background).
    pub fn fit(&self) -> Result<GaussianFitResult> {
        fit_gaussian_with(
            &self.delay_points(),
            &self.values,
            GaussianShape::Peak,
            &FitOptions::zero_offset(),
        )
    }

    /// Largest value over the outer [`PLATEAU_FRACTION`] of the delay range,
    /// relative to the peak.
    pub fn plateau_residual(&self) -> f64 {
        let (lo, hi) = outer_ranges(self.values.len());
        let edge = self.values[..lo]
            .iter()
            .chain(&self.values[hi..])
            .fold(0.0f64, |m, v| m.max(v.abs()));
        edge / self.peak()
    }
}

/// Index bounds `[0, lo)` and `[hi, n)` of the outer plateau samples.
pub(crate) fn outer_ranges(n: usize) -> (usize, usize) {
    let k = ((n as f64 * PLATEAU_FRACTION / 2.0).round() as usize).max(1);
    (k, n - k)
}

fn reference_on(g_grid: &FrequencyGrid, u: &ComplexSpectrum) -> Result<ComplexSpectrum> {
    if u.grid().matches(g_grid) {
        return Ok(u.clone());
    }
    if u.grid().max() <= g_grid.min() || u.grid().min() >= g_grid.max() {
        return Err(Error::GridMismatch(
            "reference spectrum does not overlap the density grid".into(),
        ));
    }
    u.resample(g_grid)
}

fn quadratic_form(g: &Array2<Complex64>, v: &[Complex64]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (j, row) in g.outer_iter().enumerate() {
        let gv: Complex64 = row.iter().zip(v).map(|(a, b)| a * b).sum();
        acc += v[j].conj() * gv;
    }
    acc
}

/// `I(tau) = sum u*(w) g(w, w') u(w') exp(i tau (w - w')) step^2` on every delay.
pub fn interference_profile(
    g: &SpectralDensity,
    u: &ComplexSpectrum,
    delays: &DelayGrid,
) -> Result<DipCurve> {
    let grid = g.grid();
    let alias_limit = std::f64::consts::PI / grid.step();
    if delays.max_abs() >= alias_limit {
        return Err(Error::Aliasing(format!(
            "delays reach {:.4e} s but the frequency step only supports |tau| < {alias_limit:.4e} s",
            delays.max_abs()
        )));
    }
    let u = reference_on(grid, u)?;
    let nu = grid.points();
    let step_sq = grid.step() * grid.step();
    let raw: Vec<Complex64> = delays
        .points()
        .par_iter()
        .map(|&tau| {
            let v: Vec<Complex64> = u
                .amplitude()
                .iter()
                .zip(&nu)
                .map(|(a, &w)| a * Complex64::from_polar(1.0, -tau * w))
                .collect();
            quadratic_form(g.values(), &v) * step_sq
        })
        .collect();
    let imag_residue = raw.iter().fold(0.0f64, |m, v| m.max(v.im.abs()));
    if imag_residue > IMAGINARY_TOLERANCE {
        return Err(Error::NotHermitian {
            asymmetry: imag_residue,
        });
    }
    Ok(DipCurve {
        delays: *delays,
        values: raw.iter().map(|v| v.re).collect(),
        imag_residue,
    })
}

/// Overlap factor `T = I(0)`.
pub fn overlap_at_zero(g: &SpectralDensity, u: &ComplexSpectrum) -> Result<f64> {
    let u = reference_on(g.grid(), u)?;
    let step = g.grid().step();
    let t = quadratic_form(g.values(), u.amplitude()) * step * step;
    Ok(t.re.min(1.0))
}

/// Photon-number probabilities of the heralded arm and the reference mean photon number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonStatistics {
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
    pub beta_sq: f64,
}

impl PhotonStatistics {
    pub fn new(p0: f64, p1: f64, p2: f64, beta_sq: f64) -> Result<Self> {
        let s = PhotonStatistics { p0, p1, p2, beta_sq };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p0", self.p0), ("p1", self.p1), ("p2", self.p2)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("probability {p} outside [0, 1]"),
                });
            }
        }
        if self.p0 + self.p1 + self.p2 > 1.0 + 1e-9 {
            return Err(Error::InvalidParameter {
                name: "p0 + p1 + p2",
                reason: format!("sums to {}", self.p0 + self.p1 + self.p2),
            });
        }
        if !(self.beta_sq >= 0.0 && self.beta_sq.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "beta_sq",
                reason: format!("must be finite and >= 0, got {}", self.beta_sq),
            });
        }
        Ok(())
    }
}

/// Interfering weight `S` and non-interfering background `B` of the coincidence rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundTerms {
    pub s: f64,
    pub b: f64,
}

/// `S = p1 |beta|^2`, `B = p0 |beta|^4 / 2 + p2`.
pub fn background_terms(stats: &PhotonStatistics) -> BackgroundTerms {
    BackgroundTerms {
        s: stats.p1 * stats.beta_sq,
        b: stats.p0 * stats.beta_sq * stats.beta_sq / 2.0 + stats.p2,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceCurve {
    delays: DelayGrid,
    values: Vec<f64>,
    pub s: f64,
    pub b: f64,
}

impl CoincidenceCurve {
    pub fn delays(&self) -> &DelayGrid {
        &self.delays
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `P_c(tau) = B + S (1 - I(tau))`.
pub fn coincidence_curve(dip: &DipCurve, stats: &PhotonStatistics) -> Result<CoincidenceCurve> {
    stats.validate()?;
    let BackgroundTerms { s, b } = background_terms(stats);
    Ok(CoincidenceCurve {
        delays: *dip.delays(),
        values: dip.values().iter().map(|i| b + s * (1.0 - i)).collect(),
        s,
        b,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Visibility {
    /// `1 - P_c(0) / P_c(far)`, plateau averaged over the outer delays.
    pub ratio_form: f64,
    /// `S T / (B + S)` with `T` read at the dip bottom.
    pub formula_form: f64,
}

pub fn visibility(curve: &CoincidenceCurve) -> Result<Visibility> {
    let n = curve.values.len();
    let (lo, hi) = outer_ranges(n);
    let outer: Vec<f64> = curve.values[..lo].iter().chain(&curve.values[hi..]).copied().collect();
    let plateau = outer.iter().sum::<f64>() / outer.len() as f64;
    let (k_min, bottom) = curve
        .values
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty");
    if !(plateau > 0.0) {
        return Err(Error::NoPlateau(format!("plateau level {plateau:e} is not positive")));
    }
    if curve.s > 0.0 {
        let depth = plateau - bottom;
        let spread = outer.iter().fold(0.0f64, |m, v| m.max((v - (curve.b + curve.s)).abs()));
        if spread > PLATEAU_TOLERANCE * depth.max(f64::MIN_POSITIVE) && depth > 0.0 {
            return Err(Error::NoPlateau(format!(
                "outer {:.0}% of delays still carry {:.2}% of the dip depth",
                100.0 * PLATEAU_FRACTION,
                100.0 * spread / depth
            )));
        }
    }
    let t = if curve.s > 0.0 {
        1.0 - (curve.values[k_min] - curve.b) / curve.s
    } else {
        0.0
    };
    let total = curve.b + curve.s;
    Ok(Visibility {
        ratio_form: 1.0 - bottom / plateau,
        formula_form: if total > 0.0 { curve.s * t / total } else { 0.0 },
    })
}
