//! Single-photon spectral states: reference spectra, spectral density functions
//! `g(nu, nu')`, direct purity and first-order temporal coherence.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::fit::{fit_gaussian_with, FitOptions, GaussianFitResult, GaussianShape};
use crate::grid::{FrequencyGrid, TimeGrid};

/// Relative tolerance for Hermiticity of a density matrix.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;
/// Tolerance on the discrete trace (and on the L2 norm of spectra).
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;
/// Purity above `1 + PURITY_SLACK` is reported as an error instead of being clamped.
pub const PURITY_SLACK: f64 = 1e-6;

/// Complex spectral amplitude `u(nu)` on a grid, L2-normalized with the grid measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexSpectrum {
    grid: FrequencyGrid,
    amplitude: Vec<Complex64>,
}

impl ComplexSpectrum {
    /// Wrap `amplitude`, rescaling it so that `sum |u|^2 * step = 1`.
    pub fn normalized(grid: FrequencyGrid, mut amplitude: Vec<Complex64>) -> Result<Self> {
        if amplitude.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} amplitudes for a {}-point grid",
                amplitude.len(),
                grid.len()
            )));
        }
        let norm_sq: f64 = amplitude.iter().map(|a| a.norm_sqr()).sum::<f64>() * grid.step();
        if !(norm_sq.is_finite() && norm_sq > 0.0) {
            return Err(Error::NotNormalized { trace: norm_sq });
        }
        let scale = norm_sq.sqrt().recip();
        amplitude.iter_mut().for_each(|a| *a *= scale);
        Ok(ComplexSpectrum { grid, amplitude })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn amplitude(&self) -> &[Complex64] {
        &self.amplitude
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitude.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.step()
    }

    /// Linear interpolation of the amplitude onto `target`, zero outside the
    /// original support, then renormalized.
    pub fn resample(&self, target: &FrequencyGrid) -> Result<ComplexSpectrum> {
        if self.grid.matches(target) {
            return Ok(ComplexSpectrum {
                grid: *target,
                amplitude: self.amplitude.clone(),
            });
        }
        let (lo, step, n) = (self.grid.min(), self.grid.step(), self.grid.len());
        let amplitude = target
            .points()
            .into_iter()
            .map(|nu| {
                let pos = (nu - lo) / step;
                if pos < -1e-9 || pos > (n - 1) as f64 + 1e-9 {
                    return Complex64::new(0.0, 0.0);
                }
                let pos = pos.clamp(0.0, (n - 1) as f64);
                let k = (pos.floor() as usize).min(n - 2);
                let t = pos - k as f64;
                self.amplitude[k] * (1.0 - t) + self.amplitude[k + 1] * t
            })
            .collect();
        ComplexSpectrum::normalized(*target, amplitude)
    }
}

/// Gaussian reference spectrum `u ~ exp(-nu^2 / (4 sigma_beta^2))`; `|u|^2` has
/// standard deviation `sigma_beta` (intensity-level, rad/s).
pub fn gaussian_reference(grid: &FrequencyGrid, sigma_beta: f64) -> Result<ComplexSpectrum> {
    require_positive("sigma_beta", sigma_beta)?;
    check_resolution("reference spectrum", grid, sigma_beta / 4.0)?;
    check_coverage("reference spectrum", grid, 5.0 * sigma_beta)?;
    let amplitude = grid
        .points()
        .into_iter()
        .map(|nu| Complex64::new((-nu * nu / (4.0 * sigma_beta * sigma_beta)).exp(), 0.0))
        .collect();
    ComplexSpectrum::normalized(*grid, amplitude)
}

pub(crate) fn check_resolution(what: &'static str, grid: &FrequencyGrid, limit: f64) -> Result<()> {
    if grid.step() > limit {
        return Err(Error::Unresolved {
            what,
            step: grid.step(),
            limit,
        });
    }
    Ok(())
}

/// The grid must reach `required` on both sides of zero detuning.
pub(crate) fn check_coverage(what: &'static str, grid: &FrequencyGrid, required: f64) -> Result<()> {
    let reach = (-grid.min()).min(grid.max());
    if reach < required * (1.0 - 1e-12) {
        return Err(Error::Truncated {
            what,
            half_span: reach,
            required,
        });
    }
    Ok(())
}

/// Spectral density function `g(nu, nu')` of a single-photon state: Hermitian,
/// trace-normalized with the grid measure, real non-negative diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensity {
    grid: FrequencyGrid,
    values: Array2<Complex64>,
}

impl SpectralDensity {
    /// Validate Hermiticity and the diagonal, then trace-normalize.
    pub fn from_matrix(grid: FrequencyGrid, values: Array2<Complex64>) -> Result<Self> {
        check_shape(&grid, &values)?;
        let asymmetry = hermitian_asymmetry(&values);
        if asymmetry > HERMITIAN_TOLERANCE {
            return Err(Error::NotHermitian { asymmetry });
        }
        let mut values = values;
        symmetrize(&mut values);
        SpectralDensity::normalize(grid, values)
    }

    /// Replace `values` by its Hermitian part `(g + g^H)/2`, then trace-normalize.
    /// For matrices that are Hermitian up to rounding (products such as `A F A^H`).
    pub fn hermitized(grid: FrequencyGrid, mut values: Array2<Complex64>) -> Result<Self> {
        check_shape(&grid, &values)?;
        symmetrize(&mut values);
        SpectralDensity::normalize(grid, values)
    }

    fn normalize(grid: FrequencyGrid, mut values: Array2<Complex64>) -> Result<Self> {
        let diag_max = values.diag().iter().map(|v| v.re).fold(0.0, f64::max);
        if let Some(neg) = values.diag().iter().map(|v| v.re).find(|&d| d < -1e-12 * diag_max) {
            return Err(Error::InvalidParameter {
                name: "g",
                reason: format!("negative diagonal element {neg:e}"),
            });
        }
        let trace = values.diag().iter().map(|v| v.re).sum::<f64>() * grid.step();
        if !(trace.is_finite() && trace > 0.0) {
            return Err(Error::NotNormalized { trace });
        }
        values.mapv_inplace(|v| v / trace);
        for k in 0..grid.len() {
            let d = values[[k, k]].re.max(0.0);
            values[[k, k]] = Complex64::new(d, 0.0);
        }
        Ok(SpectralDensity { grid, values })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    /// `sum_k g(nu_k, nu_k) * step`.
    pub fn trace(&self) -> f64 {
        self.values.diag().iter().map(|v| v.re).sum::<f64>() * self.grid.step()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.values.diag().iter().map(|v| v.re).collect()
    }

    /// Largest `|g - g^H|` relative to `max |g|`.
    pub fn hermitian_asymmetry(&self) -> f64 {
        hermitian_asymmetry(&self.values)
    }

    /// Multiply by `exp(i kappa (nu - nu'))`: a pure time shift of the photon.
    pub fn with_linear_phase(&self, kappa: f64) -> SpectralDensity {
        let nu = self.grid.points();
        let phase: Vec<Complex64> = nu.iter().map(|&n| Complex64::from_polar(1.0, kappa * n)).collect();
        let values = Array2::from_shape_fn(self.values.dim(), |(j, k)| {
            self.values[[j, k]] * phase[j] * phase[k].conj()
        });
        SpectralDensity {
            grid: self.grid,
            values,
        }
    }

    /// Density of a pure state `u(nu) u*(nu')`.
    pub fn pure(u: &ComplexSpectrum) -> Result<SpectralDensity> {
        let a = u.amplitude();
        let values = Array2::from_shape_fn((a.len(), a.len()), |(j, k)| a[j] * a[k].conj());
        SpectralDensity::hermitized(*u.grid(), values)
    }
}

fn check_shape(grid: &FrequencyGrid, values: &Array2<Complex64>) -> Result<()> {
    let n = grid.len();
    if values.dim() != (n, n) {
        return Err(Error::GridMismatch(format!(
            "matrix of shape {:?} on a {n}-point grid",
            values.dim()
        )));
    }
    if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::InvalidParameter {
            name: "g",
            reason: "non-finite matrix element".into(),
        });
    }
    Ok(())
}

fn hermitian_asymmetry(values: &Array2<Complex64>) -> f64 {
    let scale = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let n = values.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for k in j..n {
            worst = worst.max((values[[j, k]] - values[[k, j]].conj()).norm());
        }
    }
    worst / scale
}

fn symmetrize(values: &mut Array2<Complex64>) {
    let n = values.nrows();
    for j in 0..n {
        for k in j + 1..n {
            let h = 0.5 * (values[[j, k]] + values[[k, j]].conj());
            values[[j, k]] = h;
            values[[k, j]] = h.conj();
        }
        values[[j, j]] = Complex64::new(values[[j, j]].re, 0.0);
    }
}

/// Gaussian model `g(x, y) = exp(-x^2/(4 s1^2) - y^2/(4 s2^2) + i kappa y) / sqrt(2 pi s1^2)`
/// with `x = (nu + nu')/sqrt 2`, `y = (nu - nu')/sqrt 2`, trace-normalized on the grid.
///
/// The diagonal has standard deviation `sigma_g1` and the purity is `sigma_g2 / sigma_g1`.
pub fn gaussian_model_density(
    grid: &FrequencyGrid,
    sigma_g1: f64,
    sigma_g2: f64,
    kappa: f64,
) -> Result<SpectralDensity> {
    require_positive("sigma_g1", sigma_g1)?;
    require_positive("sigma_g2", sigma_g2)?;
    if !kappa.is_finite() {
        return Err(Error::InvalidParameter {
            name: "kappa",
            reason: format!("must be finite, got {kappa}"),
        });
    }
    if sigma_g2 > sigma_g1 * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter {
            name: "sigma_g2",
            reason: format!("{sigma_g2:e} exceeds sigma_g1 = {sigma_g1:e}; purity would exceed 1"),
        });
    }
    check_resolution("minor width sigma_g2", grid, sigma_g2 / 2.0)?;
    check_coverage("diagonal spectrum", grid, 6.0 * sigma_g1)?;

    let nu = grid.points();
    let (a, b) = (1.0 / (4.0 * sigma_g1 * sigma_g1), 1.0 / (4.0 * sigma_g2 * sigma_g2));
    let norm = 1.0 / (2.0 * std::f64::consts::PI * sigma_g1 * sigma_g1).sqrt();
    let values = Array2::from_shape_fn((nu.len(), nu.len()), |(j, k)| {
        let x = (nu[j] + nu[k]) / std::f64::consts::SQRT_2;
        let y = (nu[j] - nu[k]) / std::f64::consts::SQRT_2;
        Complex64::from_polar(norm * (-a * x * x - b * y * y).exp(), kappa * y)
    });
    SpectralDensity::hermitized(*grid, values)
}

/// `Tr(rho^2) = sum |g|^2 step^2`, clamped to 1 within [`PURITY_SLACK`].
pub fn purity_direct(g: &SpectralDensity) -> Result<f64> {
    let trace = g.trace();
    if (trace - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::NotNormalized { trace });
    }
    let step = g.grid().step();
    let p = g.values().iter().map(|v| v.norm_sqr()).sum::<f64>() * step * step;
    if p > 1.0 + PURITY_SLACK {
        return Err(Error::UnphysicalPurity(p));
    }
    Ok(p.min(1.0))
}

/// Diagonal of `g` and its Gaussian fit (the fitted sigma is `sigma_g1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalSpectrum {
    pub nu_rad_s: Vec<f64>,
    pub density: Vec<f64>,
    pub fit: GaussianFitResult,
}

impl MarginalSpectrum {
    pub fn sigma_g1(&self) -> f64 {
        self.fit.sigma
    }
}

pub fn marginal_spectrum(g: &SpectralDensity) -> Result<MarginalSpectrum> {
    let nu = g.grid().points();
    let density = g.diagonal();
    let fit = fit_gaussian_with(&nu, &density, GaussianShape::Peak, &FitOptions::zero_offset())?;
    Ok(MarginalSpectrum {
        nu_rad_s: nu,
        density,
        fit,
    })
}

/// Second moment of the diagonal (rad/s).
pub fn diagonal_std(g: &SpectralDensity) -> f64 {
    let nu = g.grid().points();
    let d = g.diagonal();
    let w: f64 = d.iter().sum();
    let mean = nu.iter().zip(&d).map(|(n, p)| n * p).sum::<f64>() / w;
    let var = nu.iter().zip(&d).map(|(n, p)| (n - mean).powi(2) * p).sum::<f64>() / w;
    var.sqrt()
}

/// Normalized first-order correlation `gamma(t, t')` on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalCorrelation {
    time_grid: TimeGrid,
    gamma: Array2<Complex64>,
}

impl TemporalCorrelation {
    pub fn time_grid(&self) -> &TimeGrid {
        &self.time_grid
    }

    pub fn gamma(&self) -> &Array2<Complex64> {
        &self.gamma
    }

    /// `|gamma(t, t0)|` along the row through the grid center `t0`.
    pub fn center_row_modulus(&self) -> Vec<f64> {
        let c = self.time_grid.center_index();
        self.gamma.row(c).iter().map(|v| v.norm()).collect()
    }

    /// Gaussian standard deviation of `|gamma|` in `t - t'`, or `None` for a
    /// perfectly coherent state (`|gamma| = 1` everywhere).
    pub fn coherence_time(&self) -> Result<Option<f64>> {
        let row = self.center_row_modulus();
        if row.iter().all(|&v| v > 1.0 - 1e-6) {
            return Ok(None);
        }
        let t = self.time_grid.points();
        let fit = fit_gaussian_with(&t, &row, GaussianShape::Peak, &FitOptions::zero_offset())?;
        Ok(Some(fit.sigma))
    }
}

/// `Gamma(t, t') = sum g(w, w') exp(i (w t - w' t')) step^2`, normalized to
/// `gamma = Gamma / sqrt(Gamma(t, t) Gamma(t', t'))`.
pub fn temporal_correlation(g: &SpectralDensity, time_grid: &TimeGrid) -> Result<TemporalCorrelation> {
    let grid = g.grid();
    let alias_limit = std::f64::consts::PI / grid.step();
    if time_grid.max_abs() >= alias_limit {
        return Err(Error::Aliasing(format!(
            "time grid reaches {:.4e} s but the frequency step only supports |t| < {alias_limit:.4e} s",
            time_grid.max_abs()
        )));
    }
    let sigma1 = diagonal_std(g);
    let limit = 0.5 / sigma1;
    if time_grid.step() > limit {
        return Err(Error::Unresolved {
            what: "spectral bandwidth in time",
            step: time_grid.step(),
            limit,
        });
    }

    let nu = grid.points();
    let t = time_grid.points();
    let step = grid.step();
    let rows: Vec<Complex64> = t
        .par_iter()
        .flat_map_iter(|&tt| nu.iter().map(move |&w| Complex64::from_polar(1.0, w * tt)))
        .collect();
    let e = Array2::from_shape_vec((t.len(), nu.len()), rows).expect("shape");
    let eh = e.t().mapv(|v| v.conj());
    let big_gamma = e.dot(g.values()).dot(&eh) * Complex64::new(step * step, 0.0);

    let diag: Array1<f64> = big_gamma.diag().mapv(|v| v.re);
    let peak = diag.iter().copied().fold(0.0, f64::max);
    if let Some(low) = diag.iter().copied().find(|&d| d <= 1e-12 * peak) {
        return Err(Error::Truncated {
            what: "time grid beyond the correlation support",
            half_span: time_grid.max_abs(),
            required: low,
        });
    }
    let scale = diag.mapv(f64::sqrt);
    let gamma = Array2::from_shape_fn(big_gamma.dim(), |(a, b)| big_gamma[[a, b]] / (scale[a] * scale[b]));
    Ok(TemporalCorrelation {
        time_grid: *time_grid,
        gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DelayGrid;

    fn grid_for(sigma: f64) -> FrequencyGrid {
        FrequencyGrid::centered(8.0 * sigma, 257).unwrap()
    }

    #[test]
    fn reference_std_and_half_max() {
        let g = FrequencyGrid::centered(8.0, 513).unwrap();
        let u = gaussian_reference(&g, 1.0).unwrap();
        assert!((u.norm_sqr() - 1.0).abs() < 1e-12);
        let nu = g.points();
        let var: f64 = nu
            .iter()
            .zip(u.amplitude())
            .map(|(n, a)| n * n * a.norm_sqr())
            .sum::<f64>()
            * g.step();
        assert!((var.sqrt() - 1.0).abs() < 1e-3);
        let half = |n: f64| (-n * n / 4.0f64).exp().powi(2);
        assert!((half((2.0 * std::f64::consts::LN_2).sqrt()) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn reference_guards() {
        let narrow = FrequencyGrid::centered(1.0, 257).unwrap();
        assert!(matches!(
            gaussian_reference(&narrow, 1.0),
            Err(Error::Truncated { .. })
        ));
        let coarse = FrequencyGrid::centered(8.0, 17).unwrap();
        assert!(matches!(
            gaussian_reference(&coarse, 1.0),
            Err(Error::Unresolved { .. })
        ));
    }

    #[test]
    fn resample_is_identity_on_same_grid_and_close_on_finer() {
        let g = FrequencyGrid::centered(8.0, 257).unwrap();
        let u = gaussian_reference(&g, 1.0).unwrap();
        assert_eq!(u.resample(&g).unwrap(), u);
        let fine = FrequencyGrid::centered(6.0, 600).unwrap();
        let v = u.resample(&fine).unwrap();
        let direct = gaussian_reference(&fine, 1.0).unwrap();
        let err = v
            .amplitude()
            .iter()
            .zip(direct.amplitude())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn model_purity_and_marginal() {
        let g = gaussian_model_density(&grid_for(1.0), 1.0, 0.5, 0.0).unwrap();
        assert!((purity_direct(&g).unwrap() - 0.5).abs() < 1e-3);
        let g = gaussian_model_density(&grid_for(2.0), 2.0, 1.0, 0.3).unwrap();
        let m = marginal_spectrum(&g).unwrap();
        assert!((m.sigma_g1() - 2.0).abs() < 0.02);
        let pure = gaussian_model_density(&grid_for(1.0), 1.0, 1.0, 0.0).unwrap();
        assert!((purity_direct(&pure).unwrap() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn model_rejects_inverted_widths() {
        assert!(gaussian_model_density(&grid_for(1.0), 1.0, 1.5, 0.0).is_err());
    }

    #[test]
    fn non_normalized_density_is_rejected() {
        let g = gaussian_model_density(&grid_for(1.0), 1.0, 0.5, 0.0).unwrap();
        let doubled = SpectralDensity {
            grid: *g.grid(),
            values: g.values() * Complex64::new(2.0, 0.0),
        };
        assert!(matches!(purity_direct(&doubled), Err(Error::NotNormalized { .. })));
    }

    #[test]
    fn from_matrix_rejects_non_hermitian() {
        let grid = FrequencyGrid::centered(1.0, 16).unwrap();
        let mut m = Array2::from_elem((16, 16), Complex64::new(0.0, 0.0));
        m[[0, 0]] = Complex64::new(1.0, 0.0);
        m[[0, 1]] = Complex64::new(0.0, 0.5);
        m[[1, 0]] = Complex64::new(0.0, 0.5);
        assert!(matches!(
            SpectralDensity::from_matrix(grid, m),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn pure_state_is_fully_coherent() {
        let g = gaussian_model_density(&grid_for(1.0), 1.0, 1.0, 0.0).unwrap();
        let tg = DelayGrid::symmetric(2.0, 41).unwrap();
        let c = temporal_correlation(&g, &tg).unwrap();
        assert!(c.gamma().iter().all(|v| (v.norm() - 1.0).abs() < 1e-3));
        assert_eq!(c.coherence_time().unwrap(), None);
    }

    #[test]
    fn correlation_aliasing_guard() {
        let g = gaussian_model_density(&grid_for(1.0), 1.0, 0.5, 0.0).unwrap();
        let tg = DelayGrid::symmetric(100.0, 2001).unwrap();
        assert!(matches!(temporal_correlation(&g, &tg), Err(Error::Aliasing(_))));
    }
}
