//! Photon-pair source model: pump envelope, phase matching, joint spectral
//! amplitude, Gaussian filters and the heralded signal density.

use std::f64::consts::PI;

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::grid::FrequencyGrid;
use crate::spectral::SpectralDensity;
use crate::width::WidthSpec;

/// Constant matching `sinc(z)` to the Gaussian `exp(-GAMMA z^2)`.
pub const GAMMA: f64 = 0.193;
/// Phase matching is cut to zero beyond this many sinc zeros from the ridge.
pub const DEFAULT_SIDE_LOBES: f64 = 8.0;
/// Largest marginal value at a grid edge, relative to its peak.
pub const EDGE_TOLERANCE: f64 = 1e-3;
/// Upper bound on automatically sized grids.
pub const MAX_AUTO_POINTS: usize = 8193;

/// Gaussian pump `alpha = exp(-(nu_s + nu_i)^2 / (2 sigma_p^2))`; `sigma_p` is the
/// amplitude-level standard deviation, so the intensity FWHM is `2 sigma_p sqrt(ln 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpEnvelope {
    sigma_p: f64,
}

impl PumpEnvelope {
    pub fn new(sigma_p: f64) -> Result<Self> {
        require_positive("sigma_p", sigma_p)?;
        Ok(PumpEnvelope { sigma_p })
    }

    pub fn from_width(width: &WidthSpec) -> Result<Self> {
        PumpEnvelope::new(width.sigma_amplitude_rad_s()?)
    }

    pub fn sigma_p(&self) -> f64 {
        self.sigma_p
    }

    pub fn eval(&self, nu_s: f64, nu_i: f64) -> Complex64 {
        let s = nu_s + nu_i;
        Complex64::new((-s * s / (2.0 * self.sigma_p * self.sigma_p)).exp(), 0.0)
    }
}

/// First-order group-velocity mismatches (s/m) and crystal length (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub kappa_s: f64,
    pub kappa_i: f64,
    pub length: f64,
}

/// Phase matching `sinc(z) exp(i (L/2)(kappa_s nu_s + kappa_i nu_i))` with
/// `z = (sin(theta) nu_s + cos(theta) nu_i) / sqrt(2 GAMMA sigma_phi^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseMatchingSpec {
    pub theta_deg: f64,
    pub sigma_phi: f64,
    pub material: Option<Material>,
    /// Replace `sinc(z)` by `exp(-GAMMA z^2)`.
    pub gaussian: bool,
    pub side_lobes: f64,
}

fn wrap_theta(theta_deg: f64) -> f64 {
    let mut t = theta_deg % 180.0;
    if t > 90.0 {
        t -= 180.0;
    } else if t <= -90.0 {
        t += 180.0;
    }
    t
}

impl PhaseMatchingSpec {
    pub fn new(theta_deg: f64, sigma_phi: f64) -> Result<Self> {
        let pm = PhaseMatchingSpec {
            theta_deg,
            sigma_phi,
            material: None,
            gaussian: false,
            side_lobes: DEFAULT_SIDE_LOBES,
        };
        pm.validate()?;
        Ok(pm)
    }

    /// `w_phi = 2 sigma_phi sqrt(ln 2)`, the pump convention.
    pub fn from_width(theta_deg: f64, width: &WidthSpec) -> Result<Self> {
        PhaseMatchingSpec::new(theta_deg, width.sigma_amplitude_rad_s()?)
    }

    pub fn with_gaussian(mut self, gaussian: bool) -> Self {
        self.gaussian = gaussian;
        self
    }

    pub fn with_side_lobes(mut self, side_lobes: f64) -> Result<Self> {
        require_positive("side_lobes", side_lobes)?;
        self.side_lobes = side_lobes;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("sigma_phi", self.sigma_phi)?;
        if !(self.theta_deg > -90.0 && self.theta_deg <= 90.0) {
            return Err(Error::InvalidParameter {
                name: "theta_deg",
                reason: format!("{} is outside (-90, 90]", self.theta_deg),
            });
        }
        if !(self.side_lobes > 0.0) {
            return Err(Error::InvalidParameter {
                name: "side_lobes",
                reason: format!("must be > 0, got {}", self.side_lobes),
            });
        }
        if let Some(m) = self.material {
            let theta = self.theta_deg.to_radians();
            let (ks, ki) = (m.kappa_s, m.kappa_i);
            let norm = ks.hypot(ki);
            let mismatch = (theta.sin() * ki - theta.cos() * ks).abs() / norm;
            if mismatch > 1e-9 {
                return Err(Error::InvalidParameter {
                    name: "theta_deg",
                    reason: format!("tan(theta) disagrees with kappa_s/kappa_i by {mismatch:e}"),
                });
            }
            let inv_sq = (ks * ks + ki * ki) * GAMMA * m.length * m.length / 2.0;
            let rel = (inv_sq * self.sigma_phi * self.sigma_phi - 1.0).abs();
            if rel > 1e-9 {
                return Err(Error::InvalidParameter {
                    name: "sigma_phi",
                    reason: format!("inconsistent with the material parameters (relative {rel:e})"),
                });
            }
        }
        Ok(())
    }

    /// Width of `z = 1` in the rotated frequency `sin(theta) nu_s + cos(theta) nu_i`.
    pub fn z_scale(&self) -> f64 {
        (2.0 * GAMMA).sqrt() * self.sigma_phi
    }

    pub fn argument(&self, nu_s: f64, nu_i: f64) -> f64 {
        let t = self.theta_deg.to_radians();
        (t.sin() * nu_s + t.cos() * nu_i) / self.z_scale()
    }

    /// Linear phase slopes `(L/2) kappa_s`, `(L/2) kappa_i` (s). Without material
    /// data they are `sin(theta)` and `cos(theta)` over `z_scale`.
    pub fn phase_slopes(&self) -> (f64, f64) {
        match self.material {
            Some(m) => (0.5 * m.length * m.kappa_s, 0.5 * m.length * m.kappa_i),
            None => {
                let t = self.theta_deg.to_radians();
                (t.sin() / self.z_scale(), t.cos() / self.z_scale())
            }
        }
    }

    /// Delay at which the heralded photon's dip is centred (s).
    pub fn dip_center(&self) -> f64 {
        -self.phase_slopes().0
    }

    /// Signal and idler roles exchanged: `theta -> 90 - theta`, slopes swapped.
    /// When folding the angle back into (-90, 90] flips the ridge direction, the
    /// slopes are pinned through an equivalent unit-length material.
    pub fn swapped(&self) -> PhaseMatchingSpec {
        let theta_deg = wrap_theta(90.0 - self.theta_deg);
        let material = match self.material {
            Some(m) => Some(Material {
                kappa_s: m.kappa_i,
                kappa_i: m.kappa_s,
                ..m
            }),
            None if theta_deg != 90.0 - self.theta_deg => {
                let (slope_s, slope_i) = self.phase_slopes();
                Some(Material {
                    kappa_s: 2.0 * slope_i,
                    kappa_i: 2.0 * slope_s,
                    length: 1.0,
                })
            }
            None => None,
        };
        PhaseMatchingSpec {
            theta_deg,
            material,
            ..*self
        }
    }

    /// Sinc lobe width along the signal axis (`inf` when the ridge is parallel to it).
    pub fn lobe_width_signal(&self) -> f64 {
        PI * self.z_scale() / self.theta_deg.to_radians().sin().abs()
    }

    pub fn lobe_width_idler(&self) -> f64 {
        PI * self.z_scale() / self.theta_deg.to_radians().cos().abs()
    }

    /// Support half-width in `z` after side-lobe truncation.
    pub fn z_cutoff(&self) -> f64 {
        self.side_lobes * PI
    }

    pub fn eval(&self, nu_s: f64, nu_i: f64) -> Complex64 {
        let z = self.argument(nu_s, nu_i);
        let envelope = if self.gaussian {
            (-GAMMA * z * z).exp()
        } else if z.abs() > self.z_cutoff() {
            0.0
        } else {
            sinc(z)
        };
        let (a, b) = self.phase_slopes();
        Complex64::from_polar(1.0, a * nu_s + b * nu_i) * envelope
    }
}

pub fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 - z * z / 6.0
    } else {
        z.sin() / z
    }
}

/// Phase-matching spec from group-velocity mismatches and crystal length.
///
/// The slope angle is `atan2(kappa_s, kappa_i)` folded into (-90, 90]; the
/// material's own phase slopes are kept.
pub fn pm_from_material(kappa_s: f64, kappa_i: f64, length: f64) -> Result<PhaseMatchingSpec> {
    require_positive("crystal length", length)?;
    if !(kappa_s.is_finite() && kappa_i.is_finite()) || (kappa_s == 0.0 && kappa_i == 0.0) {
        return Err(Error::InvalidParameter {
            name: "kappa",
            reason: "group-velocity mismatches must be finite and not both zero".into(),
        });
    }
    let theta_deg = wrap_theta(kappa_s.atan2(kappa_i).to_degrees());
    let sigma_phi = 1.0 / ((kappa_s * kappa_s + kappa_i * kappa_i) * GAMMA * length * length / 2.0).sqrt();
    let pm = PhaseMatchingSpec {
        theta_deg,
        sigma_phi,
        material: Some(Material {
            kappa_s,
            kappa_i,
            length,
        }),
        gaussian: false,
        side_lobes: DEFAULT_SIDE_LOBES,
    };
    pm.validate()?;
    Ok(pm)
}

/// Spectral filter with intensity transmission `exp(-nu^2 / (2 sigma_f^2))`
/// (FWHM `w_f = 2 sigma_f sqrt(2 ln 2)`), or fully open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GaussianFilter {
    Open,
    Gaussian { sigma_f: f64 },
}

impl GaussianFilter {
    pub fn gaussian(sigma_f: f64) -> Result<Self> {
        require_positive("sigma_f", sigma_f)?;
        Ok(GaussianFilter::Gaussian { sigma_f })
    }

    pub fn from_width(width: &WidthSpec) -> Result<Self> {
        GaussianFilter::gaussian(width.sigma_intensity_rad_s()?)
    }

    pub fn sigma(&self) -> Option<f64> {
        match self {
            GaussianFilter::Open => None,
            GaussianFilter::Gaussian { sigma_f } => Some(*sigma_f),
        }
    }

    pub fn is_open(&self) -> bool {
        matches!(self, GaussianFilter::Open)
    }

    pub fn transmission(&self, nu: f64) -> f64 {
        match self {
            GaussianFilter::Open => 1.0,
            GaussianFilter::Gaussian { sigma_f } => (-nu * nu / (2.0 * sigma_f * sigma_f)).exp(),
        }
    }
}

/// `phi(nu_s, nu_i) = alpha * Phi`, L2-normalized over the signal x idler grid.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSpectralAmplitude {
    grid_s: FrequencyGrid,
    grid_i: FrequencyGrid,
    values: Array2<Complex64>,
}

impl JointSpectralAmplitude {
    pub fn grid_s(&self) -> &FrequencyGrid {
        &self.grid_s
    }

    pub fn grid_i(&self) -> &FrequencyGrid {
        &self.grid_i
    }

    /// Rows index signal detuning, columns idler detuning.
    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid_s.step() * self.grid_i.step()
    }

    /// Signal and idler exchanged.
    pub fn transposed(&self) -> JointSpectralAmplitude {
        JointSpectralAmplitude {
            grid_s: self.grid_i,
            grid_i: self.grid_s,
            values: self.values.t().to_owned(),
        }
    }
}

fn resolution(what: &'static str, step: f64, limit: f64) -> Result<()> {
    if step > limit {
        return Err(Error::Unresolved { what, step, limit });
    }
    Ok(())
}

pub fn build_jsa(
    pump: &PumpEnvelope,
    pm: &PhaseMatchingSpec,
    grid_s: &FrequencyGrid,
    grid_i: &FrequencyGrid,
) -> Result<JointSpectralAmplitude> {
    pm.validate()?;
    resolution("pump envelope (signal axis)", grid_s.step(), pump.sigma_p() / 3.0)?;
    resolution("pump envelope (idler axis)", grid_i.step(), pump.sigma_p() / 3.0)?;
    resolution("phase-matching lobes (signal axis)", grid_s.step(), pm.lobe_width_signal() / 6.0)?;
    resolution("phase-matching lobes (idler axis)", grid_i.step(), pm.lobe_width_idler() / 6.0)?;

    let nu_s = grid_s.points();
    let nu_i = grid_i.points();
    let flat: Vec<Complex64> = nu_s
        .par_iter()
        .flat_map_iter(|&s| nu_i.iter().map(move |&i| pump.eval(s, i) * pm.eval(s, i)))
        .collect();
    let mut values = Array2::from_shape_vec((nu_s.len(), nu_i.len()), flat).expect("shape");
    let norm_sq = values.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid_s.step() * grid_i.step();
    if !(norm_sq > 0.0 && norm_sq.is_finite()) {
        return Err(Error::Grid("joint spectral amplitude vanishes on the grid".into()));
    }
    let scale = norm_sq.sqrt().recip();
    values.mapv_inplace(|v| v * scale);
    Ok(JointSpectralAmplitude {
        grid_s: *grid_s,
        grid_i: *grid_i,
        values,
    })
}

fn check_filter(what: &'static str, filter: &GaussianFilter, grid: &FrequencyGrid) -> Result<()> {
    if let Some(sigma) = filter.sigma() {
        resolution(what, grid.step(), sigma / 3.0)?;
    }
    Ok(())
}

fn check_edges(what: &'static str, marginal: &[f64], grid: &FrequencyGrid) -> Result<()> {
    let peak = marginal.iter().copied().fold(0.0, f64::max);
    let edge = marginal[0].max(marginal[marginal.len() - 1]);
    if edge > EDGE_TOLERANCE * peak {
        return Err(Error::Truncated {
            what,
            half_span: grid.half_span(),
            required: f64::NAN,
        });
    }
    Ok(())
}

/// Heralded signal density `g(nu, nu') ~ sum_i phi phi* sqrt(T_s(nu) T_s(nu')) T_i(nu_i)`,
/// trace-normalized. With `conditioned = false` the idler is traced out unfiltered.
pub fn heralded_density(
    jsa: &JointSpectralAmplitude,
    filter_s: &GaussianFilter,
    filter_i: &GaussianFilter,
    conditioned: bool,
) -> Result<SpectralDensity> {
    let filter_i = if conditioned { *filter_i } else { GaussianFilter::Open };
    let (grid_s, grid_i) = (jsa.grid_s(), jsa.grid_i());
    check_filter("signal filter", filter_s, grid_s)?;
    check_filter("idler filter", &filter_i, grid_i)?;

    let ts: Vec<f64> = grid_s.points().iter().map(|&n| filter_s.transmission(n).sqrt()).collect();
    let ti: Vec<f64> = grid_i.points().iter().map(|&n| filter_i.transmission(n).sqrt()).collect();
    let a = Array2::from_shape_fn(jsa.values().dim(), |(s, i)| jsa.values()[[s, i]] * (ts[s] * ti[i]));

    let signal_marginal: Vec<f64> = a.axis_iter(Axis(0)).map(|r| r.iter().map(|v| v.norm_sqr()).sum()).collect();
    let idler_marginal: Vec<f64> = a.axis_iter(Axis(1)).map(|c| c.iter().map(|v| v.norm_sqr()).sum()).collect();
    check_edges("heralded signal spectrum", &signal_marginal, grid_s)?;
    check_edges("filtered idler spectrum", &idler_marginal, grid_i)?;

    let ah = a.t().mapv(|v| v.conj());
    let g = a.dot(&ah) * Complex64::new(grid_i.step(), 0.0);
    SpectralDensity::hermitized(*grid_s, g)
}

/// Sizing rules for [`auto_grids`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPolicy {
    pub min_points_signal: usize,
    pub min_points_idler: usize,
    /// Gaussian envelopes are kept out to this many standard deviations.
    pub sigmas: f64,
}

impl Default for GridPolicy {
    fn default() -> Self {
        GridPolicy {
            min_points_signal: 512,
            min_points_idler: 256,
            sigmas: 6.0,
        }
    }
}

fn points_for(half_span: f64, step: f64, min_points: usize, what: &str) -> Result<usize> {
    let required = (2.0 * half_span / step).ceil() as usize + 1;
    let n = required.max(min_points);
    if n > MAX_AUTO_POINTS {
        return Err(Error::Grid(format!(
            "{what} grid would need {n} points (limit {MAX_AUTO_POINTS})"
        )));
    }
    Ok(n)
}

/// Signal and idler grids that cover the truncated phase-matching support, the
/// pump, filters and (optionally) a reference spectrum of width `sigma_beta`.
pub fn auto_grids(
    pump: &PumpEnvelope,
    pm: &PhaseMatchingSpec,
    filter_s: &GaussianFilter,
    filter_i: &GaussianFilter,
    sigma_beta: Option<f64>,
    policy: &GridPolicy,
) -> Result<(FrequencyGrid, FrequencyGrid)> {
    pm.validate()?;
    let k = policy.sigmas;
    let theta = pm.theta_deg.to_radians();
    let (sin, cos) = (theta.sin(), theta.cos());
    let z_reach = if pm.gaussian { k / (2.0 * GAMMA).sqrt() } else { pm.z_cutoff() } * pm.z_scale();
    let pump_reach = k * pump.sigma_p();

    // The pump confines nu_s + nu_i, the phase matching sin*nu_s + cos*nu_i.
    let denom = (sin - cos).abs();
    let mut ls = if denom > 1e-9 {
        (z_reach + cos.abs() * pump_reach) / denom
    } else {
        f64::INFINITY
    };
    if let Some(s) = filter_s.sigma() {
        ls = ls.min(k * s);
    }
    if !ls.is_finite() {
        return Err(Error::Grid(
            "signal support is unbounded (ridge parallel to the pump) and no signal filter is set".into(),
        ));
    }
    if let Some(b) = sigma_beta {
        ls = ls.max(k * b);
    }
    let mut li = pump_reach + ls;
    if cos.abs() > 1e-9 {
        li = li.min((z_reach + sin.abs() * ls) / cos.abs());
    }
    if let Some(s) = filter_i.sigma() {
        li = li.min(k * s);
    }

    let mut step_s = (pump.sigma_p() / 3.0).min(pm.lobe_width_signal() / 6.0);
    if let Some(s) = filter_s.sigma() {
        step_s = step_s.min(s / 3.0);
    }
    if let Some(b) = sigma_beta {
        step_s = step_s.min(b / 4.0);
    }
    let mut step_i = (pump.sigma_p() / 3.0).min(pm.lobe_width_idler() / 6.0);
    if let Some(s) = filter_i.sigma() {
        step_i = step_i.min(s / 3.0);
    }

    let n_s = points_for(ls, step_s, policy.min_points_signal, "signal")?;
    let n_i = points_for(li, step_i, policy.min_points_idler, "idler")?;
    Ok((FrequencyGrid::centered(ls, n_s)?, FrequencyGrid::centered(li, n_i)?))
}
