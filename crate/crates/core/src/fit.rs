//! Least-squares Gaussian fits for spectra and interference dips.
//!
//! Model: `y = offset ± amplitude * exp(-(x - center)^2 / (2 sigma^2))`, with `+`
//! for a peak and `-` for a dip. Levenberg-Marquardt on normalized coordinates,
//! initialised deterministically from the samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Residual level (relative to the amplitude) above which a fit is flagged as non-Gaussian.
pub const NON_GAUSSIAN_RMS_FRACTION: f64 = 0.02;
pub const MIN_FIT_SAMPLES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaussianShape {
    Peak,
    Dip,
}

impl GaussianShape {
    fn sign(self) -> f64 {
        match self {
            GaussianShape::Peak => 1.0,
            GaussianShape::Dip => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OffsetMode {
    Free,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub offset: OffsetMode,
    pub max_iterations: usize,
    /// Relative parameter-update threshold for convergence.
    pub tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            offset: OffsetMode::Free,
            max_iterations: 200,
            tolerance: 1e-10,
        }
    }
}

impl FitOptions {
    pub fn zero_offset() -> Self {
        FitOptions {
            offset: OffsetMode::Fixed(0.0),
            ..FitOptions::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFitResult {
    pub shape: GaussianShape,
    pub amplitude: f64,
    pub center: f64,
    pub sigma: f64,
    pub offset: f64,
    pub rms_residual: f64,
    pub iterations: usize,
    /// `rms_residual` exceeds [`NON_GAUSSIAN_RMS_FRACTION`] of the amplitude.
    pub non_gaussian: bool,
}

impl GaussianFitResult {
    pub fn eval(&self, x: f64) -> f64 {
        let z = (x - self.center) / self.sigma;
        self.offset + self.shape.sign() * self.amplitude * (-0.5 * z * z).exp()
    }

    pub fn fwhm(&self) -> f64 {
        self.sigma * crate::width::fwhm_per_sigma()
    }
}

pub fn fit_gaussian(x: &[f64], y: &[f64], shape: GaussianShape) -> Result<GaussianFitResult> {
    fit_gaussian_with(x, y, shape, &FitOptions::default())
}

pub fn fit_gaussian_with(
    x: &[f64],
    y: &[f64],
    shape: GaussianShape,
    options: &FitOptions,
) -> Result<GaussianFitResult> {
    if x.len() != y.len() {
        return Err(Error::Fit(format!(
            "abscissa has {} samples but ordinate has {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < MIN_FIT_SAMPLES {
        return Err(Error::Fit(format!(
            "need at least {MIN_FIT_SAMPLES} samples, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite sample".into()));
    }

    let mut samples: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1).collect();

    let init = initial_guess(&xs, &ys, shape, options.offset)?;
    let sign = shape.sign();
    let free_offset = matches!(options.offset, OffsetMode::Free);

    // Normalized coordinates: u = (x - c0) / s0, v = (y - o0) / a0.
    let u: Vec<f64> = xs.iter().map(|&x| (x - init.center) / init.sigma).collect();
    let v: Vec<f64> = ys.iter().map(|&y| (y - init.offset) / init.amplitude).collect();

    let n_par = if free_offset { 4 } else { 3 };
    let mut p = [1.0, 0.0, 1.0, 0.0];
    let mut cost = cost_of(&u, &v, &p, sign);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < options.max_iterations {
        iterations += 1;
        let (jtj, jtr) = normal_equations(&u, &v, &p, sign, n_par);
        let mut accepted = false;
        while lambda < 1e20 {
            let mut a = jtj;
            for i in 0..n_par {
                a[i][i] += lambda * jtj[i][i].max(1e-30);
            }
            let Some(step) = solve(&a, &jtr, n_par) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = p;
            for i in 0..n_par {
                trial[i] += step[i];
            }
            let trial_cost = cost_of(&u, &v, &trial, sign);
            if trial_cost.is_finite() && trial_cost <= cost {
                let small = (0..n_par)
                    .all(|i| step[i].abs() <= options.tolerance * (1.0 + trial[i].abs()));
                p = trial;
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if small {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No descent direction left at machine precision: stationary point.
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::Fit(format!(
            "no convergence after {} iterations",
            options.max_iterations
        )));
    }

    let amplitude = p[0] * init.amplitude;
    let sigma = p[2].abs() * init.sigma;
    if !(amplitude > 0.0) || !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Fit(format!(
            "fit collapsed to amplitude {amplitude:e}, sigma {sigma:e}"
        )));
    }
    let center = init.center + p[1] * init.sigma;
    let offset = match options.offset {
        OffsetMode::Free => init.offset + p[3] * init.amplitude,
        OffsetMode::Fixed(o) => o,
    };
    let mut result = GaussianFitResult {
        shape,
        amplitude,
        center,
        sigma,
        offset,
        rms_residual: 0.0,
        iterations,
        non_gaussian: false,
    };
    let sq: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| (y - result.eval(x)).powi(2))
        .sum();
    result.rms_residual = (sq / xs.len() as f64).sqrt();
    result.non_gaussian = result.rms_residual > NON_GAUSSIAN_RMS_FRACTION * amplitude;
    Ok(result)
}

struct Guess {
    amplitude: f64,
    center: f64,
    sigma: f64,
    offset: f64,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn initial_guess(xs: &[f64], ys: &[f64], shape: GaussianShape, offset: OffsetMode) -> Result<Guess> {
    let n = xs.len();
    let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = lo.abs().max(hi.abs());
    if hi - lo <= 1e-14 * scale || scale == 0.0 {
        return Err(Error::Fit("degenerate (flat) data".into()));
    }

    let n_edge = (n / 10).max(1);
    let mut edges: Vec<f64> = ys[..n_edge].iter().chain(&ys[n - n_edge..]).copied().collect();
    let edge_median = median(&mut edges);
    let mut deviations: Vec<f64> = ys[..n_edge]
        .iter()
        .chain(&ys[n - n_edge..])
        .map(|y| (y - edge_median).abs())
        .collect();
    let noise = 1.4826 * median(&mut deviations);

    let base = match offset {
        OffsetMode::Free => edge_median,
        OffsetMode::Fixed(o) => o,
    };
    let sign = shape.sign();
    let (k_ext, signal) = ys
        .iter()
        .enumerate()
        .map(|(k, &y)| (k, sign * (y - base)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty");
    if !(signal > 0.0) {
        return Err(Error::Fit(format!("no {shape:?} found above the baseline")));
    }
    if signal <= 3.0 * noise {
        return Err(Error::Fit(format!(
            "{shape:?} amplitude {signal:e} not discernible above noise floor {noise:e}"
        )));
    }

    let half = 0.5 * signal;
    let level = |k: usize| sign * (ys[k] - base);
    let crossing = |from: usize, to: usize| -> f64 {
        let (a, b) = (level(from), level(to));
        let t = if (a - b).abs() > 0.0 { (a - half) / (a - b) } else { 0.5 };
        xs[from] + t * (xs[to] - xs[from])
    };
    let left = (1..=k_ext)
        .rev()
        .find(|&k| level(k - 1) < half)
        .map(|k| crossing(k, k - 1));
    let right = (k_ext..n - 1)
        .find(|&k| level(k + 1) < half)
        .map(|k| crossing(k, k + 1));
    let xc = xs[k_ext];
    let half_width = match (left, right) {
        (Some(l), Some(r)) => 0.5 * (r - l),
        (Some(l), None) => xc - l,
        (None, Some(r)) => r - xc,
        (None, None) => 0.25 * (xs[n - 1] - xs[0]),
    };
    let min_spacing = xs
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > 0.0)
        .fold(f64::INFINITY, f64::min);
    let sigma = (2.0 * half_width / crate::width::fwhm_per_sigma()).max(0.5 * min_spacing);
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::Fit("cannot estimate an initial width".into()));
    }
    Ok(Guess {
        amplitude: signal,
        center: xc,
        sigma,
        offset: base,
    })
}

fn cost_of(u: &[f64], v: &[f64], p: &[f64; 4], sign: f64) -> f64 {
    u.iter()
        .zip(v)
        .map(|(&x, &y)| {
            let d = x - p[1];
            let r = y - (p[3] + sign * p[0] * (-0.5 * d * d / (p[2] * p[2])).exp());
            r * r
        })
        .sum()
}

fn normal_equations(
    u: &[f64],
    v: &[f64],
    p: &[f64; 4],
    sign: f64,
    n_par: usize,
) -> ([[f64; 4]; 4], [f64; 4]) {
    let mut jtj = [[0.0; 4]; 4];
    let mut jtr = [0.0; 4];
    let w2 = p[2] * p[2];
    for (&x, &y) in u.iter().zip(v) {
        let d = x - p[1];
        let e = (-0.5 * d * d / w2).exp();
        let model = p[3] + sign * p[0] * e;
        let r = y - model;
        let j = [
            sign * e,
            sign * p[0] * e * d / w2,
            sign * p[0] * e * d * d / (w2 * p[2]),
            1.0,
        ];
        for a in 0..n_par {
            jtr[a] += j[a] * r;
            for b in 0..n_par {
                jtj[a][b] += j[a] * j[b];
            }
        }
    }
    (jtj, jtr)
}

/// Gaussian elimination with partial pivoting on the leading `n` x `n` block.
fn solve(a: &[[f64; 4]; 4], b: &[f64; 4], n: usize) -> Option<[f64; 4]> {
    let mut m = *a;
    let mut rhs = *b;
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..n).rev() {
        let mut s = rhs[row];
        for k in row + 1..n {
            s -= m[row][k] * x[k];
        }
        x[row] = s / m[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}
