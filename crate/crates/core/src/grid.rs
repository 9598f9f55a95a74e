//! Uniform sampling grids for angular-frequency detunings and time delays.

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};

/// Smallest frequency grid accepted by [`FrequencyGrid::new`].
pub const MIN_FREQUENCY_POINTS: usize = 16;

fn symmetric_point(center: f64, span: f64, n: usize, k: usize) -> f64 {
    let step = span / (n - 1) as f64;
    center + (k as f64 - (n - 1) as f64 / 2.0) * step
}

/// Uniform 1-D grid of angular-frequency detunings (rad/s), symmetric about
/// `center_offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    center_offset: f64,
    span: f64,
    n_points: usize,
}

impl FrequencyGrid {
    pub fn new(center_offset: f64, span: f64, n_points: usize) -> Result<Self> {
        if !center_offset.is_finite() {
            return Err(Error::Grid(format!("non-finite center offset {center_offset}")));
        }
        require_positive("span", span)?;
        if n_points < MIN_FREQUENCY_POINTS {
            return Err(Error::Grid(format!(
                "{n_points} points is below the minimum of {MIN_FREQUENCY_POINTS}"
            )));
        }
        Ok(FrequencyGrid {
            center_offset,
            span,
            n_points,
        })
    }

    /// Grid centred on zero detuning covering `[-half_span, half_span]`.
    pub fn centered(half_span: f64, n_points: usize) -> Result<Self> {
        FrequencyGrid::new(0.0, 2.0 * half_span, n_points)
    }

    pub fn center_offset(&self) -> f64 {
        self.center_offset
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn half_span(&self) -> f64 {
        self.span / 2.0
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.span / (self.n_points - 1) as f64
    }

    pub fn point(&self, k: usize) -> f64 {
        symmetric_point(self.center_offset, self.span, self.n_points, k)
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.point(k)).collect()
    }

    pub fn min(&self) -> f64 {
        self.center_offset - self.half_span()
    }

    pub fn max(&self) -> f64 {
        self.center_offset + self.half_span()
    }

    /// Same grid with twice the resolution over the same span.
    pub fn refined(&self) -> Self {
        FrequencyGrid {
            n_points: 2 * self.n_points - 1,
            ..*self
        }
    }

    /// True when both grids sample identical points (to a relative tolerance).
    pub fn matches(&self, other: &FrequencyGrid) -> bool {
        let scale = self.span.abs().max(other.span.abs());
        self.n_points == other.n_points
            && (self.center_offset - other.center_offset).abs() <= 1e-12 * scale
            && (self.span - other.span).abs() <= 1e-12 * scale
    }
}

/// Uniform grid of time delays (s), symmetric about `center`.
///
/// Doubles as the time axis for two-time correlation functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayGrid {
    center: f64,
    span: f64,
    n_points: usize,
}

pub type TimeGrid = DelayGrid;

impl DelayGrid {
    pub fn new(center: f64, span: f64, n_points: usize) -> Result<Self> {
        if !center.is_finite() {
            return Err(Error::Grid(format!("non-finite delay center {center}")));
        }
        require_positive("delay span", span)?;
        if n_points < 3 {
            return Err(Error::Grid(format!(
                "delay grid needs at least 3 points, got {n_points}"
            )));
        }
        Ok(DelayGrid {
            center,
            span,
            n_points,
        })
    }

    /// Grid symmetric about zero delay.
    pub fn symmetric(half_span: f64, n_points: usize) -> Result<Self> {
        DelayGrid::new(0.0, 2.0 * half_span, n_points)
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn half_span(&self) -> f64 {
        self.span / 2.0
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.span / (self.n_points - 1) as f64
    }

    pub fn point(&self, k: usize) -> f64 {
        symmetric_point(self.center, self.span, self.n_points, k)
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.point(k)).collect()
    }

    /// Index of the sample closest to the grid center.
    pub fn center_index(&self) -> usize {
        (self.n_points - 1) / 2
    }

    /// Largest distance of any sample from zero delay.
    pub fn max_abs(&self) -> f64 {
        self.center.abs() + self.half_span()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_points() {
        let g = FrequencyGrid::new(0.0, 30.0, 31).unwrap();
        let expected: Vec<f64> = (-15..=15).map(f64::from).collect();
        assert_eq!(g.points(), expected);
        assert_eq!(g.step(), 1.0);
    }

    #[test]
    fn step_for_ten_sigma_half_span() {
        let sigma = 3.7e12;
        let g = FrequencyGrid::new(0.0, 2.0 * sigma * 10.0, 512).unwrap();
        assert!((g.step() - 20.0 * sigma / 511.0).abs() <= 1e-15 * g.step() * 1e3);
    }

    #[test]
    fn rejects_degenerate() {
        assert!(FrequencyGrid::new(1.0, 5.0, 2).is_err());
        assert!(FrequencyGrid::new(0.0, 10.0, 11).is_err());
        assert!(FrequencyGrid::new(0.0, 0.0, 64).is_err());
        assert!(FrequencyGrid::new(0.0, -1.0, 64).is_err());
        assert!(FrequencyGrid::new(f64::NAN, 1.0, 64).is_err());
        assert!(DelayGrid::new(0.0, 1.0, 2).is_err());
    }

    #[test]
    fn symmetric_about_center() {
        let g = FrequencyGrid::new(2.5e12, 7.1e13, 513).unwrap();
        for k in 0..g.len() {
            let a = g.point(k) - g.center_offset();
            let b = g.point(g.len() - 1 - k) - g.center_offset();
            assert!((a + b).abs() <= 1e-3 * g.step(), "k={k}");
        }
        assert_eq!(g.point(256), 2.5e12);
    }

    #[test]
    fn refinement_keeps_points() {
        let g = FrequencyGrid::centered(5.0, 17).unwrap();
        let r = g.refined();
        assert_eq!(r.len(), 33);
        assert!((r.step() - g.step() / 2.0).abs() < 1e-15);
        for k in 0..g.len() {
            assert!((r.point(2 * k) - g.point(k)).abs() < 1e-12);
        }
    }

    #[test]
    fn delay_center_sample() {
        let d = DelayGrid::new(-1e-12, 4e-12, 401).unwrap();
        assert_eq!(d.point(d.center_index()), -1e-12);
        assert!((d.max_abs() - 3e-12).abs() < 1e-24);
    }
}
