//! Partitions `0 = t_0 < t_1 < ... < t_N = T` of a time horizon.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A strictly increasing partition of `[0, T]` with its step sizes.
///
/// Points are stored explicitly and the steps are differences of stored
/// points, so `t_k + h_k == t_{k+1}` up to a single rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
    steps: Vec<f64>,
    mesh: f64,
}

/// Serialised form of a graded grid family member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "N")]
    pub steps: usize,
    pub gamma: f64,
}

impl GridSpec {
    pub fn build(&self) -> Result<TimeGrid> {
        TimeGrid::graded(self.horizon, self.steps, self.gamma)
    }
}

impl TimeGrid {
    /// Uniform grid with `n` steps on `[0, horizon]`.
    pub fn uniform(horizon: f64, n: usize) -> Result<Self> {
        Self::graded(horizon, n, 1.0)
    }

    /// Graded grid `t_k = T (k/N)^gamma`. `gamma = 1` is uniform.
    pub fn graded(horizon: f64, n: usize, gamma: f64) -> Result<Self> {
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::invalid("T", format!("must be finite and positive, got {horizon}")));
        }
        if n == 0 {
            return Err(Error::invalid("N", "must be at least 1"));
        }
        if !gamma.is_finite() || gamma < 1.0 {
            return Err(Error::invalid("gamma", format!("grading exponent must be >= 1, got {gamma}")));
        }
        let nf = n as f64;
        let mut points: Vec<f64> = (0..=n)
            .map(|k| {
                if gamma == 1.0 {
                    horizon * k as f64 / nf
                } else {
                    horizon * (k as f64 / nf).powf(gamma)
                }
            })
            .collect();
        points[n] = horizon;
        Self::from_points(points)
    }

    /// Grid from explicit points; must start at 0 and increase strictly.
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("points", "a grid needs at least two points"));
        }
        if points[0] != 0.0 {
            return Err(Error::invalid("points", "first grid point must be 0"));
        }
        if points.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("points", "grid points must be finite"));
        }
        let steps: Vec<f64> = points.windows(2).map(|w| w[1] - w[0]).collect();
        if steps.iter().any(|&h| h <= 0.0) {
            return Err(Error::invalid("points", "grid points must be strictly increasing"));
        }
        let mesh = steps.iter().copied().fold(0.0, f64::max);
        Ok(Self { points, steps, mesh })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    /// Maximum step `h = max_k h_k`.
    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    pub fn horizon(&self) -> f64 {
        *self.points.last().expect("grid has at least two points")
    }

    /// Number of steps `N`.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `sum_l h_l^(tau+1)`, which never exceeds `h^tau * T`.
    pub fn power_step_sum(&self, tau: f64) -> Result<f64> {
        if !(tau >= 0.0) {
            return Err(Error::invalid("tau", format!("exponent must be >= 0, got {tau}")));
        }
        Ok(self.steps.iter().map(|h| h.powf(tau + 1.0)).sum())
    }
}
