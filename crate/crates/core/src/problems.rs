//! Linear operator differential equations `u' + α(t) A u = b(t)` with a
//! diagonal operator `A`, together with their exact flow maps.
//!
//! The admissible coefficient class is deliberately small: `α` constant or
//! affine and each forcing mode a polynomial of degree at most two. Within
//! it the Duhamel integral is evaluated exactly except for the combination
//! of an affine `α` with nonzero forcing, which is integrated by adaptive
//! Gauss–Legendre quadrature to roughly machine precision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;
use crate::spaces::{SpaceDescriptor, SpectralVector};

/// Relative slack when checking `t + h <= T`; grid points accumulate one rounding.
const HORIZON_SLACK: f64 = 1e-12;

/// Multiplicative time dependence `α(t)` of the operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeScaling {
    Constant { value: f64 },
    /// `α(t) = offset + slope * t`
    Affine { offset: f64, slope: f64 },
}

impl TimeScaling {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            TimeScaling::Constant { value } => value,
            TimeScaling::Affine { offset, slope } => offset + slope * t,
        }
    }

    /// Exact mean of `α` over `[t, t + h]`; `α(t)` when `h = 0`.
    pub fn mean(&self, h: f64, t: f64) -> f64 {
        match *self {
            TimeScaling::Constant { value } => value,
            TimeScaling::Affine { offset, slope } => offset + slope * (t + 0.5 * h),
        }
    }

    /// `(min, max)` of `α` on `[0, horizon]`.
    pub fn bounds(&self, horizon: f64) -> (f64, f64) {
        let (a, b) = (self.at(0.0), self.at(horizon));
        (a.min(b), a.max(b))
    }
}

/// Quadratic forcing coefficient `b_j(t) = c0 + c1 t + c2 t²`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Quadratic(pub [f64; 3]);

impl Quadratic {
    pub fn at(&self, t: f64) -> f64 {
        let [c0, c1, c2] = self.0;
        c0 + t * (c1 + t * c2)
    }

    /// Exact mean over `[t, t + h]`.
    pub fn mean(&self, h: f64, t: f64) -> f64 {
        let [c0, c1, c2] = self.0;
        // mean of s over the interval is t + h/2, mean of s² is t² + t h + h²/3
        c0 + c1 * (t + 0.5 * h) + c2 * (t * t + t * h + h * h / 3.0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| *c == 0.0)
    }

    /// Coefficients of `σ ↦ b(end - σ)`.
    fn reflected(&self, end: f64) -> [f64; 3] {
        let [_, c1, c2] = self.0;
        [self.at(end), -c1 - 2.0 * c2 * end, c2]
    }
}

/// `(μ, κ, β)` of the Gårding and boundedness conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GardingConstants {
    pub mu: f64,
    pub kappa: f64,
    pub beta: f64,
}

/// A diagonal linear evolution problem on `[0, T]`.
///
/// `rates` holds the diagonal of `A` in the eigenbasis described by `space`.
/// For the heat model they coincide with the space eigenvalues; the scalar
/// test equation `u' = λ u` uses a single rate `-λ` of either sign.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    space: SpaceDescriptor,
    rates: Vec<f64>,
    scaling: TimeScaling,
    forcing: Vec<Quadratic>,
    horizon: f64,
}

impl Problem {
    pub fn new(
        space: SpaceDescriptor,
        rates: Vec<f64>,
        scaling: TimeScaling,
        forcing: Vec<Quadratic>,
        horizon: f64,
    ) -> Result<Self> {
        if rates.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: rates.len(),
            });
        }
        if rates.iter().any(|r| !r.is_finite()) {
            return Err(Error::invalid("rates", "operator eigenvalues must be finite"));
        }
        if !forcing.is_empty() && forcing.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: forcing.len(),
            });
        }
        if forcing.iter().flat_map(|q| q.0).any(|c| !c.is_finite()) {
            return Err(Error::invalid("forcing", "forcing coefficients must be finite"));
        }
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::invalid("T", format!("must be finite and positive, got {horizon}")));
        }
        let (lo, hi) = scaling.bounds(horizon);
        if !(lo > 0.0) || !hi.is_finite() {
            return Err(Error::invalid(
                "alpha",
                format!("time scaling must stay positive and finite on [0, {horizon}]"),
            ));
        }
        let forcing = if forcing.iter().all(Quadratic::is_zero) {
            Vec::new()
        } else {
            forcing
        };
        Ok(Self {
            space,
            rates,
            scaling,
            forcing,
            horizon,
        })
    }

    /// Heat equation on `(0, π)` truncated to `dim` sine modes, `α ≡ 1`, `b ≡ 0`.
    pub fn heat(dim: usize, horizon: f64) -> Result<Self> {
        let space = SpaceDescriptor::laplacian_1d(dim)?;
        let rates = space.eigenvalues().to_vec();
        Self::new(space, rates, TimeScaling::Constant { value: 1.0 }, Vec::new(), horizon)
    }

    /// Scalar test equation `u' = λ u`.
    pub fn scalar(lambda: f64, horizon: f64) -> Result<Self> {
        Self::new(
            SpaceDescriptor::new(vec![1.0])?,
            vec![-lambda],
            TimeScaling::Constant { value: 1.0 },
            Vec::new(),
            horizon,
        )
    }

    pub fn with_scaling(self, scaling: TimeScaling) -> Result<Self> {
        Self::new(self.space, self.rates, scaling, self.forcing, self.horizon)
    }

    pub fn with_forcing(self, forcing: Vec<Quadratic>) -> Result<Self> {
        Self::new(self.space, self.rates, self.scaling, forcing, self.horizon)
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn scaling(&self) -> TimeScaling {
        self.scaling
    }

    pub fn forcing(&self) -> &[Quadratic] {
        &self.forcing
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub(crate) fn has_forcing(&self) -> bool {
        !self.forcing.is_empty()
    }

    pub(crate) fn check_interval(&self, h: f64, t: f64) -> Result<()> {
        if !(h >= 0.0) || !(t >= 0.0) || t + h > self.horizon * (1.0 + HORIZON_SLACK) {
            return Err(Error::OutsideHorizon {
                start: t,
                end: t + h,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    /// Forcing vector `b(t)`.
    pub fn forcing_at(&self, t: f64) -> SpectralVector {
        if self.forcing.is_empty() {
            return SpectralVector::zeros(self.dim());
        }
        SpectralVector::from_fn(self.dim(), |j| self.forcing[j].at(t))
    }

    /// `A(t) x`, coefficients `α(t) a_j x_j`.
    pub fn apply_operator(&self, t: f64, x: &SpectralVector) -> Result<SpectralVector> {
        x.check_dim(self.dim())?;
        self.check_interval(0.0, t)?;
        let alpha = self.scaling.at(t);
        Ok(SpectralVector::from_fn(self.dim(), |j| alpha * self.rates[j] * x[j]))
    }

    /// Right-hand side `f(t, x) = b(t) - A(t) x` of `u' = f(t, u)`.
    pub fn vector_field(&self, t: f64, x: &SpectralVector) -> SpectralVector {
        let alpha = self.scaling.at(t);
        SpectralVector::from_fn(self.dim(), |j| {
            let b = self.forcing.get(j).map_or(0.0, |q| q.at(t));
            b - alpha * self.rates[j] * x[j]
        })
    }

    /// Lipschitz constant of `x ↦ f(t, x)` in `H`, uniformly in `t`.
    pub fn vector_field_lipschitz(&self) -> f64 {
        let (_, hi) = self.scaling.bounds(self.horizon);
        hi * self.rates.iter().fold(0.0f64, |m, r| m.max(r.abs()))
    }

    /// Smallest `L_φ` with `|φ(h,t,x) - φ(h,t,y)| <= (1 + L_φ h)|x - y|` for
    /// all `0 < h <= h_star`. Zero for dissipative problems.
    pub fn flow_lipschitz(&self, h_star: f64) -> f64 {
        let (lo, hi) = self.scaling.bounds(self.horizon);
        let growth = self
            .rates
            .iter()
            .map(|&a| if a < 0.0 { -a * hi } else { -a * lo })
            .fold(f64::NEG_INFINITY, f64::max);
        if growth <= 0.0 {
            0.0
        } else {
            // (e^{g h} - 1)/h is increasing in h
            (growth * h_star).exp_m1() / h_star
        }
    }

    /// Exact flow `φ(h, t, x)`: the solution at `t + h` started from `x` at `t`.
    pub fn exact_flow(&self, h: f64, t: f64, x: &SpectralVector) -> Result<SpectralVector> {
        x.check_dim(self.dim())?;
        self.check_interval(h, t)?;
        if h == 0.0 {
            return Ok(x.clone());
        }
        let alpha_mean = self.scaling.mean(h, t);
        let mut out = SpectralVector::from_fn(self.dim(), |j| {
            (-self.rates[j] * alpha_mean * h).exp() * x[j]
        });
        if self.has_forcing() {
            for j in 0..self.dim() {
                out[j] += self.duhamel_forcing(j, h, t);
            }
        }
        Ok(out)
    }

    /// `∫_t^{t+h} exp(-a_j ∫_s^{t+h} α) b_j(s) ds`.
    fn duhamel_forcing(&self, j: usize, h: f64, t: f64) -> f64 {
        let q = self.forcing[j];
        if q.is_zero() {
            return 0.0;
        }
        let a = self.rates[j];
        let end = t + h;
        match self.scaling {
            TimeScaling::Constant { value } => {
                let z = a * value * h;
                let [b0, b1, b2] = q.reflected(end);
                let g = exp_moments(z);
                b0 * h * g[0] + b1 * h * h * g[1] + b2 * h * h * h * g[2]
            }
            TimeScaling::Affine { .. } => {
                let scaling = self.scaling;
                let integrand = move |s: f64| {
                    let decay = a * (end - s) * scaling.at(0.5 * (s + end));
                    (-decay).exp() * q.at(s)
                };
                quadrature::integrate(integrand, t, end, 1e-15)
            }
        }
    }

    /// `(μ, κ, β)` for `a(t,u,v) = Σ α(t) a_j u_j v_j` with the `V` norm of `space`.
    ///
    /// When every ratio `a_j / λ_j` is positive the constants are sharp with
    /// `κ = 0`. Otherwise `μ = α_min` is fixed and `κ` is the smallest shift
    /// that makes the inequality hold mode by mode.
    pub fn garding_constants(&self) -> GardingConstants {
        let (lo, hi) = self.scaling.bounds(self.horizon);
        let weights = self.space.eigenvalues();
        let ratios = self.rates.iter().zip(weights).map(|(a, w)| a / w);
        let min_ratio = ratios.clone().fold(f64::INFINITY, f64::min);
        let max_abs_ratio = ratios.fold(0.0f64, |m, r| m.max(r.abs()));
        let beta = hi * max_abs_ratio;
        if min_ratio > 0.0 {
            return GardingConstants {
                mu: lo * min_ratio,
                kappa: 0.0,
                beta,
            };
        }
        let mu = lo;
        let kappa = self
            .rates
            .iter()
            .zip(weights)
            .map(|(&a, &w)| {
                let worst = if a >= 0.0 { lo * a } else { hi * a };
                mu * w - worst
            })
            .fold(0.0f64, f64::max);
        GardingConstants {
            mu,
            kappa,
            beta: beta.max(mu),
        }
    }
}

/// `g_n(z) = ∫_0^1 e^{-z x} x^n dx` for `n = 0, 1, 2`.
pub(crate) fn exp_moments(z: f64) -> [f64; 3] {
    if z.abs() <= 1.0 {
        let mut g = [0.0; 3];
        let mut term = 1.0; // (-z)^m / m!
        for m in 0..30 {
            for (n, gn) in g.iter_mut().enumerate() {
                *gn += term / (n + m + 1) as f64;
            }
            term *= -z / (m + 1) as f64;
        }
        g
    } else {
        let e = (-z).exp();
        let g0 = -(-z).exp_m1() / z;
        let g1 = (g0 - e) / z;
        let g2 = (2.0 * g1 - e) / z;
        [g0, g1, g2]
    }
}
