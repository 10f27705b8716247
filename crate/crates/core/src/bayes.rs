//! Conjugate Gaussian posteriors for a diagonal linear inverse problem.
//!
//! The unknown initial state is observed after one step of the heat flow
//! `G = e^{-hA}`. Replacing `G` by the implicit Euler map `G̃ = (I + hA)^{-1}`
//! biases the posterior; adding the randomisation `h^{p+1} ζ` to the
//! surrogate keeps the posterior spread away from zero as the observation
//! noise vanishes. Every operator is diagonal, so all formulas are scalar.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::analysis::format_g17;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PosteriorVariant {
    /// True forward map `g_j = e^{-hλ_j}`.
    Exact,
    /// Implicit Euler surrogate `g̃_j = 1/(1 + hλ_j)`.
    Discretised,
    /// Surrogate plus the randomisation variance `h^{2p+2} γ1_j`.
    Randomised,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalGaussianModel {
    lambda: Vec<f64>,
    h: f64,
    p: f64,
    prior_mean: Vec<f64>,
    prior_var: Vec<f64>,
    obs_var: Vec<f64>,
    rand_var: Vec<f64>,
    truth: Vec<f64>,
}

fn check_len(name: &'static str, v: &[f64], dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(Error::invalid(name, format!("expected {dim} entries, got {}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(name, "entries must be finite"));
    }
    Ok(())
}

fn check_positive(name: &'static str, v: &[f64]) -> Result<()> {
    if v.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::invalid(name, "variances must be positive"));
    }
    Ok(())
}

impl DiagonalGaussianModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        lambda: Vec<f64>,
        h: f64,
        p: f64,
        prior_mean: Vec<f64>,
        prior_var: Vec<f64>,
        obs_var: Vec<f64>,
        rand_var: Vec<f64>,
        truth: Vec<f64>,
    ) -> Result<Self> {
        let dim = lambda.len();
        if dim == 0 {
            return Err(Error::invalid("lambda", "at least one mode is required"));
        }
        if lambda.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(Error::invalid("lambda", "eigenvalues must be positive and finite"));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::invalid("h", format!("must be positive, got {h}")));
        }
        if !(p >= 0.0) || !p.is_finite() {
            return Err(Error::invalid("p", format!("must be >= 0, got {p}")));
        }
        check_len("m0", &prior_mean, dim)?;
        check_len("gamma0", &prior_var, dim)?;
        check_len("gamma_obs", &obs_var, dim)?;
        check_len("gamma1", &rand_var, dim)?;
        check_len("theta", &truth, dim)?;
        check_positive("gamma0", &prior_var)?;
        check_positive("gamma_obs", &obs_var)?;
        check_positive("gamma1", &rand_var)?;
        Ok(Self {
            lambda,
            h,
            p,
            prior_mean,
            prior_var,
            obs_var,
            rand_var,
            truth,
        })
    }

    /// One mode with the given eigenvalue and unit variances, prior mean 0.
    pub fn single_mode(lambda: f64, h: f64, p: f64, truth: f64) -> Result<Self> {
        Self::new(vec![lambda], h, p, vec![0.0], vec![1.0], vec![1.0], vec![1.0], vec![truth])
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    pub fn truth(&self) -> &[f64] {
        &self.truth
    }

    pub fn forward(&self) -> Vec<f64> {
        self.lambda.iter().map(|l| (-self.h * l).exp()).collect()
    }

    pub fn surrogate(&self) -> Vec<f64> {
        self.lambda.iter().map(|l| 1.0 / (1.0 + self.h * l)).collect()
    }

    /// `G̃^{-1} G ϑ`, where the discretised posterior mean concentrates.
    pub fn biased_limit(&self) -> Vec<f64> {
        self.lambda
            .iter()
            .zip(&self.truth)
            .map(|(l, t)| (-self.h * l).exp() * (1.0 + self.h * l) * t)
            .collect()
    }

    /// Noiseless data `G ϑ`.
    pub fn clean_data(&self) -> Vec<f64> {
        self.forward().iter().zip(&self.truth).map(|(g, t)| g * t).collect()
    }

    /// Limit of the randomised posterior variance as `δ → 0`:
    /// `γ0 r / (r + g̃² γ0)` with `r = h^{2p+2} γ1`.
    pub fn randomised_variance_limit(&self) -> Vec<f64> {
        let r = self.h.powf(2.0 * self.p + 2.0);
        self.surrogate()
            .iter()
            .enumerate()
            .map(|(j, g)| {
                let extra = r * self.rand_var[j];
                self.prior_var[j] * extra / (extra + g * g * self.prior_var[j])
            })
            .collect()
    }

    /// Posterior mean and variance per mode for observation noise scale `δ`.
    pub fn posterior(&self, y: &[f64], delta: f64, variant: PosteriorVariant) -> Result<Posterior> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: y.len(),
            });
        }
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::invalid("delta", format!("must be finite and >= 0, got {delta}")));
        }
        let gains = match variant {
            PosteriorVariant::Exact => self.forward(),
            _ => self.surrogate(),
        };
        let r = match variant {
            PosteriorVariant::Randomised => self.h.powf(2.0 * self.p + 2.0),
            _ => 0.0,
        };
        let mut mean = Vec::with_capacity(self.dim());
        let mut variance = Vec::with_capacity(self.dim());
        for j in 0..self.dim() {
            let g = gains[j];
            let (m0, c0) = (self.prior_mean[j], self.prior_var[j]);
            // Data-space noise: observational part plus model randomisation.
            let noise = delta * self.obs_var[j] + r * self.rand_var[j];
            let denom = noise + g * g * c0;
            if denom == 0.0 {
                return Err(Error::Estimation(format!("vanishing denominator in mode {j}")));
            }
            mean.push(m0 + c0 * g * (y[j] - g * m0) / denom);
            // c0 - c0² g² / denom, written without cancellation.
            variance.push(c0 * noise / denom);
        }
        Ok(Posterior { mean, variance })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Posterior {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

/// How data are produced at each noise level of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataRule {
    /// `y = G ϑ`
    Noiseless,
    /// `y = G ϑ + (δ γobs)^{1/2} z` with one fixed standard normal draw `z`
    /// per mode, shared by all `δ`.
    Seeded(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub delta: f64,
    /// `max_j |m_j - ϑ_j|`
    pub err_exact_mean: f64,
    /// `max_j |m̃_j - (G̃^{-1} G ϑ)_j|`
    pub err_tilde_mean_vs_biased_limit: f64,
    /// `min_j Ĉ_j`
    pub min_hat_variance: f64,
}

pub const SWEEP_COLUMNS: [&str; 4] = ["delta", "err_exact_mean", "err_tilde_mean_vs_biased_limit", "min_hat_variance"];

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Evaluates all three posteriors along a strictly decreasing grid of noise
/// levels. A trailing `δ = 0` entry gives the small-noise limit itself.
pub fn small_noise_sweep(model: &DiagonalGaussianModel, deltas: &[f64], rule: DataRule) -> Result<Vec<SweepRow>> {
    if deltas.is_empty() {
        return Err(Error::invalid("delta", "noise grid is empty"));
    }
    if deltas.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
        return Err(Error::invalid("delta", "noise levels must be finite and >= 0"));
    }
    if deltas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::invalid("delta", "noise levels must be strictly decreasing"));
    }
    let clean = model.clean_data();
    let draws: Vec<f64> = match rule {
        DataRule::Noiseless => vec![0.0; model.dim()],
        DataRule::Seeded(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..model.dim()).map(|_| StandardNormal.sample(&mut rng)).collect()
        }
    };
    let biased = model.biased_limit();
    deltas
        .iter()
        .map(|&delta| {
            let y: Vec<f64> = (0..model.dim())
                .map(|j| clean[j] + (delta * model.obs_var[j]).sqrt() * draws[j])
                .collect();
            let exact = model.posterior(&y, delta, PosteriorVariant::Exact)?;
            let tilde = model.posterior(&y, delta, PosteriorVariant::Discretised)?;
            let hat = model.posterior(&y, delta, PosteriorVariant::Randomised)?;
            Ok(SweepRow {
                delta,
                err_exact_mean: max_abs_diff(&exact.mean, model.truth()),
                err_tilde_mean_vs_biased_limit: max_abs_diff(&tilde.mean, &biased),
                min_hat_variance: hat.variance.iter().copied().fold(f64::INFINITY, f64::min),
            })
        })
        .collect()
}

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = SWEEP_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        let cells = [r.delta, r.err_exact_mean, r.err_tilde_mean_vs_biased_limit, r.min_hat_variance];
        out.push_str(&cells.iter().map(|v| format_g17(*v)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}
