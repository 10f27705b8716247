//! Additive perturbations `ξ_k(h)` for randomised one-step methods.
//!
//! Every kind is built on a truncated Karhunen–Loève expansion
//! `Σ_j sqrt(γ_j) Z_j e_j` with `γ_j ∝ j^{-2s}` normalised to sum to one,
//! scaled by `C_ξ h^{p+1}`. That makes `E|ξ(h)|²_H = C_ξ² h^{2p+2}` exact for
//! the centred Gaussian, shared-factor and bounded kinds.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::analysis::{orlicz_norm_estimate, YoungFunction};
use crate::error::{Error, Result};
use crate::spaces::SpectralVector;

/// Sample count and seed for the one-off `‖ξ(1)‖_{Ψ₂}` calibration.
pub const PSI2_CALIBRATION_SAMPLES: usize = 100_000;
const PSI2_CALIBRATION_SEED: u64 = 0x9e37_79b9_7f4a_7c15;

/// Purpose tags that keep substreams of one master seed disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamDomain {
    StepNoise = 0,
    SharedFactor = 1,
    InitialState = 2,
    Calibration = 3,
    Data = 4,
}

/// Independent ChaCha stream keyed by `(seed, trajectory, index, domain)`.
///
/// Streams depend only on their key, so a trajectory's draws do not change
/// with the order or the thread in which trajectories are simulated.
pub fn substream(seed: u64, trajectory: u64, index: u64, domain: StreamDomain) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (chunk, word) in key
        .chunks_exact_mut(8)
        .zip([seed, trajectory, index, domain as u64])
    {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    /// Independent, centred Gaussian draws.
    CentredGaussian,
    /// Centred Gaussian plus the deterministic shift `coefficient h^{p+1} e_mode`.
    Biased { mode: usize, coefficient: f64 },
    /// One Gaussian factor per trajectory, mixed into every step with weight `rho`.
    SharedFactor { rho: f64 },
    /// Mode-wise uniform on `[-sqrt(3), sqrt(3)] sqrt(γ_j) C_ξ h^{p+1}`.
    BoundedUniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseNorm {
    L2,
    Psi2,
}

#[derive(Debug, Clone)]
pub struct NoiseModel {
    p: f64,
    c_xi: f64,
    smoothness: f64,
    kind: NoiseKind,
    spectrum: Vec<f64>,
    psi2_unit: OnceLock<f64>,
}

impl NoiseModel {
    /// `p >= 0`, `C_ξ >= 0`, `s > ½`, `dim` modes.
    pub fn new(p: f64, c_xi: f64, smoothness: f64, dim: usize, kind: NoiseKind) -> Result<Self> {
        if !(p >= 0.0) || !p.is_finite() {
            return Err(Error::invalid(
                "p",
                format!("decay order must be finite and >= 0, got {p} (use `demonstration` for p = -1/2)"),
            ));
        }
        Self::build(p, c_xi, smoothness, dim, kind)
    }

    /// SDE-like scaling `p = -½`. Draws have variance proportional to `h`,
    /// and no convergence statement applies.
    pub fn demonstration(c_xi: f64, smoothness: f64, dim: usize) -> Result<Self> {
        Self::build(-0.5, c_xi, smoothness, dim, NoiseKind::CentredGaussian)
    }

    /// Degenerate model producing zero perturbations.
    pub fn silent(dim: usize) -> Result<Self> {
        Self::new(1.0, 0.0, 1.0, dim, NoiseKind::CentredGaussian)
    }

    fn build(p: f64, c_xi: f64, smoothness: f64, dim: usize, kind: NoiseKind) -> Result<Self> {
        if !(c_xi >= 0.0) || !c_xi.is_finite() {
            return Err(Error::invalid("c_xi", format!("amplitude must be finite and >= 0, got {c_xi}")));
        }
        if !(smoothness > 0.5) || !smoothness.is_finite() {
            return Err(Error::invalid("s", format!("spectral decay must exceed 1/2, got {smoothness}")));
        }
        if dim == 0 {
            return Err(Error::invalid("dim", "noise needs at least one mode"));
        }
        match kind {
            NoiseKind::Biased { mode, coefficient } => {
                if mode >= dim {
                    return Err(Error::invalid("mode", format!("bias mode {mode} outside 0..{dim}")));
                }
                if !coefficient.is_finite() {
                    return Err(Error::invalid("coefficient", "bias coefficient must be finite"));
                }
            }
            NoiseKind::SharedFactor { rho } => {
                if !(0.0..=1.0).contains(&rho) {
                    return Err(Error::invalid("rho", format!("mixing weight must lie in [0, 1], got {rho}")));
                }
            }
            NoiseKind::CentredGaussian | NoiseKind::BoundedUniform => {}
        }
        let raw: Vec<f64> = (1..=dim).map(|j| (j as f64).powf(-2.0 * smoothness)).collect();
        let total: f64 = raw.iter().sum();
        let spectrum = raw.into_iter().map(|g| g / total).collect();
        Ok(Self {
            p,
            c_xi,
            smoothness,
            kind,
            spectrum,
            psi2_unit: OnceLock::new(),
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn c_xi(&self) -> f64 {
        self.c_xi
    }

    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.spectrum.len()
    }

    /// Normalised mode variances `γ_j`.
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn is_centred_independent(&self) -> bool {
        matches!(self.kind, NoiseKind::CentredGaussian | NoiseKind::BoundedUniform)
    }

    fn scale(&self, h: f64) -> f64 {
        self.c_xi * h.powf(self.p + 1.0)
    }

    /// Deterministic part `E ξ(h)`.
    pub fn mean(&self, h: f64) -> SpectralVector {
        let mut m = SpectralVector::zeros(self.dim());
        if let NoiseKind::Biased { mode, coefficient } = self.kind {
            m[mode] = coefficient * h.powf(self.p + 1.0);
        }
        m
    }

    /// One draw of `ξ(h)`. The shared-factor kind draws a fresh factor, so
    /// the result has the correct marginal law but no cross-step coupling;
    /// use [`TrajectoryNoise`] for coupled sequences.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, h: f64) -> Result<SpectralVector> {
        let shared = match self.kind {
            NoiseKind::SharedFactor { .. } => Some(self.gaussian_factor(rng)),
            _ => None,
        };
        self.sample_with(rng, h, shared.as_deref())
    }

    fn gaussian_factor<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    }

    fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R, h: f64, shared: Option<&[f64]>) -> Result<SpectralVector> {
        if !(h > 0.0) {
            return Err(Error::invalid("h", format!("noise needs a positive step, got {h}")));
        }
        let scale = self.scale(h);
        let mut out = SpectralVector::zeros(self.dim());
        match self.kind {
            NoiseKind::CentredGaussian | NoiseKind::Biased { .. } => {
                for (j, g) in self.spectrum.iter().enumerate() {
                    let z: f64 = rng.sample(StandardNormal);
                    out[j] = scale * g.sqrt() * z;
                }
                if let NoiseKind::Biased { mode, coefficient } = self.kind {
                    out[mode] += coefficient * h.powf(self.p + 1.0);
                }
            }
            NoiseKind::SharedFactor { rho } => {
                let shared = shared.expect("shared factor supplied for SharedFactor noise");
                let (ws, wi) = (rho.sqrt(), (1.0 - rho).sqrt());
                for (j, g) in self.spectrum.iter().enumerate() {
                    let z: f64 = rng.sample(StandardNormal);
                    out[j] = scale * g.sqrt() * (ws * shared[j] + wi * z);
                }
            }
            NoiseKind::BoundedUniform => {
                let edge = 3f64.sqrt();
                for (j, g) in self.spectrum.iter().enumerate() {
                    let u: f64 = rng.random_range(-edge..edge);
                    out[j] = scale * g.sqrt() * u;
                }
            }
        }
        Ok(out)
    }

    /// Constant `C` in `‖ξ(h)‖_{L²(Ω;H)} = C h^{p+1}`.
    pub fn l2_amplitude(&self) -> f64 {
        match self.kind {
            NoiseKind::Biased { coefficient, .. } => self.c_xi.hypot(coefficient),
            _ => self.c_xi,
        }
    }

    /// `‖ξ(1)‖_{Ψ₂}` estimated once from [`PSI2_CALIBRATION_SAMPLES`] draws and cached.
    pub fn psi2_unit_norm(&self) -> Result<f64> {
        if let Some(v) = self.psi2_unit.get() {
            return Ok(*v);
        }
        let mut rng = substream(PSI2_CALIBRATION_SEED, 0, 0, StreamDomain::Calibration);
        let mut norms = Vec::with_capacity(PSI2_CALIBRATION_SAMPLES);
        for _ in 0..PSI2_CALIBRATION_SAMPLES {
            norms.push(self.sample(&mut rng, 1.0)?.h_norm());
        }
        let value = orlicz_norm_estimate(&norms, YoungFunction::Psi2)?;
        Ok(*self.psi2_unit.get_or_init(|| value))
    }

    /// `‖ξ(h)‖` in `L²(Ω;H)` or `Ψ₂(Ω;H)`, using the exact `h^{p+1}` scaling.
    pub fn theoretical_norm(&self, h: f64, norm: NoiseNorm) -> Result<f64> {
        if !(h > 0.0) {
            return Err(Error::invalid("h", format!("noise needs a positive step, got {h}")));
        }
        let unit = match norm {
            NoiseNorm::L2 => self.l2_amplitude(),
            NoiseNorm::Psi2 => self.psi2_unit_norm()?,
        };
        Ok(unit * h.powf(self.p + 1.0))
    }
}

/// Per-trajectory noise source with counter-derived substreams.
#[derive(Debug, Clone)]
pub struct TrajectoryNoise<'a> {
    model: &'a NoiseModel,
    seed: u64,
    trajectory: u64,
    shared: Option<Vec<f64>>,
}

impl<'a> TrajectoryNoise<'a> {
    pub fn new(model: &'a NoiseModel, seed: u64, trajectory: u64) -> Self {
        let shared = match model.kind {
            NoiseKind::SharedFactor { .. } => {
                let mut rng = substream(seed, trajectory, 0, StreamDomain::SharedFactor);
                Some(model.gaussian_factor(&mut rng))
            }
            _ => None,
        };
        Self {
            model,
            seed,
            trajectory,
            shared,
        }
    }

    /// `ξ_step(h)`; the same `(seed, trajectory, step)` always gives the same draw.
    pub fn draw(&self, step: usize, h: f64) -> Result<SpectralVector> {
        let mut rng = substream(self.seed, self.trajectory, step as u64, StreamDomain::StepNoise);
        self.model.sample_with(&mut rng, h, self.shared.as_deref())
    }

    /// Gaussian perturbation `amplitude Σ sqrt(γ_j) Z_j e_j` of an initial state.
    pub fn initial_perturbation(&self, amplitude: f64) -> SpectralVector {
        let mut rng = substream(self.seed, self.trajectory, 0, StreamDomain::InitialState);
        SpectralVector::from_fn(self.model.dim(), |j| {
            let z: f64 = rng.sample(StandardNormal);
            amplitude * self.model.spectrum[j].sqrt() * z
        })
    }
}
