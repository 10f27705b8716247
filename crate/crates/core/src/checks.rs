//! Randomised self-checks shared by the CLI and the test-suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::analysis::{
    gronwall_nonuniform, gronwall_special, gronwall_uniform, lr_norm_estimate, orlicz_norm_estimate, YoungFunction,
};
use crate::error::{Error, Result};
use crate::randomisation::{substream, NoiseModel, StreamDomain};

/// Relative slack allowed when comparing a realised sequence with its bound.
pub const DOMINANCE_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceResult {
    pub name: &'static str,
    pub sequences: usize,
    pub violations: usize,
    /// Largest `y_k / bound_k` seen (0 when every bound vanished).
    pub worst_ratio: f64,
}

impl DominanceResult {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

struct Tally {
    violations: usize,
    worst: f64,
}

impl Tally {
    fn new() -> Self {
        Self { violations: 0, worst: 0.0 }
    }

    /// Records one sequence; counts it once however many entries exceed.
    fn record(&mut self, realised: &[f64], bounds: &[f64]) {
        let mut bad = false;
        for (y, b) in realised.iter().zip(bounds) {
            if *y > b * (1.0 + DOMINANCE_REL_TOL) {
                bad = true;
            }
            if *b > 0.0 {
                self.worst = self.worst.max(y / b);
            }
        }
        if bad {
            self.violations += 1;
        }
    }
}

/// Sequences saturating `y_{k+1} <= (1 + A h) y_k + B h^p` up to a random
/// factor in `[0, 1]` on the increment, checked against [`gronwall_uniform`].
pub fn uniform_dominance(sequences: usize, seed: u64) -> Result<DominanceResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::new();
    for _ in 0..sequences {
        let a = if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..3.0) };
        let b = rng.random_range(0.0..2.0);
        let p = rng.random_range(1.0..3.0);
        let n = rng.random_range(1..=200usize);
        let horizon = rng.random_range(0.1..2.0);
        let h = horizon / n as f64;
        let mut y = rng.random_range(0.0..1.0);
        let y0 = y;
        let full = rng.random_bool(0.5);
        let bound = gronwall_uniform(y0, a, b, p, h, horizon)?;
        let mut realised = vec![y];
        for _ in 0..n {
            let u = if full { 1.0 } else { rng.random_range(0.0..=1.0) };
            y = (1.0 + a * h) * y + u * b * h.powf(p);
            realised.push(y);
        }
        tally.record(&realised, &vec![bound; realised.len()]);
    }
    Ok(DominanceResult {
        name: "uniform",
        sequences,
        violations: tally.violations,
        worst_ratio: tally.worst,
    })
}

/// Sequences with `y_0 <= c` and `y_{k+1} <= c + Σ_{j<=k} g_j y_j`,
/// checked against [`gronwall_special`].
pub fn special_dominance(sequences: usize, seed: u64) -> Result<DominanceResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::new();
    for _ in 0..sequences {
        let c = rng.random_range(0.0..2.0);
        let n = rng.random_range(1..=100usize);
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.5)).collect();
        let full = rng.random_bool(0.5);
        let bounds = gronwall_special(c, &g)?;
        let mut realised = vec![if full { c } else { c * rng.random_range(0.0..=1.0) }];
        let mut acc = 0.0;
        for k in 0..n {
            acc += g[k] * realised[k];
            let u = if full { 1.0 } else { rng.random_range(0.0..=1.0) };
            realised.push(u * (c + acc));
        }
        tally.record(&realised, &bounds);
    }
    Ok(DominanceResult {
        name: "special",
        sequences,
        violations: tally.violations,
        worst_ratio: tally.worst,
    })
}

/// Sequences with `y_{k+1} <= (1 + A h_k) y_k + b_k` on random steps,
/// checked against [`gronwall_nonuniform`].
pub fn nonuniform_dominance(sequences: usize, seed: u64) -> Result<DominanceResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tally = Tally::new();
    for _ in 0..sequences {
        let a = if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..3.0) };
        let n = rng.random_range(1..=150usize);
        let steps: Vec<f64> = (0..n).map(|_| rng.random_range(1e-4..0.1)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.2)).collect();
        let y0 = rng.random_range(0.0..1.0);
        let full = rng.random_bool(0.5);
        let bounds = gronwall_nonuniform(y0, a, &steps, &b)?;
        let mut realised = vec![y0];
        for k in 0..n {
            let u = if full { 1.0 } else { rng.random_range(0.0..=1.0) };
            realised.push((1.0 + a * steps[k]) * realised[k] + u * b[k]);
        }
        tally.record(&realised, &bounds);
    }
    Ok(DominanceResult {
        name: "nonuniform",
        sequences,
        violations: tally.violations,
        worst_ratio: tally.worst,
    })
}

/// All three dominance suites, seeded from one value.
pub fn gronwall_dominance(sequences: usize, seed: u64) -> Result<Vec<DominanceResult>> {
    Ok(vec![
        uniform_dominance(sequences, seed)?,
        special_dominance(sequences, seed.wrapping_add(1))?,
        nonuniform_dominance(sequences, seed.wrapping_add(2))?,
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingResult {
    pub steps: Vec<f64>,
    /// `‖ξ(t)‖_{L²(Ω;H)} / t^{p+1}` per step.
    pub normalised: Vec<f64>,
    /// `max / min - 1` over the normalised values.
    pub spread: f64,
}

/// Monte Carlo `L²(Ω;H)` norms of `ξ(t)` rescaled by `t^{p+1}`.
pub fn noise_scaling(model: &NoiseModel, steps: &[f64], samples: usize, seed: u64) -> Result<ScalingResult> {
    if steps.is_empty() || samples == 0 {
        return Err(Error::invalid("samples", "need at least one step and one sample"));
    }
    let mut normalised = Vec::with_capacity(steps.len());
    for (i, &t) in steps.iter().enumerate() {
        let mut rng = substream(seed, i as u64, 0, StreamDomain::Calibration);
        let mut norms = Vec::with_capacity(samples);
        for _ in 0..samples {
            norms.push(model.sample(&mut rng, t)?.h_norm());
        }
        normalised.push(lr_norm_estimate(&norms, 2.0)? / t.powf(model.p() + 1.0));
    }
    let hi = normalised.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = normalised.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ScalingResult {
        steps: steps.to_vec(),
        normalised,
        spread: hi / lo - 1.0,
    })
}

/// `‖Z‖_{Ψ₂} = sqrt(8/3)` for a standard normal `Z`.
pub fn gaussian_psi2_norm() -> f64 {
    (8.0f64 / 3.0).sqrt()
}

/// Ψ₂ estimate of `|Z|` from `samples` standard normal draws.
pub fn gaussian_psi2_estimate(samples: usize, seed: u64) -> Result<f64> {
    let mut rng = substream(seed, 0, 0, StreamDomain::Data);
    let xs: Vec<f64> = (0..samples)
        .map(|_| rng.sample::<f64, _>(StandardNormal).abs())
        .collect();
    orlicz_norm_estimate(&xs, YoungFunction::Psi2)
}
