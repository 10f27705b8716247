//! Deterministic and randomised one-step recursions, their error sequences,
//! and seeded Monte Carlo ensembles.
//!
//! The randomised recursion is `U_{k+1} = ψ(h_k, t_k, U_k) + ξ_k(h_k)` and
//! the error is measured against the exact solution, `e_k = u(t_k) - U_k`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrators::MethodConfig;
use crate::problems::Problem;
use crate::randomisation::{NoiseModel, TrajectoryNoise};
use crate::spaces::SpectralVector;
use crate::time_grid::TimeGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: Arc<TimeGrid>,
    /// `U_0, ..., U_N`
    pub states: Vec<SpectralVector>,
    /// `e_0, ..., e_N`
    pub errors: Vec<SpectralVector>,
    /// `ξ_0(h_0), ..., ξ_{N-1}(h_{N-1})`; zeros for the deterministic recursion.
    pub noise: Vec<SpectralVector>,
}

impl Trajectory {
    pub fn error_norms(&self) -> Vec<f64> {
        self.errors.iter().map(SpectralVector::h_norm).collect()
    }

    pub fn max_error(&self) -> f64 {
        self.errors.iter().map(SpectralVector::h_norm).fold(0.0, f64::max)
    }

    pub fn final_state(&self) -> &SpectralVector {
        self.states.last().expect("trajectory has at least one state")
    }
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    pub trajectories: Vec<Trajectory>,
    pub master_seed: u64,
    pub fingerprint: String,
}

impl Ensemble {
    pub fn summary(&self) -> EnsembleSummary {
        EnsembleSummary {
            error_norms: self.trajectories.iter().map(Trajectory::error_norms).collect(),
            master_seed: self.master_seed,
            fingerprint: self.fingerprint.clone(),
        }
    }
}

/// Per-trajectory `|e_k|_H` sequences; all that the error statistics need.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub error_norms: Vec<Vec<f64>>,
    pub master_seed: u64,
    pub fingerprint: String,
}

impl EnsembleSummary {
    pub fn len(&self) -> usize {
        self.error_norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.error_norms.is_empty()
    }

    pub fn max_errors(&self) -> Vec<f64> {
        self.error_norms
            .iter()
            .map(|seq| seq.iter().copied().fold(0.0, f64::max))
            .collect()
    }

    /// JSON form: per-trajectory maximum error, optionally with every step.
    pub fn to_json(&self, with_steps: bool) -> serde_json::Value {
        let mut value = serde_json::json!({
            "master_seed": self.master_seed,
            "fingerprint": self.fingerprint,
            "max_error": self.max_errors(),
        });
        if with_steps {
            value["error_norms"] = serde_json::json!(self.error_norms);
        }
        value
    }
}

/// A fully specified experiment on one grid. The exact solution at the grid
/// points is computed once and shared by every trajectory.
#[derive(Debug, Clone)]
pub struct Simulation {
    problem: Arc<Problem>,
    method: MethodConfig,
    noise: Arc<NoiseModel>,
    grid: Arc<TimeGrid>,
    initial: SpectralVector,
    initial_spread: f64,
    exact: Arc<Vec<SpectralVector>>,
}

impl Simulation {
    pub fn new(
        problem: Arc<Problem>,
        method: MethodConfig,
        noise: Arc<NoiseModel>,
        grid: Arc<TimeGrid>,
        initial: SpectralVector,
    ) -> Result<Self> {
        initial.check_dim(problem.dim())?;
        if noise.dim() != problem.dim() {
            return Err(Error::DimensionMismatch {
                expected: problem.dim(),
                found: noise.dim(),
            });
        }
        if grid.mesh() > method.h_star {
            return Err(Error::StepTooLarge {
                h: grid.mesh(),
                h_star: method.h_star,
            });
        }
        problem.check_interval(grid.horizon(), 0.0)?;
        let exact = exact_solution(&problem, &grid, &initial)?;
        Ok(Self {
            problem,
            method,
            noise,
            grid,
            initial,
            initial_spread: 0.0,
            exact: Arc::new(exact),
        })
    }

    /// Randomise `U_0 = ϑ + spread Σ sqrt(γ_j) Z_j e_j` so that `e_0 != 0`.
    pub fn with_initial_spread(mut self, spread: f64) -> Result<Self> {
        if !(spread >= 0.0) || !spread.is_finite() {
            return Err(Error::invalid("initial_spread", "must be finite and >= 0"));
        }
        self.initial_spread = spread;
        Ok(self)
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn method(&self) -> &MethodConfig {
        &self.method
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    /// `u(t_0), ..., u(t_N)` from the exact flow.
    pub fn exact(&self) -> &[SpectralVector] {
        &self.exact
    }

    /// Noise-free recursion `u_{k+1} = ψ(h_k, t_k, u_k)`, `u_0 = ϑ`.
    pub fn run_deterministic(&self) -> Result<Trajectory> {
        self.recurse(self.initial.clone(), |_, _| Ok(None))
    }

    /// Randomised recursion for trajectory `index` of the stream `seed`.
    pub fn run_randomised(&self, seed: u64, index: u64) -> Result<Trajectory> {
        let stream = TrajectoryNoise::new(&self.noise, seed, index);
        let mut start = self.initial.clone();
        if self.initial_spread > 0.0 {
            start.axpy(1.0, &stream.initial_perturbation(self.initial_spread));
        }
        self.recurse(start, |k, h| stream.draw(k, h).map(Some))
    }

    fn recurse(
        &self,
        start: SpectralVector,
        perturb: impl Fn(usize, f64) -> Result<Option<SpectralVector>>,
    ) -> Result<Trajectory> {
        let n = self.grid.len();
        let points = self.grid.points();
        let steps = self.grid.steps();
        let mut states = Vec::with_capacity(n + 1);
        let mut noise = Vec::with_capacity(n);
        states.push(start);
        for k in 0..n {
            let mut next = self.method.step(&self.problem, steps[k], points[k], &states[k])?;
            match perturb(k, steps[k])? {
                Some(xi) => {
                    next.axpy(1.0, &xi);
                    noise.push(xi);
                }
                None => noise.push(SpectralVector::zeros(next.dim())),
            }
            states.push(next);
        }
        let errors = self.exact.iter().zip(&states).map(|(u, s)| u - s).collect();
        Ok(Trajectory {
            grid: Arc::clone(&self.grid),
            states,
            errors,
            noise,
        })
    }

    /// `M` trajectories `0..M` of stream `master_seed`, simulated on `workers`
    /// threads and returned in trajectory order.
    pub fn run_ensemble(&self, count: usize, master_seed: u64, workers: usize, fingerprint: &str) -> Result<Ensemble> {
        let trajectories = self.parallel(count, workers, |i| self.run_randomised(master_seed, i))?;
        Ok(Ensemble {
            trajectories,
            master_seed,
            fingerprint: fingerprint.to_owned(),
        })
    }

    /// Like [`Simulation::run_ensemble`] but keeps only the error norms.
    pub fn run_ensemble_summary(
        &self,
        count: usize,
        master_seed: u64,
        workers: usize,
        fingerprint: &str,
    ) -> Result<EnsembleSummary> {
        let error_norms = self.parallel(count, workers, |i| {
            self.run_randomised(master_seed, i).map(|t| t.error_norms())
        })?;
        Ok(EnsembleSummary {
            error_norms,
            master_seed,
            fingerprint: fingerprint.to_owned(),
        })
    }

    fn parallel<T: Send>(
        &self,
        count: usize,
        workers: usize,
        job: impl Fn(u64) -> Result<T> + Sync + Send,
    ) -> Result<Vec<T>> {
        if count == 0 {
            return Err(Error::invalid("M", "ensemble needs at least one trajectory"));
        }
        if workers == 0 {
            return Err(Error::invalid("workers", "need at least one worker"));
        }
        if workers == 1 {
            return (0..count as u64).map(job).collect();
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Estimation(format!("cannot start worker pool: {e}")))?;
        pool.install(|| (0..count as u64).into_par_iter().map(job).collect())
    }

    /// Largest `|φ(h_k,t_k,u(t_k)) - ψ(h_k,t_k,u(t_k))|_H / h_k^{q+1}` along
    /// the exact solution: a measured local truncation constant.
    pub fn truncation_constant(&self, order: f64) -> Result<f64> {
        let points = self.grid.points();
        let steps = self.grid.steps();
        let mut worst: f64 = 0.0;
        for k in 0..steps.len() {
            let local = self.method.step(&self.problem, steps[k], points[k], &self.exact[k])?;
            let defect = (&self.exact[k + 1] - &local).h_norm();
            worst = worst.max(defect / steps[k].powf(order + 1.0));
        }
        Ok(worst)
    }
}

/// Exact solution at the grid points by chaining the exact flow.
pub fn exact_solution(problem: &Problem, grid: &TimeGrid, initial: &SpectralVector) -> Result<Vec<SpectralVector>> {
    let mut out = Vec::with_capacity(grid.len() + 1);
    out.push(initial.clone());
    for (k, (&t, &h)) in grid.points().iter().zip(grid.steps()).enumerate() {
        let next = problem.exact_flow(h, t, &out[k])?;
        out.push(next);
    }
    Ok(out)
}
