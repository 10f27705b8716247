//! Deterministic one-step maps `ψ(h, t, v)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::Problem;
use crate::spaces::SpectralVector;

const ORDER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MethodKind {
    ExplicitEuler,
    /// `v + h (a1 f(t, v) + a2 f(t + b1 h, v + b2 h f(t, v)))`
    TwoStage { a1: f64, a2: f64, b1: f64, b2: f64 },
    /// `(I + h Ā)^{-1} (h b̄ + v)` with Steklov averages over `[t, t + h]`.
    ImplicitEuler,
    /// The exact flow used as a one-step map; zero truncation error.
    ExactFlow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub kind: MethodKind,
    /// Largest admissible step; `f64::INFINITY` when unconstrained.
    pub h_star: f64,
    /// Local truncation order `q`: the one-step error behaves like `h^{q+1}`.
    pub declared_order: f64,
}

impl MethodConfig {
    pub fn explicit_euler(h_star: f64) -> Result<Self> {
        Self::new(MethodKind::ExplicitEuler, h_star, 1.0)
    }

    /// Two-stage explicit method; the declared order comes from the order conditions.
    pub fn two_stage(a1: f64, a2: f64, b1: f64, b2: f64, h_star: f64) -> Result<Self> {
        let q = validate_two_stage(a1, a2, b1, b2)?;
        Self::new(MethodKind::TwoStage { a1, a2, b1, b2 }, h_star, q as f64)
    }

    /// Heun-type coefficients `(½, ½, 1, 1)`.
    pub fn heun(h_star: f64) -> Result<Self> {
        Self::two_stage(0.5, 0.5, 1.0, 1.0, h_star)
    }

    /// Implicit Euler with Steklov averages. The order is a parameter since the
    /// relevant `q` depends on the regularity assumed of the data.
    pub fn implicit_euler(h_star: f64, declared_order: f64) -> Result<Self> {
        Self::new(MethodKind::ImplicitEuler, h_star, declared_order)
    }

    pub fn exact_flow(h_star: f64) -> Result<Self> {
        Self::new(MethodKind::ExactFlow, h_star, f64::INFINITY)
    }

    pub fn new(kind: MethodKind, h_star: f64, declared_order: f64) -> Result<Self> {
        if !(h_star > 0.0) {
            return Err(Error::invalid("h_star", format!("must be positive, got {h_star}")));
        }
        if !(declared_order >= 0.0) {
            return Err(Error::invalid("declared_order", "order must be non-negative"));
        }
        if let MethodKind::TwoStage { a1, a2, b1, b2 } = kind {
            validate_two_stage(a1, a2, b1, b2)?;
        }
        Ok(Self {
            kind,
            h_star,
            declared_order,
        })
    }

    /// One step `ψ(h, t, v)`.
    pub fn step(&self, problem: &Problem, h: f64, t: f64, v: &SpectralVector) -> Result<SpectralVector> {
        if !(h > 0.0) {
            return Err(Error::invalid("h", format!("step must be positive, got {h}")));
        }
        if h > self.h_star {
            return Err(Error::StepTooLarge { h, h_star: self.h_star });
        }
        v.check_dim(problem.dim())?;
        problem.check_interval(h, t)?;
        match self.kind {
            MethodKind::ExplicitEuler => {
                let mut out = v.clone();
                out.axpy(h, &problem.vector_field(t, v));
                Ok(out)
            }
            MethodKind::TwoStage { a1, a2, b1, b2 } => {
                let k1 = problem.vector_field(t, v);
                let mut probe = v.clone();
                probe.axpy(b2 * h, &k1);
                let k2 = problem.vector_field(t + b1 * h, &probe);
                let mut out = v.clone();
                out.axpy(h * a1, &k1);
                out.axpy(h * a2, &k2);
                Ok(out)
            }
            MethodKind::ImplicitEuler => {
                let (alpha_bar, b_bar) = steklov_average(problem, h, t)?;
                let rates = problem.rates();
                let mut out = SpectralVector::zeros(v.dim());
                for j in 0..v.dim() {
                    let denom = 1.0 + h * alpha_bar * rates[j];
                    if !(denom > 0.0) {
                        return Err(Error::StepTooLarge {
                            h,
                            h_star: -1.0 / (alpha_bar * rates[j]),
                        });
                    }
                    out[j] = (h * b_bar[j] + v[j]) / denom;
                }
                Ok(out)
            }
            MethodKind::ExactFlow => problem.exact_flow(h, t, v),
        }
    }

    /// `L_ψ` with `|ψ(h,t,x) - ψ(h,t,y)| <= (1 + L_ψ h)|x - y|` for `h <= h_star`.
    ///
    /// Explicit methods use the Lipschitz constant `L` of the vector field:
    /// `L (a1 + a2) + a2 b2 L² h_star`. Implicit Euler uses the Gårding
    /// constant `κ`: zero when `κ = 0`, else `((2κ)^{-1} - h_star)^{-1}`.
    pub fn lipschitz_constant(&self, problem: &Problem) -> f64 {
        let l = problem.vector_field_lipschitz();
        match self.kind {
            MethodKind::ExplicitEuler => l,
            MethodKind::TwoStage { a1, a2, b2, .. } => l * (a1 + a2) + a2 * b2 * l * l * self.h_star,
            MethodKind::ImplicitEuler => {
                let kappa = problem.garding_constants().kappa;
                if kappa == 0.0 {
                    0.0
                } else {
                    let room = 0.5 / kappa - self.h_star;
                    if room > 0.0 {
                        1.0 / room
                    } else {
                        f64::INFINITY
                    }
                }
            }
            MethodKind::ExactFlow => problem.flow_lipschitz(self.h_star),
        }
    }
}

/// Order of the two-stage explicit method: 2 when `a1 + a2 = 1`,
/// `a2 b1 = ½` and `a2 b2 = ½`, 1 when only consistency holds.
pub fn validate_two_stage(a1: f64, a2: f64, b1: f64, b2: f64) -> Result<u32> {
    if [a1, a2, b1, b2].iter().any(|c| !c.is_finite() || *c < 0.0) {
        return Err(Error::invalid("coefficients", "two-stage coefficients must be finite and non-negative"));
    }
    if (a1 + a2 - 1.0).abs() > ORDER_TOL {
        return Err(Error::invalid(
            "coefficients",
            format!("inconsistent method: a1 + a2 = {} != 1", a1 + a2),
        ));
    }
    if (a2 * b1 - 0.5).abs() <= ORDER_TOL && (a2 * b2 - 0.5).abs() <= ORDER_TOL {
        Ok(2)
    } else {
        Ok(1)
    }
}

/// Exact Steklov averages `(ᾱ, b̄)` over `[t, t + h]`.
pub fn steklov_average(problem: &Problem, h: f64, t: f64) -> Result<(f64, SpectralVector)> {
    if !(h > 0.0) {
        return Err(Error::invalid("h", "Steklov average needs a non-degenerate interval"));
    }
    problem.check_interval(h, t)?;
    let alpha = problem.scaling().mean(h, t);
    let forcing = problem.forcing();
    let b = if forcing.is_empty() {
        SpectralVector::zeros(problem.dim())
    } else {
        SpectralVector::from_fn(problem.dim(), |j| forcing[j].mean(h, t))
    };
    Ok((alpha, b))
}

/// Result of [`admissible_max_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepBound {
    Unconstrained,
    Max(f64),
}

/// Largest step for which implicit Euler is `(1 + L_ψ h)`-Lipschitz:
/// `h* = (L_ψ - 2κ) / (2κ L_ψ)`, or no constraint when `κ = 0`.
pub fn admissible_max_step(kappa: f64, lipschitz: f64) -> Result<StepBound> {
    if !(kappa >= 0.0) {
        return Err(Error::invalid("kappa", "Gårding shift must be non-negative"));
    }
    if kappa == 0.0 {
        return Ok(StepBound::Unconstrained);
    }
    if !(lipschitz > 2.0 * kappa) {
        return Err(Error::invalid(
            "L_psi",
            format!("need L_psi > 2 kappa = {}, got {lipschitz}", 2.0 * kappa),
        ));
    }
    Ok(StepBound::Max((lipschitz - 2.0 * kappa) / (2.0 * kappa * lipschitz)))
}
