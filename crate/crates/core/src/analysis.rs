//! Moment and Orlicz-norm estimators, log-log rate fits, discrete Gronwall
//! bounds and the closed-form strong error bounds.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sampler::EnsembleSummary;

/// Relative width at which the Orlicz bisection stops.
pub const ORLICZ_REL_TOL: f64 = 1e-9;
/// The bisection bracket is `[max/BRACKET, BRACKET * max]`.
pub const ORLICZ_BRACKET: f64 = 50.0;

/// `(mean x^R)^{1/R}`.
pub fn lr_norm_estimate(samples: &[f64], order: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Estimation("L^R estimate of an empty sample".into()));
    }
    if !(order >= 1.0) {
        return Err(Error::invalid("R", format!("moment order must be >= 1, got {order}")));
    }
    check_nonnegative(samples)?;
    let mean = samples.iter().map(|x| x.powf(order)).sum::<f64>() / samples.len() as f64;
    Ok(mean.powf(1.0 / order))
}

fn check_nonnegative(samples: &[f64]) -> Result<()> {
    if samples.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return Err(Error::Estimation("samples must be finite and non-negative".into()));
    }
    Ok(())
}

/// Young function defining an Orlicz norm `inf{k > 0 : E Ψ(|X|/k) <= 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum YoungFunction {
    /// `Ψ₂(z) = exp(z²) - 1`
    Psi2,
    /// `Ψ(z) = z^R`, which reproduces the `L^R` norm.
    Power(f64),
}

impl YoungFunction {
    fn eval(&self, z: f64) -> f64 {
        match *self {
            YoungFunction::Psi2 => (z * z).exp_m1(),
            YoungFunction::Power(r) => z.powf(r),
        }
    }
}

/// Empirical Orlicz norm by bisection on the decreasing map
/// `k ↦ mean Ψ(x/k)`.
pub fn orlicz_norm_estimate(samples: &[f64], young: YoungFunction) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Estimation("Orlicz estimate of an empty sample".into()));
    }
    check_nonnegative(samples)?;
    if let YoungFunction::Power(r) = young {
        if !(r >= 1.0) {
            return Err(Error::invalid("R", format!("power Young function needs R >= 1, got {r}")));
        }
    }
    let top = samples.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return Ok(0.0);
    }
    let n = samples.len() as f64;
    let objective = |k: f64| samples.iter().map(|x| young.eval(x / k)).sum::<f64>() / n;
    let (mut lo, mut hi) = (top / ORLICZ_BRACKET, top * ORLICZ_BRACKET);
    if !(objective(lo) > 1.0) || !(objective(hi) <= 1.0) {
        return Err(Error::Estimation(format!(
            "Orlicz objective does not cross 1 on [{lo:e}, {hi:e}]"
        )));
    }
    while hi - lo > ORLICZ_REL_TOL * hi {
        let mid = (lo * hi).sqrt();
        if objective(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Strong error estimates on one grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorStatistics {
    pub mesh: f64,
    pub samples: usize,
    pub order: f64,
    /// `max_k ‖e_k‖_{L^R(Ω;H)}`
    pub max_of_norm: f64,
    /// `‖max_k |e_k|_H‖_{L^R}`
    pub norm_of_max: f64,
    /// Monte Carlo standard error of `norm_of_max` (delta method).
    pub norm_of_max_std_error: f64,
    /// `‖max_k |e_k|_H‖_{Ψ₂}` when requested.
    pub psi2_norm_of_max: Option<f64>,
}

/// Both orderings of "max over steps" and "norm over Ω".
pub fn error_statistics(
    summary: &EnsembleSummary,
    mesh: f64,
    order: f64,
    young: Option<YoungFunction>,
) -> Result<ErrorStatistics> {
    if summary.is_empty() {
        return Err(Error::Estimation("empty ensemble".into()));
    }
    let steps = summary.error_norms[0].len();
    if summary.error_norms.iter().any(|s| s.len() != steps) {
        return Err(Error::Estimation("trajectories have different lengths".into()));
    }
    let mut max_of_norm: f64 = 0.0;
    let mut column = Vec::with_capacity(summary.len());
    for k in 0..steps {
        column.clear();
        column.extend(summary.error_norms.iter().map(|s| s[k]));
        max_of_norm = max_of_norm.max(lr_norm_estimate(&column, order)?);
    }
    let maxima = summary.max_errors();
    let norm_of_max = lr_norm_estimate(&maxima, order)?;
    let m = maxima.len() as f64;
    let powers: Vec<f64> = maxima.iter().map(|x| x.powf(order)).collect();
    let mean = powers.iter().sum::<f64>() / m;
    let var = if maxima.len() > 1 {
        powers.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    let norm_of_max_std_error = if mean > 0.0 {
        (var / m).sqrt() / (order * mean.powf((order - 1.0) / order))
    } else {
        0.0
    };
    let psi2_norm_of_max = match young {
        Some(y) => Some(orlicz_norm_estimate(&maxima, y)?),
        None => None,
    };
    Ok(ErrorStatistics {
        mesh,
        samples: maxima.len(),
        order,
        max_of_norm,
        norm_of_max,
        norm_of_max_std_error,
        psi2_norm_of_max,
    })
}

/// Least-squares line through `(log h, log err)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::Estimation(format!(
            "rate fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|(h, e)| !(*h > 0.0) || !(*e > 0.0) || !e.is_finite()) {
        return Err(Error::Estimation("rate fit needs positive steps and errors".into()));
    }
    let mut hs: Vec<f64> = points.iter().map(|p| p.0).collect();
    hs.sort_by(f64::total_cmp);
    if hs.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Estimation("rate fit needs distinct step sizes".into()));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if ss_tot <= f64::EPSILON * ys.iter().map(|y| y * y).sum::<f64>() {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
    })
}

fn nonneg(name: &'static str, v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")));
    }
    Ok(())
}

/// Bound for `y_{k+1} <= (1 + A h) y_k + B h^p` on a uniform grid `h = T/N`:
/// `e^{AT} y_0 + (B/A)(e^{AT} - 1) h^{p-1}`, valid for every `k <= N`.
///
/// At `A = 0` the factor `(e^{AT} - 1)/A` is replaced by its limit `T`, which
/// is what the telescoped recursion gives.
pub fn gronwall_uniform(y0: f64, a: f64, b: f64, p: f64, h: f64, horizon: f64) -> Result<f64> {
    nonneg("y0", y0)?;
    nonneg("A", a)?;
    nonneg("B", b)?;
    if !(p >= 1.0) {
        return Err(Error::invalid("p", format!("must be >= 1, got {p}")));
    }
    if !(h > 0.0) || !(horizon > 0.0) {
        return Err(Error::invalid("h", "step and horizon must be positive"));
    }
    let steps = horizon / h;
    if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) || steps.round() < 1.0 {
        return Err(Error::invalid("h", format!("T/h = {steps} is not a positive integer")));
    }
    let growth = if a == 0.0 { horizon } else { (a * horizon).exp_m1() / a };
    Ok((a * horizon).exp() * y0 + b * growth * h.powf(p - 1.0))
}

/// Bounds `c exp(Σ_{j<=k} g_j)` on `y_{k+1}` for `y_{k+1} <= c + Σ_{j<=k} g_j y_j`.
///
/// Entry 0 is `c`, the bound on `y_0` that the recursion needs as a start.
pub fn gronwall_special(c: f64, g: &[f64]) -> Result<Vec<f64>> {
    nonneg("c", c)?;
    for &gj in g {
        nonneg("g", gj)?;
    }
    let mut out = Vec::with_capacity(g.len() + 1);
    out.push(c);
    let mut prefix = 0.0;
    for &gj in g {
        prefix += gj;
        out.push(c * prefix.exp());
    }
    Ok(out)
}

/// Bounds `(y_0 + Σ_l b_l) exp(A Σ_{j<=k} h_j)` on `y_{k+1}` for
/// `y_{k+1} <= (1 + A h_k) y_k + b_k`. Entry 0 bounds `y_0` itself.
pub fn gronwall_nonuniform(y0: f64, a: f64, steps: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if steps.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: steps.len(),
            found: b.len(),
        });
    }
    nonneg("y0", y0)?;
    nonneg("A", a)?;
    for (&h, &bk) in steps.iter().zip(b) {
        nonneg("h", h)?;
        nonneg("b", bk)?;
    }
    let base = y0 + b.iter().sum::<f64>();
    let mut out = Vec::with_capacity(steps.len() + 1);
    out.push(base);
    let mut elapsed = 0.0;
    for &h in steps {
        elapsed += h;
        out.push(base * (a * elapsed).exp());
    }
    Ok(out)
}

/// Which strong error bound to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundSetting {
    /// Uniform truncation error and Lipschitz exact flow on a Banach space.
    Banach,
    /// Local truncation error along the solution and Lipschitz `ψ`, any Orlicz norm.
    GelfandOrlicz,
    /// Independent centred noise, `L²` norm of the pathwise maximum.
    GelfandL2Centred,
}

/// Inputs to [`theoretical_bound`]. `None` marks a constant that was not supplied.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct BoundConstants {
    /// `‖e_0‖` in the norm being bounded.
    pub initial_error: f64,
    /// `C_{φ,ψ}` or `‖C_{φ,ψ}‖_∞`.
    pub truncation: Option<f64>,
    pub c_xi: Option<f64>,
    /// `L_φ` (Banach) or `L_ψ` (Gelfand settings).
    pub lipschitz: Option<f64>,
    pub q: Option<f64>,
    pub p: Option<f64>,
    pub horizon: Option<f64>,
    /// Universal martingale constant; 2 when absent.
    pub bdg: Option<f64>,
    pub h_star: Option<f64>,
}

/// Default martingale constant, only meaningful for illustrations.
pub const DEFAULT_BDG_CONSTANT: f64 = 2.0;

/// `L'_ψ`: sum of the non-constant coefficients of `h ↦ (1 + 2h)(1 + L h)²`,
/// i.e. `(2 + 2L) + (L² + 4L) + 2L²`.
pub fn lipschitz_prime(lipschitz: f64) -> f64 {
    let l = lipschitz;
    (2.0 + 2.0 * l) + (l * l + 4.0 * l) + 2.0 * l * l
}

fn required(value: Option<f64>, name: &'static str) -> Result<f64> {
    match value {
        Some(v) if v.is_finite() => Ok(v),
        Some(v) => Err(Error::invalid(name, format!("must be finite, got {v}"))),
        None => Err(Error::invalid(name, "required constant is missing")),
    }
}

/// Closed-form strong error bound at mesh width `h`.
///
/// The Banach and Orlicz settings bound `‖max_k |e_k|‖_Ψ` by
/// `(‖e_0‖ + C h^q T + C_ξ h^p T) exp(L T)`. The centred `L²` setting returns
/// the square root of
/// `2(‖e_0‖² + 4‖C‖²h^{2q}T + C_ξ² T h^{2p+1}(1 + κ²(1 + L'))) exp(2 L' T)`,
/// so all three are bounds on a norm rather than its square.
pub fn theoretical_bound(setting: BoundSetting, c: &BoundConstants, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::invalid("h", format!("mesh must be positive, got {h}")));
    }
    let truncation = required(c.truncation, "truncation")?;
    let c_xi = required(c.c_xi, "c_xi")?;
    let lipschitz = required(c.lipschitz, "lipschitz")?;
    let q = required(c.q, "q")?;
    let p = required(c.p, "p")?;
    let horizon = required(c.horizon, "T")?;
    if let Some(h_star) = c.h_star {
        if h > h_star {
            return Err(Error::StepTooLarge { h, h_star });
        }
    }
    // A vanishing constant kills its term even when the order is infinite.
    let term = |constant: f64, power: f64| if constant == 0.0 { 0.0 } else { constant * h.powf(power) };
    match setting {
        BoundSetting::Banach | BoundSetting::GelfandOrlicz => Ok((c.initial_error
            + term(truncation, q) * horizon
            + term(c_xi, p) * horizon)
            * (lipschitz * horizon).exp()),
        BoundSetting::GelfandL2Centred => {
            if h > 1.0 {
                return Err(Error::StepTooLarge { h, h_star: 1.0 });
            }
            let kappa = c.bdg.unwrap_or(DEFAULT_BDG_CONSTANT);
            let lp = lipschitz_prime(lipschitz);
            let inner = c.initial_error.powi(2)
                + 4.0 * term(truncation.powi(2), 2.0 * q) * horizon
                + term(c_xi.powi(2), 2.0 * p + 1.0) * horizon * (1.0 + kappa * kappa * (1.0 + lp));
            Ok((2.0 * inner * (2.0 * lp * horizon).exp()).sqrt())
        }
    }
}

/// One row of a convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesRow {
    pub h: f64,
    pub err_l2_maxnorm: f64,
    pub err_l2_normmax: f64,
    pub err_psi2: f64,
    pub bound: f64,
}

/// Extra moment orders requested besides `R = 2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentSeries {
    pub order: f64,
    pub max_of_norm: Vec<f64>,
    pub norm_of_max: Vec<f64>,
    pub slope_max_of_norm: Option<f64>,
    pub slope_norm_of_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub fingerprint: String,
    pub series: Vec<SeriesRow>,
    /// Fit of `err_l2_maxnorm` against `h`.
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub slope_normmax: Option<f64>,
    pub slope_psi2: Option<f64>,
    pub theoretical_slope: f64,
    pub theory: Vec<f64>,
    pub moments: Vec<MomentSeries>,
}

/// Column order of the CSV mirror.
pub const SERIES_COLUMNS: [&str; 5] = ["h", "err_l2_maxnorm", "err_l2_normmax", "err_psi2", "bound"];

impl ConvergenceReport {
    /// CSV with the fixed column order and 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = SERIES_COLUMNS.join(",");
        out.push('\n');
        for r in &self.series {
            let cells = [r.h, r.err_l2_maxnorm, r.err_l2_normmax, r.err_psi2, r.bound];
            let line: Vec<String> = cells.iter().map(|v| format_g17(*v)).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// Scientific notation with 17 significant digits; `nan`/`inf` spelled out.
pub fn format_g17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn optional_slope(points: &[(f64, f64)]) -> Option<f64> {
    fit_rate(points).ok().map(|f| f.slope)
}

impl ConvergenceReport {
    /// Assemble a report from per-grid statistics; `stats[i]` holds one
    /// [`ErrorStatistics`] per requested order, the first of which is `R = 2`.
    pub fn from_statistics(
        fingerprint: &str,
        stats: &[Vec<ErrorStatistics>],
        bounds: &[f64],
        theoretical_slope: f64,
    ) -> Result<Self> {
        if stats.len() != bounds.len() {
            return Err(Error::DimensionMismatch {
                expected: stats.len(),
                found: bounds.len(),
            });
        }
        let series: Vec<SeriesRow> = stats
            .iter()
            .zip(bounds)
            .map(|(s, &bound)| {
                let l2 = &s[0];
                SeriesRow {
                    h: l2.mesh,
                    err_l2_maxnorm: l2.max_of_norm,
                    err_l2_normmax: l2.norm_of_max,
                    err_psi2: l2.psi2_norm_of_max.unwrap_or(f64::NAN),
                    bound,
                }
            })
            .collect();
        let fit = fit_rate(&series.iter().map(|r| (r.h, r.err_l2_maxnorm)).collect::<Vec<_>>())?;
        let orders = stats.first().map_or(0, Vec::len);
        let moments = (1..orders)
            .map(|i| {
                let mon: Vec<f64> = stats.iter().map(|s| s[i].max_of_norm).collect();
                let nom: Vec<f64> = stats.iter().map(|s| s[i].norm_of_max).collect();
                let pairs = |v: &[f64]| series.iter().zip(v).map(|(r, e)| (r.h, *e)).collect::<Vec<_>>();
                MomentSeries {
                    order: stats[0][i].order,
                    slope_max_of_norm: optional_slope(&pairs(&mon)),
                    slope_norm_of_max: optional_slope(&pairs(&nom)),
                    max_of_norm: mon,
                    norm_of_max: nom,
                }
            })
            .collect();
        Ok(Self {
            fingerprint: fingerprint.to_owned(),
            slope_normmax: optional_slope(&series.iter().map(|r| (r.h, r.err_l2_normmax)).collect::<Vec<_>>()),
            slope_psi2: optional_slope(&series.iter().map(|r| (r.h, r.err_psi2)).collect::<Vec<_>>()),
            theory: bounds.to_vec(),
            series,
            slope: fit.slope,
            intercept: fit.intercept,
            r2: fit.r_squared,
            theoretical_slope,
            moments,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lr_norms() {
        assert_eq!(lr_norm_estimate(&[2.0, 2.0, 2.0], 2.0).unwrap(), 2.0);
        assert!((lr_norm_estimate(&[0.0, 2.0], 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(lr_norm_estimate(&[0.0, 2.0], 1.0).unwrap(), 1.0);
        assert!(lr_norm_estimate(&[], 2.0).is_err());
        assert!(lr_norm_estimate(&[1.0], 0.5).is_err());
        assert!(lr_norm_estimate(&[-1.0], 2.0).is_err());
    }

    #[test]
    fn orlicz_constant_sample_inverts_exactly() {
        let c = 0.37;
        let k = orlicz_norm_estimate(&[c; 10], YoungFunction::Psi2).unwrap();
        let want = c / 2f64.ln().sqrt();
        assert!(((k - want) / want).abs() < 1e-6);
        assert!((want / c - 1.201_12).abs() < 1e-5);
    }

    #[test]
    fn orlicz_degenerate_and_power() {
        assert_eq!(orlicz_norm_estimate(&[0.0; 4], YoungFunction::Psi2).unwrap(), 0.0);
        let xs = [0.1, 0.5, 2.0, 3.5];
        let k = orlicz_norm_estimate(&xs, YoungFunction::Power(3.0)).unwrap();
        let l3 = lr_norm_estimate(&xs, 3.0).unwrap();
        assert!(((k - l3) / l3).abs() < 1e-8);
        assert!(orlicz_norm_estimate(&[], YoungFunction::Psi2).is_err());
    }

    #[test]
    fn exact_power_law_fits() {
        let pts: Vec<(f64, f64)> = (3..=8).map(|i| {
            let h = 2f64.powi(-i);
            (h, 2.0 * h * h)
        }).collect();
        let fit = fit_rate(&pts).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 2f64.ln()).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);

        let flat: Vec<(f64, f64)> = pts.iter().map(|(h, _)| (*h, 0.3)).collect();
        assert!(fit_rate(&flat).unwrap().slope.abs() < 1e-12);

        let half: Vec<(f64, f64)> = pts.iter().map(|(h, _)| (*h, h.powf(1.5))).collect();
        assert!((fit_rate(&half).unwrap().slope - 1.5).abs() < 1e-12);
    }

    #[test]
    fn rate_fit_errors() {
        assert!(fit_rate(&[(0.1, 1.0), (0.2, 2.0)]).is_err());
        assert!(fit_rate(&[(0.1, 1.0), (0.2, 0.0), (0.4, 1.0)]).is_err());
        assert!(fit_rate(&[(0.1, 1.0), (0.1, 2.0), (0.4, 1.0)]).is_err());
    }

    #[test]
    fn gronwall_uniform_values() {
        let b = gronwall_uniform(0.0, 1.0, 1.0, 2.0, 0.1, 1.0).unwrap();
        assert!((b - (std::f64::consts::E - 1.0) * 0.1).abs() < 1e-15);
        assert!((b - 0.171_828).abs() < 1e-6);
        let flat = gronwall_uniform(0.0, 0.0, 1.0, 2.0, 0.1, 1.0).unwrap();
        assert!((flat - 0.1).abs() < 1e-15);
        let homogeneous = gronwall_uniform(0.7, 1.3, 0.0, 2.0, 0.1, 1.0).unwrap();
        assert!((homogeneous - 1.3f64.exp() * 0.7).abs() < 1e-15);
        assert!(gronwall_uniform(0.0, 1.0, 1.0, 0.5, 0.1, 1.0).is_err());
        assert!(gronwall_uniform(0.0, 1.0, 1.0, 2.0, 0.3, 1.0).is_err());
        assert!(gronwall_uniform(0.0, -1.0, 1.0, 2.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn gronwall_special_values() {
        let b = gronwall_special(1.0, &[0.1, 0.1]).unwrap();
        assert!((b[2] - 0.2f64.exp()).abs() < 1e-15);
        assert!((b[2] - 1.221_403).abs() < 1e-6);
        assert!(gronwall_special(0.0, &[0.5, 3.0]).unwrap().iter().all(|v| *v == 0.0));
        assert!(gronwall_special(2.5, &[0.0; 4]).unwrap().iter().all(|v| *v == 2.5));
        assert!(gronwall_special(-1.0, &[0.1]).is_err());
        assert!(gronwall_special(1.0, &[-0.1]).is_err());
    }

    #[test]
    fn gronwall_nonuniform_values() {
        let b = gronwall_nonuniform(1.0, 0.0, &[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert!(b.iter().all(|v| *v == 2.0));
        let b = gronwall_nonuniform(1.5, 1.0, &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert!((b[2] - 1.5 * 2f64.exp()).abs() < 1e-14);
        assert!(gronwall_nonuniform(1.0, 1.0, &[1.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn bound_values() {
        let c = BoundConstants {
            truncation: Some(1.0),
            c_xi: Some(1.0),
            lipschitz: Some(0.0),
            q: Some(1.0),
            p: Some(1.0),
            horizon: Some(1.0),
            ..Default::default()
        };
        assert!((theoretical_bound(BoundSetting::Banach, &c, 0.1).unwrap() - 0.2).abs() < 1e-15);
        assert!((theoretical_bound(BoundSetting::GelfandOrlicz, &c, 0.1).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(lipschitz_prime(1.0), 11.0);
        let missing = BoundConstants { c_xi: None, ..c };
        assert!(theoretical_bound(BoundSetting::Banach, &missing, 0.1).is_err());
        assert!(theoretical_bound(BoundSetting::GelfandL2Centred, &c, 1.5).is_err());
        let limited = BoundConstants { h_star: Some(0.05), ..c };
        assert!(theoretical_bound(BoundSetting::GelfandOrlicz, &limited, 0.1).is_err());
    }

    #[test]
    fn l2_centred_bound_matches_hand_evaluation() {
        let c = BoundConstants {
            initial_error: 0.0,
            truncation: Some(1.0),
            c_xi: Some(1.0),
            lipschitz: Some(1.0),
            q: Some(2.0),
            p: Some(1.0),
            horizon: Some(1.0),
            bdg: Some(1.0),
            h_star: None,
        };
        let h: f64 = 0.25;
        // 2 (4 h^4 + h^3 (1 + 1 * 12)) e^{22}
        let want = (2.0 * (4.0 * h.powi(4) + h.powi(3) * 13.0) * 22f64.exp()).sqrt();
        let got = theoretical_bound(BoundSetting::GelfandL2Centred, &c, h).unwrap();
        assert!(((got - want) / want).abs() < 1e-14);
    }

    #[test]
    fn csv_formatting() {
        assert_eq!(format_g17(0.25), "2.5000000000000000e-1");
        assert_eq!(format_g17(f64::NAN), "NaN");
    }
}
