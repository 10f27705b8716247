//! Configuration-driven experiment runner.
//!
//! One TOML file describes one experiment. Sections are validated separately
//! so that a failure names the section it came from. Invalid configuration
//! exits with status 1; a failure while running exits with status 2.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    error_statistics, lr_norm_estimate, orlicz_norm_estimate, theoretical_bound, BoundConstants, BoundSetting,
    ConvergenceReport, ErrorStatistics, YoungFunction,
};
use crate::bayes::{small_noise_sweep, sweep_to_csv, DataRule, DiagonalGaussianModel};
use crate::checks::{gaussian_psi2_estimate, gaussian_psi2_norm, gronwall_dominance, noise_scaling};
use crate::error::{Error, Result};
use crate::integrators::{MethodConfig, MethodKind};
use crate::problems::{Problem, Quadratic, TimeScaling};
use crate::randomisation::{NoiseKind, NoiseModel, NoiseNorm};
use crate::sampler::Simulation;
use crate::spaces::{SpaceDescriptor, SpectralVector};
use crate::time_grid::TimeGrid;

#[derive(Debug, Parser)]
#[command(name = "probint", version, about = "Randomised time integrators: convergence studies and checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for ensembles; results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Strong error study over a family of grids.
    Converge,
    /// Small-noise sweep of the Gaussian posteriors.
    Bayes,
    /// Randomised dominance tests of the discrete Gronwall bounds.
    GronwallCheck,
    /// Noise scaling law and Ψ₂ estimator checks.
    NoiseCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// `u' = λ u` in one mode.
    Scalar,
    /// Sine-mode heat equation with eigenvalues `j²`.
    Heat,
    /// Explicit eigenvalues and operator rates.
    Diagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub kind: ProblemKind,
    #[serde(rename = "T", default = "one")]
    pub horizon: f64,
    pub dim: Option<usize>,
    pub lambda: Option<f64>,
    pub eigenvalues: Option<Vec<f64>>,
    pub rates: Option<Vec<f64>>,
    pub scaling: Option<TimeScaling>,
    /// Per-mode quadratic coefficients `[c0, c1, c2]`.
    pub forcing: Option<Vec<[f64; 3]>>,
    pub initial: Option<Vec<f64>>,
    /// `ϑ_j = j^{-initial_decay}`.
    pub initial_decay: Option<f64>,
    #[serde(default)]
    pub initial_spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFamilySection {
    #[serde(rename = "N")]
    pub steps: Vec<usize>,
    #[serde(default = "one")]
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSection {
    /// `explicit_euler`, `heun`, `two_stage`, `implicit_euler` or `exact_flow`.
    pub method: String,
    pub a1: Option<f64>,
    pub a2: Option<f64>,
    pub b1: Option<f64>,
    pub b2: Option<f64>,
    pub h_star: Option<f64>,
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// `centred_gaussian`, `biased`, `shared_factor` or `bounded_uniform`.
    #[serde(default = "centred")]
    pub kind: String,
    #[serde(default = "one")]
    pub p: f64,
    #[serde(default)]
    pub c_xi: f64,
    #[serde(default = "one")]
    pub s: f64,
    pub mode: Option<usize>,
    pub coefficient: Option<f64>,
    pub rho: Option<f64>,
    /// Allows `p = -1/2` (centred Gaussian only).
    #[serde(default)]
    pub demonstration: bool,
    /// Mode count when no problem section is given.
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    #[serde(rename = "M")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(rename = "R", default = "default_orders")]
    pub orders: Vec<f64>,
    /// `psi2` or `none`.
    #[serde(default = "psi2")]
    pub young: String,
    /// `gelfand_orlicz`, `banach`, `gelfand_l2_centred` or `none`.
    #[serde(default = "gelfand_orlicz")]
    pub bound: String,
    pub bdg: Option<f64>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            orders: default_orders(),
            young: psi2(),
            bound: gelfand_orlicz(),
            bdg: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "dot")]
    pub dir: PathBuf,
    #[serde(default = "series_name")]
    pub series: String,
    #[serde(default = "report_name")]
    pub report: String,
    /// Any of `csv`, `json`.
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: dot(),
            series: series_name(),
            report: report_name(),
            formats: default_formats(),
        }
    }
}

/// Either one value for every mode or one value per mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerMode {
    Scalar(f64),
    List(Vec<f64>),
}

impl PerMode {
    fn expand(&self, dim: usize) -> Vec<f64> {
        match self {
            PerMode::Scalar(v) => vec![*v; dim],
            PerMode::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BayesSection {
    #[serde(rename = "J")]
    pub modes: Option<usize>,
    pub lambda: Vec<f64>,
    pub h: f64,
    #[serde(default)]
    pub p: f64,
    pub gamma0: PerMode,
    pub gamma_obs: PerMode,
    pub gamma1: PerMode,
    pub m0: PerMode,
    pub theta: PerMode,
    /// Seed of the fixed data draw; absent means noiseless data `G ϑ`.
    pub seed: Option<u64>,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GronwallSection {
    #[serde(default = "thousand")]
    pub sequences: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseCheckSection {
    #[serde(default = "default_check_steps")]
    pub steps: Vec<f64>,
    #[serde(default = "hundred_thousand")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// Relative tolerance of the scaling-law spread.
    #[serde(default = "two_percent")]
    pub scaling_tol: f64,
    /// Relative tolerance of the Gaussian Ψ₂ estimate.
    #[serde(default = "five_percent")]
    pub psi2_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: Option<ProblemSection>,
    pub grid_family: Option<GridFamilySection>,
    pub method: Option<MethodSection>,
    pub noise: Option<NoiseSection>,
    pub ensemble: Option<EnsembleSection>,
    pub analysis: Option<AnalysisSection>,
    pub output: Option<OutputSection>,
    pub bayes: Option<BayesSection>,
    pub gronwall: Option<GronwallSection>,
    pub noise_check: Option<NoiseCheckSection>,
}

fn one() -> f64 {
    1.0
}
fn centred() -> String {
    "centred_gaussian".into()
}
fn default_orders() -> Vec<f64> {
    vec![2.0]
}
fn psi2() -> String {
    "psi2".into()
}
fn gelfand_orlicz() -> String {
    "gelfand_orlicz".into()
}
fn dot() -> PathBuf {
    PathBuf::from(".")
}
fn series_name() -> String {
    "series.csv".into()
}
fn report_name() -> String {
    "report.json".into()
}
fn default_formats() -> Vec<String> {
    vec!["csv".into(), "json".into()]
}
fn default_deltas() -> Vec<f64> {
    (0..=8).map(|i| 10f64.powi(-i)).collect()
}
fn thousand() -> usize {
    1000
}
fn hundred_thousand() -> usize {
    100_000
}
fn default_check_steps() -> Vec<f64> {
    vec![0.5, 0.25, 0.125]
}
fn two_percent() -> f64 {
    0.02
}
fn five_percent() -> f64 {
    0.05
}

const SECTIONS: [&str; 10] = [
    "problem",
    "grid_family",
    "method",
    "noise",
    "ensemble",
    "analysis",
    "output",
    "bayes",
    "gronwall",
    "noise_check",
];

fn section<T: serde::de::DeserializeOwned>(table: &toml::Table, name: &str) -> Result<Option<T>> {
    match table.get(name) {
        None => Ok(None),
        Some(value) => value
            .clone()
            .try_into()
            .map(Some)
            .map_err(|e: toml::de::Error| Error::config(name, e.message().to_owned())),
    }
}

impl ExperimentConfig {
    /// Parses TOML text. Unknown sections and keys are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("config", e.message().to_owned()))?;
        if let Some(unknown) = table.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
            return Err(Error::config(unknown.as_str(), "unknown section"));
        }
        Ok(Self {
            problem: section(&table, "problem")?,
            grid_family: section(&table, "grid_family")?,
            method: section(&table, "method")?,
            noise: section(&table, "noise")?,
            ensemble: section(&table, "ensemble")?,
            analysis: section(&table, "analysis")?,
            output: section(&table, "output")?,
            bayes: section(&table, "bayes")?,
            gronwall: section(&table, "gronwall")?,
            noise_check: section(&table, "noise_check")?,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Replaces every seed with `seed`.
    pub fn override_seed(&mut self, seed: u64) {
        if let Some(e) = &mut self.ensemble {
            e.seed = seed;
        }
        if let Some(b) = &mut self.bayes {
            b.seed = Some(seed);
        }
        if let Some(g) = &mut self.gronwall {
            g.seed = seed;
        }
        if let Some(n) = &mut self.noise_check {
            n.seed = seed;
        }
    }

    /// SHA-256 of the normalised configuration (defaults filled in, compact JSON).
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_string(self).expect("configuration serialises");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    fn require<'a, T>(value: &'a Option<T>, name: &str) -> Result<&'a T> {
        value.as_ref().ok_or_else(|| Error::config(name, "section is required"))
    }
}

fn in_section<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config { .. } => e,
        other => Error::config(name, other.to_string()),
    })
}

pub fn build_problem(s: &ProblemSection) -> Result<Problem> {
    in_section("problem", build_problem_inner(s))
}

fn build_problem_inner(s: &ProblemSection) -> Result<Problem> {
    let base = match s.kind {
        ProblemKind::Scalar => {
            let lambda = s.lambda.ok_or_else(|| Error::invalid("lambda", "scalar problem needs `lambda`"))?;
            Problem::scalar(lambda, s.horizon)?
        }
        ProblemKind::Heat => {
            let dim = s.dim.ok_or_else(|| Error::invalid("dim", "heat problem needs `dim`"))?;
            Problem::heat(dim, s.horizon)?
        }
        ProblemKind::Diagonal => {
            let eig = s
                .eigenvalues
                .clone()
                .ok_or_else(|| Error::invalid("eigenvalues", "diagonal problem needs `eigenvalues`"))?;
            let rates = s.rates.clone().unwrap_or_else(|| eig.clone());
            Problem::new(
                SpaceDescriptor::new(eig)?,
                rates,
                TimeScaling::Constant { value: 1.0 },
                Vec::new(),
                s.horizon,
            )?
        }
    };
    let mut problem = base;
    if let Some(scaling) = s.scaling {
        problem = problem.with_scaling(scaling)?;
    }
    if let Some(forcing) = &s.forcing {
        problem = problem.with_forcing(forcing.iter().map(|c| Quadratic(*c)).collect())?;
    }
    Ok(problem)
}

pub fn build_initial(s: &ProblemSection, dim: usize) -> Result<SpectralVector> {
    in_section(
        "problem",
        match (&s.initial, s.initial_decay) {
            (Some(_), Some(_)) => Err(Error::invalid("initial", "give either `initial` or `initial_decay`")),
            (Some(v), None) => {
                if v.len() != dim {
                    Err(Error::DimensionMismatch {
                        expected: dim,
                        found: v.len(),
                    })
                } else {
                    SpectralVector::new(v.clone())
                }
            }
            (None, Some(decay)) => Ok(SpectralVector::from_fn(dim, |j| ((j + 1) as f64).powf(-decay))),
            (None, None) => Ok(SpectralVector::from_fn(dim, |_| 1.0)),
        },
    )
}

pub fn build_grids(s: &GridFamilySection, horizon: f64) -> Result<Vec<TimeGrid>> {
    if s.steps.is_empty() {
        return Err(Error::config("grid_family", "`N` must list at least one grid"));
    }
    in_section(
        "grid_family",
        s.steps.iter().map(|&n| TimeGrid::graded(horizon, n, s.gamma)).collect(),
    )
}

pub fn build_method(s: &MethodSection) -> Result<MethodConfig> {
    let h_star = s.h_star.unwrap_or(f64::INFINITY);
    in_section(
        "method",
        match s.method.as_str() {
            "explicit_euler" => MethodConfig::new(MethodKind::ExplicitEuler, h_star, s.order.unwrap_or(1.0)),
            "heun" => MethodConfig::heun(h_star),
            "two_stage" => match (s.a1, s.a2, s.b1, s.b2) {
                (Some(a1), Some(a2), Some(b1), Some(b2)) => MethodConfig::two_stage(a1, a2, b1, b2, h_star),
                _ => Err(Error::invalid("a1", "two_stage needs a1, a2, b1 and b2")),
            },
            "implicit_euler" => MethodConfig::implicit_euler(h_star, s.order.unwrap_or(1.0)),
            "exact_flow" => MethodConfig::exact_flow(h_star),
            other => Err(Error::invalid("method", format!("unknown method `{other}`"))),
        },
    )
}

pub fn build_noise(s: &NoiseSection, dim: usize) -> Result<NoiseModel> {
    let kind = match s.kind.as_str() {
        "centred_gaussian" => Ok(NoiseKind::CentredGaussian),
        "bounded_uniform" => Ok(NoiseKind::BoundedUniform),
        "biased" => Ok(NoiseKind::Biased {
            mode: s.mode.unwrap_or(0),
            coefficient: s.coefficient.unwrap_or(s.c_xi),
        }),
        "shared_factor" => s
            .rho
            .map(|rho| NoiseKind::SharedFactor { rho })
            .ok_or_else(|| Error::invalid("rho", "shared_factor noise needs `rho`")),
        other => Err(Error::invalid("kind", format!("unknown noise kind `{other}`"))),
    };
    in_section(
        "noise",
        kind.and_then(|kind| {
            if s.demonstration {
                if kind != NoiseKind::CentredGaussian || s.p != -0.5 {
                    return Err(Error::invalid("demonstration", "demonstration mode is centred Gaussian with p = -0.5"));
                }
                NoiseModel::demonstration(s.c_xi, s.s, dim)
            } else {
                NoiseModel::new(s.p, s.c_xi, s.s, dim, kind)
            }
        }),
    )
}

fn build_bayes(s: &BayesSection) -> Result<DiagonalGaussianModel> {
    let dim = s.lambda.len();
    if let Some(j) = s.modes {
        if j != dim {
            return Err(Error::config("bayes", format!("J = {j} but {dim} eigenvalues given")));
        }
    }
    in_section(
        "bayes",
        DiagonalGaussianModel::new(
            s.lambda.clone(),
            s.h,
            s.p,
            s.m0.expand(dim),
            s.gamma0.expand(dim),
            s.gamma_obs.expand(dim),
            s.gamma1.expand(dim),
            s.theta.expand(dim),
        ),
    )
}

fn parse_bound(name: &str) -> Result<Option<BoundSetting>> {
    match name {
        "gelfand_orlicz" => Ok(Some(BoundSetting::GelfandOrlicz)),
        "banach" => Ok(Some(BoundSetting::Banach)),
        "gelfand_l2_centred" => Ok(Some(BoundSetting::GelfandL2Centred)),
        "none" => Ok(None),
        other => Err(Error::config("analysis", format!("unknown bound setting `{other}`"))),
    }
}

fn parse_young(name: &str) -> Result<Option<YoungFunction>> {
    match name {
        "psi2" => Ok(Some(YoungFunction::Psi2)),
        "none" => Ok(None),
        other => Err(Error::config("analysis", format!("unknown Young function `{other}`"))),
    }
}

/// Files written by one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub series: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

struct Writer {
    dir: PathBuf,
    output: OutputSection,
}

impl Writer {
    fn new(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Self> {
        let output = cfg.output.clone().unwrap_or_default();
        if let Some(f) = output.formats.iter().find(|f| !matches!(f.as_str(), "csv" | "json")) {
            return Err(Error::config("output", format!("unknown format `{f}`")));
        }
        let dir = out.map(Path::to_path_buf).unwrap_or_else(|| output.dir.clone());
        Ok(Self { dir, output })
    }

    fn wants(&self, format: &str) -> bool {
        self.output.formats.iter().any(|f| f == format)
    }

    fn write(&self, csv: Option<String>, json: &serde_json::Value) -> Result<Artifacts> {
        fs::create_dir_all(&self.dir)?;
        let mut artifacts = Artifacts {
            series: None,
            report: None,
        };
        if let (Some(csv), true) = (csv, self.wants("csv")) {
            let path = self.dir.join(&self.output.series);
            fs::write(&path, csv)?;
            artifacts.series = Some(path);
        }
        if self.wants("json") {
            let path = self.dir.join(&self.output.report);
            let mut text = serde_json::to_string_pretty(json).map_err(|e| Error::Estimation(e.to_string()))?;
            text.push('\n');
            fs::write(&path, text)?;
            artifacts.report = Some(path);
        }
        Ok(artifacts)
    }
}

/// Result of the `converge` subcommand.
#[derive(Debug, Clone)]
pub struct ConvergeOutcome {
    pub report: ConvergenceReport,
    pub artifacts: Artifacts,
}

/// Runs the strong error study described by `cfg`.
pub fn converge(cfg: &ExperimentConfig, workers: usize, out: Option<&Path>) -> Result<ConvergeOutcome> {
    let fingerprint = cfg.fingerprint();
    let ps = ExperimentConfig::require(&cfg.problem, "problem")?;
    let problem = Arc::new(build_problem(ps)?);
    let initial = build_initial(ps, problem.dim())?;
    if !(ps.initial_spread >= 0.0) || !ps.initial_spread.is_finite() {
        return Err(Error::config("problem", "initial_spread must be finite and >= 0"));
    }
    let grids = build_grids(ExperimentConfig::require(&cfg.grid_family, "grid_family")?, problem.horizon())?;
    let method = build_method(ExperimentConfig::require(&cfg.method, "method")?)?;
    let noise = Arc::new(build_noise(ExperimentConfig::require(&cfg.noise, "noise")?, problem.dim())?);
    let ensemble = ExperimentConfig::require(&cfg.ensemble, "ensemble")?;
    if ensemble.samples == 0 {
        return Err(Error::config("ensemble", "M must be at least 1"));
    }
    if workers == 0 {
        return Err(Error::config("workers", "need at least one worker"));
    }
    let analysis = cfg.analysis.clone().unwrap_or_default();
    if analysis.orders.iter().any(|r| !(*r >= 1.0) || !r.is_finite()) {
        return Err(Error::config("analysis", "moment orders R must be finite and >= 1"));
    }
    let young = parse_young(&analysis.young)?;
    let setting = parse_bound(&analysis.bound)?;
    let writer = Writer::new(cfg, out)?;

    let mut orders = vec![2.0];
    orders.extend(analysis.orders.iter().copied().filter(|r| *r != 2.0));

    let q = method.declared_order;
    let mut simulations = Vec::with_capacity(grids.len());
    for grid in grids {
        let sim = in_section(
            "grid_family",
            Simulation::new(
                Arc::clone(&problem),
                method,
                Arc::clone(&noise),
                Arc::new(grid),
                initial.clone(),
            ),
        )?;
        simulations.push(in_section("problem", sim.with_initial_spread(ps.initial_spread))?);
    }

    let mut stats: Vec<Vec<ErrorStatistics>> = Vec::with_capacity(simulations.len());
    let mut truncation: f64 = 0.0;
    let mut initial_psi2: f64 = 0.0;
    let mut initial_l2: f64 = 0.0;
    for sim in &simulations {
        let mesh = sim.grid().mesh();
        let summary = sim.run_ensemble_summary(ensemble.samples, ensemble.seed, workers, &fingerprint)?;
        let mut row = Vec::with_capacity(orders.len());
        for (i, &r) in orders.iter().enumerate() {
            row.push(error_statistics(&summary, mesh, r, if i == 0 { young } else { None })?);
        }
        stats.push(row);
        if q.is_finite() {
            truncation = truncation.max(sim.truncation_constant(q)?);
        }
        let e0: Vec<f64> = summary.error_norms.iter().map(|s| s[0]).collect();
        initial_psi2 = initial_psi2.max(orlicz_norm_estimate(&e0, YoungFunction::Psi2)?);
        initial_l2 = initial_l2.max(lr_norm_estimate(&e0, 2.0)?);
    }

    // Lipschitz constants of ψ only need to hold on the steps actually taken.
    let largest_mesh = simulations.iter().map(|s| s.grid().mesh()).fold(0.0, f64::max);
    let mut effective = method;
    effective.h_star = effective.h_star.min(largest_mesh);
    let bounds = match setting {
        None => vec![f64::NAN; stats.len()],
        Some(setting) => {
            let (initial_error, c_xi, lipschitz) = match setting {
                BoundSetting::Banach => (
                    initial_psi2,
                    noise.theoretical_norm(1.0, NoiseNorm::Psi2)?,
                    problem.flow_lipschitz(largest_mesh),
                ),
                BoundSetting::GelfandOrlicz => (
                    initial_psi2,
                    noise.theoretical_norm(1.0, NoiseNorm::Psi2)?,
                    effective.lipschitz_constant(&problem),
                ),
                BoundSetting::GelfandL2Centred => {
                    if !noise.is_centred_independent() {
                        return Err(Error::config("analysis", "gelfand_l2_centred needs independent centred noise"));
                    }
                    (initial_l2, noise.l2_amplitude(), effective.lipschitz_constant(&problem))
                }
            };
            let constants = BoundConstants {
                initial_error,
                truncation: Some(truncation),
                c_xi: Some(c_xi),
                lipschitz: Some(lipschitz),
                q: Some(if q.is_finite() { q } else { 1.0 }),
                p: Some(noise.p()),
                horizon: Some(problem.horizon()),
                bdg: analysis.bdg,
                h_star: method.h_star.is_finite().then_some(method.h_star),
            };
            let mut values = Vec::with_capacity(stats.len());
            for s in &stats {
                values.push(in_section("analysis", theoretical_bound(setting, &constants, s[0].mesh))?);
            }
            values
        }
    };

    let theoretical_slope = if noise.c_xi() == 0.0 && noise.l2_amplitude() == 0.0 {
        q
    } else if noise.is_centred_independent() {
        q.min(noise.p() + 0.5)
    } else {
        q.min(noise.p())
    };
    let report = ConvergenceReport::from_statistics(&fingerprint, &stats, &bounds, theoretical_slope)?;
    let json = serde_json::json!({
        "command": "converge",
        "fingerprint": fingerprint,
        "seed": ensemble.seed,
        "M": ensemble.samples,
        "truncation_constant": truncation,
        "report": report,
    });
    let artifacts = writer.write(Some(report.to_csv()), &json)?;
    Ok(ConvergeOutcome { report, artifacts })
}

fn bayes(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Artifacts> {
    let s = ExperimentConfig::require(&cfg.bayes, "bayes")?;
    let model = build_bayes(s)?;
    let writer = Writer::new(cfg, out)?;
    let rule = s.seed.map_or(DataRule::Noiseless, DataRule::Seeded);
    let rows = in_section("bayes", small_noise_sweep(&model, &s.deltas, rule))?;
    let json = serde_json::json!({
        "command": "bayes",
        "fingerprint": cfg.fingerprint(),
        "rows": rows,
        "biased_limit": model.biased_limit(),
        "randomised_variance_limit": model.randomised_variance_limit(),
    });
    writer.write(Some(sweep_to_csv(&rows)), &json)
}

fn gronwall_check(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Artifacts> {
    let s = cfg.gronwall.clone().unwrap_or(GronwallSection {
        sequences: thousand(),
        seed: 0,
    });
    if s.sequences == 0 {
        return Err(Error::config("gronwall", "sequences must be at least 1"));
    }
    let writer = Writer::new(cfg, out)?;
    let results = gronwall_dominance(s.sequences, s.seed)?;
    let json = serde_json::json!({
        "command": "gronwall-check",
        "fingerprint": cfg.fingerprint(),
        "results": results,
    });
    let artifacts = writer.write(None, &json)?;
    if let Some(bad) = results.iter().find(|r| !r.passed()) {
        return Err(Error::Estimation(format!(
            "{} Gronwall bound exceeded by {} of {} sequences",
            bad.name, bad.violations, bad.sequences
        )));
    }
    Ok(artifacts)
}

fn noise_check(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Artifacts> {
    let s = cfg.noise_check.clone().unwrap_or(NoiseCheckSection {
        steps: default_check_steps(),
        samples: hundred_thousand(),
        seed: 0,
        scaling_tol: two_percent(),
        psi2_tol: five_percent(),
    });
    if s.samples == 0 || s.steps.is_empty() || s.steps.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::config("noise_check", "need positive steps and at least one sample"));
    }
    let ns = ExperimentConfig::require(&cfg.noise, "noise")?;
    let dim = match (&cfg.problem, ns.dim) {
        (_, Some(d)) => d,
        (Some(ps), None) => build_problem(ps)?.dim(),
        (None, None) => 1,
    };
    let model = build_noise(ns, dim)?;
    let writer = Writer::new(cfg, out)?;
    let scaling = noise_scaling(&model, &s.steps, s.samples, s.seed)?;
    let psi2 = gaussian_psi2_estimate(s.samples, s.seed)?;
    let psi2_error = (psi2 / gaussian_psi2_norm() - 1.0).abs();
    let json = serde_json::json!({
        "command": "noise-check",
        "fingerprint": cfg.fingerprint(),
        "scaling": scaling,
        "expected_l2_amplitude": model.l2_amplitude(),
        "gaussian_psi2_estimate": psi2,
        "gaussian_psi2_exact": gaussian_psi2_norm(),
        "gaussian_psi2_rel_error": psi2_error,
    });
    let artifacts = writer.write(None, &json)?;
    if scaling.spread > s.scaling_tol {
        return Err(Error::Estimation(format!(
            "noise scaling spread {:.4} exceeds {}",
            scaling.spread, s.scaling_tol
        )));
    }
    if psi2_error > s.psi2_tol {
        return Err(Error::Estimation(format!(
            "Gaussian Ψ₂ estimate off by {psi2_error:.4} (tolerance {})",
            s.psi2_tol
        )));
    }
    Ok(artifacts)
}

/// Loads the configuration, applies overrides and dispatches.
pub fn run(cli: &Cli) -> Result<Artifacts> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::config("config", "--config PATH is required"))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.override_seed(seed);
    }
    let out = cli.out.as_deref();
    match cli.command {
        Command::Converge => converge(&cfg, cli.workers, out).map(|o| o.artifacts),
        Command::Bayes => bayes(&cfg, out),
        Command::GronwallCheck => gronwall_check(&cfg, out),
        Command::NoiseCheck => noise_check(&cfg, out),
    }
}

/// 1 for configuration and validation errors, 2 for failures while running.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Config { .. }
        | Error::InvalidParameter { .. }
        | Error::DimensionMismatch { .. }
        | Error::StepTooLarge { .. }
        | Error::OutsideHorizon { .. } => 1,
        Error::Estimation(_) | Error::Io(_) => 2,
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with(cli: &Cli) -> i32 {
    match run(cli) {
        Ok(artifacts) => {
            for path in [artifacts.series, artifacts.report].into_iter().flatten() {
                println!("wrote {}", path.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
