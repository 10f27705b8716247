//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use probint::analysis::{error_statistics, fit_rate};
use probint::bayes::{small_noise_sweep, DataRule, DiagonalGaussianModel, PosteriorVariant};
use probint::checks::{gaussian_psi2_estimate, gaussian_psi2_norm, gronwall_dominance, noise_scaling};
use probint::cli::{converge, ExperimentConfig};
use probint::{MethodConfig, NoiseKind, NoiseModel, Problem, Quadratic, Simulation, SpectralVector, TimeGrid, TimeScaling};

type Outcome = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Outcome);

fn deterministic_slope(problem: &Problem, method: MethodConfig, initial: &SpectralVector, exps: std::ops::RangeInclusive<i32>) -> Result<f64, String> {
    let problem = Arc::new(problem.clone());
    let mut pts = Vec::new();
    for i in exps {
        let n = 1usize << i;
        let sim = Simulation::new(
            Arc::clone(&problem),
            method,
            Arc::new(NoiseModel::silent(problem.dim()).map_err(|e| e.to_string())?),
            Arc::new(TimeGrid::uniform(problem.horizon(), n).map_err(|e| e.to_string())?),
            initial.clone(),
        )
        .map_err(|e| e.to_string())?;
        let traj = sim.run_deterministic().map_err(|e| e.to_string())?;
        pts.push((1.0 / n as f64 * problem.horizon(), traj.max_error()));
    }
    fit_rate(&pts).map(|f| f.slope).map_err(|e| e.to_string())
}

fn criterion_1() -> Outcome {
    let problem = Problem::scalar(1.0, 1.0).map_err(|e| e.to_string())?;
    let one = SpectralVector::new(vec![1.0]).unwrap();
    let heun = deterministic_slope(&problem, MethodConfig::heun(0.5).unwrap(), &one, 3..=8)?;
    let explicit = deterministic_slope(&problem, MethodConfig::explicit_euler(0.5).unwrap(), &one, 3..=8)?;
    let implicit = deterministic_slope(&problem, MethodConfig::implicit_euler(0.5, 1.0).unwrap(), &one, 3..=8)?;
    let pass = (heun - 2.0).abs() <= 0.1 && (explicit - 1.0).abs() <= 0.1 && (implicit - 1.0).abs() <= 0.1;
    Ok((pass, format!("slopes: two-stage {heun:.4} (2 +- 0.1), explicit Euler {explicit:.4}, implicit Euler {implicit:.4} (1 +- 0.1)")))
}

fn criterion_2() -> Outcome {
    let problem = Problem::heat(64, 1.0).map_err(|e| e.to_string())?;
    let theta = SpectralVector::from_fn(64, |j| ((j + 1) as f64).powi(-4));
    let slope = deterministic_slope(&problem, MethodConfig::implicit_euler(1.0, 1.0).unwrap(), &theta, 3..=8)?;
    Ok(((slope - 1.0).abs() <= 0.15, format!("implicit Euler on 64-mode heat model: slope {slope:.4} (1 +- 0.15)")))
}

fn randomised_slope(kind: NoiseKind, c_xi: f64, seed: u64) -> Result<f64, String> {
    let problem = Arc::new(Problem::scalar(1.0, 1.0).unwrap());
    let noise = Arc::new(NoiseModel::new(1.0, c_xi, 1.0, 1, kind).map_err(|e| e.to_string())?);
    let mut pts = Vec::new();
    for i in 3..=7 {
        let n = 1usize << i;
        let sim = Simulation::new(
            Arc::clone(&problem),
            MethodConfig::heun(0.125).unwrap(),
            Arc::clone(&noise),
            Arc::new(TimeGrid::uniform(1.0, n).unwrap()),
            SpectralVector::new(vec![1.0]).unwrap(),
        )
        .map_err(|e| e.to_string())?;
        let summary = sim.run_ensemble_summary(2000, seed, 4, "acceptance").map_err(|e| e.to_string())?;
        let stats = error_statistics(&summary, sim.grid().mesh(), 2.0, None).map_err(|e| e.to_string())?;
        pts.push((stats.mesh, stats.max_of_norm));
    }
    fit_rate(&pts).map(|f| f.slope).map_err(|e| e.to_string())
}

fn criterion_3() -> Outcome {
    let centred = randomised_slope(NoiseKind::CentredGaussian, 1.0, 2024)?;
    let biased = randomised_slope(NoiseKind::Biased { mode: 0, coefficient: 1.0 }, 1.0, 2024)?;
    let pass = (centred - 1.5).abs() <= 0.15 && (biased - 1.0).abs() <= 0.15;
    Ok((pass, format!("M = 2000, p = 1: centred slope {centred:.4} (1.5 +- 0.15), biased slope {biased:.4} (1.0 +- 0.15)")))
}

fn criterion_4() -> Outcome {
    let model = NoiseModel::new(1.0, 1.0, 1.0, 16, NoiseKind::CentredGaussian).map_err(|e| e.to_string())?;
    let r = noise_scaling(&model, &[0.5, 0.25, 0.125], 100_000, 4).map_err(|e| e.to_string())?;
    Ok((
        r.spread <= 0.02,
        format!("normalised L2 norms {:?}, spread {:.4} (<= 0.02)", r.normalised.iter().map(|v| format!("{v:.5}")).collect::<Vec<_>>(), r.spread),
    ))
}

fn criterion_5() -> Outcome {
    let est = gaussian_psi2_estimate(100_000, 5).map_err(|e| e.to_string())?;
    let rel = (est / gaussian_psi2_norm() - 1.0).abs();
    Ok((rel <= 0.05, format!("Psi2 estimate {est:.5} vs sqrt(8/3) = {:.5}, relative error {rel:.4} (<= 0.05)", gaussian_psi2_norm())))
}

fn criterion_6() -> Outcome {
    let results = gronwall_dominance(1000, 6).map_err(|e| e.to_string())?;
    let pass = results.iter().all(|r| r.passed());
    let detail = results
        .iter()
        .map(|r| format!("{} {}/{} violations (worst ratio {:.6})", r.name, r.violations, r.sequences, r.worst_ratio))
        .collect::<Vec<_>>()
        .join(", ");
    Ok((pass, detail))
}

const HEAT_CONFIG: &str = r#"
[problem]
kind = "heat"
dim = 64
T = 1.0
initial_decay = 4.0

[grid_family]
N = [8, 16, 32, 64]

[method]
method = "implicit_euler"
order = 1.0

[noise]
kind = "centred_gaussian"
p = 1.0
c_xi = 1.0
s = 1.0

[ensemble]
M = 1000
seed = 7

[analysis]
R = [2.0, 3.0]
young = "psi2"
bound = "gelfand_orlicz"
"#;

fn criterion_7() -> Outcome {
    let cfg = ExperimentConfig::parse(HEAT_CONFIG).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let outcome = converge(&cfg, 4, Some(dir.path())).map_err(|e| e.to_string())?;
    let report = &outcome.report;
    let below = report.series.iter().all(|r| r.err_psi2 < r.bound);
    // For empirical moments max-of-norm <= norm-of-max holds exactly, so no slack is needed.
    let ordered = report.series.iter().all(|r| r.err_l2_maxnorm <= r.err_l2_normmax)
        && report.moments.iter().all(|m| m.max_of_norm.iter().zip(&m.norm_of_max).all(|(a, b)| a <= b));
    let detail = report
        .series
        .iter()
        .map(|r| format!("h={:.4}: psi2 {:.3e} < bound {:.3e}", r.h, r.err_psi2, r.bound))
        .collect::<Vec<_>>()
        .join("; ");
    Ok((below && ordered, format!("{detail}; max-of-norm <= norm-of-max: {ordered}")))
}

fn criterion_8() -> Outcome {
    let forcing: Vec<Quadratic> = (0..16).map(|j| Quadratic([1.0 / (j + 1) as f64, -0.5, 0.25])).collect();
    let problem = Problem::heat(16, 2.0)
        .and_then(|p| p.with_scaling(TimeScaling::Affine { offset: 0.5, slope: 0.75 }))
        .and_then(|p| p.with_forcing(forcing))
        .map_err(|e| e.to_string())?;
    if problem.garding_constants().kappa != 0.0 {
        return Ok((false, "model has a positive Garding shift".into()));
    }
    let method = MethodConfig::implicit_euler(1.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..1000 {
        let x = SpectralVector::from_fn(16, |_| rng.random_range(-5.0..5.0));
        let y = SpectralVector::from_fn(16, |_| rng.random_range(-5.0..5.0));
        let h = rng.random_range(1e-6..1.0);
        let t = rng.random_range(0.0..(2.0 - h));
        let d = &method.step(&problem, h, t, &x).map_err(|e| e.to_string())? - &method.step(&problem, h, t, &y).map_err(|e| e.to_string())?;
        let ratio = d.h_norm() / (&x - &y).h_norm();
        worst = worst.max(ratio);
        if ratio > 1.0 + 1e-12 {
            failures += 1;
        }
    }
    Ok((failures == 0, format!("1000 quadruples, {failures} violations, largest contraction ratio {worst:.6}")))
}

fn criterion_9() -> Outcome {
    let model = DiagonalGaussianModel::single_mode(1.0, 0.1, 0.0, 1.0).map_err(|e| e.to_string())?;
    let mut deltas: Vec<f64> = (0..=8).map(|i| 10f64.powi(-i)).collect();
    deltas.push(0.0);
    let rows = small_noise_sweep(&model, &deltas, DataRule::Noiseless).map_err(|e| e.to_string())?;
    let at_1e8 = &rows[8];
    let limit = &rows[9];

    let y = model.clean_data();
    let tilde = model.posterior(&y, 1e-8, PosteriorVariant::Discretised).map_err(|e| e.to_string())?;
    // Independent closed forms: G̃ = 1/1.1, G̃^{-1} G ϑ = 1.1 e^{-0.1}, Ĉ → h² / (G̃² + h²).
    let g_tilde = 1.0 / 1.1;
    let variance_oracle = 0.01 / (g_tilde * g_tilde + 0.01);

    let exact_ok = at_1e8.err_exact_mean < 1e-6;
    let tilde_ok = (tilde.mean[0] - 0.995_321).abs() <= 1e-6;
    let variance_ok = (limit.min_hat_variance - variance_oracle).abs() <= 1e-9;
    let converging = rows.windows(2).all(|w| {
        w[1].err_exact_mean <= w[0].err_exact_mean
            && w[1].err_tilde_mean_vs_biased_limit <= w[0].err_tilde_mean_vs_biased_limit
            && (w[1].min_hat_variance - variance_oracle).abs() <= (w[0].min_hat_variance - variance_oracle).abs()
    });
    Ok((
        exact_ok && tilde_ok && variance_ok && converging,
        format!(
            "|m - 1| at delta=1e-8: {:.2e}; discretised mean {:.7} (0.995321 +- 1e-6); randomised variance limit {:.12} vs closed form {:.12} (+- 1e-9), at delta=1e-8 {:.12}; monotone: {converging}",
            at_1e8.err_exact_mean, tilde.mean[0], limit.min_hat_variance, variance_oracle, at_1e8.min_hat_variance
        ),
    ))
}

const CLI_CONFIG: &str = r#"
[problem]
kind = "heat"
dim = 8
initial_decay = 2.0
initial_spread = 0.05

[grid_family]
N = [8, 16, 32]
gamma = 1.5

[method]
method = "implicit_euler"

[noise]
kind = "shared_factor"
rho = 0.3
p = 0.5
c_xi = 0.8

[ensemble]
M = 300
seed = 99
"#;

fn run_cli(config: &Path, out: &Path, workers: usize) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_probint"))
        .args(["converge", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(["--workers", &workers.to_string()])
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(format!("probint exited with {}: {}", status.status, String::from_utf8_lossy(&status.stderr)));
    }
    std::fs::read(out.join("series.csv")).map_err(|e| e.to_string())
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("experiment.toml");
    std::fs::write(&config, CLI_CONFIG).map_err(|e| e.to_string())?;
    let serial = run_cli(&config, &dir.path().join("w1"), 1)?;
    let again = run_cli(&config, &dir.path().join("w1b"), 1)?;
    let parallel = run_cli(&config, &dir.path().join("w8"), 8)?;
    let pass = serial == again && serial == parallel && !serial.is_empty();
    Ok((pass, format!("series.csv ({} bytes) identical across repeat and workers 1 vs 8: {pass}", serial.len())))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("deterministic orders on u' = u", criterion_1),
        ("implicit Euler on the heat model", criterion_2),
        ("randomised rate gap, centred vs biased", criterion_3),
        ("noise scaling law", criterion_4),
        ("Psi2 estimator on Gaussian samples", criterion_5),
        ("Gronwall dominance", criterion_6),
        ("Orlicz bound dominance and norm ordering", criterion_7),
        ("implicit Euler nonexpansivity", criterion_8),
        ("small-noise Bayes limits", criterion_9),
        ("CLI reproducibility across workers", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} [{}] {name} ({:.2}s): {detail}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
