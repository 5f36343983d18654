//! Desk-scale acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use ricefield::counting::{classify_critical, count_gradient_roots_2d, IndeterminatePolicy};
use ricefield::domain::Domain;
use ricefield::field::{FieldSampler, DEFAULT_N_FREQ};
use ricefield::harness::{
    estimate_max_distribution, run_experiment, simulate_critical_counts, simulate_level_counts, ExperimentConfig, MaxDistribution,
};
use ricefield::max_density::{
    density_bound_disc, disc_i1, disc_i1_monte_carlo, disc_i2, tail_asymptotic, ylvisaker_bound, DiscExampleConstants,
};
use ricefield::rice::{expected_critical, factorial_moment_2_d1, rice_d1_closed_form, DetKind};
use ricefield::spectral::{compute_spectral_moments, covariance_from_spectrum, SpectralModel};
use ricefield::stats::Accumulator;

const SEED: u64 = 20_240_601;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

/// Counts shared by the first two criteria.
struct LineCounts {
    levels: Vec<f64>,
    counts: Vec<Vec<usize>>,
}

fn line_counts() -> LineCounts {
    let levels = vec![0.0, 1.0, 2.0];
    let counts = simulate_level_counts(
        &SpectralModel::gaussian_1d(),
        &Domain::Interval { length: 10.0 },
        &levels,
        20_000,
        DEFAULT_N_FREQ,
        0.005,
        SEED,
    )
    .expect("line simulation");
    LineCounts { levels, counts }
}

fn crossings(data: &LineCounts) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, &u) in data.levels.iter().enumerate() {
        let acc: Accumulator = data.counts.iter().map(|c| c[k] as f64).collect();
        let rice = rice_d1_closed_form(1.0, 1.0, u, 10.0).unwrap();
        let se = acc.std_error().unwrap();
        let good = (acc.mean() - rice).abs() <= 3.0 * se;
        ok &= good;
        parts.push(format!("u={u}: rice {rice:.5} mc {:.5} se {se:.5}", acc.mean()));
    }
    outcome(ok, format!("{} (tol 3 SE)", parts.join("; ")))
}

fn factorial(data: &LineCounts) -> Outcome {
    let k = data.levels.iter().position(|&u| u == 1.0).unwrap();
    let acc: Accumulator = data.counts.iter().map(|c| (c[k] * c[k].saturating_sub(1)) as f64).collect();
    let f = factorial_moment_2_d1(&SpectralModel::gaussian_1d(), 10.0, 1.0, 64, 200_000, SEED).unwrap();
    let rel = (f.estimate.value - acc.mean()).abs() / acc.mean();
    outcome(
        rel <= 0.10,
        format!(
            "u=1: quadrature {:.4} (se {:.4}) mc {:.4} (se {:.4}) rel diff {rel:.4} (tol 10%)",
            f.estimate.value,
            f.estimate.std_error,
            acc.mean(),
            acc.std_error().unwrap()
        ),
    )
}

fn critical_points() -> Outcome {
    let model = SpectralModel::gaussian_2d();
    let levels = [0.5, 1.0, 1.5];
    let counts = simulate_critical_counts(&model, &Domain::UnitDisc, &levels, 1000, DEFAULT_N_FREQ, 0.05, SEED).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, &u) in levels.iter().enumerate() {
        let acc: Accumulator = counts.iter().map(|c| c[k].1 as f64).collect();
        let e = expected_critical(&model, &Domain::UnitDisc, u, DetKind::Delta2, 200_000, SEED).unwrap();
        let se = acc.std_error().unwrap().hypot(e.std_error);
        let good = (e.value - acc.mean()).abs() <= (3.0 * se).max(0.05 * e.value);
        ok &= good;
        parts.push(format!("u={u}: rice {:.4} mc {:.4} se {se:.4}", e.value, acc.mean()));
    }
    outcome(ok, format!("{} (tol max(3 SE, 5%))", parts.join("; ")))
}

fn disc_maxima() -> MaxDistribution {
    estimate_max_distribution(&SpectralModel::gaussian_2d(), &Domain::UnitDisc, 10_000, DEFAULT_N_FREQ, 0.05, SEED).expect("disc maxima")
}

fn gaussian_consts() -> DiscExampleConstants {
    DiscExampleConstants::from_model(&SpectralModel::gaussian_2d()).unwrap()
}

fn density_dominance(dist: &MaxDistribution) -> Outcome {
    let consts = gaussian_consts();
    let mut worst = f64::NEG_INFINITY;
    let mut at = 0.0;
    for bin in dist.density_table(1.5, 3.5, 0.1) {
        let bound = density_bound_disc(&consts, bin.center).unwrap();
        let excess = (bin.density - bound) / bin.std_error.max(f64::MIN_POSITIVE);
        if excess > worst {
            worst = excess;
            at = bin.center;
        }
    }
    outcome(
        worst <= 2.0,
        format!("max (empirical - bound)/SE = {worst:.3} at u={at:.1} over 21 bins (tol 2 SE)"),
    )
}

fn i1_cross_validation() -> Outcome {
    let consts = gaussian_consts();
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, u) in [0.0, 1.0, 2.0, 3.0].into_iter().enumerate() {
        let q = disc_i1(&consts, u, 128).unwrap();
        let mc = disc_i1_monte_carlo(&consts, u, 1_000_000, SEED + k as u64).unwrap();
        let se = mc.std_error.unwrap();
        ok &= (q - mc.mean).abs() <= 3.0 * se;
        parts.push(format!("u={u}: quad {q:.6} mc {:.6} se {se:.1e}", mc.mean));
    }
    outcome(ok, format!("{} (tol 3 SE)", parts.join("; ")))
}

fn asymptotic_consistency() -> Outcome {
    let model = SpectralModel::gaussian_2d();
    let consts = gaussian_consts();
    let ratio = |u: f64| density_bound_disc(&consts, u).unwrap() / tail_asymptotic(&model, &Domain::UnitDisc, u).unwrap();
    let grid: Vec<f64> = (0..=40).map(|k| 3.0 + 0.1 * k as f64).collect();
    let dist: Vec<f64> = grid.iter().map(|&u| (ratio(u) - 1.0).abs()).collect();
    let monotone = dist.windows(2).all(|w| w[1] <= w[0]);
    let (r5, r7) = (ratio(5.0), ratio(7.0));
    let ok = (r5 - 1.0).abs() <= 0.10 && (r7 - 1.0).abs() <= 0.03 && monotone;
    let i1_only = |u: f64| disc_i1(&consts, u, 128).unwrap() / tail_asymptotic(&model, &Domain::UnitDisc, u).unwrap();
    outcome(
        ok,
        format!(
            "ratio(5) = {r5:.4} (tol 10%), ratio(7) = {r7:.4} (tol 3%), |ratio-1| monotone on [3,7]: {monotone}; interior term alone: {:.4}, {:.4}; boundary/interior at 3,7: {:.3}, {:.3}",
            i1_only(5.0),
            i1_only(7.0),
            disc_i2(&consts, 3.0) / disc_i1(&consts, 3.0, 128).unwrap(),
            disc_i2(&consts, 7.0) / disc_i1(&consts, 7.0, 128).unwrap(),
        ),
    )
}

fn ylvisaker_dominance(dist: &MaxDistribution) -> Outcome {
    let hi = dist.sorted.last().copied().unwrap_or(0.0);
    let mut worst = f64::NEG_INFINITY;
    let mut at = 0.0;
    let bins = dist.density_table(0.0, hi.ceil(), 0.1);
    for bin in &bins {
        let excess = (bin.density - ylvisaker_bound(bin.center)) / bin.std_error.max(f64::MIN_POSITIVE);
        if excess > worst {
            worst = excess;
            at = bin.center;
        }
    }
    outcome(
        worst <= 2.0,
        format!(
            "max (empirical - psi)/SE = {worst:.3} at u={at:.1} over {} bins (tol 2 SE)",
            bins.len()
        ),
    )
}

fn properties() -> Outcome {
    let mut failures = Vec::new();
    let model = SpectralModel::gaussian_2d();
    let sampler = FieldSampler::new(&model).unwrap();

    // pathwise counts
    let levels: Vec<f64> = (0..=12).map(|k| -1.0 + 0.25 * k as f64).collect();
    for i in 0..40 {
        let sample = sampler.sample(DEFAULT_N_FREQ, SEED, 10_000 + i).unwrap();
        let roots = count_gradient_roots_2d(&sample, &Domain::UnitDisc, [0.0, 0.0], 0.05).unwrap();
        let mut prev = (usize::MAX, usize::MAX);
        for &u in &levels {
            let (m1, m2) = classify_critical(&sample, &roots, u, IndeterminatePolicy::AllOnly);
            if m1.count > m2.count {
                failures.push(format!("M1 > M2 at field {i}, u={u}"));
            }
            if m1.count > prev.0 || m2.count > prev.1 {
                failures.push(format!("counts increase in u at field {i}, u={u}"));
            }
            prev = (m1.count, m2.count);
        }
    }

    for u in [0.0, 1.0, 2.0] {
        let d1 = expected_critical(&model, &Domain::UnitDisc, u, DetKind::Delta1, 20_000, SEED).unwrap();
        let d2 = expected_critical(&model, &Domain::UnitDisc, u, DetKind::Delta2, 20_000, SEED).unwrap();
        if d1.value > d2.value {
            failures.push(format!("delta1 > delta2 at u={u}"));
        }
    }

    // finite differences
    let sample = sampler.sample(DEFAULT_N_FREQ, SEED, 99).unwrap();
    let h = 1e-5;
    let mut fd_err: f64 = 0.0;
    for k in 0..25 {
        let t = [-0.8 + 0.07 * k as f64, 0.6 - 0.05 * k as f64];
        let p = sample.evaluate(t);
        for axis in 0..2 {
            let mut plus = t;
            let mut minus = t;
            plus[axis] += h;
            minus[axis] -= h;
            let (fp, fm) = (sample.evaluate(plus), sample.evaluate(minus));
            fd_err = fd_err.max(((fp.value - fm.value) / (2.0 * h) - p.gradient[axis]).abs());
            for j in 0..2 {
                fd_err = fd_err.max(((fp.gradient[j] - fm.gradient[j]) / (2.0 * h) - p.hessian[axis][j]).abs());
            }
        }
    }
    if fd_err >= 1e-5 {
        failures.push(format!("finite-difference error {fd_err:.2e}"));
    }

    // covariance at 10 lags
    let lags: Vec<f64> = (1..=10).map(|k| 0.2 * k as f64).collect();
    let mut accs = vec![Accumulator::new(); lags.len()];
    for i in 0..4000 {
        let s = sampler.sample(256, SEED + 1, i).unwrap();
        let x0 = s.value([0.0, 0.0]);
        for (acc, &tau) in accs.iter_mut().zip(&lags) {
            acc.push(x0 * s.value([tau, 0.0]));
        }
    }
    let mut worst_cov: f64 = 0.0;
    for (acc, &tau) in accs.iter().zip(&lags) {
        let gamma = covariance_from_spectrum(&model, &[tau, 0.0]).unwrap();
        worst_cov = worst_cov.max((acc.mean() - gamma).abs() / acc.std_error().unwrap());
    }
    if worst_cov > 3.0 {
        failures.push(format!("covariance off by {worst_cov:.2} SE"));
    }

    // seeded determinism
    let dir = std::env::temp_dir().join(format!("ricefield-acceptance-{}", std::process::id()));
    let text = |sub: &str| {
        format!(
            "kind = \"d2_critical\"\nmodel = \"gaussian\"\ndomain = \"disc\"\nu_grid = [0.5, 1.0]\nn_samples = 20\nseed = {SEED}\ninner_mc = 4000\noutput_dir = \"{}\"\n",
            dir.join(sub).display()
        )
    };
    let mut reports = Vec::new();
    for sub in ["a", "b"] {
        let config = ExperimentConfig::from_toml_str(&text(sub)).unwrap();
        run_experiment(&config).unwrap();
        reports.push(["report.json", "report.csv", "manifest.json"].map(|f| std::fs::read(config.output_dir.join(f)).unwrap()));
    }
    let identical = reports[0] == reports[1];
    let _ = std::fs::remove_dir_all(&dir);
    if !identical {
        failures.push("seeded reports differ".into());
    }

    let detail = format!(
        "pathwise/monotone counts on 40 fields, delta1 <= delta2, FD err {fd_err:.1e} (tol 1e-5), covariance worst {worst_cov:.2} SE (tol 3), reports identical: {identical}"
    );
    if failures.is_empty() {
        outcome(true, detail)
    } else {
        outcome(false, format!("{detail}; failures: {}", failures.join(", ")))
    }
}

fn main() -> ExitCode {
    let moments = compute_spectral_moments(&SpectralModel::gaussian_2d(), 5).unwrap();
    assert!((PI * moments.j3().unwrap() - 1.0).abs() < 1e-9);

    let mut all = true;
    let mut report = |n: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        all &= o.passed;
        println!(
            "criterion {n} [{}] {name}: {} ({:.1}s)",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    };
    let start = Instant::now();
    let lines = line_counts();
    println!("shared: 20000 line paths simulated ({:.1}s)", start.elapsed().as_secs_f64());
    report(1, "d=1 Rice vs MC", &mut || crossings(&lines));
    report(2, "d=1 second factorial moment", &mut || factorial(&lines));
    report(3, "d=2 critical points", &mut critical_points);
    let start = Instant::now();
    let maxima = disc_maxima();
    println!(
        "shared: {} disc maxima simulated ({:.1}s)",
        maxima.len(),
        start.elapsed().as_secs_f64()
    );
    report(4, "disc density bound dominance", &mut || density_dominance(&maxima));
    report(5, "I1 cross-validation", &mut i1_cross_validation);
    report(6, "asymptotic consistency", &mut asymptotic_consistency);
    report(7, "Ylvisaker dominance", &mut || ylvisaker_dominance(&maxima));
    report(8, "property suite", &mut properties);
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
