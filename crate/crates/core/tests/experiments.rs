//! End-to-end checks of the experiment runner and the disc maximum law.

use ricefield::domain::Domain;
use ricefield::field::DEFAULT_N_FREQ;
use ricefield::harness::{estimate_max_distribution, run_experiment, ExperimentConfig};
use ricefield::max_density::{density_bound_disc, DiscExampleConstants};
use ricefield::quad::{adaptive, semi_infinite};
use ricefield::spectral::SpectralModel;

#[test]
fn canonical_crossing_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "kind = \"d1_crossings\"\nmodel = \"gaussian-1d\"\ndomain = \"interval:10\"\nu_grid = [1.0]\nn_samples = 2000\nseed = 5\ngrid_step = 0.005\noutput_dir = {:?}\n",
        dir.path().display().to_string()
    );
    let report = run_experiment(&ExperimentConfig::from_toml_str(&text).unwrap()).unwrap();
    let row = &report.rows[0];
    assert!((row.analytic - 1.930_65).abs() < 5e-6);
    assert!(row.pass == Some(true), "{row:?}");
    assert!(row.mc_se.is_some() && row.tolerance.contains("SE"));
    for f in ["report.json", "report.csv", "manifest.json"] {
        assert!(dir.path().join(f).exists());
    }
}

#[test]
fn bound_has_at_least_unit_mass() {
    let c = DiscExampleConstants::from_model(&SpectralModel::gaussian_2d()).unwrap();
    let f = |u: f64| density_bound_disc(&c, u).unwrap();
    let mass = adaptive(f, -8.0, 0.0, 1e-10, 1e-10, 200).unwrap().value + semi_infinite(f, 0.0, 1e-10).unwrap().value;
    assert!(mass >= 1.0, "{mass}");
}

#[test]
fn disc_maximum_law() {
    let model = SpectralModel::gaussian_2d();
    let c = DiscExampleConstants::from_model(&model).unwrap();
    let coarse = estimate_max_distribution(&model, &Domain::UnitDisc, 1500, DEFAULT_N_FREQ, 0.1, 2).unwrap();
    let fine = estimate_max_distribution(&model, &Domain::UnitDisc, 1500, DEFAULT_N_FREQ, 0.05, 2).unwrap();

    let (mut prev, mut last) = (0.0, 0.0);
    for k in 0..=60 {
        let (p, _) = fine.cdf(-2.0 + 0.1 * k as f64);
        assert!(p >= prev);
        prev = p;
        last = p;
    }
    assert_eq!(last, 1.0);

    let (p3, se3) = fine.cdf(3.0);
    let tail_bound = semi_infinite(|u| density_bound_disc(&c, u).unwrap(), 3.0, 1e-12).unwrap().value;
    assert!(1.0 - p3 <= tail_bound + 2.0 * se3, "P(M > 3) = {} vs bound {tail_bound}", 1.0 - p3);

    // same streams, so only the sup search differs
    let (pc, sc) = coarse.cdf(fine.median());
    assert!((pc - 0.5).abs() <= 2.0 * sc, "coarse CDF at the fine median: {pc}");
    let gap = coarse
        .sorted
        .iter()
        .zip(&fine.sorted)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(gap < 1e-6, "{gap}");
}
