//! Configuration-driven experiments: Monte Carlo drivers, analytic
//! comparisons and deterministic report files.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::counting::{classify_critical, count_gradient_roots_2d, level_roots_from_values, IndeterminatePolicy};
use crate::domain::Domain;
use crate::error::{invalid, Error, Result};
use crate::field::{sup_on_domain, FieldSampler, Lattice, DEFAULT_N_FREQ};
use crate::max_density::{
    binned_density, density_bound_disc, tail_asymptotic_from_moments, ylvisaker_bound, DensityBin, DiscExampleConstants,
};
use crate::quad::semi_infinite;
use crate::rice::{expected_critical_from_moments, factorial_moment_2_d1, rice_d1_closed_form, DetKind, DEFAULT_INNER_MC};
use crate::spectral::{compute_spectral_moments, validate_model, SpectralModel};
use crate::stats::Accumulator;

pub const DEFAULT_BIN_WIDTH: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    D1Crossings,
    D2Critical,
    DiscDensityBound,
    TailComparison,
    FactorialMoment,
}

fn default_n_freq() -> usize {
    DEFAULT_N_FREQ
}
fn default_grid_step() -> f64 {
    0.05
}
fn default_inner_mc() -> usize {
    DEFAULT_INNER_MC
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_se_multiplier() -> f64 {
    3.0
}
fn default_rel_tolerance() -> f64 {
    0.05
}
fn default_n_quad() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Catalog name (`gaussian`, `gaussian-1d`) or `file:<csv>` / `file1d:<csv>`.
    pub model: String,
    /// `disc`, `interval:T` or `rectangle:WxH`.
    pub domain: String,
    pub u_grid: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
    #[serde(default = "default_n_freq")]
    pub n_freq: usize,
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
    #[serde(default = "default_inner_mc")]
    pub inner_mc: usize,
    #[serde(default = "default_n_quad")]
    pub n_quad: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_se_multiplier")]
    pub se_multiplier: f64,
    #[serde(default = "default_rel_tolerance")]
    pub rel_tolerance: f64,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::Config(format!("field `{field}`: {msg}")));
        if self.n_samples < 1 {
            return bad("n_samples", "must be at least 1".into());
        }
        if self.u_grid.is_empty() {
            return bad("u_grid", "must be nonempty".into());
        }
        if self.u_grid.iter().any(|u| !u.is_finite()) {
            return bad("u_grid", "values must be finite".into());
        }
        if self.u_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("u_grid", "must be sorted ascending without repeats".into());
        }
        if !(self.grid_step > 0.0) {
            return bad("grid_step", format!("must be positive, got {}", self.grid_step));
        }
        if !(self.se_multiplier > 0.0) || !(self.rel_tolerance >= 0.0) {
            return bad("se_multiplier", "tolerances must be positive".into());
        }
        if let Err(e) = Domain::from_str(&self.domain) {
            return bad("domain", e.to_string());
        }
        Ok(())
    }

    pub fn parsed_domain(&self) -> Result<Domain> {
        Domain::from_str(&self.domain)
    }

    /// SHA-256 of the canonical JSON form, ignoring where outputs go.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let text = serde_json::to_string(&canonical).expect("config serializes");
        hex(&Sha256::digest(text.as_bytes()))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// `|analytic − mc| ≤ max(k·SE, r·|analytic|)`, with SE combining both sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub se_multiplier: f64,
    pub relative: f64,
}

impl Tolerance {
    pub fn check(&self, analytic: f64, mc: f64, se: Option<f64>) -> (bool, String) {
        let rel = self.relative * analytic.abs();
        let allowed = se.map_or(rel, |s| rel.max(self.se_multiplier * s));
        let ok = (analytic - mc).abs() <= allowed;
        let text = match se {
            Some(s) => format!(
                "|diff| <= max({}*SE, {}*|analytic|) = {allowed:.6e} (SE {s:.3e})",
                self.se_multiplier, self.relative
            ),
            None => format!("|diff| <= {}*|analytic| = {allowed:.6e} (SE unavailable)", self.relative),
        };
        (ok, text)
    }

    /// One-sided: `mc ≤ bound + k·SE`.
    pub fn check_upper(&self, bound: f64, mc: f64, se: Option<f64>, k: f64) -> (bool, String) {
        let slack = se.map_or(0.0, |s| k * s);
        (mc <= bound + slack, format!("mc <= bound + {k}*SE = {:.6e}", bound + slack))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub u: f64,
    pub quantity: String,
    pub analytic: f64,
    pub analytic_se: Option<f64>,
    pub reference: Option<f64>,
    pub mc: Option<f64>,
    pub mc_se: Option<f64>,
    pub n: usize,
    pub pass: Option<bool>,
    pub tolerance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub crate_version: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub model: String,
    pub domain: String,
    pub rows: Vec<ReportRow>,
    pub provenance: Provenance,
}

impl ExperimentReport {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass != Some(false))
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

fn mc_from(acc: &Accumulator) -> (f64, Option<f64>) {
    (acc.mean(), acc.std_error())
}

fn combine_se(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.hypot(y)),
        (None, Some(y)) => Some(y),
        _ => None,
    }
}

/// Level-root counts on an interval, one row per replication and one column
/// per level; replication `i` uses stream `i`.
pub fn simulate_level_counts(
    model: &SpectralModel,
    domain: &Domain,
    levels: &[f64],
    n_samples: usize,
    n_freq: usize,
    grid_step: f64,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    let Domain::Interval { .. } = domain else {
        return Err(Error::UnsupportedDomain(domain.to_string()));
    };
    let sampler = FieldSampler::new(model)?;
    let lattice = Lattice::new(domain, grid_step)?;
    (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let sample = sampler.sample(n_freq, seed, i as u64)?;
            let (values, _) = sample.line(lattice.origin[0], lattice.step[0], lattice.shape[0]);
            Ok(level_roots_from_values(&sample, &values, lattice.step[0], levels)
                .into_iter()
                .map(|r| r.count)
                .collect())
        })
        .collect()
}

/// Per replication and level: `(M_{u,1}, M_{u,2})`.
pub fn simulate_critical_counts(
    model: &SpectralModel,
    domain: &Domain,
    levels: &[f64],
    n_samples: usize,
    n_freq: usize,
    grid_step: f64,
    seed: u64,
) -> Result<Vec<Vec<(usize, usize)>>> {
    if domain.dim() != 2 {
        return Err(Error::UnsupportedDomain(domain.to_string()));
    }
    let sampler = FieldSampler::new(model)?;
    (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let sample = sampler.sample(n_freq, seed, i as u64)?;
            let roots = count_gradient_roots_2d(&sample, domain, [0.0, 0.0], grid_step)?;
            Ok(levels
                .iter()
                .map(|&u| {
                    let (max, all) = classify_critical(&sample, &roots, u, IndeterminatePolicy::AllOnly);
                    (max.count, all.count)
                })
                .collect())
        })
        .collect()
}

/// Empirical law of `M_I` from independent replications.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxDistribution {
    pub sorted: Vec<f64>,
}

impl MaxDistribution {
    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// `F̂(u)` with its binomial standard error.
    pub fn cdf(&self, u: f64) -> (f64, f64) {
        let n = self.sorted.len() as f64;
        let p = self.sorted.partition_point(|&x| x <= u) as f64 / n;
        (p, (p * (1.0 - p) / n).sqrt())
    }

    pub fn density(&self, center: f64, width: f64) -> DensityBin {
        binned_density(&self.sorted, center, width)
    }

    pub fn median(&self) -> f64 {
        let n = self.sorted.len();
        if n % 2 == 1 {
            self.sorted[n / 2]
        } else {
            0.5 * (self.sorted[n / 2 - 1] + self.sorted[n / 2])
        }
    }

    /// Bins of width `width` centred on `lo, lo + width, …, ≤ hi`.
    pub fn density_table(&self, lo: f64, hi: f64, width: f64) -> Vec<DensityBin> {
        let n = ((hi - lo) / width + 1e-9).floor() as usize;
        (0..=n).map(|k| self.density(lo + k as f64 * width, width)).collect()
    }
}

pub fn estimate_max_distribution(
    model: &SpectralModel,
    domain: &Domain,
    n_samples: usize,
    n_freq: usize,
    grid_step: f64,
    seed: u64,
) -> Result<MaxDistribution> {
    if n_samples == 0 {
        return Err(invalid("n_samples must be at least 1"));
    }
    let sampler = FieldSampler::new(model)?;
    let mut sorted: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|i| sup_on_domain(&sampler.sample(n_freq, seed, i as u64)?, domain, grid_step, true))
        .collect::<Result<_>>()?;
    sorted.sort_by(f64::total_cmp);
    Ok(MaxDistribution { sorted })
}

fn column_accumulators<T: Copy>(samples: &[Vec<T>], levels: usize, f: impl Fn(T) -> f64) -> Vec<Accumulator> {
    (0..levels).map(|k| samples.iter().map(|row| f(row[k])).collect()).collect()
}

/// Dispatches on the experiment kind and assembles the report.
pub fn evaluate_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let model = SpectralModel::from_catalog(&config.model)?;
    let report = validate_model(&model);
    if !report.passed() {
        let failed: Vec<_> = report.checks.iter().filter(|c| !c.passed).map(|c| c.detail.clone()).collect();
        return Err(invalid(format!(
            "model `{}` failed validation: {}",
            config.model,
            failed.join("; ")
        )));
    }
    let domain = config.parsed_domain()?;
    let tol = Tolerance {
        se_multiplier: config.se_multiplier,
        relative: config.rel_tolerance,
    };
    let us = &config.u_grid;
    let n = config.n_samples;
    let mut rows = Vec::new();
    let row = |u: f64, quantity: &str, analytic: f64, analytic_se: Option<f64>, mc: f64, mc_se: Option<f64>| {
        let se = combine_se(analytic_se, mc_se).filter(|_| mc_se.is_some());
        let (pass, tolerance) = tol.check(analytic, mc, se);
        ReportRow {
            u,
            quantity: quantity.into(),
            analytic,
            analytic_se,
            reference: None,
            mc: Some(mc),
            mc_se,
            n,
            pass: Some(pass),
            tolerance,
        }
    };
    let need_dim = |d: usize| {
        if model.dim != d || domain.dim() != d {
            Err(invalid(format!("{:?} needs a d = {d} model and domain", config.kind)))
        } else {
            Ok(())
        }
    };
    match config.kind {
        ExperimentKind::D1Crossings => {
            need_dim(1)?;
            let m = compute_spectral_moments(&model, 4)?;
            let counts = simulate_level_counts(&model, &domain, us, n, config.n_freq, config.grid_step, config.seed)?;
            let accs = column_accumulators(&counts, us.len(), |c| c as f64);
            for (k, &u) in us.iter().enumerate() {
                let rice = rice_d1_closed_form(m.lambda0, m.lambda2, u, domain.measure())?;
                let (mc, se) = mc_from(&accs[k]);
                rows.push(row(u, "crossings", rice, None, mc, se));
            }
        }
        ExperimentKind::FactorialMoment => {
            need_dim(1)?;
            let counts = simulate_level_counts(&model, &domain, us, n, config.n_freq, config.grid_step, config.seed)?;
            let accs = column_accumulators(&counts, us.len(), |c| (c * c.saturating_sub(1)) as f64);
            for (k, &u) in us.iter().enumerate() {
                let f = factorial_moment_2_d1(&model, domain.measure(), u, config.n_quad, config.inner_mc, config.seed)?;
                let (mc, se) = mc_from(&accs[k]);
                rows.push(row(u, "factorial_moment_2", f.estimate.value, Some(f.estimate.std_error), mc, se));
            }
        }
        ExperimentKind::D2Critical => {
            need_dim(2)?;
            let m = compute_spectral_moments(&model, 5)?;
            let counts = simulate_critical_counts(&model, &domain, us, n, config.n_freq, config.grid_step, config.seed)?;
            let maxima = column_accumulators(&counts, us.len(), |c| c.0 as f64);
            let all = column_accumulators(&counts, us.len(), |c| c.1 as f64);
            for (k, &u) in us.iter().enumerate() {
                for (kind, accs, name) in [
                    (DetKind::Delta1, &maxima, "local_maxima"),
                    (DetKind::Delta2, &all, "critical_points"),
                ] {
                    let e = expected_critical_from_moments(&m, &domain, u, kind, config.inner_mc, config.seed)?;
                    let (mc, se) = mc_from(&accs[k]);
                    rows.push(row(u, name, e.value, Some(e.std_error), mc, se));
                }
            }
        }
        ExperimentKind::DiscDensityBound | ExperimentKind::TailComparison => {
            need_dim(2)?;
            if domain != Domain::UnitDisc {
                return Err(Error::UnsupportedDomain(format!(
                    "{domain}: the density bound is specific to the unit disc"
                )));
            }
            let m = compute_spectral_moments(&model, 5)?;
            let consts = DiscExampleConstants::from_moments(&m)?;
            let dist = estimate_max_distribution(&model, &domain, n, config.n_freq, config.grid_step, config.seed)?;
            let se_of = |s: f64| if n > 1 { Some(s) } else { None };
            for &u in us {
                let bound = density_bound_disc(&consts, u)?;
                let asym = tail_asymptotic_from_moments(&m, &domain, u)?;
                if config.kind == ExperimentKind::DiscDensityBound {
                    let bin = dist.density(u, DEFAULT_BIN_WIDTH);
                    let se = se_of(bin.std_error);
                    let (pass, tolerance) = tol.check_upper(bound, bin.density, se, 2.0);
                    rows.push(ReportRow {
                        u,
                        quantity: "max_density".into(),
                        analytic: bound,
                        analytic_se: None,
                        reference: Some(ylvisaker_bound(u)),
                        mc: Some(bin.density),
                        mc_se: se,
                        n,
                        pass: Some(pass),
                        tolerance,
                    });
                } else {
                    let tail_bound = semi_infinite(|v| density_bound_disc(&consts, v).unwrap_or(f64::NAN), u, 1e-12)?.value;
                    let (cdf, cdf_se) = dist.cdf(u);
                    let se = se_of(cdf_se);
                    let (pass, tolerance) = tol.check_upper(tail_bound, 1.0 - cdf, se, 2.0);
                    rows.push(ReportRow {
                        u,
                        quantity: "tail_probability".into(),
                        analytic: tail_bound,
                        analytic_se: None,
                        reference: None,
                        mc: Some(1.0 - cdf),
                        mc_se: se,
                        n,
                        pass: Some(pass),
                        tolerance,
                    });
                    rows.push(ReportRow {
                        u,
                        quantity: "bound_over_asymptotic".into(),
                        analytic: bound / asym,
                        analytic_se: None,
                        reference: Some(asym),
                        mc: None,
                        mc_se: None,
                        n,
                        pass: None,
                        tolerance: "informational".into(),
                    });
                }
            }
        }
    }
    Ok(ExperimentReport {
        kind: config.kind,
        model: model.name.clone(),
        domain: domain.to_string(),
        rows,
        provenance: Provenance {
            config_hash: config.hash(),
            crate_version: env!("CARGO_PKG_VERSION").into(),
            seed: config.seed,
        },
    })
}

/// Runs the experiment and writes `report.json`, `report.csv` and
/// `manifest.json` under the configured output directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let report = evaluate_experiment(config)?;
    write_report(&report, &config.output_dir)?;
    Ok(report)
}

pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<Vec<ManifestEntry>> {
    fs::create_dir_all(dir)?;
    let json = serde_json::to_vec_pretty(report)?;
    let mut csv_bytes = Vec::new();
    report.write_csv(&mut csv_bytes)?;
    let mut manifest = Vec::new();
    for (name, bytes) in [("report.json", &json), ("report.csv", &csv_bytes)] {
        fs::write(dir.join(name), bytes)?;
        manifest.push(ManifestEntry {
            file: name.into(),
            sha256: hex(&Sha256::digest(bytes)),
            bytes: bytes.len(),
        });
    }
    fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    const D1: &str = r#"
kind = "d1_crossings"
model = "gaussian-1d"
domain = "interval:10"
u_grid = [0.0, 1.0]
n_samples = 200
seed = 7
grid_step = 0.01
"#;

    #[test]
    fn parses_and_validates() {
        let c = ExperimentConfig::from_toml_str(D1).unwrap();
        assert_eq!(c.kind, ExperimentKind::D1Crossings);
        assert_eq!(c.n_freq, DEFAULT_N_FREQ);
        let unsorted = D1.replace("[0.0, 1.0]", "[1.0, 0.0]");
        assert!(matches!(ExperimentConfig::from_toml_str(&unsorted), Err(Error::Config(m)) if m.contains("u_grid")));
        let no_seed = D1.replace("seed = 7\n", "");
        assert!(matches!(ExperimentConfig::from_toml_str(&no_seed), Err(Error::Config(m)) if m.contains("seed")));
        let typo = D1.replace("n_samples", "n_sample");
        let err = ExperimentConfig::from_toml_str(&typo).unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
        assert!(ExperimentConfig::from_toml_str(&D1.replace("n_samples = 200", "n_samples = 0")).is_err());
    }

    #[test]
    fn tolerance_text_cites_rule() {
        let t = Tolerance {
            se_multiplier: 3.0,
            relative: 0.05,
        };
        let (ok, text) = t.check(1.0, 1.04, Some(0.001));
        assert!(ok && text.contains("3*SE"));
        assert!(!t.check(1.0, 1.2, Some(0.01)).0);
        assert!(t.check(1.0, 1.2, None).1.contains("unavailable"));
    }

    #[test]
    fn single_sample_has_no_se() {
        let mut c = ExperimentConfig::from_toml_str(D1).unwrap();
        c.n_samples = 1;
        let r = evaluate_experiment(&c).unwrap();
        assert!(r.rows.iter().all(|row| row.mc_se.is_none() && row.pass.is_some()));
    }

    #[test]
    fn deterministic_reports() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = ExperimentConfig::from_toml_str(D1).unwrap();
        c.n_samples = 50;
        let mut outputs = Vec::new();
        for k in 0..2 {
            c.output_dir = dir.path().join(format!("run{k}"));
            run_experiment(&c).unwrap();
            outputs.push(["report.json", "report.csv", "manifest.json"].map(|f| fs::read_to_string(c.output_dir.join(f)).unwrap()));
        }
        assert_eq!(outputs[0], outputs[1]);
    }

    #[test]
    fn max_distribution_cdf() {
        let d = MaxDistribution {
            sorted: vec![0.0, 1.0, 2.0, 3.0],
        };
        assert_eq!(d.cdf(-1.0).0, 0.0);
        assert_eq!(d.cdf(1.5).0, 0.5);
        assert_eq!(d.cdf(3.0).0, 1.0);
        assert_eq!(d.median(), 1.5);
        assert_eq!(d.density_table(0.0, 1.0, 0.5).len(), 3);
    }
}
