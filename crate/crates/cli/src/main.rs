use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use ricefield::counting::{
    classify_critical, count_boundary_critical, count_gradient_roots_2d, count_level_roots_1d, write_count_records, CountRecord,
    IndeterminatePolicy, DEFAULT_GRID_STEP,
};
use ricefield::domain::Domain;
use ricefield::field::{restrict_to_boundary, sample_field, DEFAULT_N_FREQ};
use ricefield::harness::{estimate_max_distribution, run_experiment, ExperimentConfig, DEFAULT_BIN_WIDTH};
use ricefield::max_density::{bound_table, tail_asymptotic, write_bound_csv};
use ricefield::rice::{expected_critical, factorial_moment_2_d1, rice_d1_closed_form, DetKind, RiceRecord, DEFAULT_INNER_MC};
use ricefield::spectral::{compute_spectral_moments, validate_model, SpectralModel};

/// Rice-formula moments and maximum-density bounds for stationary Gaussian fields.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ModelArgs {
    /// gaussian, gaussian-1d, file:<csv> or file1d:<csv>
    #[arg(long, default_value = "gaussian")]
    model: String,
    /// disc, interval:T or rectangle:WxH
    #[arg(long, default_value = "disc")]
    domain: String,
}

impl ModelArgs {
    fn load(&self) -> Result<(SpectralModel, Domain)> {
        let model = SpectralModel::from_catalog(&self.model).with_context(|| format!("loading model `{}`", self.model))?;
        let domain = Domain::from_str(&self.domain).with_context(|| format!("parsing domain `{}`", self.domain))?;
        Ok((model, domain))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CountMode {
    Level,
    Critical,
    Maxima,
    Boundary,
}

#[derive(Clone, Copy, ValueEnum)]
enum RiceMode {
    Crossings,
    FactorialMoment,
    Delta1,
    Delta2,
}

#[derive(Subcommand)]
enum Command {
    /// Check positivity, decay and normalization of a spectral model.
    Validate {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Draw one field and write values and derivatives on a lattice as CSV.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_N_FREQ)]
        n_freq: usize,
        #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
        grid_step: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Count level roots or critical points of simulated fields.
    Count {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum)]
        kind: CountMode,
        #[arg(long, value_delimiter = ',', required = true)]
        u: Vec<f64>,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        n_samples: usize,
        #[arg(long, default_value_t = DEFAULT_N_FREQ)]
        n_freq: usize,
        #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
        grid_step: f64,
    },
    /// Evaluate a Rice-formula moment; prints one JSON record per level.
    Rice {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum)]
        kind: RiceMode,
        #[arg(long, value_delimiter = ',', required = true)]
        u: Vec<f64>,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_INNER_MC)]
        n_mc: usize,
        #[arg(long, default_value_t = 64)]
        n_quad: usize,
    },
    /// Tabulate the disc density bound, asymptote and Ylvisaker bound.
    Bound {
        #[arg(long, default_value = "gaussian")]
        model: String,
        #[arg(long, value_delimiter = ',', required = true)]
        u: Vec<f64>,
        /// Simulated fields for the empirical density column (0 = none).
        #[arg(long, default_value_t = 0)]
        n_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
        grid_step: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// High-level asymptotic equivalent of the maximum density.
    Tail {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        u: Vec<f64>,
    },
    /// Run an experiment described by a TOML config file.
    Experiment {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n_samples: Option<usize>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate { model } => {
            let (m, _) = model.load()?;
            let report = validate_model(&m);
            println!("{}", serde_json::to_string_pretty(&report)?);
            if report.passed() {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&compute_spectral_moments(&m, if m.dim == 2 { 5 } else { 4 })?)?
                );
            }
        }
        Command::Simulate {
            model,
            seed,
            n_freq,
            grid_step,
            out,
        } => {
            let (m, domain) = model.load()?;
            let sample = sample_field(&m, n_freq, seed)?;
            sample.write_csv(&domain, grid_step, output(out.as_ref())?)?;
        }
        Command::Count {
            model,
            kind,
            u,
            seed,
            n_samples,
            n_freq,
            grid_step,
        } => {
            let (m, domain) = model.load()?;
            let sampler = ricefield::field::FieldSampler::new(&m)?;
            let mut records = Vec::new();
            for i in 0..n_samples {
                let sample = sampler.sample(n_freq, seed, i as u64)?;
                let results = match kind {
                    CountMode::Level => u
                        .iter()
                        .map(|&v| count_level_roots_1d(&sample, &domain, v, grid_step))
                        .collect::<Result<Vec<_>, _>>()?,
                    CountMode::Critical | CountMode::Maxima => {
                        let roots = count_gradient_roots_2d(&sample, &domain, [0.0, 0.0], grid_step)?;
                        u.iter()
                            .map(|&v| {
                                let (max, all) = classify_critical(&sample, &roots, v, IndeterminatePolicy::AllOnly);
                                if matches!(kind, CountMode::Maxima) {
                                    max
                                } else {
                                    all
                                }
                            })
                            .collect()
                    }
                    CountMode::Boundary => {
                        let trace = restrict_to_boundary(&sample, &domain)?;
                        u.iter()
                            .map(|&v| count_boundary_critical(&trace, v, grid_step))
                            .collect::<Result<Vec<_>, _>>()?
                    }
                };
                records.extend(results.into_iter().map(|r| CountRecord {
                    seed: sample.stream,
                    u: r.level,
                    kind: r.kind,
                    count: r.count,
                }));
            }
            write_count_records(&records, io::stdout().lock())?;
        }
        Command::Rice {
            model,
            kind,
            u,
            seed,
            n_mc,
            n_quad,
        } => {
            let (m, domain) = model.load()?;
            for &level in &u {
                let (op, value, se) = match kind {
                    RiceMode::Crossings => {
                        if m.dim != 1 {
                            bail!("crossings need a d = 1 model");
                        }
                        let mo = compute_spectral_moments(&m, 4)?;
                        (
                            "crossings",
                            rice_d1_closed_form(mo.lambda0, mo.lambda2, level, domain.measure())?,
                            0.0,
                        )
                    }
                    RiceMode::FactorialMoment => {
                        let f = factorial_moment_2_d1(&m, domain.measure(), level, n_quad, n_mc, seed)?;
                        ("factorial_moment_2", f.estimate.value, f.estimate.std_error)
                    }
                    RiceMode::Delta1 | RiceMode::Delta2 => {
                        let (k, name) = if matches!(kind, RiceMode::Delta1) {
                            (DetKind::Delta1, "local_maxima")
                        } else {
                            (DetKind::Delta2, "critical_points")
                        };
                        let e = expected_critical(&m, &domain, level, k, n_mc, seed)?;
                        (name, e.value, e.std_error)
                    }
                };
                let n_mc = if matches!(kind, RiceMode::Crossings) { 0 } else { n_mc };
                let record = RiceRecord {
                    op: op.into(),
                    model: m.name.clone(),
                    domain: domain.to_string(),
                    u: level,
                    value,
                    std_error: se,
                    n_mc,
                    seed,
                };
                println!("{}", serde_json::to_string(&record)?);
            }
        }
        Command::Bound {
            model,
            u,
            n_samples,
            seed,
            grid_step,
            out,
        } => {
            let m = SpectralModel::from_catalog(&model)?;
            let dist = if n_samples > 0 {
                Some(estimate_max_distribution(
                    &m,
                    &Domain::UnitDisc,
                    n_samples,
                    DEFAULT_N_FREQ,
                    grid_step,
                    seed,
                )?)
            } else {
                None
            };
            let rows = bound_table(&m, &u, dist.as_ref().map(|d| d.sorted.as_slice()), DEFAULT_BIN_WIDTH)?;
            write_bound_csv(&rows, output(out.as_ref())?)?;
        }
        Command::Tail { model, u } => {
            let (m, domain) = model.load()?;
            for &level in &u {
                println!("{level},{}", tail_asymptotic(&m, &domain, level)?);
            }
        }
        Command::Experiment {
            config,
            seed,
            n_samples,
            output_dir,
        } => {
            let mut c = ExperimentConfig::from_file(&config)?;
            if let Some(s) = seed {
                c.seed = s;
            }
            if let Some(n) = n_samples {
                c.n_samples = n;
            }
            if let Some(d) = output_dir {
                c.output_dir = d;
            }
            c.validate()?;
            let report = run_experiment(&c)?;
            for row in &report.rows {
                let verdict = match row.pass {
                    Some(true) => "pass",
                    Some(false) => "FAIL",
                    None => "-",
                };
                eprintln!(
                    "u={} {}: analytic {:.6} mc {} [{verdict}] {}",
                    row.u,
                    row.quantity,
                    row.analytic,
                    row.mc.map_or("-".into(), |v| format!("{v:.6}")),
                    row.tolerance
                );
            }
            eprintln!("wrote {}", c.output_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
