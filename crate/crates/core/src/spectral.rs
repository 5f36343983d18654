//! Stationary (d = 1) and stationary-isotropic (d = 2) spectral models.
//!
//! A d = 2 model is described by its radial spectral density `f(ρ)`, so the
//! spectral measure is `f(|ω|) dω` and `Γ(τ) = ∫ f(|ω|) cos⟨ω, τ⟩ dω`. A d = 1
//! model is described by a symmetric density on the line, stored on
//! `[0, ∞)`.

use std::cell::Cell;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::quad;

/// Absolute tolerance used for every spectral moment integral.
pub const MOMENT_TOLERANCE: f64 = 1e-11;
/// Tail mass of `|ω|` left beyond the effective spectral radius.
pub const TRUNCATED_MASS: f64 = 1e-12;
/// Smallest admissible eigenvalue of the gradient covariance.
pub const LAMBDA_FLOOR: f64 = 1e-8;
/// Allowed deviation of `Γ(0)` from one.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum SpectralDensity {
    /// Spectral density of `Γ(τ) = exp(−|τ|²/(2ℓ²))`.
    Gaussian {
        length_scale: f64,
    },
    /// Tabulated `(ρ, f)` pairs, linearly interpolated in `log f`.
    Tabulated {
        rho: Vec<f64>,
        log_f: Vec<f64>,
    },
    Custom(DensityFn),
}

impl fmt::Debug for SpectralDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Gaussian { length_scale } => f.debug_struct("Gaussian").field("length_scale", length_scale).finish(),
            Self::Tabulated { rho, .. } => write!(f, "Tabulated({} points)", rho.len()),
            Self::Custom(_) => f.write_str("Custom"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectralModel {
    pub dim: usize,
    pub name: String,
    /// Documents how fast `f` decays; not used numerically.
    pub decay_exponent_hint: f64,
    pub density: SpectralDensity,
    radius: OnceLock<std::result::Result<f64, String>>,
}

impl SpectralModel {
    pub fn new(dim: usize, name: impl Into<String>, density: SpectralDensity) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(invalid(format!("dimension must be 1 or 2, got {dim}")));
        }
        Ok(Self {
            dim,
            name: name.into(),
            decay_exponent_hint: f64::INFINITY,
            density,
            radius: OnceLock::new(),
        })
    }

    /// Isotropic planar field with `Γ(τ) = exp(−|τ|²/2)`, radial density `(2π)⁻¹e^{−ρ²/2}`.
    pub fn gaussian_2d() -> Self {
        Self::new(2, "gaussian", SpectralDensity::Gaussian { length_scale: 1.0 }).expect("valid dimension")
    }

    /// Line process with `Γ(τ) = exp(−τ²/2)`.
    pub fn gaussian_1d() -> Self {
        Self::new(1, "gaussian-1d", SpectralDensity::Gaussian { length_scale: 1.0 }).expect("valid dimension")
    }

    pub fn custom(dim: usize, name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        Self::new(dim, name, SpectralDensity::Custom(Arc::new(f)))
    }

    /// Looks a model up by catalog name, or loads `file:<path>` /
    /// `file1d:<path>` as a tabulated d = 2 / d = 1 density.
    pub fn from_catalog(name: &str) -> Result<Self> {
        match name {
            "gaussian" | "gaussian-2d" => Ok(Self::gaussian_2d()),
            "gaussian-1d" => Ok(Self::gaussian_1d()),
            _ => {
                if let Some(path) = name.strip_prefix("file:") {
                    Self::from_csv(2, path)
                } else if let Some(path) = name.strip_prefix("file1d:") {
                    Self::from_csv(1, path)
                } else {
                    Err(invalid(format!(
                        "unknown model '{name}' (expected gaussian, gaussian-1d, file:<csv> or file1d:<csv>)"
                    )))
                }
            }
        }
    }

    /// Reads `(ρ, f)` rows from a CSV file. A header row is optional.
    pub fn from_csv(dim: usize, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)?;
        let mut rows = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() < 2 {
                return Err(invalid(format!("line {}: expected two columns", line + 1)));
            }
            let (Ok(rho), Ok(f)) = (record[0].parse::<f64>(), record[1].parse::<f64>()) else {
                if line == 0 {
                    continue;
                }
                return Err(invalid(format!("line {}: non-numeric entry", line + 1)));
            };
            rows.push((rho, f));
        }
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "tabulated".into());
        Self::tabulated(dim, name, &rows)
    }

    pub fn tabulated(dim: usize, name: impl Into<String>, rows: &[(f64, f64)]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(invalid("tabulated density needs at least two points"));
        }
        let mut rows = rows.to_vec();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in rows.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(invalid(format!("duplicate abscissa rho = {}", w[0].0)));
            }
        }
        for &(rho, f) in &rows {
            if rho < 0.0 || !f.is_finite() {
                return Err(invalid(format!("bad table row ({rho}, {f})")));
            }
            if f <= 0.0 {
                return Err(Error::NegativeDensity { rho, value: f });
            }
        }
        let (rho, log_f) = rows.iter().map(|&(r, f)| (r, f.ln())).unzip();
        Self::new(dim, name, SpectralDensity::Tabulated { rho, log_f })
    }

    /// Spectral density at radius (d = 2) or frequency (d = 1) `rho ≥ 0`.
    pub fn density(&self, rho: f64) -> f64 {
        match &self.density {
            SpectralDensity::Gaussian { length_scale } => {
                let l = *length_scale;
                let e = (-0.5 * (rho * l).powi(2)).exp();
                match self.dim {
                    1 => l * crate::stats::FRAC_1_SQRT_2PI * e,
                    _ => l * l / (2.0 * PI) * e,
                }
            }
            SpectralDensity::Tabulated { rho: xs, log_f } => {
                let n = xs.len();
                if rho <= xs[0] {
                    return log_f[0].exp();
                }
                let i = match xs.partition_point(|&x| x <= rho) {
                    i if i >= n => n - 2,
                    i => i - 1,
                };
                let t = (rho - xs[i]) / (xs[i + 1] - xs[i]);
                (log_f[i] + t * (log_f[i + 1] - log_f[i])).exp()
            }
            SpectralDensity::Custom(f) => f(rho),
        }
    }

    /// Density of `|ω|` under the spectral probability measure.
    pub fn radial_law(&self, rho: f64) -> f64 {
        match self.dim {
            1 => 2.0 * self.density(rho),
            _ => 2.0 * PI * rho * self.density(rho),
        }
    }

    /// Radius beyond which `|ω|` carries less than [`TRUNCATED_MASS`].
    pub fn effective_radius(&self) -> Result<f64> {
        self.radius
            .get_or_init(|| {
                let mut r: f64 = 0.5;
                for _ in 0..40 {
                    r *= 2.0;
                    let tail = quad::semi_infinite(|x| self.radial_law(x), r, 1e-15).map_err(|e| e.to_string())?;
                    if tail.value.abs() < TRUNCATED_MASS {
                        return Ok(r);
                    }
                }
                Err(format!("tail mass of '{}' not below {TRUNCATED_MASS:e}", self.name))
            })
            .clone()
            .map_err(Error::DivergentIntegral)
    }
}

/// Spectral moments and the gradient covariance `Λ = Var(X′(t))`.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralMoments {
    pub dim: usize,
    /// `j[k-1] = J_k = ∫₀^∞ ρ^k f(ρ) dρ` (d = 2 only).
    pub j: Vec<f64>,
    /// Directional moments `E ω₁^k` of the spectral measure for k = 0, 2, 4.
    pub lambda0: f64,
    pub lambda2: f64,
    pub lambda4: f64,
    /// `Var(X′(t))`, d × d.
    pub gradient_cov: DMatrix<f64>,
    pub tolerance: f64,
}

impl SpectralMoments {
    pub fn j(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.j.get(i).copied())
    }

    pub fn j3(&self) -> Result<f64> {
        self.j(3).ok_or_else(|| invalid("J_3 not computed"))
    }

    pub fn j5(&self) -> Result<f64> {
        self.j(5).ok_or_else(|| invalid("J_5 not computed"))
    }

    pub fn gradient_cov_det(&self) -> f64 {
        self.gradient_cov.determinant()
    }

    pub fn min_gradient_eigenvalue(&self) -> f64 {
        self.gradient_cov
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

fn checked_moment(model: &SpectralModel, power: i32) -> Result<f64> {
    let negative = Cell::new(None);
    let integral = quad::semi_infinite(
        |rho| {
            let f = model.density(rho);
            if f < 0.0 && negative.get().is_none() {
                negative.set(Some((rho, f)));
            }
            rho.powi(power) * f
        },
        0.0,
        MOMENT_TOLERANCE,
    );
    if let Some((rho, value)) = negative.get() {
        return Err(Error::NegativeDensity { rho, value });
    }
    Ok(integral?.value)
}

/// Computes `J_1..J_k_max` (d = 2) or `λ₀, λ₂, λ₄` (d = 1) and fills `Λ`.
pub fn compute_spectral_moments(model: &SpectralModel, k_max: usize) -> Result<SpectralMoments> {
    if k_max > 5 {
        return Err(invalid(format!("k_max must be at most 5, got {k_max}")));
    }
    let moments = match model.dim {
        1 => {
            let lambda0 = 2.0 * checked_moment(model, 0)?;
            let lambda2 = 2.0 * checked_moment(model, 2)?;
            let lambda4 = 2.0 * checked_moment(model, 4)?;
            SpectralMoments {
                dim: 1,
                j: Vec::new(),
                lambda0,
                lambda2,
                lambda4,
                gradient_cov: DMatrix::from_element(1, 1, lambda2),
                tolerance: MOMENT_TOLERANCE,
            }
        }
        _ => {
            if k_max < 3 {
                return Err(invalid("d = 2 needs k_max >= 3 for the gradient covariance"));
            }
            let j = (1..=k_max as i32).map(|k| checked_moment(model, k)).collect::<Result<Vec<_>>>()?;
            let lambda2 = PI * j[2];
            SpectralMoments {
                dim: 2,
                lambda0: 2.0 * PI * j[0],
                lambda2,
                lambda4: j.get(4).map_or(f64::NAN, |j5| 0.75 * PI * j5),
                gradient_cov: DMatrix::identity(2, 2) * lambda2,
                j,
                tolerance: MOMENT_TOLERANCE,
            }
        }
    };
    let min_eig = moments.min_gradient_eigenvalue();
    if !(min_eig > LAMBDA_FLOOR) {
        return Err(Error::Nondegeneracy(format!(
            "gradient covariance eigenvalue {min_eig:e} below floor {LAMBDA_FLOOR:e}"
        )));
    }
    Ok(moments)
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub model: String,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Checks the sufficient conditions for the field to be nondegenerate at
/// every derivative order: positivity of `f`, faster-than-polynomial decay
/// (empirically, up to `ρ^{-8}`) and `Γ(0) = 1`.
pub fn validate_model(model: &SpectralModel) -> ValidationReport {
    let mut checks = Vec::new();
    let radius = model.effective_radius();

    let mass = quad::semi_infinite(|r| model.radial_law(r), 0.0, 1e-13);
    checks.push(match &mass {
        Ok(m) => Check {
            name: "normalization".into(),
            passed: (m.value - 1.0).abs() <= NORMALIZATION_TOLERANCE,
            detail: format!("Gamma(0) = {:.12}", m.value),
        },
        Err(e) => Check {
            name: "normalization".into(),
            passed: false,
            detail: e.to_string(),
        },
    });

    let r = match radius {
        Ok(r) => r,
        Err(e) => {
            for name in ["positivity", "decay"] {
                checks.push(Check {
                    name: name.into(),
                    passed: false,
                    detail: e.to_string(),
                });
            }
            return ValidationReport {
                model: model.name.clone(),
                checks,
            };
        }
    };

    // uniform grid with a power-of-two step plus a log-spaced grid down to 1e-3·R
    let mut grid: Vec<f64> = (0..=1024).map(|i| r * i as f64 / 512.0).collect();
    grid.extend((0..=256).map(|i| r * 10f64.powf(-3.0 + 3.0 * i as f64 / 256.0)));
    let bad = grid
        .iter()
        .map(|&x| (x, model.density(x)))
        .find(|&(_, f)| !(f > 0.0) || !f.is_finite());
    checks.push(Check {
        name: "positivity".into(),
        passed: bad.is_none(),
        detail: match bad {
            Some((x, f)) => format!("f({x}) = {f}"),
            None => format!("f > 0 on {} points up to rho = {}", grid.len(), 2.0 * r),
        },
    });

    let outer: Vec<f64> = (0..=32).map(|i| r * 2f64.powf(i as f64 / 16.0)).collect();
    let mut worst = None;
    for alpha in 1..=8 {
        let g = |x: f64| x.powi(alpha) * model.density(x);
        let start = g(outer[0]);
        if outer.iter().any(|&x| g(x) > start * (1.0 + 1e-9)) {
            worst = Some(alpha);
            break;
        }
    }
    checks.push(Check {
        name: "decay".into(),
        passed: worst.is_none(),
        detail: match worst {
            Some(alpha) => format!("rho^{alpha} f(rho) grows on [{r}, {}]", 4.0 * r),
            None => format!("rho^alpha f(rho) nonincreasing on [{r}, {}] for alpha <= 8", 4.0 * r),
        },
    });

    ValidationReport {
        model: model.name.clone(),
        checks,
    }
}

/// `J₀(x) = π⁻¹∫₀^π cos(x sin θ) dθ` by the trapezoid rule, which converges
/// geometrically for this periodic analytic integrand.
fn bessel_j0(x: f64) -> f64 {
    let n = (x.abs().ceil() as usize + 40).max(48);
    let h = PI / n as f64;
    let mut sum = 0.5 * (1.0 + 1.0);
    for i in 1..n {
        sum += (x * (i as f64 * h).sin()).cos();
    }
    sum / n as f64
}

/// `Γ(τ)` by radial (d = 2, Hankel) or cosine (d = 1) quadrature.
pub fn covariance_from_spectrum(model: &SpectralModel, tau: &[f64]) -> Result<f64> {
    let lag = tau.iter().map(|t| t * t).sum::<f64>().sqrt();
    let r = model.effective_radius()?;
    let result = match model.dim {
        1 => quad::adaptive(|w| 2.0 * model.density(w) * (w * lag).cos(), 0.0, r, 1e-12, 0.0, 4000)?,
        _ => quad::adaptive(|rho| model.radial_law(rho) * bessel_j0(rho * lag), 0.0, r, 1e-12, 0.0, 4000)?,
    };
    Ok(result.value)
}

/// `(Γ(τ), Γ′(τ), Γ″(τ))` for a d = 1 model.
pub fn covariance_derivatives_1d(model: &SpectralModel, tau: f64) -> Result<(f64, f64, f64)> {
    if model.dim != 1 {
        return Err(invalid("covariance derivatives are defined for d = 1 models"));
    }
    let r = model.effective_radius()?;
    let integrate = |g: &dyn Fn(f64) -> f64| quad::adaptive(|w| 2.0 * model.density(w) * g(w), 0.0, r, 1e-12, 0.0, 4000).map(|q| q.value);
    Ok((
        integrate(&|w| (w * tau).cos())?,
        integrate(&|w| -w * (w * tau).sin())?,
        integrate(&|w| -w * w * (w * tau).cos())?,
    ))
}
