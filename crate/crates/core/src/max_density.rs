//! Analytic objects for the distribution of `M_I = sup_I X`: the density
//! bound for the unit-disc example, the Ylvisaker bound and the high-level
//! asymptotic equivalent of the density.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::domain::Domain;
use crate::error::{invalid, Error, Result};
use crate::field::replication_rng;
use crate::quad::LegendreRule;
use crate::spectral::{compute_spectral_moments, SpectralModel, SpectralMoments};
use crate::stats::{big_phi, inverse_mills, phi, Accumulator, MeanEstimate};

pub const MIN_DISC_QUAD: usize = 64;
/// Upper limit of the `x` integral in `I₁`; `x φ(x)` is below 1e-20 there.
const I1_CUTOFF: f64 = 10.0;

/// Constants of the isotropic unit-disc example, from the radial moments
/// `J₃, J₅` of the spectral density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscExampleConstants {
    pub j3: f64,
    pub j5: f64,
    /// `(πJ₅/4)^{1/2}`
    pub c: f64,
    /// `πJ₃ / (3π/4·J₅ − (πJ₃)²)^{1/2}`
    pub b: f64,
    /// `(2πJ₅ − 4π²J₃²)^{1/2}`
    pub alpha: f64,
}

impl DiscExampleConstants {
    pub fn new(j3: f64, j5: f64) -> Result<Self> {
        if !(j3 > 0.0 && j5 > 0.0) {
            return Err(invalid(format!("J3 and J5 must be positive, got {j3}, {j5}")));
        }
        let lambda = PI * j3;
        let var = 0.75 * PI * j5 - lambda * lambda;
        let alpha2 = 2.0 * PI * j5 - 4.0 * lambda * lambda;
        if !(var > 0.0) || !(alpha2 > 0.0) {
            return Err(Error::Nondegeneracy(format!(
                "disc example needs 3π/4·J5 > (πJ3)² and 2πJ5 > 4π²J3² (J3 = {j3}, J5 = {j5})"
            )));
        }
        Ok(Self {
            j3,
            j5,
            c: (0.25 * PI * j5).sqrt(),
            b: lambda / var.sqrt(),
            alpha: alpha2.sqrt(),
        })
    }

    pub fn from_moments(moments: &SpectralMoments) -> Result<Self> {
        Self::new(moments.j3()?, moments.j5()?)
    }

    pub fn from_model(model: &SpectralModel) -> Result<Self> {
        Self::from_moments(&compute_spectral_moments(model, 5)?)
    }

    /// `a(u) = 2πJ₃u`
    pub fn a(&self, u: f64) -> f64 {
        2.0 * PI * self.j3 * u
    }

    fn conditional_sd(&self) -> f64 {
        (0.75 * PI * self.j5 - (PI * self.j3).powi(2)).sqrt()
    }
}

/// Boundary term: `√(2/J₃)·φ(u)·[s·φ(bu) + πJ₃u·Φ(bu)]` with
/// `s = (3π/4·J₅ − (πJ₃)²)^{1/2}`.
pub fn disc_i2(consts: &DiscExampleConstants, u: f64) -> f64 {
    let bu = consts.b * u;
    (2.0 / consts.j3).sqrt() * phi(u) * (consts.conditional_sd() * phi(bu) + PI * consts.j3 * u * big_phi(bu))
}

/// Interior term as a one-dimensional integral:
///
/// `I₁ = √(2π)/(8πJ₃)·φ(u)·∫₀^∞ [(α² + a² − 4c²x²)Φ(w) + (2aα − α²w)φ(w)]·x φ(x) dx`,
/// `w = (a − 2cx)/α`, truncated at `x = 10` and integrated by Gauss–Legendre.
pub fn disc_i1(consts: &DiscExampleConstants, u: f64, n_quad: usize) -> Result<f64> {
    if n_quad < MIN_DISC_QUAD {
        return Err(invalid(format!("n_quad must be at least {MIN_DISC_QUAD}, got {n_quad}")));
    }
    let a = consts.a(u);
    let (alpha, c) = (consts.alpha, consts.c);
    let integrand = |x: f64| {
        let w = (a - 2.0 * c * x) / alpha;
        let bracket = (alpha * alpha + a * a - 4.0 * c * c * x * x) * big_phi(w) + (2.0 * a * alpha - alpha * alpha * w) * phi(w);
        bracket * x * phi(x)
    };
    let rule = LegendreRule::new(n_quad);
    let integral = rule.integrate(0.0, I1_CUTOFF, integrand);
    let value = (2.0 * PI).sqrt() / (8.0 * PI * consts.j3) * phi(u) * integral;
    if !value.is_finite() {
        return Err(Error::QuadratureNonConvergence {
            lower: 0.0,
            upper: I1_CUTOFF,
            tolerance: 0.0,
            estimate: value,
        });
    }
    Ok(value)
}

/// Monte Carlo of the expectation form of `I₁`:
/// `(8πJ₃)⁻¹ φ(u) E[((αη₁ − a)² − πJ₅(η₂² + η₃²))·1{αη₁ < a}·1{· > 0}]`.
pub fn disc_i1_monte_carlo(consts: &DiscExampleConstants, u: f64, n: usize, seed: u64) -> Result<MeanEstimate> {
    if n < 2 {
        return Err(invalid("need at least two draws"));
    }
    let a = consts.a(u);
    let k = PI * consts.j5;
    let scale = phi(u) / (8.0 * PI * consts.j3);
    let mut rng = replication_rng(seed, 0);
    let mut acc = Accumulator::new();
    for _ in 0..n {
        let e1: f64 = rng.sample(StandardNormal);
        let e2: f64 = rng.sample(StandardNormal);
        let e3: f64 = rng.sample(StandardNormal);
        let s = consts.alpha * e1 - a;
        let q = s * s - k * (e2 * e2 + e3 * e3);
        acc.push(if s < 0.0 && q > 0.0 { scale * q } else { 0.0 });
    }
    Ok(acc.estimate())
}

/// `I₁(u) + I₂(u)`, an upper bound for the density of the maximum on the
/// unit disc.
pub fn density_bound_disc(consts: &DiscExampleConstants, u: f64) -> Result<f64> {
    Ok(disc_i1(consts, u, 2 * MIN_DISC_QUAD)? + disc_i2(consts, u))
}

/// `ψ(u) = e^{−u²/2} / ∫_u^∞ e^{−v²/2} dv`.
pub fn ylvisaker_bound(u: f64) -> f64 {
    inverse_mills(u)
}

/// `u^d (2π)^{−(d+1)/2} e^{−u²/2} |I| (det Λ)^{1/2}` for a stationary model.
pub fn tail_asymptotic(model: &SpectralModel, domain: &Domain, u: f64) -> Result<f64> {
    let moments = compute_spectral_moments(model, if model.dim == 2 { 5 } else { 4 })?;
    tail_asymptotic_from_moments(&moments, domain, u)
}

pub fn tail_asymptotic_from_moments(moments: &SpectralMoments, domain: &Domain, u: f64) -> Result<f64> {
    if domain.dim() != moments.dim {
        return Err(Error::UnsupportedDomain(format!("{domain} for a d = {} model", moments.dim)));
    }
    let d = moments.dim as i32;
    Ok(u.powi(d) * (2.0 * PI).powf(-0.5 * (d + 1) as f64) * (-0.5 * u * u).exp() * domain.measure() * moments.gradient_cov_det().sqrt())
}

/// Histogram density of a sample at a bin centre, with its binomial SE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityBin {
    pub center: f64,
    pub width: f64,
    pub density: f64,
    pub std_error: f64,
}

/// Difference quotient `(F̂(c + w/2) − F̂(c − w/2)) / w` of the empirical CDF
/// of a sorted sample.
pub fn binned_density(sorted: &[f64], center: f64, width: f64) -> DensityBin {
    let n = sorted.len() as f64;
    let lo = sorted.partition_point(|&x| x <= center - 0.5 * width);
    let hi = sorted.partition_point(|&x| x <= center + 0.5 * width);
    let p = (hi - lo) as f64 / n;
    DensityBin {
        center,
        width,
        density: p / width,
        std_error: (p * (1.0 - p) / n).sqrt() / width,
    }
}

/// One plot-ready row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundRow {
    pub u: f64,
    pub i1: f64,
    pub i2: f64,
    pub bound: f64,
    pub asymptotic: f64,
    pub psi: f64,
    pub empirical_density: Option<f64>,
    pub empirical_se: Option<f64>,
}

/// Evaluates the analytic columns at each `u`; empirical columns are filled
/// from `sorted_max` (a sorted sample of the disc maximum) when given.
pub fn bound_table(model: &SpectralModel, u_grid: &[f64], sorted_max: Option<&[f64]>, bin_width: f64) -> Result<Vec<BoundRow>> {
    let moments = compute_spectral_moments(model, 5)?;
    let consts = DiscExampleConstants::from_moments(&moments)?;
    u_grid
        .iter()
        .map(|&u| {
            let i1 = disc_i1(&consts, u, 2 * MIN_DISC_QUAD)?;
            let i2 = disc_i2(&consts, u);
            let bin = sorted_max.map(|s| binned_density(s, u, bin_width));
            Ok(BoundRow {
                u,
                i1,
                i2,
                bound: i1 + i2,
                asymptotic: tail_asymptotic_from_moments(&moments, &Domain::UnitDisc, u)?,
                psi: ylvisaker_bound(u),
                empirical_density: bin.map(|b| b.density),
                empirical_se: bin.map(|b| b.std_error),
            })
        })
        .collect()
}

pub fn write_bound_csv<W: Write>(rows: &[BoundRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
