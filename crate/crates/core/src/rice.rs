//! Rice-formula moments: expected level crossings (d = 1), the second
//! factorial moment of crossings (d = 1), and expected numbers of critical
//! points above a level (isotropic d = 2).
//!
//! Conditional laws come from Gaussian regression on the spectral moments;
//! conditional determinant moments are estimated by antithetic Monte Carlo
//! with explicit seeds.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{invalid, Error, Result};
use crate::field::replication_rng;
use crate::quad::LegendreRule;
use crate::spectral::{compute_spectral_moments, covariance_derivatives_1d, SpectralModel, SpectralMoments};
use crate::stats::{phi, upper_tail};

pub const DEFAULT_INNER_MC: usize = 200_000;
pub const MIN_INNER_MC: usize = 1_000;
/// Antithetic pairs drawn per RNG stream.
const PAIRS_PER_BATCH: usize = 4096;
/// Gauss–Legendre nodes for the level integral over `(u, ∞)`.
const LEVEL_NODES: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetKind {
    /// `|det M|·1{M ≺ 0}`
    Delta1,
    /// `|det M|`
    Delta2,
}

impl DetKind {
    /// Applies the functional to the symmetric matrix `[[m11, m12], [m12, m22]]`.
    pub fn apply(self, m11: f64, m22: f64, m12: f64) -> f64 {
        let det = m11 * m22 - m12 * m12;
        match self {
            DetKind::Delta2 => det.abs(),
            DetKind::Delta1 => {
                if m11 < 0.0 && det > 0.0 {
                    det
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Breakdown {
    pub interior: f64,
    pub boundary: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiceEstimate {
    pub value: f64,
    /// Monte Carlo standard error; zero for closed forms.
    pub std_error: f64,
    pub n_inner_mc: usize,
    /// Bound on the deterministic truncation error (excluded ranges).
    pub bias_bound: f64,
    pub breakdown: Option<Breakdown>,
}

impl RiceEstimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            std_error: 0.0,
            n_inner_mc: 0,
            bias_bound: 0.0,
            breakdown: None,
        }
    }
}

/// Law of the Hessian `X″(t)` given `X(t) = u, X′(t) = 0` for an isotropic
/// planar field, with the density of `(X(t), X′(t))` at `(u, 0)`.
///
/// `cov_operator` acts on the entries ordered `(M₁₁, M₂₂, M₁₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionalGaussian {
    pub mean_matrix: [[f64; 2]; 2],
    pub cov_operator: [[f64; 3]; 3],
    pub conditioning_density: f64,
}

impl ConditionalGaussian {
    /// Regression of the Hessian on the field value. With `λ = πJ₃` the
    /// gradient variance, the diagonal entries have conditional mean
    /// `−λu/λ₀`, variance `¾πJ₅ − λ²/λ₀` and covariance `¼πJ₅ − λ²/λ₀`;
    /// the off-diagonal entry is independent with variance `¼πJ₅`.
    pub fn from_moments(moments: &SpectralMoments, u: f64) -> Result<Self> {
        if moments.dim != 2 {
            return Err(invalid("critical-point laws need an isotropic d = 2 model"));
        }
        let lambda = PI * moments.j3()?;
        let j5 = moments.j5()?;
        let lambda0 = moments.lambda0;
        let var = 0.75 * PI * j5 - lambda * lambda / lambda0;
        let cov = 0.25 * PI * j5 - lambda * lambda / lambda0;
        let off = 0.25 * PI * j5;
        if !(var > 0.0) || !(var + cov > 0.0) {
            return Err(Error::Nondegeneracy(format!(
                "conditional Hessian variance {var:e} / sum {:e} not positive",
                var + cov
            )));
        }
        let mean = -lambda * u / lambda0;
        let sd0 = lambda0.sqrt();
        Ok(Self {
            mean_matrix: [[mean, 0.0], [0.0, mean]],
            cov_operator: [[var, cov, 0.0], [cov, var, 0.0], [0.0, 0.0, off]],
            conditioning_density: phi(u / sd0) / sd0 / (2.0 * PI * lambda),
        })
    }

    /// `L` with `L Lᵀ = cov_operator`, from the symmetric eigendecomposition
    /// so that semidefinite (including zero) covariances are accepted.
    pub fn factor(&self) -> Result<Matrix3<f64>> {
        let c = Matrix3::from_fn(|i, j| self.cov_operator[i][j]);
        psd_factor3(c)
    }
}

fn psd_factor3(c: Matrix3<f64>) -> Result<Matrix3<f64>> {
    if (c - c.transpose()).abs().max() > 1e-12 * (1.0 + c.abs().max()) {
        return Err(Error::NotPsd(f64::NAN));
    }
    let eig = SymmetricEigen::new(c);
    let min = eig.eigenvalues.min();
    if min < -1e-12 * (1.0 + c.abs().max()) {
        return Err(Error::NotPsd(min));
    }
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(eig.eigenvectors * Matrix3::from_diagonal(&roots))
}

/// `L` with `L Lᵀ = c` for a symmetric positive semidefinite matrix.
pub fn psd_factor(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let scale = 1.0 + c.abs().max();
    let eig = SymmetricEigen::new(c.clone());
    let min = eig.eigenvalues.min();
    if min < -1e-10 * scale {
        return Err(Error::NotPsd(min));
    }
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

pub fn build_conditional_law(model: &SpectralModel, u: f64) -> Result<ConditionalGaussian> {
    ConditionalGaussian::from_moments(&compute_spectral_moments(model, 5)?, u)
}

/// Runs `per_pair` over `n_pairs` antithetic draws split into fixed-size
/// seeded batches; returns the mean and standard error of the per-pair values.
fn antithetic_mean<const D: usize, F>(n_pairs: usize, seed: u64, per_pair: F) -> (f64, f64)
where
    F: Fn(&[f64; D]) -> f64 + Sync,
{
    let batches = n_pairs.div_ceil(PAIRS_PER_BATCH);
    let partial: Vec<(f64, f64, usize)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = replication_rng(seed, b as u64);
            let len = PAIRS_PER_BATCH.min(n_pairs - b * PAIRS_PER_BATCH);
            let (mut sum, mut sq) = (0.0, 0.0);
            let mut eta = [0.0; D];
            for _ in 0..len {
                for e in eta.iter_mut() {
                    *e = rng.sample(StandardNormal);
                }
                let v = per_pair(&eta);
                sum += v;
                sq += v * v;
            }
            (sum, sq, len)
        })
        .collect();
    let (sum, sq, n) = partial.iter().fold((0.0, 0.0, 0), |(s, q, n), p| (s + p.0, q + p.1, n + p.2));
    let n = n as f64;
    let mean = sum / n;
    let var = ((sq - n * mean * mean) / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

/// `E(δⁱ(M))` for `M` drawn from `cond`, with antithetic pairs `mean ± Lη`.
pub fn conditional_det_moment(cond: &ConditionalGaussian, kind: DetKind, n_mc: usize, seed: u64) -> Result<RiceEstimate> {
    if n_mc < MIN_INNER_MC {
        return Err(invalid(format!("n_mc must be at least {MIN_INNER_MC}, got {n_mc}")));
    }
    let l = cond.factor()?;
    let m = cond.mean_matrix;
    let (mean, se) = antithetic_mean::<3, _>(n_mc / 2, seed, |eta| {
        let z = l * nalgebra::Vector3::from_row_slice(eta);
        let plus = kind.apply(m[0][0] + z[0], m[1][1] + z[1], m[0][1] + z[2]);
        let minus = kind.apply(m[0][0] - z[0], m[1][1] - z[1], m[0][1] - z[2]);
        0.5 * (plus + minus)
    });
    Ok(RiceEstimate {
        value: mean,
        std_error: se,
        n_inner_mc: 2 * (n_mc / 2),
        bias_bound: 0.0,
        breakdown: None,
    })
}

/// `E(M_{u,i}(I)) = σ(I)·∫_u^∞ E(δⁱ(X″) | X = x, X′ = 0) p_{X,X′}(x, 0) dx`
/// for a stationary isotropic planar field.
///
/// The level integral uses `x = u + s²` with Gauss–Legendre nodes in `s`;
/// the inner expectations share one set of antithetic draws across nodes so
/// that the standard error is computed from the per-draw integrals.
pub fn expected_critical(model: &SpectralModel, domain: &Domain, u: f64, kind: DetKind, n_mc: usize, seed: u64) -> Result<RiceEstimate> {
    let moments = compute_spectral_moments(model, 5)?;
    expected_critical_from_moments(&moments, domain, u, kind, n_mc, seed)
}

pub fn expected_critical_from_moments(
    moments: &SpectralMoments,
    domain: &Domain,
    u: f64,
    kind: DetKind,
    n_mc: usize,
    seed: u64,
) -> Result<RiceEstimate> {
    if domain.dim() != 2 {
        return Err(Error::UnsupportedDomain(domain.to_string()));
    }
    if !u.is_finite() {
        return Err(invalid("level must be finite"));
    }
    if n_mc < MIN_INNER_MC {
        return Err(invalid(format!("n_mc must be at least {MIN_INNER_MC}, got {n_mc}")));
    }
    let base = ConditionalGaussian::from_moments(moments, 0.0)?;
    let l = base.factor()?;
    let s_max = 6f64.max((9.0 - u).sqrt());
    let rule = LegendreRule::new(LEVEL_NODES);
    // (weight · density, conditional mean) per node
    let nodes: Vec<(f64, f64)> = rule
        .mapped(0.0, s_max)
        .map(|(s, w)| {
            let x = u + s * s;
            let c = ConditionalGaussian::from_moments(moments, x).expect("validated above");
            (w * 2.0 * s * c.conditioning_density, c.mean_matrix[0][0])
        })
        .collect();
    let (mean, se) = antithetic_mean::<3, _>(n_mc / 2, seed, |eta| {
        let z = l * nalgebra::Vector3::from_row_slice(eta);
        nodes
            .iter()
            .map(|&(w, m)| {
                let plus = kind.apply(m + z[0], m + z[1], z[2]);
                let minus = kind.apply(m - z[0], m - z[1], -z[2]);
                w * 0.5 * (plus + minus)
            })
            .sum::<f64>()
    });
    // E|det M| ≤ (λx/λ₀)² + var + off beyond x₀ = u + s_max²
    let x0 = u + s_max * s_max;
    let lambda = PI * moments.j3()?;
    let sd0 = moments.lambda0.sqrt();
    let a = (lambda / moments.lambda0).powi(2);
    let b = base.cov_operator[0][0] + base.cov_operator[2][2];
    let z0 = x0 / sd0;
    let tail = (a * moments.lambda0 * (z0 * phi(z0) + upper_tail(z0)) + b * upper_tail(z0)) / (2.0 * PI * lambda);
    let area = domain.measure();
    Ok(RiceEstimate {
        value: area * mean,
        std_error: area * se,
        n_inner_mc: 2 * (n_mc / 2),
        bias_bound: area * tail,
        breakdown: None,
    })
}

/// `E N_u([0, T]) = (T/π)·√(λ₂/λ₀)·exp(−u²/(2λ₀))` for a centered
/// stationary line process.
pub fn rice_d1_closed_form(lambda0: f64, lambda2: f64, u: f64, length: f64) -> Result<f64> {
    if !(lambda0 > 0.0 && lambda2 > 0.0) {
        return Err(invalid(format!(
            "spectral moments must be positive: lambda0 = {lambda0}, lambda2 = {lambda2}"
        )));
    }
    if !(length > 0.0) {
        return Err(invalid(format!("interval length must be positive, got {length}")));
    }
    Ok(length / PI * (lambda2 / lambda0).sqrt() * (-u * u / (2.0 * lambda0)).exp())
}

/// Law of `(Z′(t₁), Z′(t₂))` given `Z(t₁) = Z(t₂) = u`, with the density of
/// `(Z(t₁), Z(t₂))` at `(u, u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairLaw {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
    pub density: f64,
}

/// Conditions a centered Gaussian vector with covariance `cov` on its
/// first `k` coordinates equal to `values`; returns the conditional mean and
/// covariance of the rest and the marginal density of the observed block.
pub fn condition_gaussian(cov: &DMatrix<f64>, values: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>, f64)> {
    let k = values.len();
    let n = cov.nrows();
    let a = cov.view((0, 0), (k, k)).into_owned();
    let c = cov.view((k, 0), (n - k, k)).into_owned();
    let b = cov.view((k, k), (n - k, n - k)).into_owned();
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Nondegeneracy("observed block is singular".into()))?;
    let obs = DVector::from_column_slice(values);
    let solved = chol.solve(&obs);
    let mean = &c * &solved;
    let cond = &b - &c * chol.solve(&c.transpose());
    let det = chol.l().diagonal().product().powi(2);
    let quad = obs.dot(&solved);
    let density = (-0.5 * quad).exp() / ((2.0 * PI).powi(k as i32) * det).sqrt();
    Ok((mean, cond, density))
}

impl PairLaw {
    /// Builds the law from `λ₀, λ₂` and `(Γ, Γ′, Γ″)` at `t₂ − t₁`.
    pub fn from_covariance(lambda0: f64, lambda2: f64, r: (f64, f64, f64), u: f64) -> Result<Self> {
        let (g, g1, g2) = r;
        if lambda0 * lambda0 - g * g < 1e-12 * lambda0 * lambda0 {
            return Err(Error::Nondegeneracy(format!("Gamma = {g} too close to ±Gamma(0)")));
        }
        // order (Z(t1), Z(t2), Z'(t1), Z'(t2)), δ = t2 − t1
        let cov = DMatrix::from_row_slice(
            4,
            4,
            &[
                lambda0, g, 0.0, g1, //
                g, lambda0, -g1, 0.0, //
                0.0, -g1, lambda2, -g2, //
                g1, 0.0, -g2, lambda2,
            ],
        );
        let (mean, cond, density) = condition_gaussian(&cov, &[u, u])?;
        let off = 0.5 * (cond[(0, 1)] + cond[(1, 0)]);
        Ok(Self {
            mean: [mean[0], mean[1]],
            cov: [[cond[(0, 0)], off], [off, cond[(1, 1)]]],
            density,
        })
    }

    pub fn new(model: &SpectralModel, lambda0: f64, lambda2: f64, t1: f64, t2: f64, u: f64) -> Result<Self> {
        let r = covariance_derivatives_1d(model, t2 - t1)?;
        Self::from_covariance(lambda0, lambda2, r, u)
    }

    /// Lower-triangular `L` with `L Lᵀ = cov`, clamping rounding negatives.
    pub fn factor(&self) -> [[f64; 2]; 2] {
        let a = self.cov[0][0].max(0.0);
        let l11 = a.sqrt();
        let l21 = if l11 > 0.0 { self.cov[1][0] / l11 } else { 0.0 };
        let l22 = (self.cov[1][1] - l21 * l21).max(0.0).sqrt();
        [[l11, 0.0], [l21, l22]]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorialMoment {
    pub estimate: RiceEstimate,
    /// Quadrature nodes skipped because the pair law was degenerate.
    pub skipped_nodes: usize,
    pub diagonal_width: f64,
}

/// `E[N_u(N_u − 1)]` on `[0, T]` for a d = 1 model:
/// `∫∫ E(|Z′(t₁)Z′(t₂)| | Z(t₁) = Z(t₂) = u) p_{Z(t₁),Z(t₂)}(u, u) dt₁dt₂`.
///
/// The square is split along the diagonal; the lower triangle minus the band
/// `t₁ − t₂ < ε = 10⁻³T` is mapped to a tensor Gauss–Legendre grid and the
/// result doubled by exchangeability. The inner expectation is estimated
/// with antithetic draws shared by all nodes. The omitted band is bounded
/// by `2Tε·g(ε)` where `g` is the integrand at lag `ε`.
pub fn factorial_moment_2_d1(model: &SpectralModel, length: f64, u: f64, n_quad: usize, n_mc: usize, seed: u64) -> Result<FactorialMoment> {
    if model.dim != 1 {
        return Err(invalid("factorial moments are implemented for d = 1 models"));
    }
    if n_quad < 32 {
        return Err(invalid(format!("n_quad must be at least 32, got {n_quad}")));
    }
    if n_mc < MIN_INNER_MC {
        return Err(invalid(format!("n_mc must be at least {MIN_INNER_MC}, got {n_mc}")));
    }
    if !(length > 0.0) {
        return Err(invalid("interval length must be positive"));
    }
    let moments = compute_spectral_moments(model, 4)?;
    let (lambda0, lambda2) = (moments.lambda0, moments.lambda2);
    let eps = 1e-3 * length;
    let rule = LegendreRule::new(n_quad);
    let mut nodes: Vec<(f64, PairLaw)> = Vec::with_capacity(n_quad * n_quad + 1);
    let mut skipped = 0;
    for (t1, w1) in rule.mapped(eps, length) {
        for (s, w2) in rule.mapped(0.0, 1.0) {
            let t2 = s * (t1 - eps);
            match PairLaw::new(model, lambda0, lambda2, t1, t2, u) {
                Ok(law) => nodes.push((2.0 * w1 * w2 * (t1 - eps), law)),
                Err(Error::Nondegeneracy(_)) => skipped += 1,
                Err(e) => return Err(e),
            }
        }
    }
    let edge = PairLaw::new(model, lambda0, lambda2, eps, 0.0, u)?;
    nodes.push((0.0, edge));
    // (weight, mean, factor, density)
    type Node = (f64, [f64; 2], [[f64; 2]; 2], f64);
    let prepared: Vec<Node> = nodes.iter().map(|(w, law)| (*w, law.mean, law.factor(), law.density)).collect();
    let edge_index = prepared.len() - 1;
    let pair_value = |eta: &[f64; 2], node: &Node| {
        let (_, m, l, p) = node;
        let z1 = l[0][0] * eta[0];
        let z2 = l[1][0] * eta[0] + l[1][1] * eta[1];
        let plus = ((m[0] + z1) * (m[1] + z2)).abs();
        let minus = ((m[0] - z1) * (m[1] - z2)).abs();
        p * 0.5 * (plus + minus)
    };
    let (mean, se) = antithetic_mean::<2, _>(n_mc / 2, seed, |eta| {
        prepared[..edge_index]
            .iter()
            .map(|node| node.0 * pair_value(eta, node))
            .sum::<f64>()
    });
    let (edge_value, _) = antithetic_mean::<2, _>(n_mc / 2, seed, |eta| pair_value(eta, &prepared[edge_index]));
    Ok(FactorialMoment {
        estimate: RiceEstimate {
            value: mean,
            std_error: se,
            n_inner_mc: 2 * (n_mc / 2),
            bias_bound: 2.0 * length * eps * edge_value,
            breakdown: None,
        },
        skipped_nodes: skipped,
        diagonal_width: eps,
    })
}

/// One machine-readable result line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiceRecord {
    pub op: String,
    pub model: String,
    pub domain: String,
    pub u: f64,
    pub value: f64,
    pub std_error: f64,
    pub n_mc: usize,
    pub seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_moments() -> SpectralMoments {
        compute_spectral_moments(&SpectralModel::gaussian_2d(), 5).unwrap()
    }

    #[test]
    fn conditional_law_of_gaussian_model() {
        let c = ConditionalGaussian::from_moments(&gaussian_moments(), 1.0).unwrap();
        assert!((c.mean_matrix[0][0] + 1.0).abs() < 1e-9);
        assert!((c.mean_matrix[1][1] + 1.0).abs() < 1e-9);
        assert_eq!(c.mean_matrix[0][1], 0.0);
        assert!((c.cov_operator[0][0] - 2.0).abs() < 1e-9);
        assert!(c.cov_operator[0][1].abs() < 1e-9);
        assert!((c.cov_operator[2][2] - 1.0).abs() < 1e-9);
        assert!((c.conditioning_density - phi(1.0) / (2.0 * PI)).abs() < 1e-12);
        let z = ConditionalGaussian::from_moments(&gaussian_moments(), 0.0).unwrap();
        assert_eq!(z.mean_matrix, [[0.0, 0.0], [0.0, 0.0]]);
        let eig = SymmetricEigen::new(Matrix3::from_fn(|i, j| c.cov_operator[i][j])).eigenvalues;
        assert!(eig.min() > 0.0);
    }

    #[test]
    fn deterministic_negative_identity() {
        let cond = ConditionalGaussian {
            mean_matrix: [[-1.0, 0.0], [0.0, -1.0]],
            cov_operator: [[0.0; 3]; 3],
            conditioning_density: 1.0,
        };
        for kind in [DetKind::Delta1, DetKind::Delta2] {
            let e = conditional_det_moment(&cond, kind, 1000, 1).unwrap();
            assert_eq!(e.value, 1.0);
            assert_eq!(e.std_error, 0.0);
        }
    }

    #[test]
    fn indefinite_covariance_is_rejected() {
        let cond = ConditionalGaussian {
            mean_matrix: [[0.0; 2]; 2],
            cov_operator: [[1.0, 2.0, 0.0], [2.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            conditioning_density: 1.0,
        };
        assert!(matches!(
            conditional_det_moment(&cond, DetKind::Delta2, 1000, 1),
            Err(Error::NotPsd(_))
        ));
        assert!(conditional_det_moment(&cond, DetKind::Delta2, 10, 1).is_err());
    }

    #[test]
    fn rice_closed_form_values() {
        let v = rice_d1_closed_form(1.0, 1.0, 1.0, 10.0).unwrap();
        assert!((v - 10.0 / PI * (-0.5f64).exp()).abs() < 1e-14);
        assert!((v - 1.930_65).abs() < 5e-6);
        assert_eq!(rice_d1_closed_form(1.0, 1.0, 1.0, 20.0).unwrap(), 2.0 * v);
        assert!(rice_d1_closed_form(1.0, 1.0, 40.0, 10.0).unwrap() < 1e-300);
        assert!(rice_d1_closed_form(0.0, 1.0, 1.0, 10.0).is_err());
    }

    #[test]
    fn pair_law_is_exchangeable() {
        let m = SpectralModel::gaussian_1d();
        for (t1, t2) in [(0.3, 2.1), (5.0, 4.2), (1.0, 9.0)] {
            let a = PairLaw::new(&m, 1.0, 1.0, t1, t2, 1.0).unwrap();
            let b = PairLaw::new(&m, 1.0, 1.0, t2, t1, 1.0).unwrap();
            assert!((a.density - b.density).abs() < 1e-14);
            assert!((a.mean[0] - b.mean[1]).abs() < 1e-12);
            assert!((a.mean[1] - b.mean[0]).abs() < 1e-12);
            assert!((a.cov[0][0] - b.cov[1][1]).abs() < 1e-12);
            assert!((a.cov[0][1] - b.cov[1][0]).abs() < 1e-12);
        }
    }

    #[test]
    fn high_level_moments_vanish() {
        let e = expected_critical_from_moments(&gaussian_moments(), &Domain::UnitDisc, 8.5, DetKind::Delta2, 2000, 3).unwrap();
        assert!(e.value < 1e-12, "{}", e.value);
        let f = factorial_moment_2_d1(&SpectralModel::gaussian_1d(), 10.0, 5.5, 32, 2000, 3).unwrap();
        assert!(rice_d1_closed_form(1.0, 1.0, 5.5, 10.0).unwrap() < 1e-5);
        assert!(f.estimate.value < 1e-6, "{}", f.estimate.value);
    }
}
