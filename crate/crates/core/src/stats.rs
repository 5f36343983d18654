//! Standard normal helpers and Monte Carlo summary statistics.

use libm::erfc;
use serde::{Deserialize, Serialize};

pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density φ.
pub fn phi(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal distribution function Φ.
pub fn big_phi(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper tail 1 − Φ(x), accurate in the far right tail.
pub fn upper_tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Inverse Mills ratio φ(x)/(1 − Φ(x)).
///
/// Switches to a continued fraction once `1 − Φ` would underflow.
pub fn inverse_mills(x: f64) -> f64 {
    if x < 8.0 {
        return phi(x) / upper_tail(x);
    }
    // (1 − Φ(x))/φ(x) = 1/(x + 1/(x + 2/(x + 3/(x + ...))))
    let mut tail = 0.0;
    for k in (1..=60).rev() {
        tail = k as f64 / (x + tail);
    }
    x + tail
}

/// Welford running mean/variance.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; `None` with fewer than two observations.
    pub fn variance(&self) -> Option<f64> {
        (self.n > 1).then(|| self.m2 / (self.n - 1) as f64)
    }

    pub fn std_error(&self) -> Option<f64> {
        self.variance().map(|v| (v / self.n as f64).sqrt())
    }

    pub fn estimate(&self) -> MeanEstimate {
        MeanEstimate {
            mean: self.mean,
            std_error: self.std_error(),
            n: self.n,
        }
    }
}

impl FromIterator<f64> for Accumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Accumulator::new();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

/// A Monte Carlo mean with its standard error (absent for n < 2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: Option<f64>,
    pub n: u64,
}

/// Sample skewness and excess kurtosis with their large-sample standard errors.
pub fn shape_moments(xs: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in xs {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let skew = m3 / m2.powf(1.5);
    let kurt = m4 / (m2 * m2) - 3.0;
    (skew, (6.0 / n).sqrt(), kurt, (24.0 / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_reference_values() {
        assert!((big_phi(0.0) - 0.5).abs() < 1e-15);
        let p = big_phi(1.959_963_984_540_054);
        assert!((p - 0.975).abs() < 1e-14, "{p:e}");
        assert!((upper_tail(10.0) / 7.619_853_024_160_47e-24 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn mills_branches_agree_at_switch() {
        let direct = phi(8.0) / upper_tail(8.0);
        let mut tail = 0.0;
        for k in (1..=60).rev() {
            tail = k as f64 / (8.0 + tail);
        }
        assert!(((8.0 + tail) - direct).abs() / direct < 1e-10);
        assert!((inverse_mills(40.0) / 40.0 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn accumulator_matches_two_pass() {
        let xs = [1.0, 4.0, 2.5, -3.0, 7.25];
        let acc: Accumulator = xs.iter().copied().collect();
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert!((acc.mean() - mean).abs() < 1e-14);
        assert!((acc.variance().unwrap() - var).abs() < 1e-12);
        let single: Accumulator = [3.0].into_iter().collect();
        assert_eq!(single.std_error(), None);
    }
}
