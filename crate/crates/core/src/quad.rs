//! Numerical quadrature: adaptive Gauss–Kronrod on finite intervals, dyadic
//! panelling for `[a, ∞)`, and fixed Gauss–Legendre rules.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_119,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lower: f64,
    upper: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, lower: f64, upper: f64) -> Panel {
    let center = 0.5 * (lower + upper);
    let half = 0.5 * (upper - lower);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Panel {
        lower,
        upper,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Adaptive 15-point Gauss–Kronrod integration of `f` over `[lower, upper]`.
///
/// Stops when the summed error estimate is below `max(abs_tol, rel_tol·|I|)`.
pub fn adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    lower: f64,
    upper: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<QuadResult> {
    if lower == upper {
        return Ok(QuadResult {
            value: 0.0,
            abs_error: 0.0,
            evaluations: 0,
        });
    }
    let mut heap = BinaryHeap::new();
    let first = kronrod15(&mut f, lower, upper);
    let mut value = first.value;
    let mut error = first.error;
    let mut evaluations = 15;
    heap.push(first);
    while error > abs_tol.max(rel_tol * value.abs()) {
        if heap.len() >= max_panels || !value.is_finite() {
            return Err(Error::QuadratureNonConvergence {
                lower,
                upper,
                tolerance: abs_tol.max(rel_tol * value.abs()),
                estimate: error,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.lower + worst.upper);
        let left = kronrod15(&mut f, worst.lower, mid);
        let right = kronrod15(&mut f, mid, worst.upper);
        evaluations += 30;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // re-sum to shed the drift from incremental updates
    let value = heap.iter().map(|p| p.value).sum();
    let abs_error = heap.iter().map(|p| p.error).sum();
    Ok(QuadResult {
        value,
        abs_error,
        evaluations,
    })
}

/// Integrates `f` over `[lower, ∞)` by adaptive quadrature on dyadic panels
/// `[lower + R, lower + 2R]`. Panelling stops once a panel falls below
/// `abs_tol` while shrinking; the remaining tail is bounded by extrapolating
/// the last panel ratio geometrically and folded into the error estimate.
///
/// Returns [`Error::DivergentIntegral`] when the panel contributions stop
/// decaying (a heavy tail).
pub fn semi_infinite<F: FnMut(f64) -> f64>(mut f: F, lower: f64, abs_tol: f64) -> Result<QuadResult> {
    const MAX_DOUBLINGS: usize = 60;
    let mut total = adaptive(&mut f, lower, lower + 1.0, abs_tol, 1e-12, 400)?;
    let mut width = 1.0;
    let mut previous = f64::INFINITY;
    for _ in 0..MAX_DOUBLINGS {
        let panel = adaptive(&mut f, lower + width, lower + 2.0 * width, abs_tol, 1e-12, 400)?;
        total.value += panel.value;
        total.abs_error += panel.abs_error;
        total.evaluations += panel.evaluations;
        let size = panel.value.abs();
        width *= 2.0;
        if size < abs_tol && size <= previous {
            let ratio = if previous.is_finite() && previous > 0.0 {
                (size / previous).min(0.5)
            } else {
                0.5
            };
            total.abs_error += size * ratio / (1.0 - ratio);
            return Ok(total);
        }
        previous = size;
    }
    Err(Error::DivergentIntegral(format!(
        "contributions beyond {:.3e} do not decay below {abs_tol:e}",
        lower + width
    )))
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct LegendreRule {
    pairs: Vec<(f64, f64)>,
}

impl LegendreRule {
    pub fn new(degree: usize) -> Self {
        let degree = NonZeroUsize::new(degree.max(1)).expect("degree clamped to >= 1");
        let rule = GaussLegendre::new(degree);
        Self {
            pairs: rule.as_node_weight_pairs().to_vec(),
        }
    }

    pub fn degree(&self) -> usize {
        self.pairs.len()
    }

    /// Nodes and weights mapped onto `[lower, upper]`.
    pub fn mapped(&self, lower: f64, upper: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (upper - lower);
        let mid = 0.5 * (upper + lower);
        self.pairs.iter().map(move |&(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, lower: f64, upper: f64, mut f: F) -> f64 {
        self.mapped(lower, upper).map(|(x, w)| w * f(x)).sum()
    }
}
