//! Root and critical-point detection on realized fields.
//!
//! Roots are seeded from sign changes on a lattice and refined with the
//! exact derivatives of the sample. Refinements that fail to converge are
//! reported in [`CountResult::failures`], never silently dropped.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::domain::{Domain, Point};
use crate::error::{invalid, Error, Result};
use crate::field::{FieldSample, Lattice, PeriodicTrace};

pub const DEFAULT_GRID_STEP: f64 = 0.05;
pub const DEDUP_RADIUS: f64 = 1e-4;
pub const NEWTON_TOLERANCE: f64 = 1e-10;
pub const MAX_NEWTON_ITERATIONS: usize = 50;
/// Hessians with an eigenvalue smaller than this in magnitude are indeterminate.
pub const EIGEN_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountKind {
    LevelRoot,
    CriticalAll,
    CriticalMax,
    BoundaryCritical,
}

impl CountKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CountKind::LevelRoot => "level_root",
            CountKind::CriticalAll => "critical_all",
            CountKind::CriticalMax => "critical_max",
            CountKind::BoundaryCritical => "boundary_critical",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountResult {
    pub count: usize,
    pub locations: Vec<Point>,
    pub kind: CountKind,
    pub level: f64,
    /// Minimum pairwise distance among `locations` (`∞` for fewer than two).
    pub separation: f64,
    /// Refinements that did not reach [`NEWTON_TOLERANCE`].
    pub failures: usize,
    /// Critical points whose Hessian could not be classified.
    pub indeterminate: usize,
    /// Set when the input is flat and no sign structure exists.
    pub degenerate: bool,
}

impl CountResult {
    fn new(kind: CountKind, level: f64, locations: Vec<Point>) -> Self {
        let mut separation = f64::INFINITY;
        for (i, a) in locations.iter().enumerate() {
            for b in &locations[i + 1..] {
                separation = separation.min((a[0] - b[0]).hypot(a[1] - b[1]));
            }
        }
        Self {
            count: locations.len(),
            locations,
            kind,
            level,
            separation,
            failures: 0,
            indeterminate: 0,
            degenerate: false,
        }
    }
}

/// Safeguarded Newton–bisection for a root of `f` in `[a, b]`, where `f`
/// returns `(value, derivative)`. Returns the root and whether
/// `|value| < NEWTON_TOLERANCE` was reached.
pub fn refine_bracketed<F: Fn(f64) -> (f64, f64)>(f: F, a: f64, b: f64) -> (f64, bool) {
    let (fa, _) = f(a);
    let (fb, _) = f(b);
    if fa == 0.0 {
        return (a, true);
    }
    if fb == 0.0 {
        return (b, true);
    }
    if (fa < 0.0) == (fb < 0.0) {
        // sign change seen on the lattice was within rounding of an endpoint
        let t = if fa.abs() < fb.abs() { a } else { b };
        return (t, f(t).0.abs() < NEWTON_TOLERANCE);
    }
    let (mut lo, mut hi) = if fa < 0.0 { (a, b) } else { (b, a) };
    let mut t = 0.5 * (a + b);
    for _ in 0..MAX_NEWTON_ITERATIONS {
        let (v, d) = f(t);
        if v.abs() < NEWTON_TOLERANCE {
            return (t, true);
        }
        if v < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let newton = t - v / d;
        let inside = (newton - lo) * (newton - hi) < 0.0;
        t = if d != 0.0 && inside { newton } else { 0.5 * (lo + hi) };
        if (hi - lo).abs() < 1e-15 * (1.0 + t.abs()) {
            return (t, f(t).0.abs() < NEWTON_TOLERANCE);
        }
    }
    (t, false)
}

fn dedup(points: &mut Vec<Point>, radius: f64, period: Option<f64>) {
    let dist = |a: &Point, b: &Point| match period {
        Some(p) => {
            let d = (a[0] - b[0]).abs().rem_euclid(p);
            d.min(p - d)
        }
        None => (a[0] - b[0]).hypot(a[1] - b[1]),
    };
    let mut kept: Vec<Point> = Vec::with_capacity(points.len());
    for p in points.drain(..) {
        if kept.iter().all(|q| dist(&p, q) >= radius) {
            kept.push(p);
        }
    }
    *points = kept;
}

/// Roots of `X(t) = u` on an interval, as `[t, 0]` locations.
pub fn count_level_roots_1d(sample: &FieldSample, domain: &Domain, u: f64, grid_step: f64) -> Result<CountResult> {
    let Domain::Interval { .. } = domain else {
        return Err(Error::UnsupportedDomain(domain.to_string()));
    };
    let lattice = Lattice::new(domain, grid_step)?;
    let (values, _) = sample.line(0.0, lattice.step[0], lattice.shape[0]);
    Ok(level_roots_from_values(sample, &values, lattice.step[0], &[u]).remove(0))
}

/// Shares one lattice evaluation across several levels.
pub fn level_roots_from_values(sample: &FieldSample, values: &[f64], step: f64, levels: &[f64]) -> Vec<CountResult> {
    levels
        .iter()
        .map(|&u| {
            let mut locations = Vec::new();
            let mut failures = 0;
            for (k, w) in values.windows(2).enumerate() {
                if (w[0] - u < 0.0) != (w[1] - u < 0.0) {
                    let a = k as f64 * step;
                    let (t, ok) = refine_bracketed(
                        |t| {
                            let (x, dx, _) = sample.evaluate_1d(t);
                            (x - u, dx)
                        },
                        a,
                        a + step,
                    );
                    failures += usize::from(!ok);
                    locations.push([t, 0.0]);
                }
            }
            dedup(&mut locations, DEDUP_RADIUS, None);
            let mut result = CountResult::new(CountKind::LevelRoot, u, locations);
            result.failures = failures;
            result
        })
        .collect()
}

fn newton_2d(sample: &FieldSample, target: [f64; 2], start: Point, max_step: f64, domain: &Domain) -> Option<Point> {
    let mut t = start;
    for _ in 0..MAX_NEWTON_ITERATIONS {
        let p = sample.evaluate(t);
        let g = [p.gradient[0] - target[0], p.gradient[1] - target[1]];
        if g[0].hypot(g[1]) < NEWTON_TOLERANCE {
            return Some(t);
        }
        let h = p.hessian;
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let scale = h[0][0].abs() + h[1][1].abs() + h[0][1].abs();
        let mut step = if det.abs() > 1e-12 * scale * scale {
            [-(h[1][1] * g[0] - h[0][1] * g[1]) / det, -(h[0][0] * g[1] - h[1][0] * g[0]) / det]
        } else {
            // descent direction of ½‖G‖²
            let d = [h[0][0] * g[0] + h[1][0] * g[1], h[0][1] * g[0] + h[1][1] * g[1]];
            let n = d[0].hypot(d[1]).max(f64::MIN_POSITIVE);
            [-0.1 * max_step * d[0] / n, -0.1 * max_step * d[1] / n]
        };
        let len = step[0].hypot(step[1]);
        if len > max_step {
            step = [step[0] * max_step / len, step[1] * max_step / len];
        }
        t = [t[0] + step[0], t[1] + step[1]];
        if domain.depth(t) < -2.0 * max_step {
            return None;
        }
    }
    None
}

/// Roots of `∇X(t) = u_vec` in the interior of a planar domain.
///
/// A lattice cell is seeded when both gradient components change sign over
/// its corners, or when the smallest corner residual is below the residual
/// variation across the cell. Seeds are refined by Newton's method with the
/// exact Hessian; roots within [`crate::domain::BOUNDARY_TIE`] of `∂I` are
/// left to the boundary count.
pub fn count_gradient_roots_2d(sample: &FieldSample, domain: &Domain, u_vec: [f64; 2], grid_step: f64) -> Result<CountResult> {
    if domain.dim() != 2 {
        return Err(Error::UnsupportedDomain(domain.to_string()));
    }
    let lattice = Lattice::new(domain, grid_step)?;
    let grid = lattice.evaluate(sample, true);
    let nx = grid.nx;
    let half_diag = 0.5 * lattice.step[0].hypot(lattice.step[1]);
    let max_step = 2.0 * lattice.step[0].max(lattice.step[1]);
    let mut locations = Vec::new();
    let mut failures = 0;
    for j in 0..grid.ny - 1 {
        for i in 0..nx - 1 {
            let center = {
                let p = lattice.point(i, j);
                [p[0] + 0.5 * lattice.step[0], p[1] + 0.5 * lattice.step[1]]
            };
            if domain.depth(center) < -half_diag {
                continue;
            }
            let corners = [j * nx + i, j * nx + i + 1, (j + 1) * nx + i, (j + 1) * nx + i + 1];
            let g1 = corners.map(|k| grid.grad_x[k] - u_vec[0]);
            let g2 = corners.map(|k| grid.grad_y[k] - u_vec[1]);
            let changes = |g: &[f64; 4]| {
                let neg = g.iter().filter(|&&v| v < 0.0).count();
                neg > 0 && neg < 4
            };
            let norms = [0, 1, 2, 3].map(|c| g1[c].hypot(g2[c]));
            let min_norm = norms.iter().copied().fold(f64::INFINITY, f64::min);
            let spread =
                |g: &[f64; 4]| g.iter().copied().fold(f64::NEG_INFINITY, f64::max) - g.iter().copied().fold(f64::INFINITY, f64::min);
            let variation = spread(&g1).hypot(spread(&g2));
            if !(changes(&g1) && changes(&g2)) && min_norm > variation {
                continue;
            }
            match newton_2d(sample, u_vec, center, max_step, domain) {
                Some(t) => {
                    if domain.contains_interior(t) {
                        locations.push(t);
                    }
                }
                None => failures += 1,
            }
        }
    }
    dedup(&mut locations, DEDUP_RADIUS, None);
    let mut result = CountResult::new(CountKind::CriticalAll, f64::NEG_INFINITY, locations);
    result.failures = failures;
    Ok(result)
}

/// How critical points with a near-singular Hessian are classified.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndeterminatePolicy {
    /// Count into `M_{u,2}` only.
    #[default]
    AllOnly,
    /// Count into both `M_{u,1}` and `M_{u,2}`.
    Both,
}

/// Splits critical points into local maxima above `u` (`M_{u,1}`) and all
/// critical points above `u` (`M_{u,2}`).
pub fn classify_critical(sample: &FieldSample, roots: &CountResult, u: f64, policy: IndeterminatePolicy) -> (CountResult, CountResult) {
    let mut maxima = Vec::new();
    let mut all = Vec::new();
    let mut indeterminate = 0;
    for &t in &roots.locations {
        let p = sample.evaluate(t);
        if !(p.value > u) {
            continue;
        }
        all.push(t);
        let h = p.hessian;
        let mean = 0.5 * (h[0][0] + h[1][1]);
        let radius = (0.25 * (h[0][0] - h[1][1]).powi(2) + h[0][1] * h[0][1]).sqrt();
        let (low, high) = (mean - radius, mean + radius);
        if low.abs() < EIGEN_TOLERANCE || high.abs() < EIGEN_TOLERANCE {
            indeterminate += 1;
            if policy == IndeterminatePolicy::Both {
                maxima.push(t);
            }
        } else if high < -EIGEN_TOLERANCE {
            maxima.push(t);
        }
    }
    let mut max_result = CountResult::new(CountKind::CriticalMax, u, maxima);
    let mut all_result = CountResult::new(CountKind::CriticalAll, u, all);
    max_result.indeterminate = indeterminate;
    all_result.indeterminate = indeterminate;
    (max_result, all_result)
}

/// Local maxima of a periodic trace with value above `u`. Locations are
/// reported as `[s, 0]` with `s ∈ [0, period)`.
pub fn count_boundary_critical<P: PeriodicTrace>(trace: &P, u: f64, grid_step: f64) -> Result<CountResult> {
    let period = trace.period();
    if !(period > 0.0) {
        return Err(invalid("trace period must be positive"));
    }
    if !(grid_step > 0.0) {
        return Err(invalid(format!("grid_step must be positive, got {grid_step}")));
    }
    let n = ((period / grid_step) - 1e-9).ceil().max(4.0) as usize;
    let h = period / n as f64;
    let slopes: Vec<f64> = (0..n).map(|k| trace.eval(k as f64 * h).1).collect();
    let scale = slopes.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if scale < 1e-14 {
        let mut flat = CountResult::new(CountKind::BoundaryCritical, u, Vec::new());
        flat.degenerate = true;
        return Ok(flat);
    }
    let mut locations = Vec::new();
    let mut failures = 0;
    let mut indeterminate = 0;
    for k in 0..n {
        let (d0, d1) = (slopes[k], slopes[(k + 1) % n]);
        if !(d0 > 0.0 && d1 <= 0.0) {
            continue;
        }
        let a = k as f64 * h;
        let (s, ok) = refine_bracketed(
            |s| {
                let (_, d, dd) = trace.eval(s);
                (-d, -dd)
            },
            a,
            a + h,
        );
        if !ok {
            failures += 1;
            continue;
        }
        let (v, _, dd) = trace.eval(s);
        if dd == 0.0 {
            indeterminate += 1;
            continue;
        }
        if v > u && dd < 0.0 {
            locations.push([s.rem_euclid(period), 0.0]);
        }
    }
    dedup(&mut locations, DEDUP_RADIUS, Some(period));
    let mut result = CountResult::new(CountKind::BoundaryCritical, u, locations);
    result.failures = failures;
    result.indeterminate = indeterminate;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub seed: u64,
    pub u: f64,
    pub kind: CountKind,
    pub count: usize,
}

pub fn write_count_records<W: Write>(records: &[CountRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{restrict_to_boundary, sample_field};
    use crate::spectral::SpectralModel;
    use std::f64::consts::PI;

    struct Trace<F: Fn(f64) -> (f64, f64, f64)>(f64, F);
    impl<F: Fn(f64) -> (f64, f64, f64)> PeriodicTrace for Trace<F> {
        fn period(&self) -> f64 {
            self.0
        }
        fn eval(&self, s: f64) -> (f64, f64, f64) {
            (self.1)(s)
        }
    }

    #[test]
    fn cosine_level_roots() {
        let s = FieldSample::from_parts(1, &[[1.0, 0.0]], &[1.0], &[0.0]);
        let d = Domain::Interval { length: 2.0 * PI };
        let r = count_level_roots_1d(&s, &d, 0.0, 0.01).unwrap();
        assert_eq!(r.count, 2);
        assert!((r.locations[0][0] - PI / 2.0).abs() < 1e-9);
        assert!((r.locations[1][0] - 1.5 * PI).abs() < 1e-9);
        assert_eq!(r.failures, 0);
        assert_eq!(count_level_roots_1d(&s, &d, 1.5, 0.01).unwrap().count, 0);
    }

    #[test]
    fn single_frequency_critical_lattice() {
        // X = cos(2 t1 + t2): ∇X = −sin(φ)(2, 1) vanishes nowhere unless sin φ = 0,
        // which is a line, so use X = cos(3 t1) + cos(2 t2) with isolated critical points
        let s = FieldSample::from_parts(2, &[[3.0, 0.0], [0.0, 2.0]], &[1.0, 1.0], &[0.0, 0.0]);
        let d = Domain::Rectangle { width: 2.5, height: 3.5 };
        let r = count_gradient_roots_2d(&s, &d, [0.0, 0.0], 0.05).unwrap();
        // sin(3 t1) = 0 for t1 ∈ {π/3, 2π/3} inside (0, 2.5); sin(2 t2) = 0 for t2 ∈ {π/2, π} inside (0, 3.5)
        assert_eq!(r.count, 4, "{:?}", r.locations);
        for t in &r.locations {
            assert!((3.0 * t[0] / PI - (3.0 * t[0] / PI).round()).abs() < 1e-9);
            assert!((2.0 * t[1] / PI - (2.0 * t[1] / PI).round()).abs() < 1e-9);
        }
        let (max, all) = classify_critical(&s, &r, f64::NEG_INFINITY, IndeterminatePolicy::default());
        assert_eq!(all.count, 4);
        // maxima need cos(3 t1) = 1 and cos(2 t2) = 1: t1 = 2π/3, t2 = π
        assert_eq!(max.count, 1);
        assert!((max.locations[0][0] - 2.0 * PI / 3.0).abs() < 1e-9);
        assert!((max.locations[0][1] - PI).abs() < 1e-9);
        let (max, all) = classify_critical(&s, &r, 2.5, IndeterminatePolicy::default());
        assert_eq!((max.count, all.count), (0, 0));
    }

    #[test]
    fn far_target_has_no_roots() {
        let s = sample_field(&SpectralModel::gaussian_2d(), 256, 5).unwrap();
        let r = count_gradient_roots_2d(&s, &Domain::UnitDisc, [100.0, 0.0], 0.05).unwrap();
        assert_eq!(r.count, 0);
    }

    #[test]
    fn boundary_cosine_trace() {
        let t = Trace(2.0 * PI, |s: f64| (s.cos(), -s.sin(), -s.cos()));
        let r = count_boundary_critical(&t, 0.0, 0.05).unwrap();
        assert_eq!(r.count, 1);
        let s = r.locations[0][0];
        assert!(s.min(2.0 * PI - s) < 1e-9, "{s}");
        let flat = Trace(2.0 * PI, |_| (0.3, 0.0, 0.0));
        let r = count_boundary_critical(&flat, 0.0, 0.05).unwrap();
        assert_eq!(r.count, 0);
        assert!(r.degenerate);
    }

    #[test]
    fn seam_roots_are_counted_once() {
        // maximum just before the seam: X̃ = cos(s + 1e-3)
        let t = Trace(2.0 * PI, |s: f64| ((s + 1e-3).cos(), -(s + 1e-3).sin(), -(s + 1e-3).cos()));
        let r = count_boundary_critical(&t, -2.0, 0.05).unwrap();
        assert_eq!(r.count, 1);
        assert!((r.locations[0][0] - (2.0 * PI - 1e-3)).abs() < 1e-9);
    }

    #[test]
    fn boundary_of_random_disc_field() {
        let s = sample_field(&SpectralModel::gaussian_2d(), 256, 9).unwrap();
        let b = restrict_to_boundary(&s, &Domain::UnitDisc).unwrap();
        let high = count_boundary_critical(&b, 0.5, 0.05).unwrap();
        let low = count_boundary_critical(&b, -10.0, 0.05).unwrap();
        assert!(high.count <= low.count);
        assert!(low.count >= 1);
        for l in &low.locations {
            let (_, d, dd) = b.eval(l[0]);
            assert!(d.abs() < 1e-9 && dd < 0.0);
        }
    }
}
