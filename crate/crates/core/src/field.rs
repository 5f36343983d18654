//! Spectral simulation of stationary Gaussian fields.
//!
//! A realization is the finite trigonometric sum
//! `X(t) = Σ_m a_m cos⟨ω_m, t⟩ + b_m sin⟨ω_m, t⟩` with `a_m, b_m ~ N(0, 1/M)`
//! and `ω_m` drawn from the normalized spectral measure. Conditionally on
//! the frequencies `X` is exactly Gaussian, and averaging over the
//! frequencies gives covariance `Γ`. Value, gradient and Hessian are
//! evaluated in closed form.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::domain::{Domain, Point};
use crate::error::{invalid, Error, Result};
use crate::spectral::SpectralModel;

pub const DEFAULT_N_FREQ: usize = 1024;
pub const MIN_N_FREQ: usize = 64;
const CDF_POINTS: usize = 10_000;
/// Trig tables are rebuilt exactly every this many recurrence steps.
const RESYNC: usize = 32;
/// Block length of the offset table used for line evaluation.
const LINE_BLOCK: usize = 64;

/// Independent random stream for replication `stream` of a run seeded with `seed`.
pub fn replication_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Inverse CDF of `|ω|`, tabulated by cumulative trapezoid on a log grid.
#[derive(Debug, Clone)]
pub struct FieldSampler {
    model_name: String,
    dim: usize,
    rho: Vec<f64>,
    cdf: Vec<f64>,
}

impl FieldSampler {
    pub fn new(model: &SpectralModel) -> Result<Self> {
        let r = model.effective_radius()?;
        let lo = r * 1e-6;
        let ratio = (r / lo).powf(1.0 / (CDF_POINTS - 1) as f64);
        let mut rho = Vec::with_capacity(CDF_POINTS + 1);
        rho.push(0.0);
        let mut x = lo;
        for _ in 0..CDF_POINTS {
            rho.push(x);
            x *= ratio;
        }
        let mut cdf = Vec::with_capacity(rho.len());
        cdf.push(0.0);
        let mut prev = model.radial_law(0.0);
        for w in rho.windows(2) {
            let next = model.radial_law(w[1]);
            if next < 0.0 || !next.is_finite() {
                return Err(Error::InverseCdf(format!("radial law is {next} at {}", w[1])));
            }
            cdf.push(cdf.last().unwrap() + 0.5 * (prev + next) * (w[1] - w[0]));
            prev = next;
        }
        let total = *cdf.last().unwrap();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InverseCdf(format!("total radial mass {total}")));
        }
        cdf.iter_mut().for_each(|c| *c /= total);
        Ok(Self {
            model_name: model.name.clone(),
            dim: model.dim,
            rho,
            cdf,
        })
    }

    /// Monotone (piecewise-linear) inverse of the tabulated CDF.
    pub fn inverse_cdf(&self, p: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c < p).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        if c1 <= c0 {
            return self.rho[i];
        }
        self.rho[i - 1] + (p - c0) / (c1 - c0) * (self.rho[i] - self.rho[i - 1])
    }

    pub fn sample(&self, n_freq: usize, seed: u64, stream: u64) -> Result<FieldSample> {
        if n_freq < MIN_N_FREQ {
            return Err(invalid(format!("n_freq must be at least {MIN_N_FREQ}, got {n_freq}")));
        }
        let mut rng = replication_rng(seed, stream);
        let scale = (n_freq as f64).sqrt().recip();
        let mut sample = FieldSample {
            dim: self.dim,
            omega_x: Vec::with_capacity(n_freq),
            omega_y: Vec::with_capacity(n_freq),
            cos_coeffs: Vec::with_capacity(n_freq),
            sin_coeffs: Vec::with_capacity(n_freq),
            seed,
            stream,
            model_name: self.model_name.clone(),
        };
        for _ in 0..n_freq {
            let radius = self.inverse_cdf(rng.random::<f64>());
            let angle = if self.dim == 2 { 2.0 * PI * rng.random::<f64>() } else { 0.0 };
            let (s, c) = angle.sin_cos();
            sample.omega_x.push(radius * c);
            sample.omega_y.push(radius * s);
            sample.cos_coeffs.push(scale * rng.sample::<f64, _>(StandardNormal));
            sample.sin_coeffs.push(scale * rng.sample::<f64, _>(StandardNormal));
        }
        Ok(sample)
    }
}

/// Draws one realization; see [`FieldSampler`] to amortize the inverse CDF.
pub fn sample_field(model: &SpectralModel, n_freq: usize, seed: u64) -> Result<FieldSample> {
    FieldSampler::new(model)?.sample(n_freq, seed, 0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldSample {
    pub dim: usize,
    pub omega_x: Vec<f64>,
    pub omega_y: Vec<f64>,
    pub cos_coeffs: Vec<f64>,
    pub sin_coeffs: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
    pub model_name: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldPoint {
    pub value: f64,
    pub gradient: [f64; 2],
    pub hessian: [[f64; 2]; 2],
}

/// Values (and optionally gradients) on the lattice `(x0 + i·hx, y0 + j·hy)`,
/// stored row-major with `i` fastest.
#[derive(Debug, Clone)]
pub struct GridValues {
    pub nx: usize,
    pub ny: usize,
    pub value: Vec<f64>,
    pub grad_x: Vec<f64>,
    pub grad_y: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Axis {
    start: f64,
    step: f64,
    len: usize,
}

fn fill_trig(cos: &mut [f64], sin: &mut [f64], omega: f64, axis: Axis) {
    let (sr, cr) = (omega * axis.step).sin_cos();
    let (mut s, mut c) = (0.0, 1.0);
    for k in 0..axis.len {
        if k % RESYNC == 0 {
            (s, c) = (omega * (axis.start + k as f64 * axis.step)).sin_cos();
        } else {
            (s, c) = (s * cr + c * sr, c * cr - s * sr);
        }
        cos[k] = c;
        sin[k] = s;
    }
}

impl FieldSample {
    /// Builds a sample from explicit frequencies and (unscaled) amplitudes.
    pub fn from_parts(dim: usize, frequencies: &[[f64; 2]], cos_coeffs: &[f64], sin_coeffs: &[f64]) -> Self {
        assert_eq!(frequencies.len(), cos_coeffs.len());
        assert_eq!(frequencies.len(), sin_coeffs.len());
        Self {
            dim,
            omega_x: frequencies.iter().map(|w| w[0]).collect(),
            omega_y: frequencies.iter().map(|w| if dim == 2 { w[1] } else { 0.0 }).collect(),
            cos_coeffs: cos_coeffs.to_vec(),
            sin_coeffs: sin_coeffs.to_vec(),
            seed: 0,
            stream: 0,
            model_name: "synthetic".into(),
        }
    }

    pub fn n_freq(&self) -> usize {
        self.omega_x.len()
    }

    pub fn value(&self, t: Point) -> f64 {
        let mut v = 0.0;
        for m in 0..self.n_freq() {
            let (s, c) = (self.omega_x[m] * t[0] + self.omega_y[m] * t[1]).sin_cos();
            v += self.cos_coeffs[m] * c + self.sin_coeffs[m] * s;
        }
        v
    }

    /// Closed-form value, gradient and Hessian at `t`.
    pub fn evaluate(&self, t: Point) -> FieldPoint {
        let (mut v, mut gx, mut gy, mut hxx, mut hxy, mut hyy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for m in 0..self.n_freq() {
            let (wx, wy) = (self.omega_x[m], self.omega_y[m]);
            let (a, b) = (self.cos_coeffs[m], self.sin_coeffs[m]);
            let (s, c) = (wx * t[0] + wy * t[1]).sin_cos();
            let q = a * c + b * s;
            let r = b * c - a * s;
            v += q;
            gx += wx * r;
            gy += wy * r;
            hxx -= wx * wx * q;
            hxy -= wx * wy * q;
            hyy -= wy * wy * q;
        }
        FieldPoint {
            value: v,
            gradient: [gx, gy],
            hessian: [[hxx, hxy], [hxy, hyy]],
        }
    }

    /// `(X(t), X′(t), X″(t))` for a line process.
    pub fn evaluate_1d(&self, t: f64) -> (f64, f64, f64) {
        let p = self.evaluate([t, 0.0]);
        (p.value, p.gradient[0], p.hessian[0][0])
    }

    fn accumulate(&self, wx: &[f64], wy: &[f64], xs: Axis, ys: Axis, with_gradient: bool) -> GridValues {
        let (nx, ny) = (xs.len, ys.len);
        let mut value = vec![0.0; nx * ny];
        let (mut grad_x, mut grad_y) = if with_gradient {
            (vec![0.0; nx * ny], vec![0.0; nx * ny])
        } else {
            (Vec::new(), Vec::new())
        };
        let (mut cx, mut sx) = (vec![0.0; nx], vec![0.0; nx]);
        let (mut cy, mut sy) = (vec![0.0; ny], vec![0.0; ny]);
        for m in 0..self.n_freq() {
            fill_trig(&mut cx, &mut sx, wx[m], xs);
            fill_trig(&mut cy, &mut sy, wy[m], ys);
            let (a, b) = (self.cos_coeffs[m], self.sin_coeffs[m]);
            for j in 0..ny {
                let p = a * cy[j] + b * sy[j];
                let q = b * cy[j] - a * sy[j];
                let row = j * nx..(j + 1) * nx;
                for ((v, &c), &s) in value[row.clone()].iter_mut().zip(&cx).zip(&sx) {
                    *v += p * c + q * s;
                }
                if with_gradient {
                    let (ox, oy) = (self.omega_x[m], self.omega_y[m]);
                    for (((gx, gy), &c), &s) in grad_x[row.clone()].iter_mut().zip(&mut grad_y[row.clone()]).zip(&cx).zip(&sx) {
                        let r = q * c - p * s;
                        *gx += ox * r;
                        *gy += oy * r;
                    }
                }
            }
        }
        GridValues {
            nx,
            ny,
            value,
            grad_x,
            grad_y,
        }
    }

    /// Values (and gradients) on the planar lattice `(x0 + i·hx, y0 + j·hy)`.
    pub fn grid(&self, origin: Point, step: [f64; 2], shape: [usize; 2], with_gradient: bool) -> GridValues {
        self.accumulate(
            &self.omega_x,
            &self.omega_y,
            Axis {
                start: origin[0],
                step: step[0],
                len: shape[0],
            },
            Axis {
                start: origin[1],
                step: step[1],
                len: shape[1],
            },
            with_gradient,
        )
    }

    /// `X` and `X′` at `t0 + k·h`, `k = 0..n`, for a line process.
    pub fn line(&self, t0: f64, h: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
        let blocks = n.div_ceil(LINE_BLOCK);
        let g = self.accumulate(
            &self.omega_x,
            &self.omega_x,
            Axis {
                start: 0.0,
                step: h,
                len: LINE_BLOCK,
            },
            Axis {
                start: t0,
                step: h * LINE_BLOCK as f64,
                len: blocks,
            },
            true,
        );
        let mut value = g.value;
        let mut deriv = g.grad_x;
        value.truncate(n);
        deriv.truncate(n);
        (value, deriv)
    }

    /// Writes `(t1, t2, X, ∂1X, ∂2X, H11, H12, H22)` at lattice points of `domain`.
    pub fn write_csv<W: Write>(&self, domain: &Domain, grid_step: f64, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t1", "t2", "X", "d1X", "d2X", "H11", "H12", "H22"])?;
        let lattice = Lattice::new(domain, grid_step)?;
        for j in 0..lattice.shape[1] {
            for i in 0..lattice.shape[0] {
                let t = lattice.point(i, j);
                if !domain.contains(t) {
                    continue;
                }
                let p = self.evaluate(t);
                w.serialize((
                    t[0],
                    t[1],
                    p.value,
                    p.gradient[0],
                    p.gradient[1],
                    p.hessian[0][0],
                    p.hessian[0][1],
                    p.hessian[1][1],
                ))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Regular lattice covering the bounding box of a domain with a step no
/// larger than requested; halving the step refines the lattice in place.
#[derive(Debug, Clone, Copy)]
pub struct Lattice {
    pub origin: Point,
    pub step: [f64; 2],
    pub shape: [usize; 2],
}

impl Lattice {
    pub fn new(domain: &Domain, grid_step: f64) -> Result<Self> {
        if !(grid_step > 0.0) {
            return Err(invalid(format!("grid_step must be positive, got {grid_step}")));
        }
        let (lo, hi) = domain.bounding_box();
        let cells = |len: f64| ((len / grid_step) - 1e-9).ceil().max(1.0) as usize;
        let nx = cells(hi[0] - lo[0]);
        let ny = if domain.dim() == 1 { 0 } else { cells(hi[1] - lo[1]) };
        Ok(Self {
            origin: lo,
            step: [(hi[0] - lo[0]) / nx as f64, if ny == 0 { 0.0 } else { (hi[1] - lo[1]) / ny as f64 }],
            shape: [nx + 1, ny + 1],
        })
    }

    pub fn point(&self, i: usize, j: usize) -> Point {
        [self.origin[0] + i as f64 * self.step[0], self.origin[1] + j as f64 * self.step[1]]
    }

    pub fn evaluate(&self, sample: &FieldSample, with_gradient: bool) -> GridValues {
        if self.shape[1] == 1 {
            let (value, grad_x) = sample.line(self.origin[0], self.step[0], self.shape[0]);
            let grad_y = if with_gradient { vec![0.0; value.len()] } else { Vec::new() };
            GridValues {
                nx: self.shape[0],
                ny: 1,
                value,
                grad_x,
                grad_y,
            }
        } else {
            sample.grid(self.origin, self.step, self.shape, with_gradient)
        }
    }
}

/// Boundary nodes `s_k = k·L/n` with `n = ⌈L/h⌉`.
pub fn boundary_nodes(domain: &Domain, grid_step: f64) -> Vec<f64> {
    let period = domain.boundary_measure();
    if period == 0.0 {
        return Vec::new();
    }
    let n = ((period / grid_step) - 1e-9).ceil().max(4.0) as usize;
    (0..n).map(|k| period * k as f64 / n as f64).collect()
}

/// A smooth periodic 1-d process with its first two derivatives.
pub trait PeriodicTrace {
    fn period(&self) -> f64;
    fn eval(&self, s: f64) -> (f64, f64, f64);
}

/// `X̃ = X ∘ γ` for the unit-speed boundary parameterization `γ`.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryProcess<'a> {
    pub parent: &'a FieldSample,
    pub domain: Domain,
}

impl<'a> BoundaryProcess<'a> {
    pub fn point(&self, s: f64) -> Point {
        self.domain.boundary_point(s).expect("domain has a boundary").point
    }
}

impl PeriodicTrace for BoundaryProcess<'_> {
    fn period(&self) -> f64 {
        self.domain.boundary_measure()
    }

    /// `X̃′ = ⟨∇X, γ′⟩` and `X̃″ = γ′ᵀ X″ γ′ + ⟨∇X, γ″⟩`.
    fn eval(&self, s: f64) -> (f64, f64, f64) {
        let b = self.domain.boundary_point(s).expect("domain has a boundary");
        let p = self.parent.evaluate(b.point);
        let [tx, ty] = b.tangent;
        let d1 = p.gradient[0] * tx + p.gradient[1] * ty;
        let h = p.hessian;
        let d2 = tx * tx * h[0][0]
            + 2.0 * tx * ty * h[0][1]
            + ty * ty * h[1][1]
            + p.gradient[0] * b.curvature[0]
            + p.gradient[1] * b.curvature[1];
        (p.value, d1, d2)
    }
}

pub fn restrict_to_boundary<'a>(sample: &'a FieldSample, domain: &Domain) -> Result<BoundaryProcess<'a>> {
    match domain {
        Domain::Interval { .. } => Err(Error::UnsupportedDomain(domain.to_string())),
        _ => Ok(BoundaryProcess {
            parent: sample,
            domain: *domain,
        }),
    }
}

/// Location and value of the maximum found by [`locate_sup`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub value: f64,
    pub location: Point,
}

fn is_negative_definite(h: [[f64; 2]; 2], dim: usize) -> bool {
    if dim == 1 {
        h[0][0] < 0.0
    } else {
        h[0][0] < 0.0 && h[0][0] * h[1][1] - h[0][1] * h[0][1] > 0.0
    }
}

/// Monotone ascent from `start`: Newton steps where the Hessian is negative
/// definite, gradient steps otherwise, projected onto the domain and
/// accepted only when they increase `X`.
fn ascend(sample: &FieldSample, domain: &Domain, start: Point, max_step: f64) -> Maximum {
    let dim = domain.dim();
    let mut t = start;
    let mut here = sample.evaluate(t);
    for _ in 0..40 {
        let g = here.gradient;
        let h = here.hessian;
        let mut step = if is_negative_definite(h, dim) {
            if dim == 1 {
                [-g[0] / h[0][0], 0.0]
            } else {
                let det = h[0][0] * h[1][1] - h[0][1] * h[0][1];
                [-(h[1][1] * g[0] - h[0][1] * g[1]) / det, -(h[0][0] * g[1] - h[0][1] * g[0]) / det]
            }
        } else {
            [g[0] * 0.25, if dim == 1 { 0.0 } else { g[1] * 0.25 }]
        };
        let len = step[0].hypot(step[1]);
        if len > max_step {
            step = [step[0] * max_step / len, step[1] * max_step / len];
        }
        let mut improved = false;
        for _ in 0..30 {
            let candidate = domain.project([t[0] + step[0], t[1] + step[1]]);
            let moved = (candidate[0] - t[0]).hypot(candidate[1] - t[1]);
            if moved < 1e-14 {
                break;
            }
            let next = sample.evaluate(candidate);
            if next.value > here.value {
                t = candidate;
                here = next;
                improved = true;
                break;
            }
            step = [0.5 * step[0], 0.5 * step[1]];
        }
        if !improved {
            break;
        }
    }
    Maximum {
        value: here.value,
        location: t,
    }
}

/// Maximizes `X̃` along the boundary near arc parameter `s` with safeguarded
/// Newton steps on `X̃′`, accepting only increases.
fn ascend_boundary(sample: &FieldSample, domain: &Domain, s: f64, max_step: f64) -> Maximum {
    let trace = BoundaryProcess {
        parent: sample,
        domain: *domain,
    };
    let mut s = s;
    let (mut v, mut d1, mut d2) = trace.eval(s);
    for _ in 0..40 {
        let mut step = if d2 < 0.0 { -d1 / d2 } else { 0.25 * d1 };
        step = step.clamp(-max_step, max_step);
        let mut improved = false;
        for _ in 0..30 {
            if step.abs() < 1e-14 {
                break;
            }
            let (nv, n1, n2) = trace.eval(s + step);
            if nv > v {
                s += step;
                (v, d1, d2) = (nv, n1, n2);
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Maximum {
        value: v,
        location: trace.point(s),
    }
}

/// Supremum of the sample over the closed domain: lattice points, boundary
/// nodes, then (optionally) local ascent from the best few of each.
pub fn locate_sup(sample: &FieldSample, domain: &Domain, grid_step: f64, polish: bool) -> Result<Maximum> {
    let lattice = Lattice::new(domain, grid_step)?;
    let values = lattice.evaluate(sample, false);
    let mut interior: Vec<(f64, Point)> = Vec::new();
    for j in 0..values.ny {
        for i in 0..values.nx {
            let t = lattice.point(i, j);
            if domain.contains(t) {
                interior.push((values.value[j * values.nx + i], t));
            }
        }
    }
    let nodes = boundary_nodes(domain, grid_step);
    let mut boundary: Vec<(f64, f64)> = nodes
        .iter()
        .map(|&s| (sample.value(domain.boundary_point(s).unwrap().point), s))
        .collect();
    let by_value = |a: &f64, b: &f64| b.total_cmp(a);
    interior.sort_by(|a, b| by_value(&a.0, &b.0));
    boundary.sort_by(|a, b| by_value(&a.0, &b.0));

    let mut best = Maximum {
        value: f64::NEG_INFINITY,
        location: [0.0, 0.0],
    };
    let mut consider = |m: Maximum| {
        if m.value > best.value {
            best = m;
        }
    };
    if let Some(&(v, t)) = interior.first() {
        consider(Maximum { value: v, location: t });
    }
    if let Some(&(v, s)) = boundary.first() {
        consider(Maximum {
            value: v,
            location: domain.boundary_point(s).unwrap().point,
        });
    }
    if polish {
        for &(_, t) in interior.iter().take(4) {
            let m = ascend(sample, domain, t, grid_step);
            consider(m);
            if domain.depth(m.location) < 1e-12 && domain.boundary_measure() > 0.0 {
                // ascent stalled on the boundary: continue along it
                let s = nearest_arc(domain, m.location);
                consider(ascend_boundary(sample, domain, s, grid_step));
            }
        }
        for &(_, s) in boundary.iter().take(2) {
            consider(ascend_boundary(sample, domain, s, grid_step));
        }
    }
    Ok(best)
}

fn nearest_arc(domain: &Domain, t: Point) -> f64 {
    match *domain {
        Domain::UnitDisc => t[1].atan2(t[0]).rem_euclid(2.0 * PI),
        Domain::Rectangle { width, height } => {
            let candidates = [
                (t[1].abs(), t[0]),
                ((t[0] - width).abs(), width + t[1]),
                ((t[1] - height).abs(), 2.0 * width + height - t[0]),
                (t[0].abs(), 2.0 * width + 2.0 * height - t[1]),
            ];
            candidates.into_iter().min_by(|a, b| a.0.total_cmp(&b.0)).map(|c| c.1).unwrap()
        }
        Domain::Interval { .. } => 0.0,
    }
}

/// `M_I = sup_{t∈I} X(t)` approximated on a lattice of step `grid_step`.
pub fn sup_on_domain(sample: &FieldSample, domain: &Domain, grid_step: f64, polish: bool) -> Result<f64> {
    locate_sup(sample, domain, grid_step, polish).map(|m| m.value)
}
