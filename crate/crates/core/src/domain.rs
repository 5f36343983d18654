//! Parameter sets: an interval `[0, T]`, a rectangle `[0, T₁]×[0, T₂]`, or
//! the closed unit disc.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error};

/// Points of the interior closer than this to `∂I` belong to the boundary.
pub const BOUNDARY_TIE: f64 = 1e-9;

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Interval { length: f64 },
    Rectangle { width: f64, height: f64 },
    UnitDisc,
}

/// A boundary point with its unit tangent and the second derivative of the
/// unit-speed parameterization (the curvature vector).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub point: Point,
    pub tangent: Point,
    pub curvature: Point,
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            _ => 2,
        }
    }

    /// σ(I): length or area.
    pub fn measure(&self) -> f64 {
        match *self {
            Domain::Interval { length } => length,
            Domain::Rectangle { width, height } => width * height,
            Domain::UnitDisc => PI,
        }
    }

    /// σ̃(∂I). Zero for the interval, whose endpoints are handled apart.
    pub fn boundary_measure(&self) -> f64 {
        match *self {
            Domain::Interval { .. } => 0.0,
            Domain::Rectangle { width, height } => 2.0 * (width + height),
            Domain::UnitDisc => 2.0 * PI,
        }
    }

    /// `(lower corner, upper corner)` of the bounding box.
    pub fn bounding_box(&self) -> (Point, Point) {
        match *self {
            Domain::Interval { length } => ([0.0, 0.0], [length, 0.0]),
            Domain::Rectangle { width, height } => ([0.0, 0.0], [width, height]),
            Domain::UnitDisc => ([-1.0, -1.0], [1.0, 1.0]),
        }
    }

    /// Signed distance to the boundary, positive inside.
    pub fn depth(&self, t: Point) -> f64 {
        match *self {
            Domain::Interval { length } => t[0].min(length - t[0]),
            Domain::Rectangle { width, height } => t[0].min(width - t[0]).min(t[1]).min(height - t[1]),
            Domain::UnitDisc => 1.0 - t[0].hypot(t[1]),
        }
    }

    pub fn contains(&self, t: Point) -> bool {
        self.depth(t) >= 0.0
    }

    /// Interior in the counting sense: farther than [`BOUNDARY_TIE`] from `∂I`.
    pub fn contains_interior(&self, t: Point) -> bool {
        self.depth(t) > BOUNDARY_TIE
    }

    /// Nearest point of the closed domain.
    pub fn project(&self, t: Point) -> Point {
        match *self {
            Domain::Interval { length } => [t[0].clamp(0.0, length), 0.0],
            Domain::Rectangle { width, height } => [t[0].clamp(0.0, width), t[1].clamp(0.0, height)],
            Domain::UnitDisc => {
                let r = t[0].hypot(t[1]);
                if r <= 1.0 {
                    t
                } else {
                    [t[0] / r, t[1] / r]
                }
            }
        }
    }

    /// Unit-speed boundary parameterization, periodic in `s` with period
    /// [`Domain::boundary_measure`]. The rectangle is traversed
    /// counter-clockwise from the origin; its corners are kinks.
    pub fn boundary_point(&self, s: f64) -> Option<BoundaryPoint> {
        match *self {
            Domain::Interval { .. } => None,
            Domain::UnitDisc => {
                let (sin, cos) = s.sin_cos();
                Some(BoundaryPoint {
                    point: [cos, sin],
                    tangent: [-sin, cos],
                    curvature: [-cos, -sin],
                })
            }
            Domain::Rectangle { width, height } => {
                let perimeter = 2.0 * (width + height);
                let s = s.rem_euclid(perimeter);
                let (point, tangent) = if s < width {
                    ([s, 0.0], [1.0, 0.0])
                } else if s < width + height {
                    ([width, s - width], [0.0, 1.0])
                } else if s < 2.0 * width + height {
                    ([width - (s - width - height), height], [-1.0, 0.0])
                } else {
                    ([0.0, height - (s - 2.0 * width - height)], [0.0, -1.0])
                };
                Some(BoundaryPoint {
                    point,
                    tangent,
                    curvature: [0.0, 0.0],
                })
            }
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Interval { length } => write!(f, "interval:{length}"),
            Domain::Rectangle { width, height } => write!(f, "rectangle:{width}x{height}"),
            Domain::UnitDisc => f.write_str("disc"),
        }
    }
}

impl FromStr for Domain {
    type Err = Error;

    /// `disc`, `interval:<T>` or `rectangle:<T1>x<T2>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let positive = |v: &str| -> Result<f64, Error> {
            match v.trim().parse::<f64>() {
                Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
                _ => Err(invalid(format!("domain size '{v}' must be a positive number"))),
            }
        };
        let s = s.trim();
        if s == "disc" || s == "unit_disc" {
            return Ok(Domain::UnitDisc);
        }
        if let Some(len) = s.strip_prefix("interval:") {
            return Ok(Domain::Interval { length: positive(len)? });
        }
        if let Some(dims) = s.strip_prefix("rectangle:") {
            let (w, h) = dims
                .split_once('x')
                .ok_or_else(|| invalid(format!("rectangle '{dims}' must read <T1>x<T2>")))?;
            return Ok(Domain::Rectangle {
                width: positive(w)?,
                height: positive(h)?,
            });
        }
        Err(invalid(format!(
            "unknown domain '{s}' (expected disc, interval:<T>, rectangle:<T1>x<T2>)"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measures() {
        assert_eq!(Domain::UnitDisc.measure(), PI);
        assert_eq!(Domain::UnitDisc.boundary_measure(), 2.0 * PI);
        let r: Domain = "rectangle:2x0.5".parse().unwrap();
        assert_eq!(r.measure(), 1.0);
        assert_eq!(r.boundary_measure(), 5.0);
        assert_eq!("interval:10".parse::<Domain>().unwrap().measure(), 10.0);
        assert!("interval:-1".parse::<Domain>().is_err());
    }

    #[test]
    fn boundary_parameterization_is_unit_speed_and_periodic() {
        for domain in [Domain::UnitDisc, Domain::Rectangle { width: 1.5, height: 0.5 }] {
            let period = domain.boundary_measure();
            let h = 1e-6;
            for i in 0..97 {
                let s = period * (i as f64 + 0.31) / 97.0;
                let a = domain.boundary_point(s).unwrap();
                let b = domain.boundary_point(s + h).unwrap();
                let speed = (b.point[0] - a.point[0]).hypot(b.point[1] - a.point[1]) / h;
                assert!((speed - 1.0).abs() < 1e-6, "{domain} s={s} speed={speed}");
                let wrapped = domain.boundary_point(s + period).unwrap();
                assert!((wrapped.point[0] - a.point[0]).abs() < 1e-12);
                assert!((wrapped.point[1] - a.point[1]).abs() < 1e-12);
                assert!(domain.depth(a.point).abs() < 1e-12);
            }
        }
        assert!(Domain::Interval { length: 1.0 }.boundary_point(0.0).is_none());
    }
}
