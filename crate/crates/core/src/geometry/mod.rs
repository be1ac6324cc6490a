//! Norms, points and the planar / d-dimensional ball machinery used by the
//! separation oracle and the candidate-set construction.

mod enclosing;

pub(crate) use enclosing::next_combination;
pub use enclosing::{cluster_feasible, min_enclosing_ball, FeasibilityCertificate};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for every closed-ball membership and radius comparison.
pub const TOL: f64 = 1e-9;

/// A point in R^d.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point { coords }
    }

    pub fn xy(x: f64, y: f64) -> Self {
        Point { coords: vec![x, y] }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }

    pub(crate) fn x(&self) -> f64 {
        self.coords[0]
    }

    pub(crate) fn y(&self) -> f64 {
        self.coords[1]
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

/// The norm inducing a facility type's coverage balls.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NormSpec {
    L1,
    L2,
    Linf,
    Lp { tau: f64 },
}

impl NormSpec {
    /// Builds an ℓτ norm, collapsing τ ∈ {1, 2, ∞} onto the dedicated variants.
    pub fn lp(tau: f64) -> Result<Self> {
        NormSpec::Lp { tau }.normalized()
    }

    pub fn normalized(self) -> Result<Self> {
        match self {
            NormSpec::Lp { tau } if tau.is_nan() || tau < 1.0 => {
                Err(Error::input(format!("lp norm requires tau >= 1, got {tau}")))
            }
            NormSpec::Lp { tau: 1.0 } => Ok(NormSpec::L1),
            NormSpec::Lp { tau: 2.0 } => Ok(NormSpec::L2),
            NormSpec::Lp { tau } if tau.is_infinite() => Ok(NormSpec::Linf),
            other => Ok(other),
        }
    }

    /// Norm of a difference vector given as an iterator of coordinate deltas.
    pub(crate) fn eval<I: IntoIterator<Item = f64>>(self, diffs: I) -> f64 {
        let it = diffs.into_iter();
        match self {
            NormSpec::L1 => it.map(f64::abs).sum(),
            NormSpec::L2 => it.map(|v| v * v).sum::<f64>().sqrt(),
            NormSpec::Linf => it.map(f64::abs).fold(0.0, f64::max),
            NormSpec::Lp { tau } => it.map(|v| v.abs().powf(tau)).sum::<f64>().powf(1.0 / tau),
        }
    }
}

impl fmt::Display for NormSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormSpec::L1 => f.write_str("l1"),
            NormSpec::L2 => f.write_str("l2"),
            NormSpec::Linf => f.write_str("linf"),
            NormSpec::Lp { tau } => write!(f, "l{tau}"),
        }
    }
}

/// Parses the `Display` form: `l1`, `l2`, `linf` or `l<tau>` such as `l3`.
impl std::str::FromStr for NormSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let tau = match lower.strip_prefix('l') {
            Some("inf") => f64::INFINITY,
            Some(rest) => rest.parse::<f64>().map_err(|_| Error::input(format!("unknown norm `{s}`")))?,
            None => return Err(Error::input(format!("unknown norm `{s}`"))),
        };
        NormSpec::lp(tau)
    }
}

/// A closed norm ball.
#[derive(Clone, Debug, PartialEq)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
    pub norm: NormSpec,
}

impl Ball {
    pub fn new(center: Point, radius: f64, norm: NormSpec) -> Result<Self> {
        if !(radius >= 0.0) {
            return Err(Error::input(format!("ball radius must be nonnegative, got {radius}")));
        }
        Ok(Ball { center, radius, norm })
    }

    /// Closed membership with the global tolerance.
    pub fn contains(&self, p: &Point) -> bool {
        dist(&self.center, p, self.norm) <= self.radius + TOL
    }
}

/// Distance between two points under `norm`.
pub fn distance(a: &Point, b: &Point, norm: NormSpec) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::input(format!("dimension mismatch: {} vs {}", a.dim(), b.dim())));
    }
    Ok(dist(a, b, norm))
}

/// Unchecked distance for hot loops where dimensions were validated upstream.
#[inline]
pub(crate) fn dist(a: &Point, b: &Point, norm: NormSpec) -> f64 {
    norm.eval(a.coords.iter().zip(&b.coords).map(|(x, y)| x - y))
}

/// Whether `b` lies in the closed `radius`-ball around `a`.
#[inline]
pub(crate) fn within(a: &Point, b: &Point, radius: f64, norm: NormSpec) -> bool {
    dist(a, b, norm) <= radius + TOL
}

/// Intersection of the boundaries of two equal-radius Euclidean circles.
///
/// Returns one point for (numerically) tangent circles, two for crossing
/// circles and none when they are disjoint.
pub fn circle_boundary_intersection(c1: &Point, c2: &Point, rho: f64) -> Result<Vec<Point>> {
    if c1.dim() != 2 || c2.dim() != 2 {
        return Err(Error::capability("circle intersection needs planar points"));
    }
    if !(rho > 0.0) {
        return Err(Error::input(format!("radius must be positive, got {rho}")));
    }
    let (dx, dy) = (c2.x() - c1.x(), c2.y() - c1.y());
    let d = dx.hypot(dy);
    if d == 0.0 {
        return Err(Error::input(format!("coincident circle centers at {c1}")));
    }
    let half = d / 2.0;
    let (mx, my) = (c1.x() + dx / 2.0, c1.y() + dy / 2.0);
    if (half - rho).abs() <= TOL {
        return Ok(vec![Point::xy(mx, my)]);
    }
    if half > rho {
        return Ok(Vec::new());
    }
    let h = ((rho - half) * (rho + half)).sqrt();
    let (ux, uy) = (-dy / d, dx / d);
    Ok(vec![Point::xy(mx + h * ux, my + h * uy), Point::xy(mx - h * ux, my - h * uy)])
}
