//! Minimum enclosing balls (1-center) and the cluster feasibility oracle.
//!
//! Euclidean balls use move-to-front incremental construction in any
//! dimension; ℓ∞ uses the bounding box, ℓ1 in the plane rotates onto ℓ∞.
//! Planar ℓτ for other τ is solved numerically by nested golden-section
//! search on the convex max-distance function.

use super::{dist, NormSpec, Point, TOL};
use crate::error::{Error, Result};

/// Result of checking whether one facility can cover a set of demand points.
#[derive(Clone, Debug, PartialEq)]
pub struct FeasibilityCertificate {
    pub feasible: bool,
    /// Enclosing-ball center; present iff `feasible`.
    pub center: Option<Point>,
    /// Minimum enclosing radius of the queried points.
    pub radius: f64,
    /// Index subsets (values taken from the queried index set) whose balls
    /// have empty common intersection. Empty when feasible.
    pub witnesses: Vec<Vec<usize>>,
}

/// Smallest `norm`-ball containing all `points`.
pub fn min_enclosing_ball(points: &[Point], norm: NormSpec) -> Result<(Point, f64)> {
    let refs: Vec<&Point> = points.iter().collect();
    let eb = enclose(&refs, norm, None)?;
    Ok((eb.center, eb.radius))
}

/// Decides whether the `rho`-balls around `points[i]`, `i ∈ indices`, share a
/// common point, i.e. whether the enclosing radius is at most `rho`.
pub fn cluster_feasible(
    indices: &[usize],
    points: &[Point],
    rho: f64,
    norm: NormSpec,
) -> Result<FeasibilityCertificate> {
    if indices.is_empty() {
        return Err(Error::contract("cluster_feasible needs a nonempty index set"));
    }
    let refs: Vec<&Point> = indices
        .iter()
        .map(|&i| points.get(i).ok_or_else(|| Error::input(format!("demand index {i} out of range"))))
        .collect::<Result<_>>()?;
    let eb = enclose(&refs, norm, Some(rho))?;
    if eb.radius <= rho + TOL {
        return Ok(FeasibilityCertificate {
            feasible: true,
            center: Some(eb.center),
            radius: eb.radius,
            witnesses: Vec::new(),
        });
    }
    let mut witnesses: Vec<Vec<usize>> = Vec::new();
    for local in eb.witnesses {
        let mut w: Vec<usize> = local.iter().map(|&l| indices[l]).collect();
        w.sort_unstable();
        if !witnesses.contains(&w) {
            witnesses.push(w);
        }
    }
    witnesses.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    Ok(FeasibilityCertificate { feasible: false, center: None, radius: eb.radius, witnesses })
}

struct Enclosure {
    center: Point,
    radius: f64,
    /// Verified infeasible subsets, as positions into the input slice.
    witnesses: Vec<Vec<usize>>,
}

fn enclose(points: &[&Point], norm: NormSpec, rho: Option<f64>) -> Result<Enclosure> {
    let Some(first) = points.first() else {
        return Err(Error::input("enclosing ball of an empty point set"));
    };
    let d = first.dim();
    if points.iter().any(|p| p.dim() != d) {
        return Err(Error::input("points of mixed dimension"));
    }
    match norm {
        NormSpec::L2 => Ok(euclidean(points, rho)),
        NormSpec::Linf => Ok(box_enclosure(points, rho, |p| p.coords().to_vec(), |c| c)),
        NormSpec::L1 if d == 2 => Ok(box_enclosure(
            points,
            rho,
            |p| vec![p.x() + p.y(), p.x() - p.y()],
            |c| vec![(c[0] + c[1]) / 2.0, (c[0] - c[1]) / 2.0],
        )),
        NormSpec::Lp { tau } if d == 2 => Ok(planar_lp(points, tau)),
        _ => Err(Error::capability(format!("no enclosing-ball routine for {norm} in dimension {d}"))),
    }
}

// ---------------------------------------------------------------------------
// Euclidean

#[derive(Clone)]
struct EBall {
    center: Vec<f64>,
    radius: f64,
}

impl EBall {
    fn empty() -> Self {
        EBall { center: Vec::new(), radius: -1.0 }
    }

    fn contains_strict(&self, p: &Point) -> bool {
        if self.radius < 0.0 {
            return false;
        }
        let d = NormSpec::L2.eval(p.coords().iter().zip(&self.center).map(|(a, b)| a - b));
        d <= self.radius + 1e-12 * (1.0 + self.radius)
    }
}

struct Mtf<'a> {
    points: &'a [&'a Point],
    dim: usize,
    ball: EBall,
    rho: Option<f64>,
    trace: Vec<Vec<usize>>,
}

impl Mtf<'_> {
    fn set_ball(&mut self, boundary: &[usize]) {
        self.ball = ball_through(self.points, boundary);
        if let Some(rho) = self.rho {
            if boundary.len() >= 2 && self.ball.radius > rho + TOL {
                let mut r = boundary.to_vec();
                r.sort_unstable();
                if !self.trace.contains(&r) {
                    self.trace.push(r);
                }
            }
        }
    }

    fn run(&mut self, order: &mut Vec<usize>, end: usize, boundary: &mut Vec<usize>) {
        self.set_ball(boundary);
        if boundary.len() == self.dim + 1 {
            return;
        }
        let mut i = 0;
        while i < end {
            let p = order[i];
            if !self.ball.contains_strict(self.points[p]) {
                boundary.push(p);
                self.run(order, i, boundary);
                boundary.pop();
                order[..=i].rotate_right(1);
            }
            i += 1;
        }
    }
}

fn euclidean(points: &[&Point], rho: Option<f64>) -> Enclosure {
    let mut mtf = Mtf { points, dim: points[0].dim(), ball: EBall::empty(), rho, trace: Vec::new() };
    let mut order: Vec<usize> = (0..points.len()).collect();
    let mut boundary = Vec::new();
    mtf.run(&mut order, points.len(), &mut boundary);

    let EBall { center, radius } = mtf.ball.clone();
    // Exact arithmetic keeps every point inside; absorb rounding so that the
    // returned radius really contains the input.
    let radius = points
        .iter()
        .map(|p| NormSpec::L2.eval(p.coords().iter().zip(&center).map(|(a, b)| a - b)))
        .fold(radius, f64::max);

    let mut witnesses = Vec::new();
    if let Some(rho) = rho {
        if radius > rho + TOL {
            for cand in &mtf.trace {
                if small_set_radius(points, cand) > rho + TOL {
                    witnesses.push(cand.clone());
                }
            }
            if witnesses.is_empty() {
                if let Some(w) = boundary_witness(points, &center, radius, rho, mtf.dim) {
                    witnesses.push(w);
                }
            }
        }
    }
    Enclosure { center: Point::new(center), radius, witnesses }
}

/// Exact MEB radius of a small subset (used to re-verify witnesses).
fn small_set_radius(points: &[&Point], subset: &[usize]) -> f64 {
    let sub: Vec<&Point> = subset.iter().map(|&i| points[i]).collect();
    euclidean(&sub, None).radius
}

/// Searches the points on the final sphere for an infeasible subset of size
/// at most d + 1. Such a subset always exists because the center lies in the
/// convex hull of the boundary points.
fn boundary_witness(points: &[&Point], center: &[f64], radius: f64, rho: f64, dim: usize) -> Option<Vec<usize>> {
    let on_sphere: Vec<usize> = (0..points.len())
        .filter(|&i| {
            let d = NormSpec::L2.eval(points[i].coords().iter().zip(center).map(|(a, b)| a - b));
            d >= radius - 1e-7 * (1.0 + radius)
        })
        .collect();
    for size in 2..=(dim + 1).min(on_sphere.len()) {
        let mut combo: Vec<usize> = (0..size).collect();
        loop {
            let subset: Vec<usize> = combo.iter().map(|&c| on_sphere[c]).collect();
            if small_set_radius(points, &subset) > rho + TOL {
                return Some(subset);
            }
            if !next_combination(&mut combo, on_sphere.len()) {
                break;
            }
        }
    }
    None
}

/// Advances `combo` (strictly increasing indices below `n`) to the next
/// combination in lexicographic order.
pub(crate) fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Smallest ball with all of `boundary` on its sphere; when the boundary is
/// affinely dependent (e.g. a collinear triple) falls back to the smallest
/// ball through a proper subset that still contains every boundary point.
fn ball_through(points: &[&Point], boundary: &[usize]) -> EBall {
    match boundary.len() {
        0 => EBall::empty(),
        1 => EBall { center: points[boundary[0]].coords().to_vec(), radius: 0.0 },
        _ => match circumball(points, boundary) {
            Some(b) => b,
            None => {
                let mut best: Option<EBall> = None;
                for skip in 0..boundary.len() {
                    let rest: Vec<usize> =
                        boundary.iter().enumerate().filter(|&(k, _)| k != skip).map(|(_, &i)| i).collect();
                    let b = ball_through(points, &rest);
                    let holds_all = boundary.iter().all(|&i| {
                        let d = NormSpec::L2.eval(points[i].coords().iter().zip(&b.center).map(|(a, c)| a - c));
                        d <= b.radius + 1e-9 * (1.0 + b.radius)
                    });
                    if holds_all && best.as_ref().is_none_or(|x| b.radius < x.radius) {
                        best = Some(b);
                    }
                }
                best.unwrap_or_else(EBall::empty)
            }
        },
    }
}

/// Circumcenter of the affinely independent set `boundary` within its affine hull.
fn circumball(points: &[&Point], boundary: &[usize]) -> Option<EBall> {
    let p0 = points[boundary[0]].coords();
    let vs: Vec<Vec<f64>> =
        boundary[1..].iter().map(|&i| points[i].coords().iter().zip(p0).map(|(a, b)| a - b).collect()).collect();
    let m = vs.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut g = vec![vec![0.0; m + 1]; m];
    for k in 0..m {
        for l in 0..m {
            g[k][l] = dot(&vs[k], &vs[l]);
        }
        g[k][m] = g[k][k] / 2.0;
    }
    let scale = (0..m).map(|k| g[k][k]).fold(0.0, f64::max);
    let lambda = solve_dense(g, 1e-12 * scale.max(f64::MIN_POSITIVE))?;
    let mut center = p0.to_vec();
    for (k, v) in vs.iter().enumerate() {
        for (c, vi) in center.iter_mut().zip(v) {
            *c += lambda[k] * vi;
        }
    }
    let radius = NormSpec::L2.eval(center.iter().zip(p0).map(|(a, b)| a - b));
    Some(EBall { center, radius })
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve_dense(mut a: Vec<Vec<f64>>, pivot_tol: f64) -> Option<Vec<f64>> {
    let m = a.len();
    for col in 0..m {
        let piv = (col..m).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[piv][col].abs() <= pivot_tol {
            return None;
        }
        a.swap(col, piv);
        for r in 0..m {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..=m {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    Some((0..m).map(|r| a[r][m] / a[r][r]).collect())
}

// ---------------------------------------------------------------------------
// Box norms

fn box_enclosure(
    points: &[&Point],
    rho: Option<f64>,
    to_box: impl Fn(&Point) -> Vec<f64>,
    from_box: impl Fn(Vec<f64>) -> Vec<f64>,
) -> Enclosure {
    let mapped: Vec<Vec<f64>> = points.iter().map(|p| to_box(p)).collect();
    let d = mapped[0].len();
    let mut center = vec![0.0; d];
    let mut radius = 0.0;
    let mut widest = (0, 0);
    for axis in 0..d {
        let (mut lo, mut hi) = (0, 0);
        for (i, m) in mapped.iter().enumerate() {
            if m[axis] < mapped[lo][axis] {
                lo = i;
            }
            if m[axis] > mapped[hi][axis] {
                hi = i;
            }
        }
        let (a, b) = (mapped[lo][axis], mapped[hi][axis]);
        center[axis] = (a + b) / 2.0;
        let half = (b - a) / 2.0;
        if half > radius {
            radius = half;
            widest = (lo.min(hi), lo.max(hi));
        }
    }
    let mut witnesses = Vec::new();
    if let Some(rho) = rho {
        if radius > rho + TOL {
            witnesses.push(vec![widest.0, widest.1]);
        }
    }
    Enclosure { center: Point::new(from_box(center)), radius, witnesses }
}

// ---------------------------------------------------------------------------
// Planar ℓτ, 1 < τ < ∞

const GOLDEN_ITERS: usize = 90;

fn golden_min(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..GOLDEN_ITERS {
        if hi - lo <= 1e-15 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

fn planar_lp(points: &[&Point], tau: f64) -> Enclosure {
    let norm = NormSpec::Lp { tau };
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in points {
        x0 = x0.min(p.x());
        x1 = x1.max(p.x());
        y0 = y0.min(p.y());
        y1 = y1.max(p.y());
    }
    let worst = |x: f64, y: f64| {
        let c = Point::xy(x, y);
        points.iter().map(|p| dist(p, &c, norm)).fold(0.0, f64::max)
    };
    // The optimum lies in the bounding box: ℓτ is monotone in |coordinates|.
    let inner = |x: f64| golden_min(y0, y1, |y| worst(x, y));
    let (bx, _) = golden_min(x0, x1, |x| inner(x).1);
    let (by, _) = inner(bx);
    let center = Point::xy(bx, by);
    let radius = points.iter().map(|p| dist(p, &center, norm)).fold(0.0, f64::max);
    Enclosure { center, radius, witnesses: Vec::new() }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Point> {
        v.iter().map(|&(x, y)| Point::xy(x, y)).collect()
    }

    fn triangle() -> Vec<Point> {
        pts(&[(0.0, 0.0), (1.0, 0.0), (0.5, 3f64.sqrt() / 2.0)])
    }

    #[test]
    fn single_point() {
        let (c, r) = min_enclosing_ball(&pts(&[(5.0, 5.0)]), NormSpec::L2).unwrap();
        assert_eq!(c, Point::xy(5.0, 5.0));
        assert_eq!(r, 0.0);
    }

    #[test]
    fn diameter_pair() {
        let (c, r) = min_enclosing_ball(&pts(&[(0.0, 0.0), (2.0, 0.0)]), NormSpec::L2).unwrap();
        assert!((c.x() - 1.0).abs() < 1e-12 && c.y().abs() < 1e-12);
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equilateral_circumradius() {
        // Oracle: grid search for the minimax center (coarse then refined).
        let t = triangle();
        let worst = |x: f64, y: f64| t.iter().map(|p| (p.x() - x).hypot(p.y() - y)).fold(0.0, f64::max);
        let (mut best, mut bx, mut by) = (f64::MAX, 0.0, 0.0);
        let mut step = 0.01;
        let (mut cx, mut cy) = (0.5, 0.5);
        for _ in 0..6 {
            for i in -100..=100 {
                for j in -100..=100 {
                    let (x, y) = (cx + i as f64 * step, cy + j as f64 * step);
                    let w = worst(x, y);
                    if w < best {
                        best = w;
                        bx = x;
                        by = y;
                    }
                }
            }
            cx = bx;
            cy = by;
            step /= 50.0;
        }
        assert!((best - 1.0 / 3f64.sqrt()).abs() < 1e-9);
        let (_, r) = min_enclosing_ball(&t, NormSpec::L2).unwrap();
        assert!((r - best).abs() < 1e-9);
        assert!((r - 0.577_350_269_189_625_8).abs() < 1e-12);
    }

    #[test]
    fn collinear_triple_uses_diameter() {
        let (c, r) = min_enclosing_ball(&pts(&[(0.0, 0.0), (1.0, 0.0), (3.0, 0.0)]), NormSpec::L2).unwrap();
        assert!((r - 1.5).abs() < 1e-12);
        assert!((c.x() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn linf_and_l1_boxes() {
        let p = pts(&[(0.0, 0.0), (2.0, 1.0), (1.0, -1.0)]);
        let (c, r) = min_enclosing_ball(&p, NormSpec::Linf).unwrap();
        assert_eq!(r, 1.0);
        assert_eq!(c, Point::xy(1.0, 0.0));
        // ℓ1 diamond around (0,0),(2,0): radius 1 centered at (1,0).
        let (c, r) = min_enclosing_ball(&pts(&[(0.0, 0.0), (2.0, 0.0)]), NormSpec::L1).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        assert!(dist(&c, &Point::xy(0.0, 0.0), NormSpec::L1) <= 1.0 + 1e-12);
        assert!(dist(&c, &Point::xy(2.0, 0.0), NormSpec::L1) <= 1.0 + 1e-12);
    }

    #[test]
    fn l1_needs_the_plane() {
        let p = vec![Point::new(vec![0.0, 0.0, 0.0])];
        assert!(matches!(min_enclosing_ball(&p, NormSpec::L1), Err(Error::Capability(_))));
        assert!(matches!(min_enclosing_ball(&p, NormSpec::Lp { tau: 3.0 }), Err(Error::Capability(_))));
    }

    #[test]
    fn lp_two_points_radius_is_half_distance() {
        let norm = NormSpec::lp(3.0).unwrap();
        let p = pts(&[(0.0, 0.0), (1.0, 1.0)]);
        let (c, r) = min_enclosing_ball(&p, norm).unwrap();
        let half = dist(&p[0], &p[1], norm) / 2.0;
        assert!((r - half).abs() < 1e-9, "{r} vs {half}");
        assert!(dist(&c, &p[0], norm) <= r + 1e-12);
    }

    #[test]
    fn three_dimensional_tetrahedron() {
        let s = 1.0 / 2f64.sqrt();
        let p = vec![
            Point::new(vec![1.0, 0.0, -s]),
            Point::new(vec![-1.0, 0.0, -s]),
            Point::new(vec![0.0, 1.0, s]),
            Point::new(vec![0.0, -1.0, s]),
        ];
        let (c, r) = min_enclosing_ball(&p, NormSpec::L2).unwrap();
        assert!(c.coords().iter().all(|v| v.abs() < 1e-12));
        assert!((r - (1.5f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn cluster_feasibility_examples() {
        let single = cluster_feasible(&[0], &pts(&[(0.0, 0.0)]), 0.1, NormSpec::L2).unwrap();
        assert!(single.feasible);
        assert_eq!(single.center, Some(Point::xy(0.0, 0.0)));

        let pair = pts(&[(0.0, 0.0), (2.0, 0.0)]);
        let cert = cluster_feasible(&[0, 1], &pair, 0.9, NormSpec::L2).unwrap();
        assert!(!cert.feasible);
        assert_eq!(cert.witnesses, vec![vec![0, 1]]);

        let t = triangle();
        assert!(cluster_feasible(&[0, 1, 2], &t, 0.58, NormSpec::L2).unwrap().feasible);
        let cert = cluster_feasible(&[0, 1, 2], &t, 0.57, NormSpec::L2).unwrap();
        assert!(!cert.feasible);
        assert!(cert.witnesses.contains(&vec![0, 1, 2]));
    }

    #[test]
    fn witnesses_use_caller_indices() {
        let mut p = pts(&[(9.0, 9.0), (9.0, 9.5)]);
        p.extend(triangle());
        let cert = cluster_feasible(&[2, 3, 4], &p, 0.57, NormSpec::L2).unwrap();
        assert!(cert.witnesses.contains(&vec![2, 3, 4]));
    }

    #[test]
    fn combinations_enumerate_in_order() {
        let mut c = vec![0, 1];
        let mut all = vec![c.clone()];
        while next_combination(&mut c, 4) {
            all.push(c.clone());
        }
        assert_eq!(all.len(), 6);
        assert_eq!(all.last().unwrap(), &vec![2, 3]);
    }
}
