//! Incompatibility cuts: upfront pair enumeration, the integer-candidate
//! separation oracle, the clustering-based initial pool and dominance filtering.

mod linkage;

pub use linkage::complete_linkage;

use std::collections::HashSet;

use crate::error::Result;
use crate::geometry::{cluster_feasible, dist, next_combination, Point, TOL};
use crate::model::{Assignment, Cut, Instance};

/// Default initial-pool thresholds, as multiples of the type radius.
pub const DEFAULT_POOL_EPS: [f64; 3] = [0.75, 1.0, 1.25];

/// Clusters larger than this only contribute the oracle's own witnesses
/// instead of a full triple scan.
const TRIPLE_SCAN_LIMIT: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CutOrigin {
    Pairwise,
    ThreeWise,
    ClusteringPool,
    Callback,
}

/// Deduplicated set of cuts with the way each was found.
#[derive(Clone, Debug, Default)]
pub struct CutPool {
    cuts: Vec<Cut>,
    origins: Vec<CutOrigin>,
    seen: HashSet<Cut>,
}

impl CutPool {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `cut` unless an identical one is present; returns whether it was new.
    pub fn insert(&mut self, cut: Cut, origin: CutOrigin) -> bool {
        if self.seen.contains(&cut) {
            return false;
        }
        self.seen.insert(cut.clone());
        self.cuts.push(cut);
        self.origins.push(origin);
        true
    }

    pub fn contains(&self, cut: &Cut) -> bool {
        self.seen.contains(cut)
    }

    pub fn cuts(&self) -> &[Cut] {
        &self.cuts
    }

    pub fn origins(&self) -> &[CutOrigin] {
        &self.origins
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Cut, CutOrigin)> {
        self.cuts.iter().zip(self.origins.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn extend(&mut self, other: CutPool) {
        for (c, o) in other.cuts.into_iter().zip(other.origins) {
            self.insert(c, o);
        }
    }

    pub fn into_cuts(self) -> Vec<Cut> {
        self.cuts
    }
}

fn pair_incompatible(a: &Point, b: &Point, instance: &Instance, t: usize) -> bool {
    let ty = &instance.continuous_types()[t];
    // The midpoint is a 1-center of two points under every norm.
    dist(a, b, ty.norm) / 2.0 > ty.radius + TOL
}

/// Every pair of demand points whose balls of type `t` do not meet.
pub fn two_wise_cuts(instance: &Instance, t: usize) -> CutPool {
    let mut pool = CutPool::new();
    let n = instance.n();
    for i in 0..n {
        for l in i + 1..n {
            if pair_incompatible(instance.point(i), instance.point(l), instance, t) {
                pool.insert(Cut::new(t, vec![i, l]), CutOrigin::Pairwise);
            }
        }
    }
    pool
}

fn origin_for(members: &[usize]) -> CutOrigin {
    match members.len() {
        2 => CutOrigin::Pairwise,
        3 => CutOrigin::ThreeWise,
        _ => CutOrigin::Callback,
    }
}

/// Checks every slot cluster of an integer candidate. Infeasible clusters
/// yield their small witnesses, or the whole cluster when none was found.
/// Returns an empty list iff every cluster can be covered by one facility.
pub fn separate(candidate: &Assignment, instance: &Instance) -> Result<Vec<Cut>> {
    let points = instance.points();
    let mut pool = CutPool::new();
    for (t, ty) in instance.continuous_types().iter().enumerate() {
        for k in 0..candidate.continuous_cover.get(t).map_or(0, Vec::len) {
            let q = candidate.cluster(t, k);
            if q.len() < 2 {
                continue;
            }
            let cert = cluster_feasible(&q, &points, ty.radius, ty.norm)?;
            if cert.feasible {
                continue;
            }
            if cert.witnesses.is_empty() {
                pool.insert(Cut::new(t, q), CutOrigin::Callback);
            } else {
                for w in cert.witnesses {
                    let origin = origin_for(&w);
                    pool.insert(Cut::new(t, w), origin);
                }
            }
        }
    }
    Ok(pool.into_cuts())
}

/// Clusters the demand by complete linkage at each threshold ρ(t) + ε and
/// collects the infeasible triples (with pairwise-compatible members) inside
/// the clusters that one facility cannot cover.
pub fn initial_cut_pool(instance: &Instance, t: usize, epsilons: &[f64]) -> Result<CutPool> {
    let ty = &instance.continuous_types()[t];
    let points = instance.points();
    let mut pool = CutPool::new();
    let mut checked: HashSet<Vec<usize>> = HashSet::new();
    for &eps in epsilons {
        if !(eps > 0.0) {
            return Err(crate::error::Error::input(format!("pool epsilon must be positive, got {eps}")));
        }
        for cluster in complete_linkage(&points, ty.norm, ty.radius + eps) {
            if cluster.len() < 3 || !checked.insert(cluster.clone()) {
                continue;
            }
            let cert = cluster_feasible(&cluster, &points, ty.radius, ty.norm)?;
            if cert.feasible {
                continue;
            }
            if cluster.len() <= TRIPLE_SCAN_LIMIT {
                let mut combo = [0, 1, 2];
                loop {
                    let tri: Vec<usize> = combo.iter().map(|&c| cluster[c]).collect();
                    try_triple(instance, t, &points, &tri, &mut pool)?;
                    if !next_combination(&mut combo, cluster.len()) {
                        break;
                    }
                }
            } else {
                for w in cert.witnesses.iter().filter(|w| w.len() == 3) {
                    try_triple(instance, t, &points, w, &mut pool)?;
                }
            }
        }
    }
    Ok(filter_dominated(pool))
}

fn try_triple(instance: &Instance, t: usize, points: &[Point], tri: &[usize], pool: &mut CutPool) -> Result<()> {
    let ty = &instance.continuous_types()[t];
    for a in 0..3 {
        for b in a + 1..3 {
            if pair_incompatible(&points[tri[a]], &points[tri[b]], instance, t) {
                return Ok(());
            }
        }
    }
    if !cluster_feasible(tri, points, ty.radius, ty.norm)?.feasible {
        pool.insert(Cut::new(t, tri.to_vec()), CutOrigin::ClusteringPool);
    }
    Ok(())
}

/// Drops every cut whose member set strictly contains another cut of the
/// same type; the smaller cut implies it.
pub fn filter_dominated(pool: CutPool) -> CutPool {
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by_key(|&i| pool.cuts[i].members.len());
    let mut keep = vec![true; pool.len()];
    for (pos, &i) in order.iter().enumerate() {
        let big = &pool.cuts[i];
        for &j in &order[..pos] {
            let small = &pool.cuts[j];
            if keep[j]
                && small.type_index == big.type_index
                && small.members.len() < big.members.len()
                && is_subset(&small.members, &big.members)
            {
                keep[i] = false;
                break;
            }
        }
    }
    let mut out = CutPool::new();
    for (i, (c, o)) in pool.cuts.into_iter().zip(pool.origins).enumerate() {
        if keep[i] {
            out.insert(c, o);
        }
    }
    out
}

/// Both slices sorted ascending.
fn is_subset(small: &[usize], big: &[usize]) -> bool {
    let mut it = big.iter();
    small.iter().all(|s| it.any(|b| b == s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{min_enclosing_ball, NormSpec};
    use crate::model::{ContinuousType, DemandPoint};

    fn inst(points: &[(f64, f64)], rho: f64, p: usize) -> Instance {
        let demand = points.iter().map(|&(x, y)| DemandPoint { point: Point::xy(x, y), weight: 1.0 }).collect();
        Instance::new(2, demand, vec![], vec![ContinuousType::new(NormSpec::L2, rho, p)]).unwrap()
    }

    fn assign(instance: &Instance, slots: &[&[usize]]) -> Assignment {
        let mut a = Assignment::empty(instance);
        for (k, members) in slots.iter().enumerate() {
            for &i in *members {
                a.continuous_cover[0][k][i] = true;
            }
        }
        a
    }

    #[test]
    fn tangent_pair_has_no_cut() {
        assert!(two_wise_cuts(&inst(&[(0.0, 0.0), (2.0, 0.0)], 1.0, 1), 0).is_empty());
        let pool = two_wise_cuts(&inst(&[(0.0, 0.0), (2.01, 0.0)], 1.0, 1), 0);
        assert_eq!(pool.cuts(), &[Cut::new(0, vec![0, 1])]);
    }

    #[test]
    fn singletons_separate_to_nothing() {
        let i = inst(&[(0.0, 0.0), (5.0, 0.0)], 1.0, 2);
        assert!(separate(&assign(&i, &[&[0], &[1]]), &i).unwrap().is_empty());
    }

    #[test]
    fn far_pair_separates_to_pair_cut() {
        let i = inst(&[(0.0, 0.0), (5.0, 0.0)], 1.0, 1);
        assert_eq!(separate(&assign(&i, &[&[0, 1]]), &i).unwrap(), vec![Cut::new(0, vec![0, 1])]);
    }

    #[test]
    fn equilateral_triangle_gives_triple_cut() {
        let h = 3f64.sqrt() / 2.0;
        let i = inst(&[(0.0, 0.0), (1.0, 0.0), (0.5, h)], 0.57, 1);
        assert_eq!(separate(&assign(&i, &[&[0, 1, 2]]), &i).unwrap(), vec![Cut::new(0, vec![0, 1, 2])]);
    }

    #[test]
    fn spread_points_give_empty_pool() {
        let i = inst(&[(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)], 1.0, 1);
        assert!(initial_cut_pool(&i, 0, &DEFAULT_POOL_EPS).unwrap().is_empty());
    }

    #[test]
    fn tight_triangle_enters_pool() {
        // Side 1.8ρ: pairs compatible, circumradius 1.8/√3 ≈ 1.039ρ > ρ.
        let rho = 1.0;
        let s = 1.8;
        let pts = [(0.0, 0.0), (s, 0.0), (s / 2.0, s * 3f64.sqrt() / 2.0)];
        let i = inst(&pts, rho, 1);
        let all: Vec<Point> = pts.iter().map(|&(x, y)| Point::xy(x, y)).collect();
        assert!(min_enclosing_ball(&all, NormSpec::L2).unwrap().1 > rho);
        let pool = initial_cut_pool(&i, 0, &[0.85 * rho]).unwrap();
        assert_eq!(pool.cuts(), &[Cut::new(0, vec![0, 1, 2])]);
        assert_eq!(pool.origins(), &[CutOrigin::ClusteringPool]);
    }

    #[test]
    fn dominance_filtering() {
        let mut p = CutPool::new();
        p.insert(Cut::new(0, vec![1, 2, 3]), CutOrigin::ThreeWise);
        p.insert(Cut::new(0, vec![1, 2]), CutOrigin::Pairwise);
        p.insert(Cut::new(0, vec![5, 6]), CutOrigin::Pairwise);
        p.insert(Cut::new(1, vec![1, 2, 3]), CutOrigin::ThreeWise);
        assert!(!p.insert(Cut::new(0, vec![2, 1]), CutOrigin::Pairwise));
        let f = filter_dominated(p);
        assert_eq!(f.cuts(), &[Cut::new(0, vec![1, 2]), Cut::new(0, vec![5, 6]), Cut::new(1, vec![1, 2, 3])]);
    }
}
