//! Instances, assignments and the two integer formulations.

mod formulation;

pub(crate) use formulation::check_separation_norm;
pub use formulation::{
    add_clique_rows, add_symmetry_breaking, bips_ip_from_candidates, build_bips, build_bips_ip, build_incomplete_ip,
    BipsModel, IpLayout, IpModel,
};

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{dist, within, NormSpec, Point};

#[derive(Clone, Debug, PartialEq)]
pub struct DemandPoint {
    pub point: Point,
    pub weight: f64,
}

/// Facilities opened at finitely many candidate sites, each with its own radius.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteType {
    pub sites: Vec<Point>,
    pub radii: Vec<f64>,
    pub count: usize,
    pub norm: NormSpec,
}

impl DiscreteType {
    pub fn new(sites: Vec<Point>, radii: Vec<f64>, count: usize) -> Self {
        DiscreteType { sites, radii, count, norm: NormSpec::L2 }
    }

    /// Whether site `j` covers `p`.
    pub fn covers(&self, j: usize, p: &Point) -> bool {
        within(&self.sites[j], p, self.radii[j], self.norm)
    }
}

/// Facilities placed anywhere in space with a common radius.
#[derive(Clone, Debug, PartialEq)]
pub struct ContinuousType {
    pub norm: NormSpec,
    pub radius: f64,
    pub count: usize,
}

impl ContinuousType {
    pub fn new(norm: NormSpec, radius: f64, count: usize) -> Self {
        ContinuousType { norm, radius, count }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    name: Option<String>,
    dim: usize,
    demand: Vec<DemandPoint>,
    discrete: Vec<DiscreteType>,
    continuous: Vec<ContinuousType>,
}

impl Instance {
    /// Validates every invariant and merges coincident demand points (their
    /// weights are summed, the first occurrence keeps its position).
    pub fn new(
        dim: usize,
        demand: Vec<DemandPoint>,
        discrete: Vec<DiscreteType>,
        continuous: Vec<ContinuousType>,
    ) -> Result<Self> {
        let mut problems = Vec::new();
        if dim == 0 {
            problems.push("dimension must be at least 1".to_string());
        }
        if demand.is_empty() {
            problems.push("at least one demand point is required".to_string());
        }
        for (i, d) in demand.iter().enumerate() {
            if d.point.dim() != dim {
                problems.push(format!("demand point {i} has dimension {}, expected {dim}", d.point.dim()));
            }
            if !d.point.is_finite() {
                problems.push(format!("demand point {i} has non-finite coordinates"));
            }
            if !(d.weight >= 0.0) || !d.weight.is_finite() {
                problems.push(format!("demand point {i} has weight {}, expected a finite value >= 0", d.weight));
            }
        }
        let mut discrete = discrete;
        for (t, ty) in discrete.iter_mut().enumerate() {
            if ty.sites.len() != ty.radii.len() {
                problems.push(format!("discrete type {t} has {} sites but {} radii", ty.sites.len(), ty.radii.len()));
            }
            if ty.count > ty.sites.len() {
                problems.push(format!(
                    "discrete type {t} asks for {} facilities but has {} sites",
                    ty.count,
                    ty.sites.len()
                ));
            }
            for (j, s) in ty.sites.iter().enumerate() {
                if s.dim() != dim || !s.is_finite() {
                    problems.push(format!("site {j} of discrete type {t} is not a finite {dim}-d point"));
                }
            }
            for (j, r) in ty.radii.iter().enumerate() {
                if !(*r > 0.0) || !r.is_finite() {
                    problems.push(format!("site {j} of discrete type {t} has radius {r}, expected > 0"));
                }
            }
            match ty.norm.normalized() {
                Ok(n) => ty.norm = n,
                Err(e) => problems.push(format!("discrete type {t}: {e}")),
            }
        }
        let mut continuous = continuous;
        for (t, ty) in continuous.iter_mut().enumerate() {
            if !(ty.radius > 0.0) || !ty.radius.is_finite() {
                problems.push(format!("continuous type {t} has radius {}, expected > 0", ty.radius));
            }
            match ty.norm.normalized() {
                Ok(n) => ty.norm = n,
                Err(e) => problems.push(format!("continuous type {t}: {e}")),
            }
        }
        let total: usize =
            discrete.iter().map(|t| t.count).sum::<usize>() + continuous.iter().map(|t| t.count).sum::<usize>();
        if total == 0 {
            problems.push("at least one facility must be requested".to_string());
        }
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }

        let mut merged: Vec<DemandPoint> = Vec::with_capacity(demand.len());
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
        for d in demand {
            // Normalize −0.0 so it merges with 0.0.
            let key: Vec<u64> = d.point.coords().iter().map(|c| (c + 0.0).to_bits()).collect();
            match seen.get(&key) {
                Some(&i) => merged[i].weight += d.weight,
                None => {
                    seen.insert(key, merged.len());
                    merged.push(d);
                }
            }
        }
        Ok(Instance { name: None, dim, demand: merged, discrete, continuous })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.demand.len()
    }

    pub fn demand(&self) -> &[DemandPoint] {
        &self.demand
    }

    pub fn point(&self, i: usize) -> &Point {
        &self.demand[i].point
    }

    pub fn points(&self) -> Vec<Point> {
        self.demand.iter().map(|d| d.point.clone()).collect()
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.demand[i].weight
    }

    pub fn discrete_types(&self) -> &[DiscreteType] {
        &self.discrete
    }

    pub fn continuous_types(&self) -> &[ContinuousType] {
        &self.continuous
    }

    pub fn total_weight(&self) -> f64 {
        self.demand.iter().map(|d| d.weight).sum()
    }

    /// True when every weight is an integer, so optimal objectives are integral.
    pub fn integral_weights(&self) -> bool {
        self.demand.iter().all(|d| d.weight.fract() == 0.0 && d.weight.abs() < 2f64.powi(52))
    }

    /// Same geometry with replaced weights. Used for residual-demand stages.
    pub fn with_weights(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.n() {
            return Err(Error::input(format!("expected {} weights, got {}", self.n(), weights.len())));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::input(format!("weight {w} is not a finite value >= 0")));
        }
        let mut out = self.clone();
        for (d, &w) in out.demand.iter_mut().zip(weights) {
            d.weight = w;
        }
        Ok(out)
    }

    /// Same instance with the facility counts replaced (discrete first, then continuous).
    pub fn with_counts(&self, discrete: &[usize], continuous: &[usize]) -> Result<Self> {
        if discrete.len() != self.discrete.len() || continuous.len() != self.continuous.len() {
            return Err(Error::input("count vector does not match the number of types"));
        }
        let mut out = self.clone();
        for (t, &c) in out.discrete.iter_mut().zip(discrete) {
            if c > t.sites.len() {
                return Err(Error::input(format!("count {c} exceeds the {} available sites", t.sites.len())));
            }
            t.count = c;
        }
        for (t, &c) in out.continuous.iter_mut().zip(continuous) {
            t.count = c;
        }
        Ok(out)
    }
}

/// Binary incidence of demand to facilities, mirroring the x, y and z variables.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Assignment {
    /// Per discrete type, the chosen site indices (ascending).
    pub open_sites: Vec<Vec<usize>>,
    /// Per discrete type, whether each demand point is credited to that type.
    pub discrete_cover: Vec<Vec<bool>>,
    /// Per continuous type and slot, whether each demand point is assigned to it.
    pub continuous_cover: Vec<Vec<Vec<bool>>>,
}

impl Assignment {
    pub fn empty(instance: &Instance) -> Self {
        let n = instance.n();
        Assignment {
            open_sites: vec![Vec::new(); instance.discrete_types().len()],
            discrete_cover: vec![vec![false; n]; instance.discrete_types().len()],
            continuous_cover: instance.continuous_types().iter().map(|t| vec![vec![false; n]; t.count]).collect(),
        }
    }

    /// Demand indices assigned to slot `k` of continuous type `t`.
    pub fn cluster(&self, t: usize, k: usize) -> Vec<usize> {
        self.continuous_cover[t][k].iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
    }
}

/// An incompatible set of demand points for one continuous type.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cut {
    pub type_index: usize,
    /// Sorted, distinct demand indices.
    pub members: Vec<usize>,
}

impl Cut {
    pub fn new(type_index: usize, mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        Cut { type_index, members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub assignment: Assignment,
    pub continuous_centers: Vec<Vec<Point>>,
    pub objective: f64,
}

/// Result of re-deriving coverage from geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub objective: f64,
    pub covered: Vec<bool>,
    pub violations: Vec<String>,
}

impl Evaluation {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// For each discrete type and demand index, the sites covering that point.
pub fn coverage_table(instance: &Instance) -> Vec<Vec<Vec<usize>>> {
    instance
        .discrete_types()
        .iter()
        .map(|ty| {
            instance
                .demand()
                .iter()
                .map(|d| (0..ty.sites.len()).filter(|&j| ty.covers(j, &d.point)).collect())
                .collect()
        })
        .collect()
}

/// Recomputes the covered weight from the open sites and centers and reports
/// every structural or geometric inconsistency of the stored flags.
pub fn evaluate(instance: &Instance, solution: &Solution) -> Evaluation {
    let n = instance.n();
    let a = &solution.assignment;
    let mut violations = Vec::new();
    let mut covered = vec![false; n];
    let mut marks = vec![0usize; n];

    let dts = instance.discrete_types();
    if a.open_sites.len() != dts.len() || a.discrete_cover.len() != dts.len() {
        violations.push(format!("expected data for {} discrete types", dts.len()));
    }
    for (t, ty) in dts.iter().enumerate() {
        let Some(open) = a.open_sites.get(t) else { continue };
        let mut sorted = open.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != open.len() {
            violations.push(format!("discrete type {t} opens a site twice"));
        }
        if open.len() != ty.count {
            violations.push(format!("discrete type {t} opens {} sites, expected {}", open.len(), ty.count));
        }
        let valid: Vec<usize> = sorted.iter().copied().filter(|&j| j < ty.sites.len()).collect();
        if valid.len() != sorted.len() {
            violations.push(format!("discrete type {t} opens a site index out of range"));
        }
        let flags = a.discrete_cover.get(t);
        if flags.is_some_and(|f| f.len() != n) {
            violations.push(format!("discrete type {t} cover flags have the wrong length"));
        }
        for i in 0..n {
            let hit = valid.iter().any(|&j| ty.covers(j, instance.point(i)));
            covered[i] |= hit;
            if flags.and_then(|f| f.get(i)).copied().unwrap_or(false) {
                marks[i] += 1;
                if !hit {
                    violations.push(format!("point {i} is credited to discrete type {t} but no open site covers it"));
                }
            }
        }
    }

    let cts = instance.continuous_types();
    if a.continuous_cover.len() != cts.len() || solution.continuous_centers.len() != cts.len() {
        violations.push(format!("expected data for {} continuous types", cts.len()));
    }
    for (t, ty) in cts.iter().enumerate() {
        let centers = solution.continuous_centers.get(t).map(Vec::as_slice).unwrap_or(&[]);
        if centers.len() != ty.count {
            violations.push(format!("continuous type {t} places {} centers, expected {}", centers.len(), ty.count));
        }
        for c in centers {
            if c.dim() != instance.dim() {
                violations.push(format!("continuous type {t} has a center of the wrong dimension"));
            }
        }
        let slots = a.continuous_cover.get(t).map(Vec::as_slice).unwrap_or(&[]);
        if slots.len() != ty.count {
            violations.push(format!("continuous type {t} has {} slots, expected {}", slots.len(), ty.count));
        }
        for i in 0..n {
            for c in centers.iter().filter(|c| c.dim() == instance.dim()) {
                if within(c, instance.point(i), ty.radius, ty.norm) {
                    covered[i] = true;
                }
            }
        }
        for (k, flags) in slots.iter().enumerate() {
            if flags.len() != n {
                violations.push(format!("slot {k} of continuous type {t} has the wrong length"));
            }
            for (i, &f) in flags.iter().enumerate().take(n) {
                if !f {
                    continue;
                }
                marks[i] += 1;
                let ok = centers
                    .get(k)
                    .is_some_and(|c| c.dim() == instance.dim() && within(c, instance.point(i), ty.radius, ty.norm));
                if !ok {
                    violations.push(format!(
                        "point {i} is assigned to slot {k} of continuous type {t} but lies outside its ball"
                    ));
                }
            }
        }
    }
    for (i, &m) in marks.iter().enumerate() {
        if m > 1 {
            violations.push(format!("point {i} is credited {m} times"));
        }
    }
    let objective = (0..n).filter(|&i| covered[i]).map(|i| instance.weight(i)).sum();
    Evaluation { objective, covered, violations }
}

/// Fills the assignment flags from open sites and centers: each covered point
/// is credited to its first covering discrete type, else its first covering slot.
pub fn assign_from_facilities(instance: &Instance, open_sites: &[Vec<usize>], centers: &[Vec<Point>]) -> Assignment {
    let n = instance.n();
    let mut a = Assignment::empty(instance);
    a.open_sites = open_sites.to_vec();
    for slots in a.continuous_cover.iter_mut().zip(centers) {
        slots.0.resize(slots.1.len(), vec![false; n]);
    }
    for i in 0..n {
        let p = instance.point(i);
        let disc = instance
            .discrete_types()
            .iter()
            .enumerate()
            .find(|(t, ty)| open_sites[*t].iter().any(|&j| ty.covers(j, p)));
        if let Some((t, _)) = disc {
            a.discrete_cover[t][i] = true;
            continue;
        }
        'types: for (t, ty) in instance.continuous_types().iter().enumerate() {
            for (k, c) in centers[t].iter().enumerate() {
                if dist(c, p, ty.norm) <= ty.radius + crate::geometry::TOL {
                    a.continuous_cover[t][k][i] = true;
                    break 'types;
                }
            }
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dp(x: f64, y: f64, w: f64) -> DemandPoint {
        DemandPoint { point: Point::xy(x, y), weight: w }
    }

    fn single_continuous(points: &[(f64, f64)], rho: f64, p: usize) -> Instance {
        let demand = points.iter().map(|&(x, y)| dp(x, y, 1.0)).collect();
        Instance::new(2, demand, vec![], vec![ContinuousType::new(NormSpec::L2, rho, p)]).unwrap()
    }

    #[test]
    fn coverage_is_closed() {
        let ty = DiscreteType::new(vec![Point::xy(0.5, 0.0)], vec![0.5], 1);
        let inst = Instance::new(2, vec![dp(0.0, 0.0, 1.0)], vec![ty], vec![]).unwrap();
        assert_eq!(coverage_table(&inst), vec![vec![vec![0]]]);
        let far = DiscreteType::new(vec![Point::xy(1.0, 0.0)], vec![0.5], 1);
        let inst = Instance::new(2, vec![dp(0.0, 0.0, 1.0)], vec![far], vec![]).unwrap();
        assert_eq!(coverage_table(&inst), vec![vec![Vec::<usize>::new()]]);
    }

    #[test]
    fn collinear_site_covers_three() {
        let ty = DiscreteType::new(vec![Point::xy(1.0, 0.0)], vec![1.0], 1);
        let demand = vec![dp(0.0, 0.0, 1.0), dp(1.0, 0.0, 1.0), dp(2.0, 0.0, 1.0)];
        let inst = Instance::new(2, demand, vec![ty], vec![]).unwrap();
        assert_eq!(coverage_table(&inst)[0], vec![vec![0], vec![0], vec![0]]);
    }

    #[test]
    fn duplicates_are_merged() {
        let inst = single_continuous(&[(0.0, 0.0)], 1.0, 1);
        assert_eq!(inst.n(), 1);
        let demand = vec![dp(0.2, 0.3, 2.0), dp(0.5, 0.5, 1.0), dp(0.2, 0.3, 3.0)];
        let inst = Instance::new(2, demand, vec![], vec![ContinuousType::new(NormSpec::L2, 0.1, 1)]).unwrap();
        assert_eq!(inst.n(), 2);
        assert_eq!(inst.weight(0), 5.0);
    }

    #[test]
    fn validation_lists_every_problem() {
        let demand = vec![dp(0.0, 0.0, -1.0)];
        let ty = DiscreteType::new(vec![Point::xy(0.0, 0.0)], vec![], 2);
        let err = Instance::new(2, demand, vec![ty], vec![]).unwrap_err();
        match err {
            Error::Validation(v) => assert!(v.len() >= 3, "{v:?}"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn empty_facility_set_scores_zero() {
        let inst = single_continuous(&[(0.0, 0.0), (1.0, 1.0)], 0.1, 1);
        let inst = inst.with_counts(&[], &[0]).unwrap();
        let sol = Solution { assignment: Assignment::empty(&inst), continuous_centers: vec![vec![]], objective: 0.0 };
        let ev = evaluate(&inst, &sol);
        assert_eq!(ev.objective, 0.0);
        assert!(ev.is_valid(), "{:?}", ev.violations);
    }

    #[test]
    fn single_center_on_point() {
        let inst = single_continuous(&[(0.3, 0.4)], 0.1, 1);
        let centers = vec![vec![Point::xy(0.3, 0.4)]];
        let a = assign_from_facilities(&inst, &[], &centers);
        let sol = Solution { assignment: a, continuous_centers: centers, objective: 1.0 };
        let ev = evaluate(&inst, &sol);
        assert_eq!(ev.objective, 1.0);
        assert!(ev.is_valid());
    }

    #[test]
    fn evaluation_flags_bad_assignments() {
        let inst = single_continuous(&[(0.0, 0.0), (1.0, 0.0)], 0.1, 1);
        let mut a = Assignment::empty(&inst);
        a.continuous_cover[0][0] = vec![true, true];
        let sol = Solution { assignment: a, continuous_centers: vec![vec![Point::xy(0.0, 0.0)]], objective: 2.0 };
        let ev = evaluate(&inst, &sol);
        assert_eq!(ev.objective, 1.0);
        assert_eq!(ev.violations.len(), 1);
    }
}
