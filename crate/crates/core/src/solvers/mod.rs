//! End-to-end solves: branch-and-cut, candidate-set IP, sequential baselines
//! and exhaustive enumeration.

mod brute;

pub use brute::{brute_force, BRUTE_FORCE_LIMIT};

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::geometry::{cluster_feasible, Point};
use crate::milp::{
    branch_and_bound, relative_gap, AcceptAll, BnBResult, BnBStatus, LazyCallback, LazyCut, SolveLimits, Verdict,
};
use crate::model::{
    add_clique_rows, assign_from_facilities, bips_ip_from_candidates, build_bips, build_incomplete_ip,
    check_separation_norm, evaluate, Assignment, Cut, Instance, IpLayout, Solution,
};
use crate::separation::{initial_cut_pool, separate, CutPool, DEFAULT_POOL_EPS};

/// Reference to one facility type of an instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TypeRef {
    Discrete(usize),
    Continuous(usize),
}

impl fmt::Display for TypeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeRef::Discrete(t) => write!(f, "d{t}"),
            TypeRef::Continuous(t) => write!(f, "c{t}"),
        }
    }
}

/// Stages of a sequential solve, e.g. `d0>c0+c1` (discrete type 0 first, then
/// both continuous types together).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageOrder(pub Vec<Vec<TypeRef>>);

impl StageOrder {
    /// All discrete types first, then all continuous types.
    pub fn discrete_first(instance: &Instance) -> Self {
        Self::split(instance, true)
    }

    /// All continuous types first, then all discrete types.
    pub fn continuous_first(instance: &Instance) -> Self {
        Self::split(instance, false)
    }

    fn split(instance: &Instance, discrete_first: bool) -> Self {
        let d: Vec<TypeRef> = (0..instance.discrete_types().len()).map(TypeRef::Discrete).collect();
        let c: Vec<TypeRef> = (0..instance.continuous_types().len()).map(TypeRef::Continuous).collect();
        let stages = if discrete_first { vec![d, c] } else { vec![c, d] };
        StageOrder(stages.into_iter().filter(|s| !s.is_empty()).collect())
    }

    /// Every type of `instance` must appear exactly once.
    pub fn validate(&self, instance: &Instance) -> Result<()> {
        let mut seen: Vec<TypeRef> = self.0.iter().flatten().copied().collect();
        seen.sort();
        let mut expected: Vec<TypeRef> = (0..instance.discrete_types().len()).map(TypeRef::Discrete).collect();
        expected.extend((0..instance.continuous_types().len()).map(TypeRef::Continuous));
        if seen != expected {
            return Err(Error::input(format!(
                "stage order {self} must list every facility type exactly once ({} types)",
                expected.len()
            )));
        }
        Ok(())
    }
}

impl FromStr for StageOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut stages = Vec::new();
        for stage in s.split('>') {
            let mut refs = Vec::new();
            for item in stage.split('+') {
                let item = item.trim();
                let parse = |rest: &str| {
                    rest.parse::<usize>()
                        .map_err(|_| Error::input(format!("bad facility type `{item}` in order `{s}`")))
                };
                if let Some(rest) = item.strip_prefix('d') {
                    refs.push(TypeRef::Discrete(parse(rest)?));
                } else if let Some(rest) = item.strip_prefix('c') {
                    refs.push(TypeRef::Continuous(parse(rest)?));
                } else {
                    return Err(Error::input(format!("bad facility type `{item}` in order `{s}`")));
                }
            }
            stages.push(refs);
        }
        Ok(StageOrder(stages))
    }
}

impl fmt::Display for StageOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (s, stage) in self.0.iter().enumerate() {
            if s > 0 {
                f.write_str(">")?;
            }
            for (i, t) in stage.iter().enumerate() {
                if i > 0 {
                    f.write_str("+")?;
                }
                write!(f, "{t}")?;
            }
        }
        Ok(())
    }
}

/// Exact method used for a solve or for each stage of a sequential solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StageMethod {
    Bnc,
    Bips,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Method {
    Bnc,
    Bips,
    Sequential(StageOrder),
    Brute,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Bnc => f.write_str("bnc"),
            Method::Bips => f.write_str("bips"),
            Method::Sequential(order) => write!(f, "seq({order})"),
            Method::Brute => f.write_str("brute"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    pub limits: SolveLimits,
    pub symmetry: bool,
    /// Initial-pool thresholds as multiples of each type's radius; empty disables the pool.
    pub pool_eps: Vec<f64>,
    /// Solver for the stages of a sequential solve.
    pub stage_method: StageMethod,
    /// Add clique rows over the pairwise incompatibilities.
    pub cliques: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            limits: SolveLimits::default(),
            symmetry: true,
            pool_eps: DEFAULT_POOL_EPS.to_vec(),
            stage_method: StageMethod::Bnc,
            cliques: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveStats {
    pub total: Duration,
    /// Branch-and-bound time excluding the callback.
    pub solving: Duration,
    pub preprocessing: Duration,
    pub constraint_generation: Duration,
    pub callback: Duration,
    /// Rows of the final model.
    pub constraints: usize,
    /// Incompatibility rows present before solving (all slots counted).
    pub static_cut_rows: usize,
    pub pool_cuts: usize,
    /// Cuts returned by the separation oracle.
    pub lazy_cuts: u64,
    pub lazy_rows: u64,
    pub callbacks: u64,
    pub nodes: u64,
    pub lp_iterations: u64,
}

impl SolveStats {
    fn absorb(&mut self, other: &SolveStats) {
        self.solving += other.solving;
        self.preprocessing += other.preprocessing;
        self.constraint_generation += other.constraint_generation;
        self.callback += other.callback;
        self.constraints += other.constraints;
        self.static_cut_rows += other.static_cut_rows;
        self.pool_cuts += other.pool_cuts;
        self.lazy_cuts += other.lazy_cuts;
        self.lazy_rows += other.lazy_rows;
        self.callbacks += other.callbacks;
        self.nodes += other.nodes;
        self.lp_iterations += other.lp_iterations;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub method: Method,
    pub status: BnBStatus,
    pub solution: Solution,
    pub bound: f64,
    pub gap: f64,
    pub stats: SolveStats,
    /// Cuts returned by the separation oracle, in the order they were added.
    pub cuts: Vec<Cut>,
}

impl SolveReport {
    pub fn objective(&self) -> f64 {
        self.solution.objective
    }

    pub fn is_optimal(&self) -> bool {
        self.status == BnBStatus::Optimal
    }
}

/// Dispatches on `method`.
pub fn solve(instance: &Instance, method: &Method, options: &SolveOptions) -> Result<SolveReport> {
    match method {
        Method::Bnc => solve_bnc(instance, options),
        Method::Bips => solve_bips(instance, options),
        Method::Sequential(order) => solve_sequential(instance, order, options),
        Method::Brute => brute_force(instance),
    }
}

struct Separator<'a> {
    instance: &'a Instance,
    layout: &'a IpLayout,
    cuts: Vec<Cut>,
}

impl LazyCallback for Separator<'_> {
    fn check(&mut self, values: &[f64]) -> Result<Verdict> {
        let candidate = self.layout.decode(values);
        let cuts = separate(&candidate, self.instance)?;
        if cuts.is_empty() {
            return Ok(Verdict::Accept);
        }
        let verdict = Verdict::Reject(cuts.iter().map(|c| LazyCut { rows: self.layout.rows_for(c) }).collect());
        self.cuts.extend(cuts);
        Ok(verdict)
    }
}

/// Placeholder facilities used when a solve ends without an incumbent.
fn fallback_facilities(instance: &Instance) -> (Vec<Vec<usize>>, Vec<Vec<Point>>) {
    let open = instance.discrete_types().iter().map(|t| (0..t.count).collect()).collect();
    let centers = instance.continuous_types().iter().map(|t| vec![instance.point(0).clone(); t.count]).collect();
    (open, centers)
}

fn finish(
    instance: &Instance,
    method: Method,
    result: &BnBResult,
    facilities: (Vec<Vec<usize>>, Vec<Vec<Point>>),
    mut stats: SolveStats,
    start: Instant,
) -> SolveReport {
    let (open, centers) = facilities;
    let assignment = assign_from_facilities(instance, &open, &centers);
    let mut solution = Solution { assignment, continuous_centers: centers, objective: 0.0 };
    solution.objective = evaluate(instance, &solution).objective;
    stats.nodes += result.stats.nodes;
    stats.lp_iterations += result.stats.lp_iterations;
    stats.callbacks += result.stats.callbacks;
    stats.lazy_rows += result.stats.cuts_added;
    stats.callback += result.stats.callback_time;
    stats.solving += result.stats.total_time.saturating_sub(result.stats.callback_time);
    stats.total = start.elapsed();
    let (bound, gap) = if result.status == BnBStatus::Infeasible {
        (f64::NEG_INFINITY, f64::INFINITY)
    } else {
        let b = result.bound.max(solution.objective);
        (b, relative_gap(b, solution.objective))
    };
    SolveReport { method, status: result.status, solution, bound, gap, stats, cuts: Vec::new() }
}

/// Minimum-enclosing-ball centers of each slot cluster; empty slots sit on the
/// first demand point.
pub fn recover_centers(instance: &Instance, assignment: &Assignment) -> Result<Vec<Vec<Point>>> {
    let points = instance.points();
    let mut out = Vec::new();
    for (t, ty) in instance.continuous_types().iter().enumerate() {
        let slots = assignment.continuous_cover.get(t).map_or(0, Vec::len);
        let mut centers = Vec::with_capacity(slots);
        for k in 0..slots {
            let q = assignment.cluster(t, k);
            if q.is_empty() {
                centers.push(instance.point(0).clone());
                continue;
            }
            let cert = cluster_feasible(&q, &points, ty.radius, ty.norm)?;
            match cert.center {
                Some(c) if cert.feasible => centers.push(c),
                _ => {
                    return Err(Error::contract(format!(
                        "slot {k} of continuous type {t} holds an infeasible cluster (radius {})",
                        cert.radius
                    )))
                }
            }
        }
        out.push(centers);
    }
    Ok(out)
}

/// Branch-and-cut over the assignment formulation with lazy cluster cuts.
pub fn solve_bnc(instance: &Instance, options: &SolveOptions) -> Result<SolveReport> {
    let start = Instant::now();
    check_separation_norm(instance)?;
    let mut stats = SolveStats::default();

    let t0 = Instant::now();
    let mut pool = CutPool::new();
    if !options.pool_eps.is_empty() {
        for (t, ty) in instance.continuous_types().iter().enumerate() {
            if ty.count == 0 {
                continue;
            }
            let eps: Vec<f64> = options.pool_eps.iter().map(|e| e * ty.radius).collect();
            pool.extend(initial_cut_pool(instance, t, &eps)?);
        }
    }
    stats.preprocessing = t0.elapsed();
    stats.pool_cuts = pool.len();

    let t1 = Instant::now();
    let mut ip = build_incomplete_ip(instance, pool.cuts(), options.symmetry)?;
    if options.cliques {
        add_clique_rows(&mut ip, instance);
    }
    stats.constraint_generation = t1.elapsed();
    stats.static_cut_rows = ip.cut_rows;

    let mut sep = Separator { instance, layout: &ip.layout, cuts: Vec::new() };
    let result = branch_and_bound(&mut ip.model, &mut sep, &options.limits.remaining(start.elapsed()))?;
    stats.lazy_cuts = sep.cuts.len() as u64;
    stats.constraints = ip.model.num_constraints();

    let facilities = match &result.values {
        Some(v) => {
            let a = ip.layout.decode(v);
            (a.open_sites.clone(), recover_centers(instance, &a)?)
        }
        None => fallback_facilities(instance),
    };
    let mut report = finish(instance, Method::Bnc, &result, facilities, stats, start);
    report.cuts = sep.cuts;
    Ok(report)
}

/// Candidate-set formulation over pairwise circle intersections.
pub fn solve_bips(instance: &Instance, options: &SolveOptions) -> Result<SolveReport> {
    let start = Instant::now();
    let mut stats = SolveStats::default();
    let t0 = Instant::now();
    let candidates =
        (0..instance.continuous_types().len()).map(|t| build_bips(instance, t)).collect::<Result<Vec<_>>>()?;
    stats.preprocessing = t0.elapsed();

    let t1 = Instant::now();
    let mut bm = bips_ip_from_candidates(instance, candidates)?;
    stats.constraint_generation = t1.elapsed();

    let result = branch_and_bound(&mut bm.model, &mut AcceptAll, &options.limits.remaining(start.elapsed()))?;
    stats.constraints = bm.model.num_constraints();
    let facilities = match &result.values {
        Some(v) => {
            let (open, mut centers) = bm.decode(v);
            for (t, ty) in instance.continuous_types().iter().enumerate() {
                if let Some(last) = centers[t].last().cloned() {
                    centers[t].resize(ty.count, last);
                }
            }
            (open, centers)
        }
        None => fallback_facilities(instance),
    };
    Ok(finish(instance, Method::Bips, &result, facilities, stats, start))
}

/// Solves the stages of `order` one after another; demand covered by earlier
/// stages is worth nothing to later ones.
pub fn solve_sequential(instance: &Instance, order: &StageOrder, options: &SolveOptions) -> Result<SolveReport> {
    let start = Instant::now();
    order.validate(instance)?;
    let nd = instance.discrete_types().len();
    let nc = instance.continuous_types().len();
    let mut weights: Vec<f64> = instance.demand().iter().map(|d| d.weight).collect();
    let (mut open, mut centers) = fallback_facilities(instance);
    let mut stats = SolveStats::default();
    let mut status = BnBStatus::Optimal;
    let mut gap: f64 = 0.0;
    let mut cuts = Vec::new();

    for stage in &order.0 {
        let mut dc = vec![0; nd];
        let mut cc = vec![0; nc];
        for t in stage {
            match *t {
                TypeRef::Discrete(i) => dc[i] = instance.discrete_types()[i].count,
                TypeRef::Continuous(i) => cc[i] = instance.continuous_types()[i].count,
            }
        }
        if dc.iter().chain(&cc).all(|&c| c == 0) {
            continue;
        }
        let sub = instance.with_counts(&dc, &cc)?.with_weights(&weights)?;
        let stage_options = SolveOptions { limits: options.limits.remaining(start.elapsed()), ..options.clone() };
        let report = match options.stage_method {
            StageMethod::Bnc => solve_bnc(&sub, &stage_options)?,
            StageMethod::Bips => solve_bips(&sub, &stage_options)?,
        };
        stats.absorb(&report.stats);
        cuts.extend(report.cuts.iter().cloned());
        status = match (status, report.status) {
            (BnBStatus::Optimal, s) => s,
            (s, _) => s,
        };
        gap = gap.max(report.gap);
        for t in stage {
            match *t {
                TypeRef::Discrete(i) => open[i] = report.solution.assignment.open_sites[i].clone(),
                TypeRef::Continuous(i) => centers[i] = report.solution.continuous_centers[i].clone(),
            }
        }
        let covered = evaluate(&sub, &report.solution).covered;
        for (w, c) in weights.iter_mut().zip(covered) {
            if c {
                *w = 0.0;
            }
        }
    }

    let assignment = assign_from_facilities(instance, &open, &centers);
    let mut solution = Solution { assignment, continuous_centers: centers, objective: 0.0 };
    solution.objective = evaluate(instance, &solution).objective;
    stats.total = start.elapsed();
    let bound = if status == BnBStatus::Optimal { solution.objective } else { f64::NAN };
    Ok(SolveReport { method: Method::Sequential(order.clone()), status, solution, bound, gap, stats, cuts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{dist, NormSpec, TOL};
    use crate::model::{ContinuousType, DemandPoint, DiscreteType};

    fn inst(points: &[(f64, f64)], rho: f64, p: usize) -> Instance {
        let demand = points.iter().map(|&(x, y)| DemandPoint { point: Point::xy(x, y), weight: 1.0 }).collect();
        Instance::new(2, demand, vec![], vec![ContinuousType::new(NormSpec::L2, rho, p)]).unwrap()
    }

    fn opts() -> SolveOptions {
        SolveOptions { limits: SolveLimits::unlimited(), ..SolveOptions::default() }
    }

    #[test]
    fn single_point_bnc() {
        let i = inst(&[(0.2, 0.7)], 0.1, 1);
        let r = solve_bnc(&i, &opts()).unwrap();
        assert_eq!(r.objective(), 1.0);
        assert!(r.is_optimal());
    }

    #[test]
    fn crossing_pair_bips_and_bnc() {
        let i = inst(&[(0.0, 0.0), (1.0, 0.0)], 1.0, 1);
        let b = solve_bips(&i, &opts()).unwrap();
        assert_eq!(b.objective(), 2.0);
        let c = &b.solution.continuous_centers[0][0];
        assert!(dist(c, i.point(0), NormSpec::L2) <= 1.0 + TOL);
        assert!(dist(c, i.point(1), NormSpec::L2) <= 1.0 + TOL);
        assert_eq!(solve_bnc(&i, &opts()).unwrap().objective(), 2.0);
    }

    #[test]
    fn discrete_only_instance() {
        let pts = [(0.0, 0.0), (0.1, 0.0), (1.0, 1.0)];
        let demand: Vec<DemandPoint> =
            pts.iter().map(|&(x, y)| DemandPoint { point: Point::xy(x, y), weight: 1.0 }).collect();
        let sites = demand.iter().map(|d| d.point.clone()).collect();
        let dt = DiscreteType::new(sites, vec![0.2; 3], 1);
        let i = Instance::new(2, demand, vec![dt], vec![]).unwrap();
        assert_eq!(solve_bips(&i, &opts()).unwrap().objective(), 2.0);
        assert_eq!(solve_bnc(&i, &opts()).unwrap().objective(), 2.0);
    }

    #[test]
    fn recovered_centers() {
        let i = inst(&[(0.0, 0.0), (2.0, 0.0)], 1.0, 1);
        let mut a = Assignment::empty(&i);
        a.continuous_cover[0][0] = vec![true, true];
        let c = recover_centers(&i, &a).unwrap();
        assert!(dist(&c[0][0], &Point::xy(1.0, 0.0), NormSpec::L2) < 1e-12);
        a.continuous_cover[0][0] = vec![true, false];
        assert_eq!(recover_centers(&i, &a).unwrap()[0][0], Point::xy(0.0, 0.0));
        let far = inst(&[(0.0, 0.0), (3.0, 0.0)], 1.0, 1);
        let mut b = Assignment::empty(&far);
        b.continuous_cover[0][0] = vec![true, true];
        assert!(matches!(recover_centers(&far, &b), Err(Error::Contract(_))));
    }

    #[test]
    fn stage_order_syntax() {
        let o: StageOrder = "d0>c0+c1".parse().unwrap();
        assert_eq!(o.0, vec![vec![TypeRef::Discrete(0)], vec![TypeRef::Continuous(0), TypeRef::Continuous(1)]]);
        assert_eq!(o.to_string(), "d0>c0+c1");
        assert!("x1".parse::<StageOrder>().is_err());
    }

    #[test]
    fn single_stage_matches_integrated() {
        let pts = [(0.0, 0.0), (0.15, 0.0), (0.5, 0.5), (0.55, 0.5), (0.9, 0.1)];
        let i = inst(&pts, 0.1, 2);
        let seq = solve_sequential(&i, &StageOrder::continuous_first(&i), &opts()).unwrap();
        assert_eq!(seq.objective(), solve_bnc(&i, &opts()).unwrap().objective());
    }
}
