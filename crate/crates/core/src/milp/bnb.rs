//! Best-first branch-and-bound with lazily separated constraints.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use super::simplex::{LpEngine, LpStatus};
use super::{Constraint, LinearModel, SolveLimits};
use crate::error::{Error, Result};

const OBJ_TOL: f64 = 1e-6;
const CUT_VIOLATION: f64 = 1e-6;

/// A family of rows returned together by the callback; at least one of them
/// must cut off the candidate it was produced for.
#[derive(Clone, Debug, PartialEq)]
pub struct LazyCut {
    pub rows: Vec<Constraint>,
}

impl LazyCut {
    pub fn single(row: Constraint) -> Self {
        LazyCut { rows: vec![row] }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Accept,
    Reject(Vec<LazyCut>),
}

/// Inspects integer-feasible candidates.
pub trait LazyCallback {
    fn check(&mut self, values: &[f64]) -> Result<Verdict>;
}

impl<F: FnMut(&[f64]) -> Result<Verdict>> LazyCallback for F {
    fn check(&mut self, values: &[f64]) -> Result<Verdict> {
        self(values)
    }
}

/// Callback that accepts every candidate.
#[derive(Clone, Copy, Debug, Default)]
pub struct AcceptAll;

impl LazyCallback for AcceptAll {
    fn check(&mut self, _: &[f64]) -> Result<Verdict> {
        Ok(Verdict::Accept)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BnBStatus {
    /// Proven optimal within the gap tolerance.
    Optimal,
    /// A limit was hit while holding an incumbent.
    Feasible,
    Infeasible,
    /// A limit was hit before any incumbent was found.
    Limit,
}

impl std::fmt::Display for BnBStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BnBStatus::Optimal => "optimal",
            BnBStatus::Feasible => "feasible",
            BnBStatus::Infeasible => "infeasible",
            BnBStatus::Limit => "limit",
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BnBStats {
    pub nodes: u64,
    pub lp_iterations: u64,
    pub callbacks: u64,
    pub cuts_added: u64,
    pub lp_time: Duration,
    pub callback_time: Duration,
    pub total_time: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BnBResult {
    pub status: BnBStatus,
    pub values: Option<Vec<f64>>,
    /// Incumbent objective, −∞ without an incumbent.
    pub objective: f64,
    pub bound: f64,
    pub gap: f64,
    pub stats: BnBStats,
}

pub(crate) fn relative_gap(bound: f64, objective: f64) -> f64 {
    if !objective.is_finite() {
        return f64::INFINITY;
    }
    ((bound - objective) / objective.abs().max(1e-10)).max(0.0)
}

struct Node {
    bound: f64,
    depth: usize,
    seq: u64,
    /// Bound changes along the path from the root: (var, lower, upper).
    fixings: Vec<(usize, f64, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // Max-heap order: larger bound, then deeper, then earlier.
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound.total_cmp(&other.bound).then(self.depth.cmp(&other.depth)).then(other.seq.cmp(&self.seq))
    }
}

/// Maximizes `model`; rows returned by `callback` are appended to `model`.
pub fn branch_and_bound(
    model: &mut LinearModel,
    callback: &mut dyn LazyCallback,
    limits: &SolveLimits,
) -> Result<BnBResult> {
    model.validate()?;
    limits.validate()?;
    let start = Instant::now();
    let n = model.num_vars();
    let base_lo: Vec<f64> = model.variables().iter().map(|v| v.lower).collect();
    let base_hi: Vec<f64> = model.variables().iter().map(|v| v.upper).collect();
    let integer: Vec<bool> = model.variables().iter().map(|v| v.integer).collect();
    let integral_obj = model.integral_objective();

    let mut stats = BnBStats::default();
    let mut engine = LpEngine::new(model);
    engine.deadline = limits.time_limit.map(|t| start + t);
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Node { bound: f64::INFINITY, depth: 0, seq, fixings: Vec::new() });

    let mut incumbent: Option<Vec<f64>> = None;
    let mut inc_obj = f64::NEG_INFINITY;
    let mut best_bound = f64::INFINITY;
    let mut limit_hit = false;
    let mut lo = base_lo.clone();
    let mut hi = base_hi.clone();

    let round_bound = |b: f64| if integral_obj { (b + OBJ_TOL).floor() } else { b };
    let prunable = |bound: f64, inc: f64| bound <= inc + OBJ_TOL;

    while let Some(node) = heap.pop() {
        if prunable(node.bound, inc_obj) {
            continue;
        }
        let over_time = limits.time_limit.is_some_and(|t| start.elapsed() >= t);
        let over_nodes = limits.node_limit.is_some_and(|k| stats.nodes >= k);
        if over_time || over_nodes {
            best_bound = best_bound.min(node.bound);
            heap.push(node);
            limit_hit = true;
            break;
        }
        stats.nodes += 1;

        lo.copy_from_slice(&base_lo);
        hi.copy_from_slice(&base_hi);
        for &(j, l, u) in &node.fixings {
            lo[j] = l;
            hi[j] = u;
        }
        engine.set_bounds(&lo, &hi);

        let mut interrupted = false;
        let branch = loop {
            let t0 = Instant::now();
            let before = engine.iterations;
            let status = engine.solve(model)?;
            stats.lp_iterations += engine.iterations - before;
            stats.lp_time += t0.elapsed();
            match status {
                LpStatus::Infeasible => break None,
                LpStatus::Unbounded => {
                    return Err(Error::solver("relaxation is unbounded"));
                }
                LpStatus::Interrupted => {
                    interrupted = true;
                    break None;
                }
                LpStatus::Optimal => {}
            }
            let x = engine.primal();
            let bound = round_bound(model.objective_value(&x)).min(node.bound);
            if prunable(bound, inc_obj) {
                break None;
            }
            let mut pick: Option<(usize, f64)> = None;
            for j in 0..n {
                if !integer[j] {
                    continue;
                }
                let frac = (x[j] - x[j].floor()).min(x[j].ceil() - x[j]);
                if frac > limits.integrality && pick.is_none_or(|(_, f)| frac > f) {
                    pick = Some((j, frac));
                }
            }
            if let Some((j, _)) = pick {
                break Some((j, x[j], bound));
            }

            let mut cand = x;
            for j in 0..n {
                if integer[j] {
                    cand[j] = cand[j].round();
                }
            }
            stats.callbacks += 1;
            let t0 = Instant::now();
            let verdict = callback.check(&cand);
            stats.callback_time += t0.elapsed();
            match verdict? {
                Verdict::Accept => {
                    let mut obj = model.objective_value(&cand);
                    if integral_obj {
                        obj = obj.round();
                    }
                    if obj > inc_obj {
                        inc_obj = obj;
                        incumbent = Some(cand);
                    }
                    break None;
                }
                Verdict::Reject(cuts) => {
                    if cuts.is_empty() {
                        return Err(Error::contract("callback rejected a candidate without cuts"));
                    }
                    for cut in &cuts {
                        let cuts_off = cut.rows.iter().any(|r| r.violation(&cand) > CUT_VIOLATION);
                        if !cuts_off {
                            let name = cut.rows.first().map_or("<empty>", |r| r.name.as_str());
                            return Err(Error::contract(format!("lazy cut {name} does not cut off the candidate")));
                        }
                    }
                    for cut in cuts {
                        for row in cut.rows {
                            stats.cuts_added += 1;
                            model.add_constraint(row);
                        }
                    }
                    model.validate()?;
                }
            }
        };

        if interrupted {
            best_bound = best_bound.min(node.bound);
            heap.push(node);
            limit_hit = true;
            break;
        }
        if let Some((j, v, bound)) = branch {
            let mut up = node.fixings.clone();
            up.push((j, v.ceil(), hi[j]));
            let mut down = node.fixings;
            down.push((j, lo[j], v.floor()));
            seq += 1;
            heap.push(Node { bound, depth: node.depth + 1, seq, fixings: up });
            seq += 1;
            heap.push(Node { bound, depth: node.depth + 1, seq, fixings: down });
        }

        let open = heap.iter().map(|nd| nd.bound).fold(f64::NEG_INFINITY, f64::max);
        best_bound = best_bound.min(open.max(inc_obj));
        if incumbent.is_some() && relative_gap(best_bound, inc_obj) <= limits.gap {
            break;
        }
    }

    if !limit_hit {
        let open = heap.iter().map(|nd| nd.bound).filter(|&b| !prunable(b, inc_obj)).fold(f64::NEG_INFINITY, f64::max);
        best_bound = best_bound.min(open.max(inc_obj));
    }
    stats.total_time = start.elapsed();
    let status = match (&incumbent, limit_hit) {
        (Some(_), false) => BnBStatus::Optimal,
        (Some(_), true) => {
            if relative_gap(best_bound, inc_obj) <= limits.gap {
                BnBStatus::Optimal
            } else {
                BnBStatus::Feasible
            }
        }
        (None, false) => BnBStatus::Infeasible,
        (None, true) => BnBStatus::Limit,
    };
    let bound = if status == BnBStatus::Infeasible { f64::NEG_INFINITY } else { best_bound };
    Ok(BnBResult { status, gap: relative_gap(bound, inc_obj), values: incumbent, objective: inc_obj, bound, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{Relation, VarId};

    fn solve(model: &mut LinearModel) -> BnBResult {
        branch_and_bound(model, &mut AcceptAll, &SolveLimits::unlimited()).unwrap()
    }

    #[test]
    fn binary_pair() {
        let mut m = LinearModel::new();
        let x = m.add_binary("x", 1.0);
        let y = m.add_binary("y", 1.0);
        m.add_constraint(Constraint::new("c", vec![(x, 1.0), (y, 1.0)], Relation::Le, 1.0));
        let r = solve(&mut m);
        assert_eq!(r.status, BnBStatus::Optimal);
        assert_eq!(r.objective, 1.0);
    }

    #[test]
    fn knapsack_matches_enumeration() {
        let w = [3.0, 2.0, 2.0];
        let mut m = LinearModel::new();
        let v: Vec<VarId> = w.iter().enumerate().map(|(i, &c)| m.add_binary(format!("v{i}"), c)).collect();
        m.add_constraint(Constraint::new("cap", v.iter().map(|&x| (x, 2.0)).collect(), Relation::Le, 4.0));
        let mut best = f64::NEG_INFINITY;
        for mask in 0..8u32 {
            let pick: Vec<usize> = (0..3).filter(|i| mask >> i & 1 == 1).collect();
            if 2 * pick.len() <= 4 {
                best = best.max(pick.iter().map(|&i| w[i]).sum());
            }
        }
        let r = solve(&mut m);
        assert_eq!(best, 5.0);
        assert_eq!(r.objective, best);
    }

    #[test]
    fn infeasible_model() {
        let mut m = LinearModel::new();
        let x = m.add_binary("x", 1.0);
        m.add_constraint(Constraint::new("c", vec![(x, 2.0)], Relation::Eq, 1.0));
        assert_eq!(solve(&mut m).status, BnBStatus::Infeasible);
    }

    #[test]
    fn lazy_triple_cut_added_once() {
        // Three points each coverable by one facility slot; no slot may take all three.
        let mut m = LinearModel::new();
        let z: Vec<VarId> = (0..3).map(|i| m.add_binary(format!("z{i}"), 1.0)).collect();
        let mut calls = 0;
        let mut cb = |x: &[f64]| -> Result<Verdict> {
            if x.iter().sum::<f64>() > 2.5 {
                calls += 1;
                let terms = z.iter().map(|&v| (v, 1.0)).collect();
                Ok(Verdict::Reject(vec![LazyCut::single(Constraint::new("w3", terms, Relation::Le, 2.0))]))
            } else {
                Ok(Verdict::Accept)
            }
        };
        let r = branch_and_bound(&mut m, &mut cb, &SolveLimits::unlimited()).unwrap();
        assert_eq!(calls, 1);
        assert_eq!(r.objective, 2.0);
        assert_eq!(r.stats.cuts_added, 1);
    }

    #[test]
    fn non_violated_cut_is_contract_error() {
        let mut m = LinearModel::new();
        let x = m.add_binary("x", 1.0);
        let mut cb = |_: &[f64]| -> Result<Verdict> {
            Ok(Verdict::Reject(vec![LazyCut::single(Constraint::new("bad", vec![(x, 1.0)], Relation::Le, 1.0))]))
        };
        let err = branch_and_bound(&mut m, &mut cb, &SolveLimits::unlimited()).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn node_limit_reports_limit_status() {
        let mut m = LinearModel::new();
        let v: Vec<VarId> = (0..6).map(|i| m.add_binary(format!("v{i}"), 1.0 + i as f64 * 0.1)).collect();
        m.add_constraint(Constraint::new("cap", v.iter().map(|&x| (x, 2.0)).collect(), Relation::Le, 5.0));
        let limits = SolveLimits { node_limit: Some(1), ..SolveLimits::unlimited() };
        let r = branch_and_bound(&mut m, &mut AcceptAll, &limits).unwrap();
        assert!(matches!(r.status, BnBStatus::Limit | BnBStatus::Feasible));
        assert!(r.bound >= 2.0);
    }
}
