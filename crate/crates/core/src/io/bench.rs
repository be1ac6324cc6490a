use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::generate::{generate_instance, GeneratorSpec};
use crate::error::{Error, Result};
use crate::geometry::NormSpec;
use crate::milp::BnBStatus;
use crate::model::{ContinuousType, Instance};
use crate::solvers::{solve, Method, SolveOptions, SolveReport};

/// One (instance, method) run. Times are in seconds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub instance: String,
    pub n: usize,
    /// Radii of all types, discrete types first, joined by `;`.
    pub rho: String,
    /// Facility counts in the same order as `rho`.
    pub p: String,
    pub method: String,
    /// Solver status, or `error` when the run failed.
    pub status: String,
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    #[serde(rename = "Total")]
    pub total: Option<f64>,
    #[serde(rename = "Solving")]
    pub solving: Option<f64>,
    #[serde(rename = "Prepr.")]
    pub preprocessing: Option<f64>,
    #[serde(rename = "Ctrs.Gen.")]
    pub constraint_generation: Option<f64>,
    #[serde(rename = "Callback")]
    pub callback: Option<f64>,
    #[serde(rename = "MIPGAP")]
    pub gap: Option<f64>,
    /// 1 when the run did not prove optimality.
    #[serde(rename = "#Unsolved")]
    pub unsolved: u8,
    #[serde(rename = "#Ctrs")]
    pub constraints: Option<usize>,
    #[serde(rename = "#Pool")]
    pub pool_cuts: Option<usize>,
    #[serde(rename = "#Lazy")]
    pub lazy_cuts: Option<u64>,
    #[serde(rename = "#Nodes")]
    pub nodes: Option<u64>,
    pub error: Option<String>,
}

fn describe(instance: &Instance) -> (String, String) {
    let mut rho = Vec::new();
    let mut p = Vec::new();
    for t in instance.discrete_types() {
        let r = t.radii.first().copied().unwrap_or(0.0);
        rho.push(if t.radii.iter().all(|&x| x == r) { r.to_string() } else { "mixed".to_string() });
        p.push(t.count.to_string());
    }
    for t in instance.continuous_types() {
        rho.push(t.radius.to_string());
        p.push(t.count.to_string());
    }
    (rho.join(";"), p.join(";"))
}

impl BenchmarkRow {
    fn new(name: &str, instance: &Instance, method: &Method, outcome: Result<SolveReport>) -> Self {
        let (rho, p) = describe(instance);
        let mut row = BenchmarkRow {
            instance: name.to_string(),
            n: instance.n(),
            rho,
            p,
            method: method.to_string(),
            status: "error".to_string(),
            objective: None,
            bound: None,
            total: None,
            solving: None,
            preprocessing: None,
            constraint_generation: None,
            callback: None,
            gap: None,
            unsolved: 1,
            constraints: None,
            pool_cuts: None,
            lazy_cuts: None,
            nodes: None,
            error: None,
        };
        match outcome {
            Ok(r) => {
                let s = &r.stats;
                row.status = r.status.to_string();
                row.objective = Some(r.objective());
                row.bound = r.bound.is_finite().then_some(r.bound);
                row.gap = r.gap.is_finite().then_some(r.gap);
                row.unsolved = u8::from(r.status != BnBStatus::Optimal);
                row.total = Some(s.total.as_secs_f64());
                row.solving = Some(s.solving.as_secs_f64());
                row.preprocessing = Some(s.preprocessing.as_secs_f64());
                row.constraint_generation = Some(s.constraint_generation.as_secs_f64());
                row.callback = Some(s.callback.as_secs_f64());
                row.constraints = Some(s.constraints);
                row.pool_cuts = Some(s.pool_cuts);
                row.lazy_cuts = Some(s.lazy_cuts);
                row.nodes = Some(s.nodes);
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        row
    }

    pub fn solved(&self) -> bool {
        self.unsolved == 0
    }
}

/// Runs every method on every instance, at most `jobs` at a time. Rows come
/// back in input order, instance-major; failures become `error` rows.
pub fn run_benchmark(
    instances: &[(String, Instance)],
    methods: &[Method],
    options: &SolveOptions,
    jobs: usize,
) -> Result<Vec<BenchmarkRow>> {
    let tasks: Vec<(&str, &Instance, &Method)> =
        instances.iter().flat_map(|(name, inst)| methods.iter().map(move |m| (name.as_str(), inst, m))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::input(format!("cannot start worker threads: {e}")))?;
    Ok(pool.install(|| {
        tasks
            .par_iter()
            .map(|&(name, inst, method)| {
                log::info!("running {method} on {name}");
                BenchmarkRow::new(name, inst, method, solve(inst, method, options))
            })
            .collect()
    }))
}

/// Means per (n, ρ, p, method). Times and constraint counts average over
/// solved runs only; the gap averages over unsolved runs that hold an incumbent.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregateRow {
    pub n: usize,
    pub rho: String,
    pub p: String,
    pub method: String,
    pub runs: usize,
    #[serde(rename = "Total")]
    pub total: Option<f64>,
    #[serde(rename = "Solving")]
    pub solving: Option<f64>,
    #[serde(rename = "Prepr.")]
    pub preprocessing: Option<f64>,
    #[serde(rename = "Ctrs.Gen.")]
    pub constraint_generation: Option<f64>,
    #[serde(rename = "Callback")]
    pub callback: Option<f64>,
    #[serde(rename = "MIPGAP")]
    pub gap: Option<f64>,
    #[serde(rename = "#Unsolved")]
    pub unsolved: usize,
    #[serde(rename = "#Ctrs")]
    pub constraints: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

pub fn aggregate(rows: &[BenchmarkRow]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(usize, String, String, String), Vec<&BenchmarkRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.n, r.rho.clone(), r.p.clone(), r.method.clone())).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((n, rho, p, method), rs)| {
            let solved = || rs.iter().filter(|r| r.solved());
            AggregateRow {
                n,
                rho,
                p,
                method,
                runs: rs.len(),
                total: mean(solved().filter_map(|r| r.total)),
                solving: mean(solved().filter_map(|r| r.solving)),
                preprocessing: mean(solved().filter_map(|r| r.preprocessing)),
                constraint_generation: mean(solved().filter_map(|r| r.constraint_generation)),
                callback: mean(solved().filter_map(|r| r.callback)),
                gap: mean(rs.iter().filter(|r| !r.solved()).filter_map(|r| r.gap)),
                unsolved: rs.len() - solved().count(),
                constraints: mean(solved().filter_map(|r| r.constraints.map(|c| c as f64))),
            }
        })
        .collect()
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Random instances shaped like the benchmark: unit-square demand with unit
/// weights, one discrete type whose sites are the demand points, and one ℓ2
/// continuous type. One instance per (n, radii, p₁, p₂, seed), in that nesting order.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkGrid {
    pub ns: Vec<usize>,
    /// (discrete radius, continuous radius) pairs.
    pub radii: Vec<(f64, f64)>,
    pub p_discrete: Vec<usize>,
    pub p_continuous: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl BenchmarkGrid {
    pub fn instances(&self) -> Result<Vec<(String, Instance)>> {
        let mut out = Vec::new();
        for &n in &self.ns {
            for &(r1, r2) in &self.radii {
                for &p1 in &self.p_discrete {
                    for &p2 in &self.p_continuous {
                        for &seed in &self.seeds {
                            let spec = GeneratorSpec::unit_square(seed, n)
                                .with_discrete(r1, p1)
                                .with_continuous(ContinuousType::new(NormSpec::L2, r2, p2));
                            let name = format!("n{n}_r{r1}-{r2}_p{p1}-{p2}_s{seed}");
                            out.push((name.clone(), generate_instance(&spec)?.with_name(name)));
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::SolveLimits;

    fn opts() -> SolveOptions {
        SolveOptions { limits: SolveLimits::unlimited(), ..SolveOptions::default() }
    }

    fn grid(ns: Vec<usize>, p2: Vec<usize>) -> BenchmarkGrid {
        BenchmarkGrid { ns, radii: vec![(0.2, 0.1)], p_discrete: vec![1], p_continuous: p2, seeds: vec![0] }
    }

    #[test]
    fn one_instance_two_methods() {
        let inst = grid(vec![12], vec![1]).instances().unwrap();
        let rows = run_benchmark(&inst, &[Method::Bnc, Method::Bips], &opts(), 2).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].method, "bnc");
        assert_eq!(rows[1].method, "bips");
        assert_eq!(rows[0].objective, rows[1].objective);
        assert_eq!(rows[1].constraints, Some(12 + 2));
    }

    #[test]
    fn grid_rows_and_columns() {
        let inst = grid(vec![8, 10], vec![1, 2]).instances().unwrap();
        let rows = run_benchmark(&inst, &[Method::Bnc, Method::Bips], &opts(), 4).unwrap();
        assert_eq!(rows.len(), 8);
        let agg = aggregate(&rows);
        assert_eq!(agg.len(), 8);
        assert!(agg.iter().all(|a| a.unsolved == 0 && a.total.is_some()));
        let mut buf = Vec::new();
        write_csv(&agg, &mut buf).unwrap();
        let header = String::from_utf8(buf).unwrap().lines().next().unwrap().to_string();
        for col in ["Total", "Solving", "Prepr.", "Ctrs.Gen.", "Callback", "MIPGAP", "#Unsolved", "#Ctrs"] {
            assert!(header.split(',').any(|h| h == col), "{col} missing from {header}");
        }
    }

    #[test]
    fn failures_become_rows() {
        let inst = grid(vec![8], vec![1]).instances().unwrap();
        let rows = run_benchmark(&inst, &[Method::Brute, Method::Bips], &opts(), 1).unwrap();
        assert_eq!(rows.len(), 2);
        let mut spec = GeneratorSpec::unit_square(0, 5).with_continuous(ContinuousType::new(NormSpec::L1, 0.1, 1));
        spec.lo = vec![0.0; 3];
        spec.hi = vec![1.0; 3];
        let bad = vec![("l1-3d".to_string(), generate_instance(&spec).unwrap())];
        let rows = run_benchmark(&bad, &[Method::Bips, Method::Bnc], &opts(), 1).unwrap();
        assert!(rows.iter().all(|r| r.status == "error" && r.error.is_some() && r.unsolved == 1));
        let agg = aggregate(&rows);
        assert_eq!(agg[0].unsolved, 1);
        assert_eq!(agg[0].total, None);
    }

    #[test]
    fn means_skip_unsolved_runs() {
        let inst = grid(vec![8], vec![1]).instances().unwrap();
        let mut rows = run_benchmark(&inst, &[Method::Bips], &opts(), 1).unwrap();
        let mut slow = rows[0].clone();
        slow.unsolved = 1;
        slow.total = Some(1e6);
        slow.gap = Some(0.5);
        rows.push(slow);
        let agg = aggregate(&rows);
        assert_eq!(agg[0].runs, 2);
        assert_eq!(agg[0].unsolved, 1);
        assert_eq!(agg[0].total, rows[0].total);
        assert_eq!(agg[0].gap, Some(0.5));
    }
}
