use std::time::Instant;

use super::{Method, SolveReport, SolveStats};
use crate::error::{Error, Result};
use crate::geometry::{next_combination, within, Point};
use crate::milp::BnBStatus;
use crate::model::{assign_from_facilities, build_bips, evaluate, Instance, Solution};

/// Largest number of facility combinations the exhaustive oracle will visit.
pub const BRUTE_FORCE_LIMIT: u128 = 10_000_000;

type Bits = Vec<u64>;

struct Choice {
    /// Coverage bitset per candidate.
    cover: Vec<Bits>,
    pick: usize,
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r
}

fn bits_of(n: usize, covered: impl Fn(usize) -> bool) -> Bits {
    let mut b = vec![0u64; n.div_ceil(64)];
    for i in 0..n {
        if covered(i) {
            b[i / 64] |= 1 << (i % 64);
        }
    }
    b
}

/// Exact optimum by enumerating every choice of sites and of intersection
/// candidates (which contain an optimal placement of each continuous facility).
pub fn brute_force(instance: &Instance) -> Result<SolveReport> {
    let start = Instant::now();
    let n = instance.n();
    let mut stats = SolveStats::default();

    let t0 = Instant::now();
    let candidates: Vec<Vec<Point>> =
        (0..instance.continuous_types().len()).map(|t| build_bips(instance, t)).collect::<Result<_>>()?;
    stats.preprocessing = t0.elapsed();

    let mut choices = Vec::new();
    for ty in instance.discrete_types() {
        let cover = (0..ty.sites.len()).map(|j| bits_of(n, |i| ty.covers(j, instance.point(i)))).collect();
        choices.push(Choice { cover, pick: ty.count });
    }
    for (ty, cands) in instance.continuous_types().iter().zip(&candidates) {
        let cover = cands.iter().map(|c| bits_of(n, |i| within(c, instance.point(i), ty.radius, ty.norm))).collect();
        choices.push(Choice { cover, pick: ty.count.min(cands.len()) });
    }
    let mut total: u128 = 1;
    for c in &choices {
        total = total.saturating_mul(binomial(c.cover.len(), c.pick));
        if total > BRUTE_FORCE_LIMIT {
            return Err(Error::Capacity(format!(
                "exhaustive search would visit more than {BRUTE_FORCE_LIMIT} combinations"
            )));
        }
    }

    let t1 = Instant::now();
    let weights: Vec<f64> = instance.demand().iter().map(|d| d.weight).collect();
    let mut combos: Vec<Vec<usize>> = choices.iter().map(|c| (0..c.pick).collect()).collect();
    let mut best_combo = combos.clone();
    let mut best = f64::NEG_INFINITY;
    let words = n.div_ceil(64);
    let mut acc = vec![0u64; words];
    loop {
        acc.fill(0);
        for (c, combo) in choices.iter().zip(&combos) {
            for &j in combo {
                for (a, w) in acc.iter_mut().zip(&c.cover[j]) {
                    *a |= w;
                }
            }
        }
        let mut value = 0.0;
        for (wi, &word) in acc.iter().enumerate() {
            let mut w = word;
            while w != 0 {
                let b = w.trailing_zeros() as usize;
                value += weights[wi * 64 + b];
                w &= w - 1;
            }
        }
        if value > best {
            best = value;
            best_combo.clone_from(&combos);
        }
        // Odometer over the per-type combinations.
        let mut advanced = false;
        for (c, combo) in choices.iter().zip(combos.iter_mut()).rev() {
            if next_combination(combo, c.cover.len()) {
                advanced = true;
                break;
            }
            for (k, v) in combo.iter_mut().enumerate() {
                *v = k;
            }
        }
        if !advanced {
            break;
        }
    }
    stats.solving = t1.elapsed();

    let nd = instance.discrete_types().len();
    let open: Vec<Vec<usize>> = best_combo[..nd].to_vec();
    let centers: Vec<Vec<Point>> = instance
        .continuous_types()
        .iter()
        .enumerate()
        .map(|(t, ty)| {
            let mut cs: Vec<Point> = best_combo[nd + t].iter().map(|&b| candidates[t][b].clone()).collect();
            if let Some(last) = cs.last().cloned() {
                cs.resize(ty.count, last);
            }
            cs
        })
        .collect();
    let assignment = assign_from_facilities(instance, &open, &centers);
    let mut solution = Solution { assignment, continuous_centers: centers, objective: 0.0 };
    solution.objective = evaluate(instance, &solution).objective;
    stats.total = start.elapsed();
    Ok(SolveReport {
        method: Method::Brute,
        status: BnBStatus::Optimal,
        bound: solution.objective,
        gap: 0.0,
        solution,
        stats,
        cuts: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::NormSpec;
    use crate::model::{ContinuousType, DemandPoint, DiscreteType};

    fn line(xs: &[f64], rho: f64) -> Instance {
        let demand = xs.iter().map(|&x| DemandPoint { point: Point::xy(x, 0.0), weight: 1.0 }).collect();
        Instance::new(2, demand, vec![], vec![ContinuousType::new(NormSpec::L2, rho, 1)]).unwrap()
    }

    #[test]
    fn one_site_one_point() {
        let demand = vec![DemandPoint { point: Point::xy(0.0, 0.0), weight: 3.0 }];
        let dt = DiscreteType::new(vec![Point::xy(0.1, 0.0)], vec![0.2], 1);
        let i = Instance::new(2, demand, vec![dt], vec![]).unwrap();
        assert_eq!(brute_force(&i).unwrap().objective(), 3.0);
    }

    #[test]
    fn spaced_line_covers_one() {
        assert_eq!(brute_force(&line(&[0.0, 1.0, 2.0], 0.49)).unwrap().objective(), 1.0);
        // Gaps of exactly 2ρ are tangent, and closed balls still cover a pair.
        assert_eq!(brute_force(&line(&[0.0, 1.0, 2.0], 0.5)).unwrap().objective(), 2.0);
    }

    #[test]
    fn tight_line_covers_two() {
        assert_eq!(brute_force(&line(&[0.0, 0.6, 1.2], 0.5)).unwrap().objective(), 2.0);
    }

    #[test]
    fn guard_trips() {
        let xs: Vec<f64> = (0..60).map(|i| i as f64 * 0.01).collect();
        let demand: Vec<DemandPoint> =
            xs.iter().map(|&x| DemandPoint { point: Point::xy(x, 0.0), weight: 1.0 }).collect();
        let sites = demand.iter().map(|d| d.point.clone()).collect();
        let dt = DiscreteType::new(sites, vec![0.1; 60], 6);
        let i = Instance::new(2, demand, vec![dt], vec![]).unwrap();
        assert!(matches!(brute_force(&i), Err(Error::Capacity(_))));
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(60, 6), 50_063_860);
    }
}
