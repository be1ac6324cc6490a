use std::collections::HashMap;

use super::{coverage_table, Assignment, Cut, Instance};
use crate::error::{Error, Result};
use crate::geometry::{circle_boundary_intersection, dist, within, NormSpec, Point, TOL};
use crate::milp::{Constraint, LinearModel, Relation, VarId};
use crate::separation::two_wise_cuts;

/// The assignment formulation with its cluster-incompatibility rows only
/// partially present, plus the variable layout needed to read solutions back.
#[derive(Clone, Debug)]
pub struct IpModel {
    pub model: LinearModel,
    pub layout: IpLayout,
    /// Number of incompatibility rows (all slots counted) in the model.
    pub cut_rows: usize,
}

#[derive(Clone, Debug)]
pub struct IpLayout {
    /// Site-opening variables per discrete type.
    pub y: Vec<Vec<VarId>>,
    /// Discrete-coverage variables per discrete type and demand index.
    pub x: Vec<Vec<VarId>>,
    /// Assignment variables per continuous type, slot and demand index.
    pub z: Vec<Vec<Vec<VarId>>>,
}

impl IpLayout {
    /// The rows Σ_{i∈Q} z_{ik} ≤ |Q| − 1 for every slot k of the cut's type.
    pub fn rows_for(&self, cut: &Cut) -> Vec<Constraint> {
        let rhs = cut.members.len() as f64 - 1.0;
        let tag: Vec<String> = cut.members.iter().map(|i| i.to_string()).collect();
        let tag = tag.join("_");
        self.z[cut.type_index]
            .iter()
            .enumerate()
            .map(|(k, zk)| {
                let terms = cut.members.iter().map(|&i| (zk[i], 1.0)).collect();
                Constraint::cut(format!("q{}_{k}_{tag}", cut.type_index), terms, Relation::Le, rhs)
            })
            .collect()
    }

    /// Reads a 0/1 point of the model back into an assignment.
    pub fn decode(&self, values: &[f64]) -> Assignment {
        let on = |v: VarId| values[v.0] > 0.5;
        Assignment {
            open_sites: self.y.iter().map(|ys| (0..ys.len()).filter(|&j| on(ys[j])).collect()).collect(),
            discrete_cover: self.x.iter().map(|xs| xs.iter().map(|&v| on(v)).collect()).collect(),
            continuous_cover: self
                .z
                .iter()
                .map(|slots| slots.iter().map(|zk| zk.iter().map(|&v| on(v)).collect()).collect())
                .collect(),
        }
    }
}

impl IpModel {
    pub fn add_cut(&mut self, cut: &Cut) {
        for row in self.layout.rows_for(cut) {
            self.model.add_constraint(row);
            self.cut_rows += 1;
        }
    }
}

pub(crate) fn check_separation_norm(instance: &Instance) -> Result<()> {
    for (t, ty) in instance.continuous_types().iter().enumerate() {
        let ok = match ty.norm {
            NormSpec::L2 | NormSpec::Linf => true,
            NormSpec::L1 | NormSpec::Lp { .. } => instance.dim() == 2,
        };
        if !ok {
            return Err(Error::capability(format!(
                "continuous type {t}: no cluster separation for the {} norm in dimension {}",
                ty.norm,
                instance.dim()
            )));
        }
    }
    Ok(())
}

/// Builds the assignment formulation with every pairwise incompatibility row,
/// the rows of `pool`, and optionally the symmetry chain.
pub fn build_incomplete_ip(instance: &Instance, pool: &[Cut], symmetry: bool) -> Result<IpModel> {
    check_separation_norm(instance)?;
    let n = instance.n();
    let mut model = LinearModel::new();
    let cover = coverage_table(instance);

    let mut y = Vec::new();
    let mut x = Vec::new();
    for (t, ty) in instance.discrete_types().iter().enumerate() {
        y.push((0..ty.sites.len()).map(|j| model.add_binary(format!("y{t}_{j}"), 0.0)).collect::<Vec<_>>());
        x.push((0..n).map(|i| model.add_binary(format!("x{t}_{i}"), instance.weight(i))).collect::<Vec<_>>());
    }
    let mut z = Vec::new();
    for (t, ty) in instance.continuous_types().iter().enumerate() {
        let slots: Vec<Vec<VarId>> = (0..ty.count)
            .map(|k| (0..n).map(|i| model.add_binary(format!("z{t}_{k}_{i}"), instance.weight(i))).collect())
            .collect();
        z.push(slots);
    }

    for (t, ty) in instance.discrete_types().iter().enumerate() {
        let terms = y[t].iter().map(|&v| (v, 1.0)).collect();
        model.add_constraint(Constraint::new(format!("card{t}"), terms, Relation::Eq, ty.count as f64));
        for i in 0..n {
            let mut terms = vec![(x[t][i], 1.0)];
            terms.extend(cover[t][i].iter().map(|&j| (y[t][j], -1.0)));
            model.add_constraint(Constraint::new(format!("link{t}_{i}"), terms, Relation::Le, 0.0));
        }
    }
    for i in 0..n {
        let mut terms: Vec<(VarId, f64)> = x.iter().map(|xs| (xs[i], 1.0)).collect();
        for slots in &z {
            terms.extend(slots.iter().map(|zk| (zk[i], 1.0)));
        }
        if !terms.is_empty() {
            model.add_constraint(Constraint::new(format!("once{i}"), terms, Relation::Le, 1.0));
        }
    }
    model.set_integral_objective(instance.integral_weights());

    let mut ip = IpModel { model, layout: IpLayout { y, x, z }, cut_rows: 0 };
    for t in 0..instance.continuous_types().len() {
        if instance.continuous_types()[t].count == 0 {
            continue;
        }
        for cut in two_wise_cuts(instance, t).cuts() {
            ip.add_cut(cut);
        }
    }
    for cut in pool {
        if cut.type_index >= ip.layout.z.len() || cut.members.iter().any(|&i| i >= n) || cut.members.len() < 2 {
            return Err(Error::input(format!("pool cut {:?} does not fit the instance", cut.members)));
        }
        ip.add_cut(cut);
    }
    if symmetry {
        add_symmetry_breaking(&mut ip, instance);
    }
    Ok(ip)
}

/// Strengthens the pairwise rows: covers the edges of each continuous type's
/// incompatibility graph greedily by maximal cliques C and adds
/// Σ_{i∈C} z_{ik} ≤ 1 for every slot k. Every pairwise row is implied by one of
/// them. Returns the number of cliques found (before slot expansion).
pub fn add_clique_rows(ip: &mut IpModel, instance: &Instance) -> usize {
    let n = instance.n();
    let words = n.div_ceil(64);
    let mut found = 0;
    for (t, ty) in instance.continuous_types().iter().enumerate() {
        if ty.count == 0 {
            continue;
        }
        let mut adj = vec![vec![0u64; words]; n];
        for cut in two_wise_cuts(instance, t).cuts() {
            let (a, b) = (cut.members[0], cut.members[1]);
            adj[a][b / 64] |= 1 << (b % 64);
            adj[b][a / 64] |= 1 << (a % 64);
        }
        let has = |bits: &[u64], v: usize| bits[v / 64] >> (v % 64) & 1 == 1;
        let mut open = adj.clone();
        for i in 0..n {
            while let Some(j) = (0..n).find(|&j| has(&open[i], j)) {
                let mut clique = vec![i, j];
                let mut common: Vec<u64> = adj[i].iter().zip(&adj[j]).map(|(a, b)| a & b).collect();
                // Prefer vertices that still have uncovered edges into the clique.
                loop {
                    let score = |v: usize| clique.iter().filter(|&&c| has(&open[v], c)).count();
                    let next = (0..n).filter(|&v| has(&common, v)).max_by_key(|&v| (score(v), usize::MAX - v));
                    let Some(v) = next else { break };
                    clique.push(v);
                    for (c, a) in common.iter_mut().zip(&adj[v]) {
                        *c &= a;
                    }
                }
                for &a in &clique {
                    for &b in &clique {
                        open[a][b / 64] &= !(1 << (b % 64));
                    }
                }
                clique.sort_unstable();
                let tag: Vec<String> = clique.iter().map(|i| i.to_string()).collect();
                let tag = tag.join("_");
                for (k, zk) in ip.layout.z[t].iter().enumerate() {
                    let terms = clique.iter().map(|&v| (zk[v], 1.0)).collect();
                    ip.model.add_constraint(Constraint::cut(format!("k{t}_{k}_{tag}"), terms, Relation::Le, 1.0));
                }
                found += 1;
            }
        }
    }
    found
}

/// Orders the slots of each continuous type by covered weight:
/// Σ c_i z_{i,k−1} ≤ Σ c_i z_{ik}. Returns the number of rows added.
pub fn add_symmetry_breaking(ip: &mut IpModel, instance: &Instance) -> usize {
    let mut added = 0;
    for (t, slots) in ip.layout.z.iter().enumerate() {
        for k in 1..slots.len() {
            let mut terms = Vec::new();
            for i in 0..instance.n() {
                let c = instance.weight(i);
                if c != 0.0 {
                    terms.push((slots[k - 1][i], c));
                    terms.push((slots[k][i], -c));
                }
            }
            ip.model.add_constraint(Constraint::new(format!("sym{t}_{k}"), terms, Relation::Le, 0.0));
            added += 1;
        }
    }
    added
}

fn check_bips_type(instance: &Instance, t: usize) -> Result<()> {
    let ty = instance.continuous_types().get(t).ok_or_else(|| Error::input(format!("no continuous type {t}")))?;
    if instance.dim() != 2 || ty.norm != NormSpec::L2 {
        return Err(Error::capability(format!(
            "candidate intersection sets need planar euclidean balls (type {t} uses {} in dimension {})",
            ty.norm,
            instance.dim()
        )));
    }
    Ok(())
}

/// Demand points plus all pairwise intersections of the ρ-circles around
/// them, merged within the global tolerance.
pub fn build_bips(instance: &Instance, t: usize) -> Result<Vec<Point>> {
    check_bips_type(instance, t)?;
    let rho = instance.continuous_types()[t].radius;
    let n = instance.n();
    let mut out = Vec::new();
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let mut push = |p: Point, out: &mut Vec<Point>| {
        let key = ((p.x() / TOL).floor() as i64, (p.y() / TOL).floor() as i64);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = grid.get(&(key.0 + dx, key.1 + dy)) {
                    if ids.iter().any(|&q| dist(&out[q], &p, NormSpec::L2) <= TOL) {
                        return;
                    }
                }
            }
        }
        grid.entry(key).or_default().push(out.len());
        out.push(p);
    };
    for d in instance.demand() {
        push(d.point.clone(), &mut out);
    }
    for i in 0..n {
        for l in i + 1..n {
            let (a, b) = (instance.point(i), instance.point(l));
            if dist(a, b, NormSpec::L2) > 2.0 * rho + TOL {
                continue;
            }
            for p in circle_boundary_intersection(a, b, rho)? {
                push(p, &mut out);
            }
        }
    }
    Ok(out)
}

/// The candidate-set formulation: binary openings for sites and for every
/// intersection candidate, continuous coverage indicators.
#[derive(Clone, Debug)]
pub struct BipsModel {
    pub model: LinearModel,
    pub y_discrete: Vec<Vec<VarId>>,
    pub y_continuous: Vec<Vec<VarId>>,
    pub x: Vec<VarId>,
    pub candidates: Vec<Vec<Point>>,
}

impl BipsModel {
    /// Open sites and the chosen candidate centers of a 0/1 point.
    pub fn decode(&self, values: &[f64]) -> (Vec<Vec<usize>>, Vec<Vec<Point>>) {
        let on = |v: VarId| values[v.0] > 0.5;
        let open = self.y_discrete.iter().map(|ys| (0..ys.len()).filter(|&j| on(ys[j])).collect()).collect();
        let centers = self
            .y_continuous
            .iter()
            .zip(&self.candidates)
            .map(|(ys, cands)| (0..ys.len()).filter(|&b| on(ys[b])).map(|b| cands[b].clone()).collect())
            .collect();
        (open, centers)
    }
}

pub fn build_bips_ip(instance: &Instance) -> Result<BipsModel> {
    let candidates =
        (0..instance.continuous_types().len()).map(|t| build_bips(instance, t)).collect::<Result<Vec<_>>>()?;
    bips_ip_from_candidates(instance, candidates)
}

/// Same as [`build_bips_ip`] with precomputed candidate sets. A type asking for
/// more facilities than it has candidates opens all of them.
pub fn bips_ip_from_candidates(instance: &Instance, candidates: Vec<Vec<Point>>) -> Result<BipsModel> {
    let cts = instance.continuous_types();
    if candidates.len() != cts.len() {
        return Err(Error::input("one candidate set per continuous type is required"));
    }
    for t in 0..cts.len() {
        check_bips_type(instance, t)?;
    }
    let n = instance.n();
    let mut model = LinearModel::new();
    let y_discrete: Vec<Vec<VarId>> = instance
        .discrete_types()
        .iter()
        .enumerate()
        .map(|(t, ty)| (0..ty.sites.len()).map(|j| model.add_binary(format!("ys{t}_{j}"), 0.0)).collect())
        .collect();
    let y_continuous: Vec<Vec<VarId>> = candidates
        .iter()
        .enumerate()
        .map(|(t, c)| (0..c.len()).map(|b| model.add_binary(format!("yc{t}_{b}"), 0.0)).collect())
        .collect();
    let x: Vec<VarId> = (0..n).map(|i| model.add_continuous(format!("x{i}"), 0.0, 1.0, instance.weight(i))).collect();

    for (t, ty) in instance.discrete_types().iter().enumerate() {
        let terms = y_discrete[t].iter().map(|&v| (v, 1.0)).collect();
        model.add_constraint(Constraint::new(format!("card_s{t}"), terms, Relation::Eq, ty.count as f64));
    }
    for (t, ty) in cts.iter().enumerate() {
        let terms = y_continuous[t].iter().map(|&v| (v, 1.0)).collect();
        let count = ty.count.min(candidates[t].len()) as f64;
        model.add_constraint(Constraint::new(format!("card_c{t}"), terms, Relation::Eq, count));
    }
    let cover = coverage_table(instance);
    for i in 0..n {
        let p = instance.point(i);
        let mut terms = vec![(x[i], 1.0)];
        for (t, ys) in y_discrete.iter().enumerate() {
            terms.extend(cover[t][i].iter().map(|&j| (ys[j], -1.0)));
        }
        for (t, ty) in cts.iter().enumerate() {
            for (b, c) in candidates[t].iter().enumerate() {
                if within(c, p, ty.radius, ty.norm) {
                    terms.push((y_continuous[t][b], -1.0));
                }
            }
        }
        model.add_constraint(Constraint::new(format!("cov{i}"), terms, Relation::Le, 0.0));
    }
    model.set_integral_objective(instance.integral_weights());
    Ok(BipsModel { model, y_discrete, y_continuous, x, candidates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{branch_and_bound, AcceptAll, SolveLimits};
    use crate::model::{ContinuousType, DemandPoint, DiscreteType};

    fn inst(points: &[(f64, f64)], rho: f64, p: usize) -> Instance {
        let demand = points.iter().map(|&(x, y)| DemandPoint { point: Point::xy(x, y), weight: 1.0 }).collect();
        Instance::new(2, demand, vec![], vec![ContinuousType::new(NormSpec::L2, rho, p)]).unwrap()
    }

    #[test]
    fn single_point_model() {
        let ip = build_incomplete_ip(&inst(&[(0.0, 0.0)], 1.0, 1), &[], false).unwrap();
        assert_eq!(ip.model.num_vars(), 1);
        assert_eq!(ip.model.variables()[0].objective, 1.0);
        assert_eq!(ip.cut_rows, 0);
    }

    #[test]
    fn far_pair_gets_pair_row() {
        let ip = build_incomplete_ip(&inst(&[(0.0, 0.0), (3.0, 0.0)], 1.0, 1), &[], false).unwrap();
        assert_eq!(ip.cut_rows, 1);
        let row = ip.model.constraints().iter().find(|c| c.name.starts_with('q')).unwrap();
        assert_eq!(row.terms, vec![(ip.layout.z[0][0][0], 1.0), (ip.layout.z[0][0][1], 1.0)]);
        assert_eq!(row.rhs, 1.0);
    }

    #[test]
    fn variable_count_follows_layout() {
        let pts = [(0.1, 0.2), (0.4, 0.9), (0.7, 0.3), (0.5, 0.5), (0.9, 0.8)];
        let demand: Vec<DemandPoint> =
            pts.iter().map(|&(x, y)| DemandPoint { point: Point::xy(x, y), weight: 1.0 }).collect();
        let sites: Vec<Point> = demand.iter().map(|d| d.point.clone()).collect();
        let dt = DiscreteType::new(sites.clone(), vec![0.2; 5], 1);
        let ct = ContinuousType::new(NormSpec::L2, 0.1, 1);
        let instance = Instance::new(2, demand, vec![dt], vec![ct]).unwrap();
        let ip = build_incomplete_ip(&instance, &[], false).unwrap();
        assert_eq!(ip.model.num_vars(), sites.len() + 5 + 5);
    }

    #[test]
    fn symmetry_chain_length() {
        let mut ip = build_incomplete_ip(&inst(&[(0.0, 0.0)], 1.0, 1), &[], false).unwrap();
        assert_eq!(add_symmetry_breaking(&mut ip, &inst(&[(0.0, 0.0)], 1.0, 1)), 0);
        let three = inst(&[(0.0, 0.0), (1.0, 1.0)], 1.0, 3);
        let mut ip = build_incomplete_ip(&three, &[], false).unwrap();
        assert_eq!(add_symmetry_breaking(&mut ip, &three), 2);
    }

    #[test]
    fn unsupported_norm_rejected() {
        let demand = vec![DemandPoint { point: Point::new(vec![0.0, 0.0, 0.0]), weight: 1.0 }];
        let ct = ContinuousType::new(NormSpec::L1, 1.0, 1);
        let instance = Instance::new(3, demand, vec![], vec![ct]).unwrap();
        assert!(matches!(build_incomplete_ip(&instance, &[], false), Err(Error::Capability(_))));
    }

    #[test]
    fn candidate_set_sizes() {
        assert_eq!(build_bips(&inst(&[(0.0, 0.0)], 1.0, 1), 0).unwrap().len(), 1);
        let tangent = build_bips(&inst(&[(0.0, 0.0), (2.0, 0.0)], 1.0, 1), 0).unwrap();
        assert_eq!(tangent.len(), 3);
        assert!(tangent.contains(&Point::xy(1.0, 0.0)));
        assert_eq!(build_bips(&inst(&[(0.0, 0.0), (1.0, 0.0)], 1.0, 1), 0).unwrap().len(), 4);
    }

    #[test]
    fn candidate_ip_row_count() {
        let pts: Vec<(f64, f64)> = (0..7).map(|i| (i as f64 * 0.13, (i * i) as f64 * 0.05)).collect();
        let demand: Vec<DemandPoint> =
            pts.iter().map(|&(x, y)| DemandPoint { point: Point::xy(x, y), weight: 1.0 }).collect();
        let sites = demand.iter().map(|d| d.point.clone()).collect();
        let dt = DiscreteType::new(sites, vec![0.2; 7], 1);
        let ct = ContinuousType::new(NormSpec::L2, 0.1, 1);
        let instance = Instance::new(2, demand, vec![dt], vec![ct]).unwrap();
        let bm = build_bips_ip(&instance).unwrap();
        assert_eq!(bm.model.num_constraints(), 7 + 2);
    }

    #[test]
    fn candidate_ip_single_point() {
        let instance = inst(&[(0.4, 0.4)], 0.1, 1);
        let mut bm = build_bips_ip(&instance).unwrap();
        let r = branch_and_bound(&mut bm.model, &mut AcceptAll, &SolveLimits::unlimited()).unwrap();
        assert_eq!(r.objective, 1.0);
        let (_, centers) = bm.decode(r.values.as_ref().unwrap());
        assert_eq!(centers, vec![vec![Point::xy(0.4, 0.4)]]);
    }

    #[test]
    fn bips_requires_planar_l2() {
        let demand = vec![DemandPoint { point: Point::xy(0.0, 0.0), weight: 1.0 }];
        let ct = ContinuousType::new(NormSpec::Linf, 1.0, 1);
        let instance = Instance::new(2, demand, vec![], vec![ct]).unwrap();
        assert!(matches!(build_bips(&instance, 0), Err(Error::Capability(_))));
    }
}
