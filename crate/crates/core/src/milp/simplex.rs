//! Bounded-variable primal simplex with an explicit dense basis inverse.
//!
//! Each active row `i` gets a logical variable `r_i = a_i·x` whose bounds
//! encode the row relation, so the working system is `A x − r = 0`. Phase one
//! minimizes the sum of bound violations of the basic variables (no
//! artificials), which also lets a stale basis be reused after bound changes
//! or row additions. Rows of kind `Cut` stay out of the working set until the
//! current optimum violates them.

use std::time::Instant;

use super::{LinearModel, Relation, RowKind};
use crate::error::{Error, Result};

const FEAS_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-7;
const ROW_CHECK_TOL: f64 = 1e-7;
const REFACTOR_EVERY: usize = 100;
const BLAND_AFTER: usize = 1000;
const ACTIVATE_MIN: usize = 32;
const PERTURB_AFTER: usize = 50;
const PERTURB_SIZE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// The engine's deadline passed first.
    Interrupted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub values: Vec<f64>,
}

/// Solves the continuous relaxation of `model` (integrality dropped).
pub fn solve_lp(model: &LinearModel) -> Result<LpSolution> {
    model.validate()?;
    let mut engine = LpEngine::new(model);
    let status = engine.solve(model)?;
    let values = engine.primal();
    let objective = if status == LpStatus::Optimal { model.objective_value(&values) } else { f64::NAN };
    Ok(LpSolution { status, objective, values })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum VarState {
    Basic,
    Lower,
    Upper,
}

pub(crate) struct LpEngine {
    n: usize,
    /// Model row behind each active (local) row.
    rows: Vec<usize>,
    seen_rows: usize,
    deferred: Vec<usize>,
    /// Structural columns restricted to active rows: (local row, coefficient).
    cols: Vec<Vec<(usize, f64)>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    state: Vec<VarState>,
    x: Vec<f64>,
    basis: Vec<usize>,
    binv: Vec<f64>,
    since_refactor: usize,
    saved_bounds: Option<(Vec<f64>, Vec<f64>)>,
    pub(crate) deadline: Option<Instant>,
    pub(crate) iterations: u64,
}

impl LpEngine {
    pub(crate) fn new(model: &LinearModel) -> Self {
        let vars = model.variables();
        let n = vars.len();
        let mut e = LpEngine {
            n,
            rows: Vec::new(),
            seen_rows: 0,
            deferred: Vec::new(),
            cols: vec![Vec::new(); n],
            lo: vars.iter().map(|v| v.lower).collect(),
            hi: vars.iter().map(|v| v.upper).collect(),
            cost: vars.iter().map(|v| -v.objective).collect(),
            state: vec![VarState::Lower; n],
            x: vars.iter().map(|v| v.lower).collect(),
            basis: Vec::new(),
            binv: Vec::new(),
            since_refactor: 0,
            saved_bounds: None,
            deadline: None,
            iterations: 0,
        };
        e.sync(model);
        e
    }

    fn m(&self) -> usize {
        self.rows.len()
    }

    pub(crate) fn set_bounds(&mut self, lo: &[f64], hi: &[f64]) {
        self.lo[..self.n].copy_from_slice(lo);
        self.hi[..self.n].copy_from_slice(hi);
    }

    pub(crate) fn primal(&self) -> Vec<f64> {
        self.x[..self.n].to_vec()
    }

    /// Picks up rows appended to the model since the last call.
    fn sync(&mut self, model: &LinearModel) {
        let total = model.num_constraints();
        let mut fresh = Vec::new();
        for r in self.seen_rows..total {
            match model.constraints()[r].kind {
                RowKind::Structural => fresh.push(r),
                RowKind::Cut => self.deferred.push(r),
            }
        }
        self.seen_rows = total;
        self.activate(model, &fresh);
    }

    /// Moves the given model rows into the working set (their logicals enter
    /// the basis) and extends the inverse accordingly.
    pub(crate) fn activate(&mut self, model: &LinearModel, model_rows: &[usize]) {
        if model_rows.is_empty() {
            return;
        }
        if self.seen_rows < model.num_constraints() {
            // Rows not yet classified must not be activated twice.
            let fresh: std::collections::HashSet<usize> = model_rows.iter().copied().collect();
            let pending: Vec<usize> =
                (self.seen_rows..model.num_constraints()).filter(|r| !fresh.contains(r)).collect();
            self.seen_rows = model.num_constraints();
            for r in pending {
                match model.constraints()[r].kind {
                    RowKind::Structural => {}
                    RowKind::Cut => self.deferred.push(r),
                }
            }
        }
        let mut taken = vec![false; model.num_constraints()];
        for &r in model_rows {
            taken[r] = true;
        }
        self.deferred.retain(|&r| !taken[r]);

        let m_old = self.m();
        let k = model_rows.len();
        let m_new = m_old + k;
        let mut binv = vec![0.0; m_new * m_new];
        for p in 0..m_old {
            binv[p * m_new..p * m_new + m_old].copy_from_slice(&self.binv[p * m_old..(p + 1) * m_old]);
        }
        // Position of each basic structural, to read row coefficients on the basis.
        let mut pos_of = vec![usize::MAX; self.n];
        for (p, &j) in self.basis.iter().enumerate() {
            if j < self.n {
                pos_of[j] = p;
            }
        }
        for (t, &mr) in model_rows.iter().enumerate() {
            let row = &model.constraints()[mr];
            let local = m_old + t;
            let (lo, hi) = match row.relation {
                Relation::Le => (f64::NEG_INFINITY, row.rhs),
                Relation::Ge => (row.rhs, f64::INFINITY),
                Relation::Eq => (row.rhs, row.rhs),
            };
            let mut activity = 0.0;
            let out = local * m_new;
            for &(v, a) in &row.terms {
                if a == 0.0 {
                    continue;
                }
                self.cols[v.0].push((local, a));
                activity += a * self.x[v.0];
                let p = pos_of[v.0];
                if p != usize::MAX {
                    for c in 0..m_old {
                        binv[out + c] += a * self.binv[p * m_old + c];
                    }
                }
            }
            binv[out + local] = -1.0;
            self.rows.push(mr);
            self.lo.push(lo);
            self.hi.push(hi);
            self.state.push(VarState::Basic);
            self.x.push(activity);
            self.basis.push(self.n + local);
        }
        self.binv = binv;
    }

    fn cold_start(&mut self) {
        let m = self.m();
        self.basis = (0..m).map(|r| self.n + r).collect();
        for j in 0..self.n {
            self.state[j] = VarState::Lower;
        }
        for r in 0..m {
            self.state[self.n + r] = VarState::Basic;
        }
        self.binv = vec![0.0; m * m];
        for r in 0..m {
            self.binv[r * m + r] = -1.0;
        }
        self.since_refactor = 0;
    }

    /// Optimizes over the current bounds, activating deferred rows as needed.
    pub(crate) fn solve(&mut self, model: &LinearModel) -> Result<LpStatus> {
        self.sync(model);
        self.place_nonbasic();
        self.recompute_basics();
        loop {
            let dual = if self.dual_feasible() { self.dual_simplex().ok().flatten() } else { None };
            let status = match dual {
                Some(s) => s,
                None => match self.simplex() {
                    Ok(s) => s,
                    Err(_) => {
                        // Numerical trouble: retry once from the slack basis.
                        self.cold_start();
                        self.place_nonbasic();
                        self.recompute_basics();
                        self.simplex()?
                    }
                },
            };
            match status {
                LpStatus::Optimal => {
                    let mut violated: Vec<(f64, usize)> = self
                        .deferred
                        .iter()
                        .filter_map(|&r| {
                            let row = &model.constraints()[r];
                            let v = row.violation(&self.x[..self.n]);
                            (v > ROW_CHECK_TOL * (1.0 + row.rhs.abs())).then_some((v, r))
                        })
                        .collect();
                    if violated.is_empty() {
                        return Ok(LpStatus::Optimal);
                    }
                    // Most violated first, in bounded batches: implied rows then
                    // often never need to enter.
                    violated.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                    let batch = ACTIVATE_MIN.max(self.m() / 8);
                    let mut violated: Vec<usize> = violated.into_iter().take(batch).map(|(_, r)| r).collect();
                    violated.sort_unstable();
                    self.activate(model, &violated);
                }
                LpStatus::Unbounded if !self.deferred.is_empty() => {
                    let all = std::mem::take(&mut self.deferred);
                    self.activate(model, &all);
                }
                other => return Ok(other),
            }
        }
    }

    fn place_nonbasic(&mut self) {
        for j in 0..self.x.len() {
            match self.state[j] {
                VarState::Basic => {}
                VarState::Lower | VarState::Upper => {
                    let want_upper = self.state[j] == VarState::Upper;
                    if (want_upper && self.hi[j].is_finite()) || !self.lo[j].is_finite() {
                        self.state[j] = VarState::Upper;
                        self.x[j] = self.hi[j];
                    } else {
                        self.state[j] = VarState::Lower;
                        self.x[j] = self.lo[j];
                    }
                }
            }
        }
    }

    /// x_B = −B⁻¹ N x_N.
    fn recompute_basics(&mut self) {
        let m = self.m();
        let mut v = vec![0.0; m];
        for j in 0..self.n {
            if self.state[j] != VarState::Basic && self.x[j] != 0.0 {
                for &(r, a) in &self.cols[j] {
                    v[r] += a * self.x[j];
                }
            }
        }
        for r in 0..m {
            if self.state[self.n + r] != VarState::Basic {
                v[r] -= self.x[self.n + r];
            }
        }
        for p in 0..m {
            let row = &self.binv[p * m..(p + 1) * m];
            let s: f64 = row.iter().zip(&v).map(|(b, vi)| b * vi).sum();
            self.x[self.basis[p]] = -s;
        }
    }

    /// Rebuilds B⁻¹ exploiting that most basic columns are logical unit vectors:
    /// only the square block of structural basics on the rows whose logical is
    /// nonbasic needs a dense inversion.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m();
        let n = self.n;
        let mut logical_pos = vec![usize::MAX; m];
        let mut structs: Vec<(usize, usize)> = Vec::new();
        for (p, &j) in self.basis.iter().enumerate() {
            if j >= n {
                logical_pos[j - n] = p;
            } else {
                structs.push((p, j));
            }
        }
        let free_rows: Vec<usize> = (0..m).filter(|&r| logical_pos[r] == usize::MAX).collect();
        let k = structs.len();
        if free_rows.len() != k {
            return Err(Error::solver("basis has the wrong size"));
        }
        let mut row_slot = vec![usize::MAX; m];
        for (a, &r) in free_rows.iter().enumerate() {
            row_slot[r] = a;
        }
        // K = A[free_rows, structs], inverted by Gauss–Jordan.
        let mut kmat = vec![0.0; k * k];
        for (b, &(_, j)) in structs.iter().enumerate() {
            for &(r, a) in &self.cols[j] {
                if row_slot[r] != usize::MAX {
                    kmat[row_slot[r] * k + b] = a;
                }
            }
        }
        let kinv = invert(kmat, k).ok_or_else(|| Error::solver("singular basis"))?;

        let mut binv = vec![0.0; m * m];
        let mut xs = vec![0.0; k];
        let mut acc = vec![0.0; m];
        for (a, &r) in free_rows.iter().enumerate() {
            for b in 0..k {
                xs[b] = kinv[b * k + a];
            }
            for (b, &(p, j)) in structs.iter().enumerate() {
                binv[p * m + r] = xs[b];
                if xs[b] != 0.0 {
                    for &(row, coef) in &self.cols[j] {
                        if logical_pos[row] != usize::MAX {
                            acc[row] += coef * xs[b];
                        }
                    }
                }
            }
            for row in 0..m {
                if acc[row] != 0.0 {
                    binv[logical_pos[row] * m + r] = acc[row];
                    acc[row] = 0.0;
                }
            }
        }
        for r in 0..m {
            if logical_pos[r] != usize::MAX {
                binv[logical_pos[r] * m + r] = -1.0;
            }
        }
        self.binv = binv;
        self.since_refactor = 0;
        Ok(())
    }

    fn tol(&self, bound: f64) -> f64 {
        FEAS_TOL * (1.0 + bound.abs())
    }

    fn below(&self, j: usize) -> bool {
        self.x[j] < self.lo[j] - self.tol(self.lo[j])
    }

    fn above(&self, j: usize) -> bool {
        self.x[j] > self.hi[j] + self.tol(self.hi[j])
    }

    fn ftran(&self, j: usize, out: &mut [f64]) {
        let m = self.m();
        out.fill(0.0);
        if j < self.n {
            for &(r, a) in &self.cols[j] {
                for (p, o) in out.iter_mut().enumerate() {
                    *o += a * self.binv[p * m + r];
                }
            }
        } else {
            let r = j - self.n;
            for (p, o) in out.iter_mut().enumerate() {
                *o = -self.binv[p * m + r];
            }
        }
    }

    /// π = c_B B⁻¹ for the true costs.
    fn duals(&self, pi: &mut [f64]) {
        let m = self.m();
        pi.fill(0.0);
        for p in 0..m {
            let j = self.basis[p];
            if j < self.n && self.cost[j] != 0.0 {
                let c = self.cost[j];
                for (q, b) in pi.iter_mut().zip(&self.binv[p * m..(p + 1) * m]) {
                    *q += c * b;
                }
            }
        }
    }

    fn reduced_cost(&self, j: usize, pi: &[f64]) -> f64 {
        if j < self.n {
            self.cost[j] - self.cols[j].iter().map(|&(r, a)| a * pi[r]).sum::<f64>()
        } else {
            pi[j - self.n]
        }
    }

    /// Signed reduced cost that must stay nonnegative for optimality of the
    /// nonbasic `j`, or `None` when its sign is unrestricted (fixed variable).
    fn dual_slack(&self, j: usize, d: f64) -> Option<f64> {
        if self.lo[j] == self.hi[j] {
            return None;
        }
        match self.state[j] {
            VarState::Basic => None,
            VarState::Lower if self.lo[j].is_finite() => Some(d),
            VarState::Upper if self.hi[j].is_finite() => Some(-d),
            _ => Some(-d.abs()),
        }
    }

    fn dual_feasible(&self) -> bool {
        if self.m() == 0 {
            return false;
        }
        let mut pi = vec![0.0; self.m()];
        self.duals(&mut pi);
        (0..self.n + self.m()).all(|j| self.dual_slack(j, self.reduced_cost(j, &pi)).is_none_or(|s| s >= -DUAL_TOL))
    }

    /// Bounded dual simplex from a dual feasible basis. Returns `None` when it
    /// stalls, leaving the basis for the primal method to finish.
    fn dual_simplex(&mut self) -> Result<Option<LpStatus>> {
        let m = self.m();
        let total = self.n + m;
        let max_iter = 10 * total + 1_000;
        let mut pi = vec![0.0; m];
        let mut row = vec![0.0; total];
        let mut alpha = vec![0.0; m];
        let mut rechecked = false;
        for it in 0..max_iter {
            if it % 64 == 63 && self.deadline.is_some_and(|d| Instant::now() >= d) {
                return Ok(Some(LpStatus::Interrupted));
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
                self.recompute_basics();
            }
            // Leaving row: largest bound violation.
            let mut leave: Option<(usize, f64)> = None;
            let mut worst = 0.0;
            for p in 0..m {
                let j = self.basis[p];
                let (viol, target) = if self.below(j) {
                    (self.lo[j] - self.x[j], self.lo[j])
                } else if self.above(j) {
                    (self.x[j] - self.hi[j], self.hi[j])
                } else {
                    continue;
                };
                if viol > worst {
                    worst = viol;
                    leave = Some((p, target));
                }
            }
            let Some((p, target)) = leave else {
                if self.since_refactor > 0 && !rechecked {
                    rechecked = true;
                    self.refactor()?;
                    self.recompute_basics();
                    continue;
                }
                return Ok(Some(LpStatus::Optimal));
            };
            let leaving = self.basis[p];
            // x_p must rise when it sits below its bound.
            let rise = self.x[leaving] < target;

            self.duals(&mut pi);
            let rho = &self.binv[p * m..(p + 1) * m];
            for j in 0..total {
                row[j] = if self.state[j] == VarState::Basic || self.lo[j] == self.hi[j] {
                    0.0
                } else if j < self.n {
                    self.cols[j].iter().map(|&(r, a)| a * rho[r]).sum()
                } else {
                    -rho[j - self.n]
                };
            }
            // Harris ratio test over the nonbasics that move x_p toward its bound.
            let eligible = |s: &Self, j: usize| -> Option<(f64, f64)> {
                let a = row[j];
                if a.abs() <= PIVOT_TOL {
                    return None;
                }
                let up = match s.state[j] {
                    VarState::Lower => true,
                    VarState::Upper => false,
                    VarState::Basic => return None,
                };
                // dx_p = −a dx_j
                let helps = if rise { (a < 0.0) == up } else { (a > 0.0) == up };
                if !helps {
                    return None;
                }
                let d = s.reduced_cost(j, &pi);
                let slack = if up { d } else { -d };
                Some((slack.max(0.0), a.abs()))
            };
            let mut theta_max = f64::INFINITY;
            for j in 0..total {
                if let Some((slack, a)) = eligible(self, j) {
                    theta_max = theta_max.min((slack + DUAL_TOL) / a);
                }
            }
            if !theta_max.is_finite() {
                if self.since_refactor > 0 && !rechecked {
                    rechecked = true;
                    self.refactor()?;
                    self.recompute_basics();
                    continue;
                }
                return Ok(Some(LpStatus::Infeasible));
            }
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..total {
                if let Some((slack, a)) = eligible(self, j) {
                    if slack / a <= theta_max && enter.is_none_or(|(_, best)| a > best) {
                        enter = Some((j, a));
                    }
                }
            }
            let Some((q, _)) = enter else { return Ok(None) };

            self.ftran(q, &mut alpha);
            let a = alpha[p];
            if (a - row[q]).abs() > 1e-7 * (1.0 + a.abs()) || a.abs() <= PIVOT_TOL {
                if self.since_refactor == 0 {
                    return Ok(None);
                }
                self.refactor()?;
                self.recompute_basics();
                continue;
            }
            rechecked = false;
            self.iterations += 1;
            let dq = (self.x[leaving] - target) / a;
            self.x[q] += dq;
            for (i, &ai) in alpha.iter().enumerate() {
                if ai != 0.0 {
                    let j = self.basis[i];
                    self.x[j] -= ai * dq;
                }
            }
            self.x[leaving] = target;
            self.state[leaving] = if rise { VarState::Lower } else { VarState::Upper };
            self.basis[p] = q;
            self.state[q] = VarState::Basic;
            self.pivot(p, &alpha);
        }
        Ok(None)
    }

    fn simplex(&mut self) -> Result<LpStatus> {
        let out = self.iterate();
        if let Some((lo, hi)) = self.saved_bounds.take() {
            self.lo = lo;
            self.hi = hi;
            self.place_nonbasic();
            self.recompute_basics();
        }
        out
    }

    /// Widens every finite bound by a small deterministic amount so that
    /// degenerate vertices split apart.
    fn perturb(&mut self) {
        let saved = (self.lo.clone(), self.hi.clone());
        for j in 0..self.lo.len() {
            let r = (j as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 11;
            let d = PERTURB_SIZE * (1.0 + r as f64 / (1u64 << 53) as f64);
            if self.lo[j].is_finite() {
                self.lo[j] -= d * (1.0 + self.lo[j].abs());
            }
            if self.hi[j].is_finite() {
                self.hi[j] += d * (1.0 + self.hi[j].abs());
            }
        }
        self.saved_bounds = Some(saved);
        self.place_nonbasic();
        self.recompute_basics();
    }

    fn iterate(&mut self) -> Result<LpStatus> {
        let m = self.m();
        let total = self.n + m;
        let max_iter = 50 * total + 10_000;
        let mut degenerate = 0usize;
        let mut cb = vec![0.0; m];
        let mut pi = vec![0.0; m];
        let mut alpha = vec![0.0; m];
        let mut perturbed = false;
        for it in 0..max_iter {
            if it % 64 == 63 && self.deadline.is_some_and(|d| Instant::now() >= d) {
                return Ok(LpStatus::Interrupted);
            }
            if degenerate > PERTURB_AFTER && !perturbed {
                perturbed = true;
                degenerate = 0;
                self.perturb();
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
                self.recompute_basics();
            }
            let mut phase_one = false;
            for p in 0..m {
                let j = self.basis[p];
                cb[p] = if self.below(j) {
                    phase_one = true;
                    -1.0
                } else if self.above(j) {
                    phase_one = true;
                    1.0
                } else {
                    0.0
                };
            }
            if !phase_one {
                for p in 0..m {
                    let j = self.basis[p];
                    cb[p] = if j < self.n { self.cost[j] } else { 0.0 };
                }
            }
            pi.fill(0.0);
            for p in 0..m {
                if cb[p] != 0.0 {
                    let row = &self.binv[p * m..(p + 1) * m];
                    for (q, b) in pi.iter_mut().zip(row) {
                        *q += cb[p] * b;
                    }
                }
            }

            // Pricing.
            let bland = degenerate > BLAND_AFTER;
            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..total {
                let st = self.state[j];
                if st == VarState::Basic || self.lo[j] == self.hi[j] {
                    continue;
                }
                let d = if j < self.n {
                    let c = if phase_one { 0.0 } else { self.cost[j] };
                    c - self.cols[j].iter().map(|&(r, a)| a * pi[r]).sum::<f64>()
                } else {
                    pi[j - self.n]
                };
                let gain = match st {
                    VarState::Lower if d < -DUAL_TOL => -d,
                    VarState::Upper if d > DUAL_TOL => d,
                    _ => continue,
                };
                if bland {
                    entering = Some((j, if st == VarState::Lower { 1.0 } else { -1.0 }));
                    break;
                }
                if gain > best {
                    best = gain;
                    entering = Some((j, if st == VarState::Lower { 1.0 } else { -1.0 }));
                }
            }
            let Some((q, dir)) = entering else {
                if self.since_refactor > 0 {
                    self.refactor()?;
                    self.recompute_basics();
                    continue;
                }
                if let Some((lo, hi)) = self.saved_bounds.take() {
                    // Finish on the true bounds from the perturbed optimum.
                    self.lo = lo;
                    self.hi = hi;
                    self.place_nonbasic();
                    self.recompute_basics();
                    degenerate = 0;
                    continue;
                }
                return Ok(if phase_one { LpStatus::Infeasible } else { LpStatus::Optimal });
            };

            self.ftran(q, &mut alpha);

            // Harris two-pass ratio test.
            let limit = |s: &Self, p: usize, slack: f64| -> Option<(f64, f64, VarState)> {
                let a = alpha[p];
                if a.abs() <= PIVOT_TOL {
                    return None;
                }
                let j = s.basis[p];
                let xv = s.x[j];
                let rate = -dir * a;
                if rate > 0.0 {
                    let (bound, st) = if phase_one && s.below(j) {
                        (s.lo[j], VarState::Lower)
                    } else if s.above(j) {
                        return None;
                    } else {
                        (s.hi[j], VarState::Upper)
                    };
                    if !bound.is_finite() {
                        return None;
                    }
                    let t = if slack > 0.0 { s.tol(bound) } else { 0.0 };
                    Some((((bound + t - xv) / rate).max(0.0), bound, st))
                } else {
                    let (bound, st) = if phase_one && s.above(j) {
                        (s.hi[j], VarState::Upper)
                    } else if s.below(j) {
                        return None;
                    } else {
                        (s.lo[j], VarState::Lower)
                    };
                    if !bound.is_finite() {
                        return None;
                    }
                    let t = if slack > 0.0 { s.tol(bound) } else { 0.0 };
                    Some((((xv - (bound - t)) / -rate).max(0.0), bound, st))
                }
            };
            let mut theta_max = f64::INFINITY;
            for p in 0..m {
                if let Some((t, _, _)) = limit(self, p, if bland { 0.0 } else { 1.0 }) {
                    theta_max = theta_max.min(t);
                }
            }
            let mut leave: Option<(usize, f64, f64, VarState)> = None;
            if theta_max.is_finite() {
                for p in 0..m {
                    if let Some((t, bound, st)) = limit(self, p, 0.0) {
                        if t > theta_max {
                            continue;
                        }
                        let better = match leave {
                            None => true,
                            Some((lp, lt, _, _)) => {
                                if bland {
                                    t < lt - 1e-12 || (t <= lt + 1e-12 && self.basis[p] < self.basis[lp])
                                } else {
                                    alpha[p].abs() > alpha[lp].abs()
                                }
                            }
                        };
                        if better {
                            leave = Some((p, t, bound, st));
                        }
                    }
                }
            }
            let flip = self.hi[q] - self.lo[q];
            let theta = match leave {
                Some((_, t, _, _)) if t < flip => t,
                _ if flip.is_finite() => flip,
                _ => {
                    if phase_one {
                        return Err(Error::solver("unbounded phase-one ray"));
                    }
                    return Ok(LpStatus::Unbounded);
                }
            };
            self.iterations += 1;
            degenerate = if theta <= 1e-9 { degenerate + 1 } else { 0 };

            self.x[q] += dir * theta;
            for p in 0..m {
                if alpha[p] != 0.0 {
                    let j = self.basis[p];
                    self.x[j] -= dir * alpha[p] * theta;
                }
            }
            match leave {
                Some((p, t, bound, st)) if t < flip => {
                    let j = self.basis[p];
                    self.x[j] = bound;
                    self.state[j] = st;
                    self.basis[p] = q;
                    self.state[q] = VarState::Basic;
                    self.pivot(p, &alpha);
                }
                _ => {
                    if dir > 0.0 {
                        self.state[q] = VarState::Upper;
                        self.x[q] = self.hi[q];
                    } else {
                        self.state[q] = VarState::Lower;
                        self.x[q] = self.lo[q];
                    }
                }
            }
        }
        Err(Error::solver(format!("simplex iteration limit reached ({m} rows, {} columns)", self.n)))
    }

    fn pivot(&mut self, p: usize, alpha: &[f64]) {
        let m = self.m();
        let inv = 1.0 / alpha[p];
        let (before, rest) = self.binv.split_at_mut(p * m);
        let (prow, after) = rest.split_at_mut(m);
        for v in prow.iter_mut() {
            *v *= inv;
        }
        for (i, row) in before.chunks_mut(m).enumerate() {
            let f = alpha[i];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * pv;
                }
            }
        }
        for (off, row) in after.chunks_mut(m).enumerate() {
            let f = alpha[p + 1 + off];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * pv;
                }
            }
        }
        self.since_refactor += 1;
    }
}

/// Dense Gauss–Jordan inverse with partial pivoting (row-major, k×k).
fn invert(mut a: Vec<f64>, k: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; k * k];
    for i in 0..k {
        inv[i * k + i] = 1.0;
    }
    for col in 0..k {
        let mut piv = col;
        for r in col + 1..k {
            if a[r * k + col].abs() > a[piv * k + col].abs() {
                piv = r;
            }
        }
        if a[piv * k + col].abs() < 1e-11 {
            return None;
        }
        if piv != col {
            for c in 0..k {
                a.swap(piv * k + c, col * k + c);
                inv.swap(piv * k + c, col * k + c);
            }
        }
        let d = 1.0 / a[col * k + col];
        for c in 0..k {
            a[col * k + c] *= d;
            inv[col * k + c] *= d;
        }
        for r in 0..k {
            if r == col {
                continue;
            }
            let f = a[r * k + col];
            if f != 0.0 {
                for c in 0..k {
                    a[r * k + c] -= f * a[col * k + c];
                    inv[r * k + c] -= f * inv[col * k + c];
                }
            }
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{Constraint, VarId};

    fn lp(model: &LinearModel) -> LpSolution {
        solve_lp(model).unwrap()
    }

    #[test]
    fn single_bounded_variable() {
        let mut m = LinearModel::new();
        let x = m.add_continuous("x", 0.0, 1.0, 1.0);
        m.add_constraint(Constraint::new("c", vec![(x, 1.0)], Relation::Le, 0.5));
        let s = lp(&m);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 0.5).abs() < 1e-9);
    }

    #[test]
    fn sum_constraint() {
        let mut m = LinearModel::new();
        let x = m.add_continuous("x", 0.0, 1.0, 1.0);
        let y = m.add_continuous("y", 0.0, 1.0, 1.0);
        m.add_constraint(Constraint::new("c", vec![(x, 1.0), (y, 1.0)], Relation::Le, 1.0));
        let s = lp(&m);
        assert!((s.objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pair_cut_relaxation_value() {
        // max z1 + z2 s.t. z1 + z2 <= 1: value 1, the point (0.5, 0.5) is feasible.
        let mut m = LinearModel::new();
        let a = m.add_binary("z1", 1.0);
        let b = m.add_binary("z2", 1.0);
        m.add_constraint(Constraint::cut("w", vec![(a, 1.0), (b, 1.0)], Relation::Le, 1.0));
        let s = lp(&m);
        assert!((s.objective - 1.0).abs() < 1e-9);
        let half = [0.5, 0.5];
        assert_eq!(m.constraints()[0].violation(&half), 0.0);
    }

    #[test]
    fn equality_and_ge_rows_need_phase_one() {
        // max x + 2y s.t. x + y = 3, x >= 1, 0 <= x,y <= 2 -> x = 1, y = 2.
        let mut m = LinearModel::new();
        let x = m.add_continuous("x", 0.0, 2.0, 1.0);
        let y = m.add_continuous("y", 0.0, 2.0, 2.0);
        m.add_constraint(Constraint::new("e", vec![(x, 1.0), (y, 1.0)], Relation::Eq, 3.0));
        m.add_constraint(Constraint::new("g", vec![(x, 1.0)], Relation::Ge, 1.0));
        let s = lp(&m);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.values[0] - 1.0).abs() < 1e-9 && (s.values[1] - 2.0).abs() < 1e-9);
        assert!((s.objective - 5.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_rows() {
        let mut m = LinearModel::new();
        let x = m.add_continuous("x", 0.0, 1.0, 1.0);
        m.add_constraint(Constraint::new("g", vec![(x, 1.0)], Relation::Ge, 2.0));
        assert_eq!(lp(&m).status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_column() {
        let mut m = LinearModel::new();
        let x = m.add_continuous("x", 0.0, f64::INFINITY, 1.0);
        let y = m.add_continuous("y", 0.0, 1.0, 0.0);
        m.add_constraint(Constraint::new("c", vec![(x, -1.0), (y, 1.0)], Relation::Le, 1.0));
        assert_eq!(lp(&m).status, LpStatus::Unbounded);
    }

    #[test]
    fn deferred_cut_rows_are_enforced() {
        let mut m = LinearModel::new();
        let v: Vec<VarId> = (0..6).map(|i| m.add_continuous(format!("z{i}"), 0.0, 1.0, 1.0)).collect();
        for i in 0..6 {
            for j in i + 1..6 {
                m.add_constraint(Constraint::cut(
                    format!("c{i}_{j}"),
                    vec![(v[i], 1.0), (v[j], 1.0)],
                    Relation::Le,
                    1.0,
                ));
            }
        }
        // Odd-cycle free complete graph K6: LP optimum 3 at z = 1/2.
        let s = lp(&m);
        assert!((s.objective - 3.0).abs() < 1e-9);
        for c in m.constraints() {
            assert!(c.violation(&s.values) < 1e-7);
        }
    }

    #[test]
    fn random_lps_satisfy_rows() {
        // Small deterministic pseudo-random packing/covering LPs.
        let mut seed = 12345u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 33) as f64) / (1u64 << 31) as f64
        };
        for _ in 0..30 {
            let mut m = LinearModel::new();
            let nv = 8;
            let v: Vec<VarId> = (0..nv).map(|i| m.add_continuous(format!("x{i}"), 0.0, 1.0 + next(), next())).collect();
            for r in 0..6 {
                let mut terms: Vec<(VarId, f64)> = Vec::new();
                for &x in &v {
                    if next() < 0.5 {
                        terms.push((x, next() * 2.0));
                    }
                }
                let rel = if r % 3 == 0 { Relation::Ge } else { Relation::Le };
                let rhs = if rel == Relation::Ge { 0.3 } else { 1.0 + next() };
                m.add_constraint(Constraint::new(format!("r{r}"), terms, rel, rhs));
            }
            let s = lp(&m);
            if s.status == LpStatus::Optimal {
                for c in m.constraints() {
                    assert!(c.violation(&s.values) <= 1e-7);
                }
                for (x, var) in s.values.iter().zip(m.variables()) {
                    assert!(*x >= var.lower - 1e-7 && *x <= var.upper + 1e-7);
                }
            }
        }
    }

    #[test]
    fn warm_resolves_match_cold_solves() {
        let mut seed = 777u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 33) as f64) / (1u64 << 31) as f64
        };
        for round in 0..40 {
            let nv = 10;
            let objs: Vec<f64> = (0..nv).map(|_| next()).collect();
            let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
            for _ in 0..12 {
                let mut terms = Vec::new();
                for i in 0..nv {
                    if next() < 0.4 {
                        terms.push((i, 0.5 + next()));
                    }
                }
                rows.push((terms, 1.0 + next()));
            }
            let fixed = (round % nv, if round % 2 == 0 { 0.0 } else { 1.0 });
            let build = |fix: Option<(usize, f64)>, cuts_from: usize| {
                let mut m = LinearModel::new();
                let v: Vec<VarId> = (0..nv)
                    .map(|i| match fix {
                        Some((j, val)) if j == i => m.add_continuous(format!("x{i}"), val, val, objs[i]),
                        _ => m.add_continuous(format!("x{i}"), 0.0, 1.0, objs[i]),
                    })
                    .collect();
                for (r, (terms, rhs)) in rows.iter().enumerate() {
                    let t = terms.iter().map(|&(i, a)| (v[i], a)).collect();
                    let c = if r >= cuts_from {
                        Constraint::cut(format!("c{r}"), t, Relation::Le, *rhs)
                    } else {
                        Constraint::new(format!("r{r}"), t, Relation::Le, *rhs)
                    };
                    m.add_constraint(c);
                }
                m
            };
            // Warm: solve, then fix a variable and re-solve from the same engine.
            let model = build(None, 6);
            let mut engine = LpEngine::new(&model);
            assert_eq!(engine.solve(&model).unwrap(), LpStatus::Optimal);
            let mut lo: Vec<f64> = vec![0.0; nv];
            let mut hi: Vec<f64> = vec![1.0; nv];
            lo[fixed.0] = fixed.1;
            hi[fixed.0] = fixed.1;
            engine.set_bounds(&lo, &hi);
            let status = engine.solve(&model).unwrap();
            let cold = lp(&build(Some(fixed), rows.len()));
            assert_eq!(status, cold.status);
            if status == LpStatus::Optimal {
                let warm = model.objective_value(&engine.primal());
                assert!((warm - cold.objective).abs() < 1e-7, "round {round}: {warm} vs {}", cold.objective);
            }
        }
    }
}
