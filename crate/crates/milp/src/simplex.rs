//! Bounded-variable revised primal simplex.
//!
//! Every row `a_i x (rel) b_i` becomes `a_i x - w_i = 0` with a logical
//! variable `w_i` carrying the row bounds, so the working problem only has
//! equality rows and box bounds. Phase 1 minimizes the sum of bound
//! infeasibilities of the basic variables from whatever basis it starts at,
//! which lets branch-and-bound restart from a parent basis after tightening
//! bounds. Pricing is Dantzig's rule; after a streak of degenerate pivots it
//! falls back to Bland's rule until progress resumes.

use crate::lu::LuFactor;
use crate::model::{LinearProgram, Relation, Sense};

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Primal feasibility tolerance (bounds and rows).
    pub primal: f64,
    /// Reduced-cost tolerance for optimality.
    pub dual: f64,
    /// Smallest acceptable pivot magnitude in the ratio test.
    pub pivot: f64,
    /// Degenerate pivots in a row before switching to Bland's rule.
    pub degenerate_streak: usize,
    /// Etas accumulated before refactorizing the basis.
    pub refactor_interval: usize,
    /// Hard cap on simplex iterations; 0 picks a size-based default.
    pub max_iterations: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            primal: 1e-8,
            dual: 1e-7,
            pivot: 1e-9,
            degenerate_streak: 50,
            refactor_interval: 100,
            max_iterations: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    /// The basis could not be kept numerically nonsingular.
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at its current value.
    Free,
}

/// Simplex basis over structural variables followed by one logical per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    pub states: Vec<VarState>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Sensitivity of the objective to each row's right-hand side.
    pub duals: Vec<f64>,
    /// Sensitivity of the objective to each variable's active bound.
    pub reduced_costs: Vec<f64>,
    /// Row multipliers proving infeasibility, see [`certificate_margin`].
    pub farkas: Option<Vec<f64>>,
    pub iterations: usize,
    pub message: Option<String>,
    pub basis: Option<Basis>,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Solves `lp` from a slack basis.
pub fn solve_lp(lp: &LinearProgram, tol: &Tolerances) -> LpSolution {
    solve_lp_from(lp, tol, None)
}

/// Solves `lp`, starting from `warm` when it has the right shape.
pub fn solve_lp_from(lp: &LinearProgram, tol: &Tolerances, warm: Option<&Basis>) -> LpSolution {
    if let Err(e) = lp.validate() {
        return LpSolution {
            status: LpStatus::Failed,
            x: vec![0.0; lp.num_vars()],
            objective: f64::NAN,
            duals: vec![0.0; lp.num_rows()],
            reduced_costs: vec![0.0; lp.num_vars()],
            farkas: None,
            iterations: 0,
            message: Some(e.to_string()),
            basis: None,
        };
    }
    let mut s = Simplex::new(lp, *tol);
    s.initialize(warm);
    let status = s.run();
    s.finish(lp, status)
}

/// For row multipliers `y`, the largest value that `sum_i y_i (a_i x - w_i)`
/// can take over the variable and row bounds. A negative margin proves the
/// rows cannot all hold, because the combination must equal zero. Returns
/// `+inf` when an unbounded direction makes the certificate inconclusive.
pub fn certificate_margin(lp: &LinearProgram, y: &[f64]) -> f64 {
    let mut g = vec![0.0; lp.num_vars()];
    for (row, &yi) in lp.rows.iter().zip(y) {
        for &(j, a) in &row.coeffs {
            g[j] += yi * a;
        }
    }
    let mut total = 0.0;
    for (j, &gj) in g.iter().enumerate() {
        if gj.abs() < 1e-12 {
            continue;
        }
        let best = if gj > 0.0 { lp.upper[j] } else { lp.lower[j] };
        if !best.is_finite() {
            return f64::INFINITY;
        }
        total += gj * best;
    }
    for (row, &yi) in lp.rows.iter().zip(y) {
        if yi.abs() < 1e-12 {
            continue;
        }
        let (lo, hi) = row_bounds(row.relation, row.rhs);
        // maximize -yi * w over w in [lo, hi]
        let best = if yi > 0.0 { lo } else { hi };
        if !best.is_finite() {
            return f64::INFINITY;
        }
        total -= yi * best;
    }
    total
}

fn row_bounds(rel: Relation, rhs: f64) -> (f64, f64) {
    match rel {
        Relation::Le => (f64::NEG_INFINITY, rhs),
        Relation::Ge => (rhs, f64::INFINITY),
        Relation::Eq => (rhs, rhs),
    }
}

fn pow2_scale(v: f64) -> f64 {
    if !(v.is_finite() && v > 0.0) {
        return 1.0;
    }
    2f64.powi(v.log2().round() as i32)
}

enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    Failed(String),
}

struct Simplex {
    m: usize,
    n: usize,
    tol: Tolerances,
    col_start: Vec<usize>,
    row_idx: Vec<usize>,
    val: Vec<f64>,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    lo: Vec<f64>,
    up: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    pos_of: Vec<usize>,
    lu: Option<LuFactor>,
    iterations: usize,
    phase_one: bool,
    pi: Vec<f64>,
    work: Vec<f64>,
}

impl Simplex {
    fn new(lp: &LinearProgram, tol: Tolerances) -> Self {
        let m = lp.num_rows();
        let n = lp.num_vars();
        // column-major copy with duplicate entries merged
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                if a != 0.0 {
                    cols[j].push((i, a));
                }
            }
        }
        for c in cols.iter_mut() {
            c.sort_by_key(|e| e.0);
            c.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
            c.retain(|e| e.1 != 0.0);
        }

        // geometric scaling, a few alternating passes, powers of two only
        let mut row_scale = vec![1.0; m];
        let mut col_scale = vec![1.0; n];
        for _ in 0..4 {
            let mut rmin = vec![f64::INFINITY; m];
            let mut rmax = vec![0.0_f64; m];
            for (j, c) in cols.iter().enumerate() {
                for &(i, a) in c {
                    let v = (a * row_scale[i] * col_scale[j]).abs();
                    rmin[i] = rmin[i].min(v);
                    rmax[i] = rmax[i].max(v);
                }
            }
            for i in 0..m {
                if rmax[i] > 0.0 {
                    row_scale[i] /= pow2_scale((rmin[i] * rmax[i]).sqrt());
                }
            }
            for (j, c) in cols.iter().enumerate() {
                let mut cmin = f64::INFINITY;
                let mut cmax = 0.0_f64;
                for &(i, a) in c {
                    let v = (a * row_scale[i] * col_scale[j]).abs();
                    cmin = cmin.min(v);
                    cmax = cmax.max(v);
                }
                if cmax > 0.0 {
                    col_scale[j] /= pow2_scale((cmin * cmax).sqrt());
                }
            }
        }

        let mut col_start = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        let mut val = Vec::new();
        col_start.push(0);
        for (j, c) in cols.iter().enumerate() {
            for &(i, a) in c {
                row_idx.push(i);
                val.push(a * row_scale[i] * col_scale[j]);
            }
            col_start.push(row_idx.len());
        }

        let sign = match lp.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut lo = Vec::with_capacity(n + m);
        let mut up = Vec::with_capacity(n + m);
        let mut cost = Vec::with_capacity(n + m);
        for j in 0..n {
            lo.push(lp.lower[j] / col_scale[j]);
            up.push(lp.upper[j] / col_scale[j]);
            cost.push(sign * lp.objective[j] * col_scale[j]);
        }
        for (i, row) in lp.rows.iter().enumerate() {
            let (l, u) = row_bounds(row.relation, row.rhs);
            lo.push(l * row_scale[i]);
            up.push(u * row_scale[i]);
            cost.push(0.0);
        }

        Self {
            m,
            n,
            tol,
            col_start,
            row_idx,
            val,
            row_scale,
            col_scale,
            lo,
            up,
            cost,
            x: vec![0.0; n + m],
            state: vec![VarState::AtLower; n + m],
            basis: Vec::new(),
            pos_of: vec![NONE; n + m],
            lu: None,
            iterations: 0,
            phase_one: false,
            pi: vec![0.0; m],
            work: vec![0.0; m],
        }
    }

    fn nonbasic_state(&self, j: usize, prefer_upper: bool) -> VarState {
        let (l, u) = (self.lo[j], self.up[j]);
        match (l.is_finite(), u.is_finite()) {
            (true, true) => {
                if prefer_upper && l < u {
                    VarState::AtUpper
                } else {
                    VarState::AtLower
                }
            }
            (true, false) => VarState::AtLower,
            (false, true) => VarState::AtUpper,
            (false, false) => VarState::Free,
        }
    }

    fn snap_nonbasic(&mut self, j: usize) {
        match self.state[j] {
            VarState::AtLower => self.x[j] = self.lo[j],
            VarState::AtUpper => self.x[j] = self.up[j],
            VarState::Free => {}
            VarState::Basic => {}
        }
    }

    fn initialize(&mut self, warm: Option<&Basis>) {
        let ntot = self.n + self.m;
        let usable = warm.filter(|b| {
            b.states.len() == ntot
                && b.states.iter().filter(|s| **s == VarState::Basic).count() == self.m
        });
        match usable {
            Some(b) => {
                for j in 0..ntot {
                    let st = b.states[j];
                    self.state[j] = match st {
                        VarState::Basic => VarState::Basic,
                        VarState::AtUpper if self.up[j].is_finite() => VarState::AtUpper,
                        VarState::AtLower if self.lo[j].is_finite() => VarState::AtLower,
                        VarState::AtUpper | VarState::AtLower | VarState::Free => {
                            self.nonbasic_state(j, st == VarState::AtUpper)
                        }
                    };
                    if self.state[j] == VarState::Free {
                        self.x[j] = 0.0;
                    }
                }
            }
            None => {
                for j in 0..self.n {
                    let (l, u) = (self.lo[j], self.up[j]);
                    let prefer_upper = l.is_finite() && u.is_finite() && u.abs() < l.abs();
                    self.state[j] = self.nonbasic_state(j, prefer_upper);
                    if self.state[j] == VarState::Free {
                        self.x[j] = 0.0;
                    }
                }
                for j in self.n..ntot {
                    self.state[j] = VarState::Basic;
                }
            }
        }
        self.basis.clear();
        self.pos_of.iter_mut().for_each(|p| *p = NONE);
        for j in 0..ntot {
            if self.state[j] == VarState::Basic {
                self.pos_of[j] = self.basis.len();
                self.basis.push(j);
            } else {
                self.snap_nonbasic(j);
            }
        }
    }

    fn column(&self, j: usize, buf: &mut Vec<(usize, f64)>) {
        if j < self.n {
            for e in self.col_start[j]..self.col_start[j + 1] {
                buf.push((self.row_idx[e], self.val[e]));
            }
        } else {
            buf.push((j - self.n, -1.0));
        }
    }

    fn column_dot(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            let mut s = 0.0;
            for e in self.col_start[j]..self.col_start[j + 1] {
                s += self.val[e] * y[self.row_idx[e]];
            }
            s
        } else {
            -y[j - self.n]
        }
    }

    /// Factors the current basis, repairing singular columns with logicals,
    /// and recomputes the basic values from the nonbasic ones.
    fn refactor(&mut self) -> Result<(), String> {
        for _attempt in 0..5 {
            let basis = self.basis.clone();
            let result = LuFactor::factor(self.m, |p, buf| self.column(basis[p], buf));
            match result {
                Ok(lu) => {
                    self.lu = Some(lu);
                    self.recompute_basics();
                    return Ok(());
                }
                Err(sing) => {
                    for (pos, row) in sing.replacements {
                        let out = self.basis[pos];
                        let logical = self.n + row;
                        if self.state[logical] == VarState::Basic {
                            continue;
                        }
                        self.state[out] = self.nonbasic_state(out, false);
                        if self.state[out] != VarState::Free {
                            self.snap_nonbasic(out);
                        }
                        self.pos_of[out] = NONE;
                        self.basis[pos] = logical;
                        self.pos_of[logical] = pos;
                        self.state[logical] = VarState::Basic;
                    }
                }
            }
        }
        Err("basis stayed singular after repairs".into())
    }

    fn recompute_basics(&mut self) {
        let mut rhs = vec![0.0; self.m];
        for j in 0..self.n + self.m {
            if self.state[j] == VarState::Basic || self.x[j] == 0.0 {
                continue;
            }
            let v = self.x[j];
            if j < self.n {
                for e in self.col_start[j]..self.col_start[j + 1] {
                    rhs[self.row_idx[e]] -= self.val[e] * v;
                }
            } else {
                rhs[j - self.n] += v;
            }
        }
        let lu = self.lu.as_ref().expect("factored");
        lu.ftran(&mut rhs, &mut self.work);
        for (p, &j) in self.basis.iter().enumerate() {
            self.x[j] = rhs[p];
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        let t = self.tol.primal;
        if v < self.lo[j] - t * (1.0 + self.lo[j].abs()) {
            self.lo[j] - v
        } else if v > self.up[j] + t * (1.0 + self.up[j].abs()) {
            v - self.up[j]
        } else {
            0.0
        }
    }

    /// Phase-dependent cost of basic variable `j`.
    fn basic_cost(&self, j: usize) -> f64 {
        if self.phase_one {
            let v = self.x[j];
            let t = self.tol.primal;
            if v < self.lo[j] - t * (1.0 + self.lo[j].abs()) {
                -1.0
            } else if v > self.up[j] + t * (1.0 + self.up[j].abs()) {
                1.0
            } else {
                0.0
            }
        } else {
            self.cost[j]
        }
    }

    fn compute_duals(&mut self) {
        for (p, &j) in self.basis.iter().enumerate() {
            self.pi[p] = self.basic_cost(j);
        }
        let lu = self.lu.as_ref().expect("factored");
        lu.btran(&mut self.pi, &mut self.work);
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        let c = if self.phase_one { 0.0 } else { self.cost[j] };
        c - self.column_dot(j, &self.pi)
    }

    /// Picks an entering variable and its direction (+1 increase, -1 decrease).
    fn price(&self, bland: bool) -> Option<(usize, f64)> {
        let tol = self.tol.dual;
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.n + self.m {
            let dir = match self.state[j] {
                VarState::Basic => continue,
                VarState::AtLower => {
                    if self.lo[j] == self.up[j] {
                        continue;
                    }
                    let d = self.reduced_cost(j);
                    if d < -tol {
                        1.0
                    } else {
                        continue;
                    }
                }
                VarState::AtUpper => {
                    if self.lo[j] == self.up[j] {
                        continue;
                    }
                    let d = self.reduced_cost(j);
                    if d > tol {
                        -1.0
                    } else {
                        continue;
                    }
                }
                VarState::Free => {
                    let d = self.reduced_cost(j);
                    if d < -tol {
                        1.0
                    } else if d > tol {
                        -1.0
                    } else {
                        continue;
                    }
                }
            };
            if bland {
                return Some((j, dir));
            }
            let score = self.reduced_cost(j).abs();
            if score > best_score {
                best_score = score;
                best = Some((j, dir));
            }
        }
        best
    }

    fn run(&mut self) -> Outcome {
        let max_iter = if self.tol.max_iterations > 0 {
            self.tol.max_iterations
        } else {
            20 * (self.m + self.n) + 10_000
        };
        if let Err(e) = self.refactor() {
            return Outcome::Failed(e);
        }
        let mut degenerate = 0usize;
        let mut alpha = vec![0.0; self.m];
        let mut buf = Vec::new();
        let mut rechecks = 0;
        loop {
            if self.iterations >= max_iter {
                return Outcome::IterationLimit;
            }
            if self.lu.as_ref().map_or(0, |l| l.num_etas()) >= self.tol.refactor_interval {
                if let Err(e) = self.refactor() {
                    return Outcome::Failed(e);
                }
            }
            self.phase_one = self.basis.iter().any(|&j| self.infeasibility(j) > 0.0);
            self.compute_duals();
            let bland = degenerate >= self.tol.degenerate_streak;
            let Some((q, dir)) = self.price(bland) else {
                // confirm on a fresh factorization before declaring a result
                if self.lu.as_ref().map_or(0, |l| l.num_etas()) > 0 && rechecks < 3 {
                    rechecks += 1;
                    if let Err(e) = self.refactor() {
                        return Outcome::Failed(e);
                    }
                    continue;
                }
                return if self.phase_one {
                    Outcome::Infeasible
                } else {
                    Outcome::Optimal
                };
            };

            alpha.iter_mut().for_each(|a| *a = 0.0);
            buf.clear();
            self.column(q, &mut buf);
            for &(i, a) in &buf {
                alpha[i] = a;
            }
            self.lu.as_ref().unwrap().ftran(&mut alpha, &mut self.work);

            let step = self.ratio_test(q, dir, &alpha, bland);
            self.iterations += 1;
            match step {
                Step::Unbounded => {
                    if self.phase_one {
                        return Outcome::Failed("unbounded ray in phase 1".into());
                    }
                    return Outcome::Unbounded;
                }
                Step::Flip(theta) => {
                    self.apply_move(q, dir, theta, &alpha);
                    self.state[q] = if dir > 0.0 {
                        VarState::AtUpper
                    } else {
                        VarState::AtLower
                    };
                    self.snap_nonbasic(q);
                    degenerate = 0;
                }
                Step::Pivot { pos, theta, to_upper } => {
                    if theta <= 1e-12 {
                        degenerate += 1;
                    } else {
                        degenerate = 0;
                    }
                    self.apply_move(q, dir, theta, &alpha);
                    let out = self.basis[pos];
                    self.state[out] = if to_upper {
                        VarState::AtUpper
                    } else {
                        VarState::AtLower
                    };
                    self.snap_nonbasic(out);
                    self.pos_of[out] = NONE;
                    self.basis[pos] = q;
                    self.pos_of[q] = pos;
                    self.state[q] = VarState::Basic;
                    self.lu.as_mut().unwrap().push_eta(pos, &alpha);
                    if alpha[pos].abs() < 1e-7 {
                        if let Err(e) = self.refactor() {
                            return Outcome::Failed(e);
                        }
                    }
                }
            }
        }
    }

    fn apply_move(&mut self, q: usize, dir: f64, theta: f64, alpha: &[f64]) {
        if theta == 0.0 {
            return;
        }
        self.x[q] += dir * theta;
        for (p, &a) in alpha.iter().enumerate() {
            if a != 0.0 {
                let j = self.basis[p];
                self.x[j] -= dir * theta * a;
            }
        }
    }

    /// Harris two-pass ratio test. In phase 1 an infeasible basic variable
    /// only blocks at the bound it is moving towards.
    fn ratio_test(&self, q: usize, dir: f64, alpha: &[f64], bland: bool) -> Step {
        let tp = self.tol.primal;
        let piv_tol = self.tol.pivot;
        let flip = if self.lo[q].is_finite() && self.up[q].is_finite() {
            self.up[q] - self.lo[q]
        } else {
            f64::INFINITY
        };

        // candidate blocking rows: (position, exact ratio, relaxed ratio, to_upper)
        let mut cands: Vec<(usize, f64, f64, bool)> = Vec::new();
        for (p, &a) in alpha.iter().enumerate() {
            if a.abs() <= piv_tol {
                continue;
            }
            let j = self.basis[p];
            let delta = -dir * a;
            let v = self.x[j];
            let (l, u) = (self.lo[j], self.up[j]);
            let tl = tp * (1.0 + l.abs());
            let tu = tp * (1.0 + u.abs());
            let below = v < l - tl;
            let above = v > u + tu;
            if delta < 0.0 {
                // moving down
                if above {
                    cands.push((p, (v - u) / -delta, (v - u + tu) / -delta, true));
                } else if !below && l.is_finite() {
                    cands.push((p, ((v - l) / -delta).max(0.0), (v - l + tl) / -delta, false));
                }
            } else if below {
                cands.push((p, (l - v) / delta, (l - v + tl) / delta, false));
            } else if !above && u.is_finite() {
                cands.push((p, ((u - v) / delta).max(0.0), (u - v + tu) / delta, true));
            }
        }

        if cands.is_empty() {
            return if flip.is_finite() {
                Step::Flip(flip)
            } else {
                Step::Unbounded
            };
        }

        if bland {
            let min_ratio = cands.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
            if flip <= min_ratio {
                return Step::Flip(flip);
            }
            let pick = cands
                .iter()
                .filter(|c| c.1 <= min_ratio + 1e-12)
                .min_by_key(|c| self.basis[c.0])
                .unwrap();
            return Step::Pivot {
                pos: pick.0,
                theta: pick.1,
                to_upper: pick.3,
            };
        }

        let theta_max = cands.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
        if flip <= theta_max {
            return Step::Flip(flip);
        }
        let mut pick: Option<&(usize, f64, f64, bool)> = None;
        for c in &cands {
            if c.1 <= theta_max {
                match pick {
                    Some(b) if alpha[b.0].abs() >= alpha[c.0].abs() => {}
                    _ => pick = Some(c),
                }
            }
        }
        let pick = pick.unwrap_or_else(|| {
            cands
                .iter()
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap()
        });
        Step::Pivot {
            pos: pick.0,
            theta: pick.1,
            to_upper: pick.3,
        }
    }

    fn finish(mut self, lp: &LinearProgram, outcome: Outcome) -> LpSolution {
        let (status, message) = match outcome {
            Outcome::Optimal => (LpStatus::Optimal, None),
            Outcome::Infeasible => (LpStatus::Infeasible, None),
            Outcome::Unbounded => (LpStatus::Unbounded, None),
            Outcome::IterationLimit => (
                LpStatus::IterationLimit,
                Some(format!("stopped after {} iterations", self.iterations)),
            ),
            Outcome::Failed(msg) => (LpStatus::Failed, Some(msg)),
        };
        let n = self.n;
        let mut x: Vec<f64> = (0..n).map(|j| self.x[j] * self.col_scale[j]).collect();
        if status == LpStatus::Optimal {
            for j in 0..n {
                x[j] = x[j].clamp(lp.lower[j], lp.upper[j]);
            }
        }
        let sign = match lp.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut duals = vec![0.0; self.m];
        let mut reduced_costs = vec![0.0; n];
        let mut farkas = None;
        if self.lu.is_some() {
            match status {
                LpStatus::Optimal => {
                    self.phase_one = false;
                    self.compute_duals();
                    for i in 0..self.m {
                        duals[i] = sign * self.pi[i] * self.row_scale[i];
                    }
                    for (j, rc) in reduced_costs.iter_mut().enumerate() {
                        *rc = sign * self.reduced_cost(j) / self.col_scale[j];
                    }
                }
                LpStatus::Infeasible => {
                    self.phase_one = true;
                    self.compute_duals();
                    farkas = Some(
                        (0..self.m)
                            .map(|i| self.pi[i] * self.row_scale[i])
                            .collect(),
                    );
                }
                _ => {}
            }
        }
        let objective = lp.objective_value(&x);
        LpSolution {
            status,
            x,
            objective,
            duals,
            reduced_costs,
            farkas,
            iterations: self.iterations,
            message,
            basis: Some(Basis {
                states: self.state.clone(),
            }),
        }
    }
}

enum Step {
    Unbounded,
    Flip(f64),
    Pivot { pos: usize, theta: f64, to_upper: bool },
}
