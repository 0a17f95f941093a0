//! Best-bound branch-and-bound with depth-first plunging.
//!
//! Among the fractional integer variables of the highest priority class, the
//! most fractional is branched on (ties go to the lowest index). After
//! branching the solver dives into the child on the rounding
//! side of the fractional value and parks the sibling in a best-bound queue.
//! Every integral LP point is polished by fixing the integer variables at
//! their rounded values and re-solving, so incumbents are exactly integral.
//! Fractional points also get a lock-respecting rounding attempt, polished
//! the same way.

use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::collections::{BinaryHeap, HashSet};
use std::hash::{Hash, Hasher};
use std::rc::Rc;
use std::time::{Duration, Instant};

use crate::error::MilpError;
use crate::model::{Milp, Relation, Sense};
use crate::simplex::{solve_lp_from, Basis, LpStatus, Tolerances};

#[derive(Debug, Clone)]
pub struct MilpOptions {
    pub int_tol: f64,
    pub rel_gap: f64,
    pub node_limit: Option<usize>,
    pub time_limit: Option<Duration>,
    pub lp: Tolerances,
    /// Collect one trace line per node.
    pub trace: bool,
    /// Candidate assignment; only its integer entries are used.
    pub initial_solution: Option<Vec<f64>>,
    /// Branching priority per variable. Fractional variables of the highest
    /// priority class are branched on before any other.
    pub priority: Option<Vec<u32>>,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self {
            int_tol: 1e-6,
            rel_gap: 1e-6,
            node_limit: None,
            time_limit: None,
            lp: Tolerances::default(),
            trace: false,
            initial_solution: None,
            priority: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NodeLimit,
    TimeLimit,
    Failed,
}

impl MilpStatus {
    pub fn is_limit(self) -> bool {
        matches!(self, MilpStatus::NodeLimit | MilpStatus::TimeLimit)
    }
}

#[derive(Debug, Clone)]
pub struct MilpSolution {
    pub status: MilpStatus,
    /// Best integral assignment found, if any.
    pub x: Option<Vec<f64>>,
    pub objective: f64,
    /// Best bound over the unexplored tree (equals `objective` when optimal).
    pub bound: f64,
    /// `|bound - objective| / (1 + |objective|)`.
    pub gap: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
    pub wall_time: Duration,
    pub message: Option<String>,
    /// `node <id> depth <d> bound <b> incumbent <z> <outcome>` per node.
    pub trace: Vec<String>,
}

impl MilpSolution {
    pub fn has_incumbent(&self) -> bool {
        self.x.is_some()
    }
}

#[derive(Debug)]
struct Node {
    id: usize,
    depth: usize,
    /// Parent LP bound in maximization orientation.
    bound: f64,
    bounds: Vec<(usize, f64, f64)>,
    warm: Option<Rc<Basis>>,
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
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

struct Search<'a> {
    milp: &'a Milp,
    opts: &'a MilpOptions,
    work: crate::model::LinearProgram,
    orient: f64,
    incumbent: Option<Vec<f64>>,
    incumbent_value: f64,
    lp_iterations: usize,
    trace: Vec<String>,
    trouble: Option<String>,
    /// Rows touching each integer variable, as `(row, coefficient)`.
    int_cols: Vec<Vec<(usize, f64)>>,
    /// Integer parts already polished by the rounding heuristic.
    tried: HashSet<u64>,
}

impl<'a> Search<'a> {
    fn gap_tol(&self) -> f64 {
        self.opts.rel_gap * (1.0 + self.incumbent_value.abs())
    }

    fn prunable(&self, bound: f64) -> bool {
        self.incumbent.is_some() && bound <= self.incumbent_value + self.gap_tol()
    }

    fn apply_bounds(&mut self, changes: &[(usize, f64, f64)]) {
        for j in 0..self.milp.lp.num_vars() {
            if self.milp.integer[j] {
                self.work.lower[j] = self.milp.lp.lower[j];
                self.work.upper[j] = self.milp.lp.upper[j];
            }
        }
        for &(j, l, u) in changes {
            self.work.lower[j] = l;
            self.work.upper[j] = u;
        }
    }

    /// Fixes the integer variables at the rounding of `x` and re-solves the
    /// continuous part; adopts the result if it improves the incumbent.
    fn polish(&mut self, x: &[f64], warm: Option<&Basis>) -> bool {
        let mut fixes = Vec::new();
        for (j, &v) in x.iter().enumerate() {
            if self.milp.integer[j] {
                let r = v.round().clamp(self.milp.lp.lower[j], self.milp.lp.upper[j]);
                fixes.push((j, r, r));
            }
        }
        self.apply_bounds(&fixes);
        let sol = solve_lp_from(&self.work, &self.opts.lp, warm);
        self.lp_iterations += sol.iterations;
        if sol.status != LpStatus::Optimal {
            return false;
        }
        let value = self.orient * sol.objective;
        if self.incumbent.is_none() || value > self.incumbent_value {
            let mut xs = sol.x;
            for &(j, r, _) in &fixes {
                xs[j] = r;
            }
            self.incumbent = Some(xs);
            self.incumbent_value = value;
            return true;
        }
        false
    }

    /// Simple rounding: each fractional integer variable moves to the
    /// neighbouring integer whose change keeps every row it appears in
    /// feasible at the current LP point. Succeeds only if all of them can.
    fn round(&self, x: &[f64]) -> Option<Vec<f64>> {
        let lp = &self.work;
        let tol = self.opts.lp.primal * 10.0;
        let mut activity: Vec<f64> = lp
            .rows
            .iter()
            .map(|r| r.coeffs.iter().map(|&(j, a)| a * x[j]).sum())
            .collect();
        let mut y = x.to_vec();
        for j in 0..x.len() {
            if !self.milp.integer[j] {
                continue;
            }
            let v = x[j];
            let (fl, ce) = (v.floor(), v.ceil());
            if v - fl <= self.opts.int_tol {
                y[j] = fl;
                continue;
            }
            if ce - v <= self.opts.int_tol {
                y[j] = ce;
                continue;
            }
            let fits = |target: f64, activity: &[f64]| {
                target >= lp.lower[j]
                    && target <= lp.upper[j]
                    && self.int_cols[j].iter().all(|&(i, a)| {
                        let row = &lp.rows[i];
                        let act = activity[i] + a * (target - v);
                        let slack = tol * (1.0 + row.rhs.abs());
                        match row.relation {
                            Relation::Le => act <= row.rhs + slack,
                            Relation::Ge => act >= row.rhs - slack,
                            Relation::Eq => (act - row.rhs).abs() <= slack,
                        }
                    })
            };
            let pick = if fits(fl, &activity) {
                fl
            } else if fits(ce, &activity) {
                ce
            } else {
                return None;
            };
            for &(i, a) in &self.int_cols[j] {
                activity[i] += a * (pick - v);
            }
            y[j] = pick;
        }
        Some(y)
    }

    /// Runs [`Search::round`] and polishes a rounding not tried before.
    fn try_rounding(&mut self, x: &[f64], warm: Option<&Basis>) -> bool {
        let Some(y) = self.round(x) else {
            return false;
        };
        let mut h = DefaultHasher::new();
        for j in (0..y.len()).filter(|&j| self.milp.integer[j]) {
            (y[j] as i64).hash(&mut h);
        }
        if !self.tried.insert(h.finish()) {
            return false;
        }
        let node_bounds: Vec<(usize, f64, f64)> = (0..y.len())
            .filter(|&j| self.milp.integer[j])
            .map(|j| (j, self.work.lower[j], self.work.upper[j]))
            .collect();
        let improved = self.polish(&y, warm);
        self.apply_bounds(&node_bounds);
        improved
    }

    fn branching_var(&self, x: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_key = (0u32, f64::INFINITY);
        for (j, &v) in x.iter().enumerate() {
            if !self.milp.integer[j] {
                continue;
            }
            let frac = v - v.floor();
            if frac.min(1.0 - frac) <= self.opts.int_tol {
                continue;
            }
            let prio = self.opts.priority.as_ref().map_or(0, |p| p.get(j).copied().unwrap_or(0));
            let score = (frac - 0.5).abs();
            if best.is_none() || prio > best_key.0 || (prio == best_key.0 && score < best_key.1) {
                best_key = (prio, score);
                best = Some((j, v));
            }
        }
        best
    }

    fn log(&mut self, node: &Node, bound: f64, outcome: &str) {
        if self.opts.trace {
            let inc = if self.incumbent.is_some() {
                format!("{:.6e}", self.orient * self.incumbent_value)
            } else {
                "none".to_string()
            };
            self.trace.push(format!(
                "node {} depth {} bound {:.6e} incumbent {} {}",
                node.id,
                node.depth,
                self.orient * bound,
                inc,
                outcome
            ));
        }
    }
}

/// Solves `milp` by branch-and-bound.
pub fn solve_milp(milp: &Milp, opts: &MilpOptions) -> Result<MilpSolution, MilpError> {
    milp.validate()?;
    let start = Instant::now();
    let orient = match milp.lp.sense {
        Sense::Maximize => 1.0,
        Sense::Minimize => -1.0,
    };
    let mut s = Search {
        milp,
        opts,
        work: milp.lp.clone(),
        orient,
        incumbent: None,
        incumbent_value: f64::NEG_INFINITY,
        lp_iterations: 0,
        trace: Vec::new(),
        trouble: None,
        int_cols: vec![Vec::new(); milp.lp.num_vars()],
        tried: HashSet::new(),
    };
    for (i, row) in milp.lp.rows.iter().enumerate() {
        for &(j, a) in &row.coeffs {
            if milp.integer[j] {
                s.int_cols[j].push((i, a));
            }
        }
    }

    if let Some(x0) = &opts.initial_solution {
        if x0.len() == milp.lp.num_vars() {
            s.polish(x0, None);
        }
    }

    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    let mut next_id = 1usize;
    let mut nodes = 0usize;
    let mut current = Some(Node {
        id: 0,
        depth: 0,
        bound: f64::INFINITY,
        bounds: Vec::new(),
        warm: None,
    });
    let mut limit: Option<MilpStatus> = None;
    let mut root_unbounded = false;

    loop {
        let node = match current.take() {
            Some(n) => n,
            None => match heap.pop() {
                Some(n) => n,
                None => break,
            },
        };
        if s.prunable(node.bound) {
            s.log(&node, node.bound, "pruned");
            continue;
        }
        if let Some(cap) = opts.node_limit {
            if nodes >= cap {
                limit = Some(MilpStatus::NodeLimit);
                heap.push(node);
                break;
            }
        }
        if let Some(tl) = opts.time_limit {
            if start.elapsed() >= tl {
                limit = Some(MilpStatus::TimeLimit);
                heap.push(node);
                break;
            }
        }
        nodes += 1;

        s.apply_bounds(&node.bounds);
        let mut sol = solve_lp_from(&s.work, &opts.lp, node.warm.as_deref());
        s.lp_iterations += sol.iterations;
        if matches!(sol.status, LpStatus::Failed | LpStatus::IterationLimit) {
            sol = solve_lp_from(&s.work, &opts.lp, None);
            s.lp_iterations += sol.iterations;
        }
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                s.log(&node, node.bound, "infeasible");
                continue;
            }
            LpStatus::Unbounded => {
                if node.depth == 0 {
                    root_unbounded = true;
                    break;
                }
                s.trouble = Some(format!("node {} relaxation unbounded", node.id));
                continue;
            }
            LpStatus::Failed | LpStatus::IterationLimit => {
                s.trouble = Some(format!(
                    "node {} LP failed: {}",
                    node.id,
                    sol.message.clone().unwrap_or_default()
                ));
                s.log(&node, node.bound, "lp-failed");
                continue;
            }
        }
        let bound = (orient * sol.objective).min(node.bound);
        if s.prunable(bound) {
            s.log(&node, bound, "bounded");
            continue;
        }
        let warm = sol.basis.take().map(Rc::new);
        match s.branching_var(&sol.x) {
            None => {
                let improved = s.polish(&sol.x, warm.as_deref());
                s.log(&node, bound, if improved { "integral*" } else { "integral" });
            }
            Some((j, v)) => {
                if s.try_rounding(&sol.x, warm.as_deref()) && s.prunable(bound) {
                    s.log(&node, bound, "rounded");
                    continue;
                }
                s.log(&node, bound, "branched");
                let (lo, hi) = (s.work.lower[j], s.work.upper[j]);
                let mut down = node.bounds.clone();
                down.push((j, lo, v.floor()));
                let mut up = node.bounds;
                up.push((j, v.ceil(), hi));
                let prefer_up = v - v.floor() >= 0.5;
                let mk = |id: usize, bounds| Node {
                    id,
                    depth: node.depth + 1,
                    bound,
                    bounds,
                    warm: warm.clone(),
                };
                let (first, second) = if prefer_up {
                    (mk(next_id, up), mk(next_id + 1, down))
                } else {
                    (mk(next_id, down), mk(next_id + 1, up))
                };
                next_id += 2;
                heap.push(second);
                current = Some(first);
            }
        }
    }

    let wall_time = start.elapsed();
    if root_unbounded {
        return Ok(MilpSolution {
            status: MilpStatus::Unbounded,
            x: None,
            objective: orient * f64::INFINITY,
            bound: orient * f64::INFINITY,
            gap: f64::INFINITY,
            nodes,
            lp_iterations: s.lp_iterations,
            wall_time,
            message: None,
            trace: s.trace,
        });
    }

    let open_bound = heap
        .iter()
        .map(|n| n.bound)
        .fold(f64::NEG_INFINITY, f64::max);
    let best_bound = if s.incumbent.is_some() {
        open_bound.max(s.incumbent_value)
    } else {
        open_bound
    };
    let status = match (limit, s.incumbent.is_some(), &s.trouble) {
        (Some(l), _, _) => l,
        (None, _, Some(_)) => MilpStatus::Failed,
        (None, true, None) => MilpStatus::Optimal,
        (None, false, None) => MilpStatus::Infeasible,
    };
    let (objective, gap) = if s.incumbent.is_some() {
        let gap = if status == MilpStatus::Optimal {
            0.0_f64.max((best_bound - s.incumbent_value) / (1.0 + s.incumbent_value.abs()))
        } else {
            (best_bound - s.incumbent_value).abs() / (1.0 + s.incumbent_value.abs())
        };
        (orient * s.incumbent_value, gap)
    } else {
        (f64::NAN, f64::INFINITY)
    };
    let bound = if status == MilpStatus::Optimal {
        objective
    } else {
        orient * best_bound
    };
    Ok(MilpSolution {
        status,
        x: s.incumbent,
        objective,
        bound,
        gap,
        nodes,
        lp_iterations: s.lp_iterations,
        wall_time,
        message: s.trouble,
        trace: s.trace,
    })
}
