//! Brute-force reference for tiny games.
//!
//! Every tier sequence meeting the mean-price rows is priced out directly:
//! the follower LP is solved at those prices, then the leader maximizes its
//! profit over the follower-optimal face. None of the KKT, Big-M or product
//! machinery is involved. [`follower_grid_check`] goes further and avoids
//! the LP solver altogether.

use std::fmt;

use ies_milp::{solve_lp, LinearProgram, LpStatus, Relation, Sense, Tolerances};

use crate::bilevel::{BilevelProblem, Commodity, LinearConstraint, Tag, VarId};
use crate::error::{CoreError, Result};
use crate::reform::ModelBuilder;

pub const DEFAULT_CAP: u128 = 100_000;

/// Relative slack on the follower's optimal cost in the second stage.
const FOLLOWER_SLACK: f64 = 1e-9;

/// Tier index per hour for each commodity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TierSchedule {
    pub electric: Vec<usize>,
    pub heat: Vec<usize>,
}

impl TierSchedule {
    pub fn prices(&self, b: &BilevelProblem, c: Commodity) -> Vec<f64> {
        let (idx, pv) = match c {
            Commodity::Electric => (&self.electric, &b.electric),
            Commodity::Heat => (&self.heat, &b.heat),
        };
        idx.iter().map(|&j| pv.grid[j]).collect()
    }

    /// Reads the selected tiers off a solution vector.
    pub fn from_solution(b: &BilevelProblem, x: &[f64]) -> Self {
        let pick = |tiers: &[Vec<VarId>]| {
            tiers
                .iter()
                .map(|z| {
                    (0..z.len())
                        .max_by(|&a, &c| x[z[a]].total_cmp(&x[z[c]]).then(c.cmp(&a)))
                        .unwrap_or(0)
                })
                .collect()
        };
        TierSchedule {
            electric: pick(&b.electric.tiers),
            heat: pick(&b.heat.tiers),
        }
    }
}

impl fmt::Display for TierSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[usize]| v.iter().map(|j| j.to_string()).collect::<Vec<_>>().join("");
        write!(f, "e{}/h{}", join(&self.electric), join(&self.heat))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceEvaluation {
    pub schedule: TierSchedule,
    pub follower_cost: f64,
    /// `None` when no follower-optimal response admits a feasible dispatch.
    pub leader_profit: Option<f64>,
    /// Total electric and heat load of the chosen response.
    pub electric_load: f64,
    pub heat_load: f64,
    /// Values of the bilevel variables.
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Canonical order: lexicographic in (electric tiers, heat tiers).
    pub table: Vec<PriceEvaluation>,
    pub best: Option<usize>,
    /// Tier sequences before the mean-price filter.
    pub combinations: u128,
}

impl OracleResult {
    pub fn best(&self) -> Option<&PriceEvaluation> {
        self.best.map(|i| &self.table[i])
    }

    pub fn best_profit(&self) -> Option<f64> {
        self.best().and_then(|e| e.leader_profit)
    }

    /// Table as CSV with one row per evaluated schedule.
    pub fn to_csv(&self, b: &BilevelProblem) -> String {
        let mut out = String::from("schedule,electric_prices,heat_prices,follower_cost,leader_profit,electric_load,heat_load\n");
        for e in &self.table {
            let p = |c| {
                e.schedule
                    .prices(b, c)
                    .iter()
                    .map(|v| crate::runner::fmt_num(*v))
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                e.schedule,
                p(Commodity::Electric),
                p(Commodity::Heat),
                crate::runner::fmt_num(e.follower_cost),
                e.leader_profit.map_or("infeasible".to_string(), crate::runner::fmt_num),
                crate::runner::fmt_num(e.electric_load),
                crate::runner::fmt_num(e.heat_load),
            ));
        }
        out
    }
}

fn fixed_price_bounds(b: &BilevelProblem, s: &TierSchedule, lower: &mut [f64], upper: &mut [f64]) {
    for (pv, idx) in [(&b.electric, &s.electric), (&b.heat, &s.heat)] {
        for (t, &sel) in idx.iter().enumerate() {
            for (j, &z) in pv.tiers[t].iter().enumerate() {
                let v = if j == sel { 1.0 } else { 0.0 };
                lower[z] = v;
                upper[z] = v;
            }
            lower[pv.kappa[t]] = pv.grid[sel];
            upper[pv.kappa[t]] = pv.grid[sel];
        }
    }
}

/// Follower cost at fixed prices, as `(variable, coefficient)` terms.
fn follower_cost_terms(b: &BilevelProblem, s: &TierSchedule) -> Vec<(VarId, f64)> {
    let pe = s.prices(b, Commodity::Electric);
    let ph = s.prices(b, Commodity::Heat);
    let mut terms = b.follower_objective.linear.clone();
    for p in &b.products {
        let k = match p.commodity {
            Commodity::Electric => pe[p.hour],
            Commodity::Heat => ph[p.hour],
        };
        terms.push((p.load, p.coeff * k));
    }
    terms
}

/// Solves the follower alone at the prices of `s`, then the leader over the
/// follower-optimal face (optimistic tie-break).
pub fn evaluate_prices(b: &BilevelProblem, s: &TierSchedule, tol: &Tolerances) -> Result<PriceEvaluation> {
    let t_len = b.horizon;
    if s.electric.len() != t_len || s.heat.len() != t_len {
        return Err(CoreError::Shape(format!("tier schedule does not cover {t_len} hours")));
    }
    let cost = follower_cost_terms(b, s);

    // stage 1: follower variables only
    let fvars: Vec<VarId> = b.follower_vars().map(|v| v.id).collect();
    let mut local = vec![usize::MAX; b.vars.len()];
    for (k, &v) in fvars.iter().enumerate() {
        local[v] = k;
    }
    let mut lp1 = LinearProgram::new(Sense::Minimize, fvars.len());
    for (k, &v) in fvars.iter().enumerate() {
        lp1.lower[k] = b.vars[v].lower;
        lp1.upper[k] = b.vars[v].upper;
    }
    for &(v, c) in &cost {
        lp1.objective[local[v]] += c;
    }
    for r in &b.follower_constraints {
        lp1.add_row(r.coeffs.iter().map(|&(v, a)| (local[v], a)).collect(), r.relation, r.rhs);
    }
    let sol1 = solve_lp(&lp1, tol);
    if sol1.status != LpStatus::Optimal {
        return Err(CoreError::Solver(format!("follower LP at {s}: {:?}", sol1.status)));
    }
    let f_star = sol1.objective;

    // stage 2: leader over the follower-optimal face
    let mut mb = ModelBuilder::new(Sense::Maximize, b.vars.clone());
    mb.add_rows(b.leader_constraints.iter().cloned());
    mb.add_rows(b.follower_constraints.iter().cloned());
    mb.add_rows([LinearConstraint::new(
        cost.clone(),
        Relation::Le,
        f_star + FOLLOWER_SLACK * (1.0 + f_star.abs()),
        Tag::FollowerCost,
        "follower_optimal".into(),
    )]);
    let pe = s.prices(b, Commodity::Electric);
    let ph = s.prices(b, Commodity::Heat);
    for p in &b.products {
        let k = match p.commodity {
            Commodity::Electric => pe[p.hour],
            Commodity::Heat => ph[p.hour],
        };
        mb.add_objective([(p.load, p.coeff * k)]);
    }
    mb.add_leader_costs(b, b.pwl_segments)?;
    let mut lp2 = mb.milp().lp;
    fixed_price_bounds(b, s, &mut lp2.lower, &mut lp2.upper);
    let sol2 = solve_lp(&lp2, tol);

    let mut x1 = vec![0.0; b.vars.len()];
    for (k, &v) in fvars.iter().enumerate() {
        x1[v] = sol1.x[k];
    }
    let (leader_profit, x) = match sol2.status {
        LpStatus::Optimal => (Some(sol2.objective + mb.constant), sol2.x[..b.vars.len()].to_vec()),
        LpStatus::Infeasible => (None, x1),
        st => return Err(CoreError::Solver(format!("leader LP at {s}: {st:?}"))),
    };
    let total = |vs: &mut dyn Iterator<Item = VarId>| vs.map(|v| x[v]).sum::<f64>();
    Ok(PriceEvaluation {
        schedule: s.clone(),
        follower_cost: f_star,
        leader_profit,
        electric_load: total(&mut b.follower.load.iter().copied()),
        heat_load: total(&mut b.follower.zones.iter().flat_map(|z| z.heat.iter().copied())),
        x,
    })
}

/// Tier sequences of one commodity whose hourly prices meet the mean rows,
/// in lexicographic order.
fn mean_feasible(grid: &[f64], horizon: usize, mean: f64, tolerance: f64) -> Vec<Vec<usize>> {
    let target = horizon as f64 * mean;
    let slack = 1e-9 * (1.0 + target.abs());
    let mut out = Vec::new();
    let mut seq = vec![0usize; horizon];
    loop {
        let sum: f64 = seq.iter().map(|&j| grid[j]).sum();
        if (sum - target).abs() <= tolerance + slack {
            out.push(seq.clone());
        }
        // odometer, last hour fastest
        let mut pos = horizon;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            seq[pos] += 1;
            if seq[pos] < grid.len() {
                break;
            }
            seq[pos] = 0;
        }
    }
}

/// Evaluates every mean-feasible price schedule and returns the best one.
///
/// Refuses when the raw number of schedules `tiers_e^T * tiers_h^T`
/// exceeds `cap`.
pub fn enumerate_leader(b: &BilevelProblem, cap: u128, tol: &Tolerances) -> Result<OracleResult> {
    let t_len = b.horizon as u32;
    let required = (b.electric.grid.len() as u128)
        .checked_pow(t_len)
        .and_then(|e| (b.heat.grid.len() as u128).checked_pow(t_len).and_then(|h| e.checked_mul(h)))
        .unwrap_or(u128::MAX);
    if required > cap {
        return Err(CoreError::CapExceeded { required, cap });
    }
    let pe = &b.electric;
    let ph = &b.heat;
    let elec = mean_feasible(&pe.grid, b.horizon, pe.mean, pe.tolerance);
    let heat = mean_feasible(&ph.grid, b.horizon, ph.mean, ph.tolerance);
    let mut table = Vec::with_capacity(elec.len() * heat.len());
    for e in &elec {
        for h in &heat {
            let s = TierSchedule {
                electric: e.clone(),
                heat: h.clone(),
            };
            table.push(evaluate_prices(b, &s, tol)?);
        }
    }
    let mut best: Option<usize> = None;
    for (i, ev) in table.iter().enumerate() {
        if let Some(p) = ev.leader_profit {
            if best.map_or(true, |k| p > table[k].leader_profit.unwrap_or(f64::NEG_INFINITY)) {
                best = Some(i);
            }
        }
    }
    Ok(OracleResult {
        table,
        best,
        combinations: required,
    })
}

/// Grid-search optimum of the follower at fixed prices.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCheck {
    /// Best cost over the grid, with the exact quadratic comfort penalty.
    pub objective: f64,
    pub electric_cost: f64,
    /// Per zone, in layout order.
    pub zone_costs: Vec<f64>,
    pub temps: Vec<Vec<f64>>,
    /// The grid optimum exceeds the continuous optimum by at most this much.
    pub lipschitz_bound: f64,
    pub grid_points: usize,
}

/// Exhaustive follower search on a uniform temperature grid; uses no LP.
///
/// The electric part is solved greedily: full curtailment wherever the
/// price is positive, and load shifted from the dearest hours to the
/// cheapest ones. Each zone is searched over all grid trajectories by
/// dynamic programming on the end-of-hour temperature, with the exact
/// quadratic comfort penalty. The reported bound assumes the rounded
/// continuous optimum keeps nonnegative heating.
pub fn follower_grid_check(b: &BilevelProblem, s: &TierSchedule, step: f64, cap: usize) -> Result<GridCheck> {
    if !(step > 0.0) {
        return Err(CoreError::Config(format!("grid step must be positive, got {step}")));
    }
    let t_len = b.horizon;
    let pe = s.prices(b, Commodity::Electric);
    let ph = s.prices(b, Commodity::Heat);
    let f = &b.follower;
    let bound_of = |v: VarId| (b.vars[v].lower, b.vars[v].upper);

    // electric: base load and caps come from the realized-load rows
    let mut electric_cost = 0.0;
    let mut shift_cap = Vec::with_capacity(t_len);
    let mut loads = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let row = b
            .follower_constraints
            .iter()
            .find(|r| r.tag == Tag::ReducibleLoad && r.coeffs.iter().any(|&(v, _)| v == f.load[t]))
            .ok_or_else(|| CoreError::Reformulation(format!("no realized-load row for hour {t}")))?;
        let (_, cut_hi) = bound_of(f.cut[t]);
        let (sh_lo, sh_hi) = bound_of(f.shift[t]);
        let cut = if pe[t] > 0.0 { cut_hi } else { 0.0 };
        loads.push(row.rhs - cut);
        shift_cap.push(sh_hi.min(-sh_lo));
    }
    let mut order: Vec<usize> = (0..t_len).collect();
    order.sort_by(|&a, &c| pe[a].total_cmp(&pe[c]).then(a.cmp(&c)));
    let (mut lo, mut hi) = (0usize, t_len.saturating_sub(1));
    while lo < hi && pe[order[lo]] < pe[order[hi]] {
        let (cheap, dear) = (order[lo], order[hi]);
        let amount = shift_cap[cheap].min(shift_cap[dear]).min(loads[dear].max(0.0));
        loads[cheap] += amount;
        loads[dear] -= amount;
        lo += 1;
        hi -= 1;
    }
    for t in 0..t_len {
        electric_cost += pe[t] * loads[t];
    }

    let mut zone_costs = Vec::new();
    let mut temps_out = Vec::new();
    let mut lipschitz = 0.0;
    let mut grid_points = 0usize;
    for z in &f.zones {
        let psi = z.curve.points.last().map_or(0.0, |&(x, y)| if x != 0.0 { y / (x * x) } else { 0.0 });
        let grids: Vec<Vec<f64>> = z
            .temps
            .iter()
            .map(|&v| {
                let (lo, hi) = bound_of(v);
                let n = ((hi - lo) / step).floor() as usize;
                let mut g: Vec<f64> = (0..=n).map(|k| lo + k as f64 * step).collect();
                if hi - g[n] > 1e-12 {
                    g.push(hi);
                }
                g
            })
            .collect();
        let work: usize = grids.windows(2).map(|w| w[0].len() * w[1].len()).sum::<usize>() + grids[0].len();
        if work > cap {
            return Err(CoreError::CapExceeded {
                required: work as u128,
                cap: cap as u128,
            });
        }
        grid_points += grids.iter().map(Vec::len).sum::<usize>();
        let hour_cost = |t: usize, prev: f64, next: f64| -> Option<f64> {
            let h = z.c_kw * (next - prev) + z.u_kw * (prev - z.outdoor_c[t]);
            if h < -1e-9 {
                return None;
            }
            let h = h.max(0.0);
            let d = z.h_ref_kw[t] - h;
            Some(ph[t] * h + psi * d * d)
        };
        // value[k] = best cost of hours 0..=t ending at grid point k
        let mut value: Vec<f64> = grids[0]
            .iter()
            .map(|&th| hour_cost(0, z.initial_temp_c, th).unwrap_or(f64::INFINITY))
            .collect();
        let mut back: Vec<Vec<usize>> = vec![vec![0; grids[0].len()]];
        for t in 1..t_len {
            let mut nv = vec![f64::INFINITY; grids[t].len()];
            let mut nb = vec![0usize; grids[t].len()];
            for (k, &th) in grids[t].iter().enumerate() {
                for (p, &prev) in grids[t - 1].iter().enumerate() {
                    if !value[p].is_finite() {
                        continue;
                    }
                    if let Some(c) = hour_cost(t, prev, th) {
                        if value[p] + c < nv[k] {
                            nv[k] = value[p] + c;
                            nb[k] = p;
                        }
                    }
                }
            }
            value = nv;
            back.push(nb);
        }
        let (mut k, best) = value
            .iter()
            .enumerate()
            .min_by(|a, c| a.1.total_cmp(c.1))
            .map(|(k, &v)| (k, v))
            .unwrap_or((0, f64::INFINITY));
        if !best.is_finite() {
            return Err(CoreError::Solver(format!("{} zone: no grid trajectory keeps heating nonnegative", z.kind)));
        }
        let mut path = vec![0.0; t_len];
        for t in (0..t_len).rev() {
            path[t] = grids[t][k];
            k = back[t][k];
        }
        // marginal cost of heat times the heat change per kelvin, per hour
        let d_max = z.curve.domain().1;
        let slope = |t: usize| ph[t].abs() + 2.0 * psi * d_max;
        let per_kelvin = z.c_kw + (z.c_kw - z.u_kw).abs();
        lipschitz += (0..t_len).map(slope).sum::<f64>() * per_kelvin * step / 2.0;
        zone_costs.push(best);
        temps_out.push(path);
    }
    Ok(GridCheck {
        objective: electric_cost + zone_costs.iter().sum::<f64>(),
        electric_cost,
        zone_costs,
        temps: temps_out,
        lipschitz_bound: lipschitz,
        grid_points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictKind {
    Pass,
    /// The MILP found less profit than the oracle.
    MilpWorse,
    /// The MILP claims more profit than any price schedule supports.
    MilpBetter,
    /// One side has no solution.
    Missing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub milp: Option<f64>,
    pub oracle: Option<f64>,
    pub abs_dev: f64,
    pub rel_dev: f64,
    pub milp_schedule: Option<TierSchedule>,
    pub oracle_schedule: Option<TierSchedule>,
    pub diagnosis: String,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.kind == VerdictKind::Pass
    }
}

/// PASS iff `|milp - oracle| <= tol (1 + |oracle|)`.
pub fn compare(
    milp: Option<f64>,
    milp_schedule: Option<TierSchedule>,
    oracle: &OracleResult,
    tol: f64,
) -> Verdict {
    let o = oracle.best_profit();
    let oracle_schedule = oracle.best().map(|e| e.schedule.clone());
    let (kind, abs_dev, rel_dev, diagnosis) = match (milp, o) {
        (Some(m), Some(o)) => {
            let abs = (m - o).abs();
            let rel = abs / (1.0 + o.abs());
            if abs <= tol * (1.0 + o.abs()) {
                (VerdictKind::Pass, abs, rel, "objectives agree".to_string())
            } else if m > o {
                (VerdictKind::MilpBetter, abs, rel, "MILP better than oracle: oracle gap or invalid Big-M".to_string())
            } else {
                (VerdictKind::MilpWorse, abs, rel, "MILP worse than oracle: invalid Big-M cuts off the optimum".to_string())
            }
        }
        (None, Some(_)) => (
            VerdictKind::Missing,
            f64::INFINITY,
            f64::INFINITY,
            "MILP has no solution while the oracle does: invalid Big-M".to_string(),
        ),
        (Some(_), None) => (
            VerdictKind::Missing,
            f64::INFINITY,
            f64::INFINITY,
            "oracle found no feasible price schedule: oracle gap or invalid Big-M".to_string(),
        ),
        (None, None) => (VerdictKind::Pass, 0.0, 0.0, "both infeasible".to_string()),
    };
    Verdict {
        kind,
        milp,
        oracle: o,
        abs_dev,
        rel_dev,
        milp_schedule,
        oracle_schedule,
        diagnosis,
    }
}
