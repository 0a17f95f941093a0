//! Follower optimality conditions and their Big-M encoding.

use ies_milp::Relation;

use crate::bilevel::{BilevelProblem, Commodity, LinearConstraint, Owner, Tag, VarId, VarRef, VarTable};
use crate::error::{CoreError, Result};

/// `sum(terms) + constant`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Affine {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * x[v]).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairSource {
    /// Inequality row of the follower block, by position.
    Row(usize),
    Lower(VarId),
    Upper(VarId),
}

/// `dual >= 0`, `slack >= 0`, `dual * slack = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplementarityPair {
    pub dual: VarId,
    pub slack: Affine,
    pub source: PairSource,
    /// Largest slack any point within the follower's variable bounds can have.
    pub slack_bound: f64,
    /// Estimated magnitude of the dual at an optimum.
    pub dual_bound: f64,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktSystem {
    pub primal_vars: Vec<VarId>,
    /// New dual variables; their ids continue after the bilevel variables.
    pub dual_vars: Vec<VarRef>,
    /// One equality per entry of `primal_vars`.
    pub stationarity: Vec<LinearConstraint>,
    pub primal_rows: Vec<LinearConstraint>,
    pub primal_bounds: Vec<(VarId, f64, f64)>,
    pub pairs: Vec<ComplementarityPair>,
    pub free_duals: Vec<VarId>,
    /// Right-hand side of the equality behind each free dual.
    pub free_dual_rhs: Vec<f64>,
}

/// Stationarity, feasibility and complementarity of the follower LP.
///
/// Lagrangian convention: `c + sum(mu_i grad g_i) + sum(nu_e grad h_e) = 0`
/// with inequalities written `g <= 0`. Prices enter the stationarity row of
/// each priced load as coefficients on the price variable.
pub fn follower_kkt(bilevel: &BilevelProblem) -> Result<KktSystem> {
    let vars = &bilevel.vars;
    for c in &bilevel.follower_constraints {
        if let Some(&(v, _)) = c.coeffs.iter().find(|(v, _)| vars[*v].owner != Owner::Follower) {
            return Err(CoreError::Reformulation(format!(
                "follower row {} couples to {}; the follower is not a linear program in its own variables",
                c.name, vars[v].name
            )));
        }
    }
    let primal_vars: Vec<VarId> = bilevel.follower_vars().map(|v| v.id).collect();
    let mut pos = vec![usize::MAX; vars.len()];
    for (k, &v) in primal_vars.iter().enumerate() {
        pos[v] = k;
    }
    let mut table = VarTable {
        vars: vars.clone(),
    };
    let base = vars.len();
    // stationarity coefficients, one map per primal variable
    let mut stat: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); primal_vars.len()];
    let mut rhs = vec![0.0; primal_vars.len()];
    for &(v, c) in &bilevel.follower_objective.linear {
        rhs[pos[v]] -= c;
    }
    for p in &bilevel.products {
        let kappa = bilevel.prices(p.commodity).kappa[p.hour];
        stat[pos[p.load]].push((kappa, p.coeff));
    }

    let upper_estimate = |v: VarId| -> f64 {
        let r = &vars[v];
        bilevel
            .implied_upper
            .get(&v)
            .map_or(r.upper, |&u| u.min(r.upper))
    };
    let lower_estimate = |v: VarId| vars[v].lower;
    let fallback_dual = fallback_dual_scale(bilevel);

    let mut pairs = Vec::new();
    let mut free_duals = Vec::new();
    let mut free_dual_rhs = Vec::new();
    for (i, row) in bilevel.follower_constraints.iter().enumerate() {
        match row.relation {
            Relation::Eq => {
                let nu = table.add(format!("nu[{}]", row.name), f64::NEG_INFINITY, f64::INFINITY, false, Owner::Dual);
                for &(v, a) in &row.coeffs {
                    stat[pos[v]].push((nu, a));
                }
                free_duals.push(nu);
                free_dual_rhs.push(row.rhs);
            }
            rel => {
                let sign = if rel == Relation::Le { 1.0 } else { -1.0 };
                let mu = table.add(format!("mu[{}]", row.name), 0.0, f64::INFINITY, false, Owner::Dual);
                for &(v, a) in &row.coeffs {
                    stat[pos[v]].push((mu, sign * a));
                }
                // slack = sign * (rhs - a x)
                let slack = Affine {
                    terms: row.coeffs.iter().map(|&(v, a)| (v, -sign * a)).collect(),
                    constant: sign * row.rhs,
                };
                let slack_bound = slack.constant
                    + slack
                        .terms
                        .iter()
                        .map(|&(v, a)| if a > 0.0 { a * upper_estimate(v) } else { a * lower_estimate(v) })
                        .sum::<f64>();
                pairs.push(ComplementarityPair {
                    dual: mu,
                    slack,
                    source: PairSource::Row(i),
                    slack_bound,
                    dual_bound: bilevel.row_dual_hint.get(i).copied().flatten().unwrap_or(fallback_dual),
                    name: row.name.clone(),
                });
            }
        }
    }
    let mut primal_bounds = Vec::new();
    for &v in &primal_vars {
        let r = &vars[v];
        primal_bounds.push((v, r.lower, r.upper));
        let hint = bilevel.bound_dual_hint.get(&v).copied().unwrap_or(fallback_dual);
        if r.is_fixed() {
            let eta = table.add(format!("nu[{}=fixed]", r.name), f64::NEG_INFINITY, f64::INFINITY, false, Owner::Dual);
            stat[pos[v]].push((eta, 1.0));
            free_duals.push(eta);
            free_dual_rhs.push(r.lower);
            continue;
        }
        if r.lower.is_finite() {
            let mu = table.add(format!("mu[{}>=lo]", r.name), 0.0, f64::INFINITY, false, Owner::Dual);
            stat[pos[v]].push((mu, -1.0));
            pairs.push(ComplementarityPair {
                dual: mu,
                slack: Affine {
                    terms: vec![(v, 1.0)],
                    constant: -r.lower,
                },
                source: PairSource::Lower(v),
                slack_bound: upper_estimate(v) - r.lower,
                dual_bound: hint,
                name: format!("{}>=lo", r.name),
            });
        }
        if r.upper.is_finite() {
            let mu = table.add(format!("mu[{}<=hi]", r.name), 0.0, f64::INFINITY, false, Owner::Dual);
            stat[pos[v]].push((mu, 1.0));
            pairs.push(ComplementarityPair {
                dual: mu,
                slack: Affine {
                    terms: vec![(v, -1.0)],
                    constant: r.upper,
                },
                source: PairSource::Upper(v),
                slack_bound: r.upper - lower_estimate(v),
                dual_bound: hint,
                name: format!("{}<=hi", r.name),
            });
        }
    }

    let stationarity = primal_vars
        .iter()
        .zip(stat)
        .zip(rhs)
        .map(|((&v, coeffs), r)| {
            LinearConstraint::new(coeffs, Relation::Eq, r, Tag::Stationarity, format!("stationarity[{}]", vars[v].name))
        })
        .collect();
    Ok(KktSystem {
        primal_vars,
        dual_vars: table.vars.split_off(base),
        stationarity,
        primal_rows: bilevel.follower_constraints.clone(),
        primal_bounds,
        pairs,
        free_duals,
        free_dual_rhs,
    })
}

/// Dual scale used when the follower builder gave no hint: twice the largest
/// objective coefficient, prices at their maxima.
fn fallback_dual_scale(b: &BilevelProblem) -> f64 {
    let price_max = |c: Commodity| b.prices(c).grid.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let linear = b.follower_objective.linear.iter().fold(0.0f64, |m, &(_, c)| m.max(c.abs()));
    let priced = b
        .products
        .iter()
        .fold(0.0f64, |m, p| m.max(p.coeff.abs() * price_max(p.commodity)));
    2.0 * linear.max(priced).max(1.0)
}

/// How complementarity constants are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BigM {
    /// Dual side `margin * dual_bound`, slack side its provable bound.
    PerPair { margin: f64 },
    /// One constant for both sides of every pair.
    Uniform(f64),
}

impl Default for BigM {
    fn default() -> Self {
        BigM::PerPair { margin: 10.0 }
    }
}

impl BigM {
    /// Same rule with every constant multiplied by `factor`.
    pub fn scaled(self, factor: f64) -> BigM {
        match self {
            BigM::PerPair { margin } => BigM::PerPair {
                margin: margin * factor,
            },
            BigM::Uniform(m) => BigM::Uniform(m * factor),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplementarityBlock {
    pub rows: Vec<LinearConstraint>,
    /// One switch per pair, in pair order.
    pub binaries: Vec<VarId>,
    /// `(dual side, slack side)` constants per pair.
    pub constants: Vec<(f64, f64)>,
    pub warnings: Vec<String>,
}

/// `mu <= M_d u` and `slack <= M_s (1 - u)` with `u` binary, per pair.
///
/// Dual variables in `vars` get `M_d` as upper bound.
pub fn big_m_complementarity(kkt: &KktSystem, big_m: BigM, vars: &mut VarTable) -> Result<ComplementarityBlock> {
    let mut block = ComplementarityBlock {
        rows: Vec::with_capacity(2 * kkt.pairs.len()),
        binaries: Vec::with_capacity(kkt.pairs.len()),
        constants: Vec::with_capacity(kkt.pairs.len()),
        warnings: Vec::new(),
    };
    for pair in &kkt.pairs {
        if !pair.slack_bound.is_finite() {
            return Err(CoreError::Reformulation(format!(
                "slack of {} is unbounded; cannot encode complementarity",
                pair.name
            )));
        }
        let slack_bound = pair.slack_bound.max(0.0);
        let (m_dual, m_slack) = match big_m {
            BigM::PerPair { margin } => (margin * pair.dual_bound, slack_bound),
            BigM::Uniform(m) => {
                if !(m > 0.0) {
                    return Err(CoreError::Config(format!("big-M must be positive, got {m}")));
                }
                if m < slack_bound {
                    block.warnings.push(format!(
                        "M = {m} is below the slack bound {slack_bound} of {}; solutions may be cut off",
                        pair.name
                    ));
                }
                (m, m)
            }
        };
        let u = vars.add(format!("u[{}]", pair.name), 0.0, 1.0, true, Owner::Auxiliary);
        vars.vars[pair.dual].upper = m_dual;
        block.rows.push(LinearConstraint::new(
            vec![(pair.dual, 1.0), (u, -m_dual)],
            Relation::Le,
            0.0,
            Tag::Complementarity,
            format!("dual_switch[{}]", pair.name),
        ));
        let mut slack_row = pair.slack.terms.clone();
        slack_row.push((u, m_slack));
        block.rows.push(LinearConstraint::new(
            slack_row,
            Relation::Le,
            m_slack - pair.slack.constant,
            Tag::Complementarity,
            format!("slack_switch[{}]", pair.name),
        ));
        block.binaries.push(u);
        block.constants.push((m_dual, m_slack));
    }
    Ok(block)
}

/// Dual-side terms of the identity `c x + sum(k_i mu_i) + sum(r_e nu_e) =
/// sum(mu_i slack_i)`, valid at every primal-feasible point satisfying
/// stationarity. Here `k_i` is the slack constant and `r_e` the equality
/// right-hand side. Bounding the left side by zero therefore forces every
/// complementarity product to vanish.
pub fn dual_value_terms(kkt: &KktSystem) -> Vec<(VarId, f64)> {
    kkt.pairs
        .iter()
        .map(|p| (p.dual, p.slack.constant))
        .chain(kkt.free_duals.iter().copied().zip(kkt.free_dual_rhs.iter().copied()))
        .filter(|&(_, k)| k != 0.0)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal: f64,
    pub dual_sign: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.dual_sign)
            .max(self.complementarity)
    }
}

/// Worst violation of each KKT condition at `x`.
pub fn kkt_residuals(x: &[f64], kkt: &KktSystem) -> KktResiduals {
    let mut r = KktResiduals::default();
    for row in &kkt.stationarity {
        r.stationarity = r.stationarity.max(row.violation(x));
    }
    for row in &kkt.primal_rows {
        r.primal = r.primal.max(row.violation(x));
    }
    for &(v, lo, hi) in &kkt.primal_bounds {
        r.primal = r.primal.max(lo - x[v]).max(x[v] - hi);
    }
    for p in &kkt.pairs {
        r.dual_sign = r.dual_sign.max(-x[p.dual]);
        r.complementarity = r.complementarity.max((x[p.dual] * p.slack.eval(x)).abs());
    }
    r
}
