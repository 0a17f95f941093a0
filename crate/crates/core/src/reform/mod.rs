//! Single-level reformulation of the pricing game.
//!
//! The follower LP is replaced by its KKT conditions with Big-M switches on
//! every complementarity pair, tier-selector times load products become
//! exact linear envelopes, and quadratic fuel costs become chord
//! interpolants. The result is one MILP maximizing the leader's profit.

pub mod kkt;
pub mod products;
pub mod pwl;

use std::collections::BTreeSet;
use std::fmt::Write as _;

use ies_milp::{LinearProgram, Milp, Relation, Sense};

use crate::bilevel::{BilevelProblem, LinearConstraint, Owner, Tag, VarId, VarRef, VarTable};
use crate::error::{CoreError, Result};

pub use kkt::{
    big_m_complementarity, dual_value_terms, follower_kkt, kkt_residuals, Affine, BigM, ComplementarityBlock,
    ComplementarityPair, KktResiduals, KktSystem, PairSource,
};
pub use products::{linearize_products, ProductBlock};
pub use pwl::{pwl_expand, PwlCurve, PwlExpansion, QuadraticSpec};

/// Variables, tagged rows and a linear objective under construction.
#[derive(Debug, Clone)]
pub struct ModelBuilder {
    pub sense: Sense,
    pub vars: VarTable,
    pub rows: Vec<LinearConstraint>,
    pub objective: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl ModelBuilder {
    pub fn new(sense: Sense, vars: Vec<VarRef>) -> Self {
        ModelBuilder {
            sense,
            vars: VarTable { vars },
            rows: Vec::new(),
            objective: Vec::new(),
            constant: 0.0,
        }
    }

    pub fn add_rows(&mut self, rows: impl IntoIterator<Item = LinearConstraint>) {
        self.rows.extend(rows);
    }

    pub fn add_objective(&mut self, terms: impl IntoIterator<Item = (VarId, f64)>) {
        self.objective.extend(terms);
    }

    /// Flat MILP over the builder's variables, in id order.
    pub fn milp(&self) -> Milp {
        let n = self.vars.len();
        let mut lp = LinearProgram::new(self.sense, n);
        for v in &self.vars.vars {
            lp.lower[v.id] = v.lower;
            lp.upper[v.id] = v.upper;
        }
        for &(v, c) in &self.objective {
            lp.objective[v] += c;
        }
        for r in &self.rows {
            lp.add_row(r.coeffs.clone(), r.relation, r.rhs);
        }
        let mut milp = Milp::new(lp);
        milp.integer = self.vars.vars.iter().map(|v| v.integer).collect();
        milp
    }

    /// Subtracts the leader's operating cost from the objective, expanding
    /// quadratic fuel costs into `n_segments` chords each.
    pub fn add_leader_costs(&mut self, bilevel: &BilevelProblem, n_segments: usize) -> Result<()> {
        let obj = &bilevel.leader_objective;
        self.objective.extend(obj.linear.iter().copied());
        self.constant += obj.constant;
        for q in &obj.quadratic {
            let (lo, hi) = q.domain;
            if q.spec.a == 0.0 || hi - lo <= 0.0 {
                // linear or pinned argument: exact without breakpoints
                if hi - lo <= 0.0 {
                    self.constant -= q.scale * q.spec.eval(lo);
                } else {
                    self.constant -= q.scale * q.spec.c;
                    self.objective
                        .extend(q.arg.iter().map(|&(v, c)| (v, -q.scale * q.spec.b * c)));
                }
                continue;
            }
            let exp = pwl_expand(
                q.spec,
                q.domain,
                n_segments,
                &q.arg,
                0.0,
                &mut self.vars,
                Owner::Auxiliary,
                &q.name,
                Tag::FuelPwl,
            )?;
            self.rows.extend(exp.rows);
            self.objective
                .extend(exp.cost.iter().map(|&(v, f)| (v, -q.scale * f)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ReformOptions {
    pub big_m: BigM,
    /// Adds the row `follower cost - dual value <= 0`. It holds with
    /// equality at every feasible point of the MILP, so it only tightens
    /// the continuous relaxation.
    pub duality_gap_row: bool,
}

impl Default for ReformOptions {
    fn default() -> Self {
        ReformOptions {
            big_m: BigM::default(),
            duality_gap_row: true,
        }
    }
}

/// Row and variable counts by construction stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MilpStats {
    pub leader_rows: usize,
    pub follower_rows: usize,
    pub stationarity_rows: usize,
    pub complementarity_rows: usize,
    pub product_rows: usize,
    pub duality_rows: usize,
    pub fuel_rows: usize,
    pub pairs: usize,
    pub binaries: usize,
    pub variables: usize,
}

/// Flat MILP plus the bookkeeping needed to read a solution back.
#[derive(Debug, Clone)]
pub struct MilpProblem {
    pub milp: Milp,
    pub vars: Vec<VarRef>,
    pub row_tags: Vec<Tag>,
    pub row_names: Vec<String>,
    pub objective_tags: BTreeSet<Tag>,
    /// Added to the MILP objective to obtain the leader's profit.
    pub objective_constant: f64,
    pub kkt: KktSystem,
    pub complementarity: ComplementarityBlock,
    pub products: ProductBlock,
    pub stats: MilpStats,
    pub warnings: Vec<String>,
}

impl MilpProblem {
    pub fn rows_with_tag(&self, tag: Tag) -> usize {
        self.row_tags.iter().filter(|&&t| t == tag).count()
    }
}

/// Single-level MILP whose optimum is the optimistic bilevel optimum when
/// the Big-M constants are valid.
pub fn to_milp(bilevel: &BilevelProblem, options: &ReformOptions) -> Result<MilpProblem> {
    let kkt = follower_kkt(bilevel)?;
    let mut b = ModelBuilder::new(Sense::Maximize, bilevel.vars.clone());
    if b.vars.len() != kkt.dual_vars.first().map_or(b.vars.len(), |d| d.id) {
        return Err(CoreError::Reformulation("dual ids do not follow the bilevel variables".into()));
    }
    b.vars.vars.extend(kkt.dual_vars.iter().cloned());
    let mut stats = MilpStats {
        leader_rows: bilevel.leader_constraints.len(),
        follower_rows: bilevel.follower_constraints.len(),
        stationarity_rows: kkt.stationarity.len(),
        pairs: kkt.pairs.len(),
        ..Default::default()
    };
    b.add_rows(bilevel.leader_constraints.iter().cloned());
    b.add_rows(bilevel.follower_constraints.iter().cloned());
    b.add_rows(kkt.stationarity.iter().cloned());

    let comp = big_m_complementarity(&kkt, options.big_m, &mut b.vars)?;
    stats.complementarity_rows = comp.rows.len();
    b.add_rows(comp.rows.iter().cloned());

    let prods = linearize_products(&bilevel.products, &bilevel.electric, &bilevel.heat, &bilevel.implied_upper, &mut b.vars)?;
    stats.product_rows = prods.rows.len();
    b.add_rows(prods.rows.iter().cloned());
    b.add_objective(prods.revenue.iter().copied());

    if options.duality_gap_row {
        let mut terms: Vec<(VarId, f64)> = bilevel.follower_objective.linear.clone();
        terms.extend(prods.revenue.iter().copied());
        terms.extend(dual_value_terms(&kkt));
        b.add_rows([LinearConstraint::new(terms, Relation::Le, 0.0, Tag::DualityGap, "duality_gap".to_string())]);
        stats.duality_rows = 1;
    }

    let before = b.rows.len();
    b.add_leader_costs(bilevel, bilevel.pwl_segments)?;
    stats.fuel_rows = b.rows.len() - before;

    let milp = b.milp();
    milp.validate()?;
    stats.binaries = milp.num_integer();
    stats.variables = b.vars.len();
    let mut objective_tags: BTreeSet<Tag> = [Tag::Profit, Tag::Revenue].into_iter().collect();
    if !bilevel.leader_objective.quadratic.is_empty() || !bilevel.leader_objective.linear.is_empty() {
        objective_tags.extend([Tag::OperatingCost, Tag::FuelCost]);
    }
    Ok(MilpProblem {
        row_tags: b.rows.iter().map(|r| r.tag).collect(),
        row_names: b.rows.iter().map(|r| r.name.clone()).collect(),
        objective_tags,
        objective_constant: b.constant,
        milp,
        vars: b.vars.vars,
        warnings: comp.warnings.clone(),
        kkt,
        complementarity: comp,
        products: prods,
        stats,
    })
}

fn lp_name(v: &VarRef) -> String {
    let mut s = String::with_capacity(v.name.len() + 8);
    write!(s, "x{}_", v.id).unwrap();
    for ch in v.name.chars() {
        s.push(if ch.is_ascii_alphanumeric() || ch == '_' || ch == '.' { ch } else { '_' });
    }
    s
}

/// Plain-text listing in the common LP file layout: objective, tagged rows,
/// bounds and the binary list.
pub fn export_lp(problem: &MilpProblem) -> String {
    let lp = &problem.milp.lp;
    let names: Vec<String> = problem.vars.iter().map(lp_name).collect();
    let term = |c: f64, v: usize, first: bool| -> String {
        let sign = if c < 0.0 { "-" } else if first { "" } else { "+" };
        format!("{sign} {} {}", c.abs(), names[v])
    };
    let mut out = String::new();
    writeln!(out, "\\ objective constant {}", problem.objective_constant).unwrap();
    writeln!(out, "{}", if lp.sense == Sense::Maximize { "Maximize" } else { "Minimize" }).unwrap();
    let mut line = String::from(" obj:");
    let mut first = true;
    for (v, &c) in lp.objective.iter().enumerate() {
        if c != 0.0 {
            write!(line, " {}", term(c, v, first)).unwrap();
            first = false;
        }
    }
    writeln!(out, "{line}").unwrap();
    writeln!(out, "Subject To").unwrap();
    for (i, row) in lp.rows.iter().enumerate() {
        let mut line = format!(" r{i}:");
        for (k, &(v, c)) in row.coeffs.iter().enumerate() {
            write!(line, " {}", term(c, v, k == 0)).unwrap();
        }
        if row.coeffs.is_empty() {
            line.push_str(" 0");
        }
        let rel = match row.relation {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        };
        writeln!(out, "{line} {rel} {} \\ {} {}", row.rhs, problem.row_tags[i], problem.row_names[i]).unwrap();
    }
    writeln!(out, "Bounds").unwrap();
    for (v, name) in names.iter().enumerate() {
        let (lo, hi) = (lp.lower[v], lp.upper[v]);
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) if lo == hi => writeln!(out, " {name} = {lo}").unwrap(),
            (true, true) => writeln!(out, " {lo} <= {name} <= {hi}").unwrap(),
            (true, false) => writeln!(out, " {name} >= {lo}").unwrap(),
            (false, true) => writeln!(out, " -inf <= {name} <= {hi}").unwrap(),
            (false, false) => writeln!(out, " {name} free").unwrap(),
        }
    }
    writeln!(out, "Binaries").unwrap();
    for (v, name) in names.iter().enumerate() {
        if problem.milp.integer[v] {
            writeln!(out, " {name}").unwrap();
        }
    }
    writeln!(out, "End").unwrap();
    out
}
