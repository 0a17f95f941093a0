//! Symbolic leader/follower pricing game prior to reformulation.
//!
//! The operator (leader) picks tiered electricity and heat prices and the
//! dispatch of its fleet; consumers (follower) respond with curtailment,
//! load shifting and indoor temperature trajectories that set heat demand.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use ies_milp::Relation;

use crate::devices::{validate_scenario, Scenario, StorageKind};
use crate::error::{CoreError, Result};
use crate::reform::pwl::{pwl_expand, PwlCurve, QuadraticSpec};
use crate::thermal::{
    comfort_band_schedule, temp_from_pmv, BuildingZone, Mode, TempBandSchedule, ZoneKind,
};

pub type VarId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Owner {
    Leader,
    Follower,
    Dual,
    Auxiliary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarRef {
    pub id: VarId,
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub integer: bool,
    pub owner: Owner,
}

impl VarRef {
    pub fn is_fixed(&self) -> bool {
        self.lower == self.upper
    }
}

/// Append-only variable registry; ids are positions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VarTable {
    pub vars: Vec<VarRef>,
}

impl VarTable {
    pub fn add(&mut self, name: String, lower: f64, upper: f64, integer: bool, owner: Owner) -> VarId {
        let id = self.vars.len();
        self.vars.push(VarRef {
            id,
            name,
            lower,
            upper,
            integer,
            owner,
        });
        id
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }
}

/// Which part of the model a row or objective term encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    /// Leader objective: revenue minus operating cost.
    Profit,
    OperatingCost,
    /// Quadratic fuel costs of CHP and conventional units.
    FuelCost,
    Revenue,
    ElectricBalance,
    ThermalBalance,
    PriceMean,
    PriceBounds,
    PriceTier,
    Ramp,
    StorageDynamics,
    Reserve,
    RenewableAvailability,
    /// Follower objective: energy cost plus comfort penalty.
    FollowerCost,
    /// Realized electric load after curtailment and shifting.
    ReducibleLoad,
    LoadShift,
    BuildingHeatBalance,
    ComfortPwl,
    Stationarity,
    Complementarity,
    /// Follower cost minus its dual value; zero exactly at follower optima.
    DualityGap,
    ProductLinearization,
    FuelPwl,
    Plumbing,
}

impl Tag {
    pub fn label(self) -> &'static str {
        match self {
            Tag::Profit => "profit",
            Tag::OperatingCost => "operating-cost",
            Tag::FuelCost => "fuel-cost",
            Tag::Revenue => "revenue",
            Tag::ElectricBalance => "electric-balance",
            Tag::ThermalBalance => "thermal-balance",
            Tag::PriceMean => "price-mean",
            Tag::PriceBounds => "price-bounds",
            Tag::PriceTier => "price-tier",
            Tag::Ramp => "ramp",
            Tag::StorageDynamics => "storage-dynamics",
            Tag::Reserve => "reserve",
            Tag::RenewableAvailability => "renewable-availability",
            Tag::FollowerCost => "follower-cost",
            Tag::ReducibleLoad => "reducible-load",
            Tag::LoadShift => "load-shift",
            Tag::BuildingHeatBalance => "building-heat-balance",
            Tag::ComfortPwl => "comfort-pwl",
            Tag::Stationarity => "kkt-stationarity",
            Tag::Complementarity => "kkt-complementarity",
            Tag::DualityGap => "kkt-duality-gap",
            Tag::ProductLinearization => "price-load-product",
            Tag::FuelPwl => "fuel-pwl",
            Tag::Plumbing => "plumbing",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub coeffs: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
    pub tag: Tag,
    pub name: String,
}

impl LinearConstraint {
    /// Merges duplicate ids and drops zero coefficients.
    pub fn new(coeffs: Vec<(VarId, f64)>, relation: Relation, rhs: f64, tag: Tag, name: String) -> Self {
        let mut merged: BTreeMap<VarId, f64> = BTreeMap::new();
        for (v, c) in coeffs {
            *merged.entry(v).or_insert(0.0) += c;
        }
        let coeffs = merged.into_iter().filter(|&(_, c)| c != 0.0).collect();
        LinearConstraint {
            coeffs,
            relation,
            rhs,
            tag,
            name,
        }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(v, c)| c * x[v]).sum()
    }

    /// Amount by which `x` violates the row, zero when satisfied.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let a = self.activity(x);
        match self.relation {
            Relation::Le => (a - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - a).max(0.0),
            Relation::Eq => (a - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Commodity {
    Electric,
    Heat,
}

/// Price variables of one commodity: `kappa_t = sum_j grid_j z_tj`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceVars {
    pub kappa: Vec<VarId>,
    pub tiers: Vec<Vec<VarId>>,
    pub grid: Vec<f64>,
    pub mean: f64,
    pub tolerance: f64,
}

/// `coeff * kappa_{commodity, hour} * load`; revenue for the leader and
/// energy cost for the follower.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceProduct {
    pub commodity: Commodity,
    pub hour: usize,
    pub load: VarId,
    pub coeff: f64,
}

/// `scale * f(sum(arg))`, subtracted from the leader objective.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCost {
    pub name: String,
    pub arg: Vec<(VarId, f64)>,
    pub spec: QuadraticSpec,
    pub scale: f64,
    pub domain: (f64, f64),
}

/// Maximized: price products + `linear` + `constant` - quadratic costs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LeaderObjective {
    pub linear: Vec<(VarId, f64)>,
    pub constant: f64,
    pub quadratic: Vec<QuadraticCost>,
}

/// Minimized: price products + `linear`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FollowerObjective {
    pub linear: Vec<(VarId, f64)>,
}

/// Per-device decision variables, indexed `[device][hour]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LeaderLayout {
    pub chp_p: Vec<Vec<VarId>>,
    pub chp_h: Vec<Vec<VarId>>,
    pub con_p: Vec<Vec<VarId>>,
    pub storage_charge: Vec<Vec<VarId>>,
    pub storage_discharge: Vec<Vec<VarId>>,
    /// State of charge at the end of each hour.
    pub storage_soc: Vec<Vec<VarId>>,
    pub boiler_p: Vec<Vec<VarId>>,
    pub renewable_grid: Vec<Vec<VarId>>,
    pub renewable_curtail: Vec<Vec<VarId>>,
    pub reserve_chp: Vec<Vec<VarId>>,
    pub reserve_con: Vec<Vec<VarId>>,
    /// `None` for thermal storages.
    pub reserve_storage: Vec<Option<Vec<VarId>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZoneModel {
    pub kind: ZoneKind,
    pub zone: BuildingZone,
    pub bands: TempBandSchedule,
    pub initial_temp_c: f64,
    /// Temperatures at the end of hours `0..T` (clock times `t + 1`).
    pub temps: Vec<VarId>,
    /// Heating power during each hour, kW.
    pub heat: Vec<VarId>,
    pub weights: Vec<Vec<VarId>>,
    pub h_ref_kw: Vec<f64>,
    pub h_max_kw: Vec<f64>,
    /// Capacitance over the step, kW/K.
    pub c_kw: f64,
    /// Loss conductance, kW/K.
    pub u_kw: f64,
    pub outdoor_c: Vec<f64>,
    pub curve: PwlCurve,
}

impl ZoneModel {
    /// Heating power implied by a temperature trajectory, kW.
    pub fn heat_from_temps(&self, temps: &[f64]) -> Vec<f64> {
        let mut prev = self.initial_temp_c;
        temps
            .iter()
            .enumerate()
            .map(|(t, &next)| {
                let h = self.c_kw * (next - prev) + self.u_kw * (prev - self.outdoor_c[t]);
                prev = next;
                h
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FollowerLayout {
    pub load: Vec<VarId>,
    pub cut: Vec<VarId>,
    pub shift: Vec<VarId>,
    pub zones: Vec<ZoneModel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BilevelProblem {
    pub mode: Mode,
    pub horizon: usize,
    pub dt_h: f64,
    pub vars: Vec<VarRef>,
    pub leader_constraints: Vec<LinearConstraint>,
    pub follower_constraints: Vec<LinearConstraint>,
    pub leader_objective: LeaderObjective,
    pub follower_objective: FollowerObjective,
    pub products: Vec<PriceProduct>,
    pub electric: PriceVars,
    pub heat: PriceVars,
    /// Upper bounds of follower loads implied by the constraints.
    pub implied_upper: BTreeMap<VarId, f64>,
    /// Estimated magnitude of optimal duals of follower variable bounds.
    pub bound_dual_hint: BTreeMap<VarId, f64>,
    /// Same for follower rows, by position in `follower_constraints`.
    pub row_dual_hint: Vec<Option<f64>>,
    pub leader: LeaderLayout,
    pub follower: FollowerLayout,
    pub pwl_segments: usize,
}

impl BilevelProblem {
    pub fn prices(&self, c: Commodity) -> &PriceVars {
        match c {
            Commodity::Electric => &self.electric,
            Commodity::Heat => &self.heat,
        }
    }

    pub fn follower_vars(&self) -> impl Iterator<Item = &VarRef> {
        self.vars.iter().filter(|v| v.owner == Owner::Follower)
    }

    /// Every tag used by a row or objective term.
    pub fn tags(&self) -> BTreeSet<Tag> {
        let mut tags: BTreeSet<Tag> = self
            .leader_constraints
            .iter()
            .chain(&self.follower_constraints)
            .map(|c| c.tag)
            .collect();
        tags.extend([Tag::Profit, Tag::FollowerCost]);
        if !self.products.is_empty() {
            tags.insert(Tag::Revenue);
        }
        if !self.leader_objective.quadratic.is_empty() || !self.leader_objective.linear.is_empty() {
            tags.insert(Tag::OperatingCost);
        }
        if !self.leader_objective.quadratic.is_empty() {
            tags.insert(Tag::FuelCost);
        }
        tags
    }

    /// Follower rows and objective touch only follower variables; prices
    /// enter through `products` as parameters.
    pub fn check_follower_purity(&self) -> Result<()> {
        let bad = |id: VarId| self.vars[id].owner != Owner::Follower;
        for c in &self.follower_constraints {
            if let Some(&(v, _)) = c.coeffs.iter().find(|(v, _)| bad(*v)) {
                return Err(CoreError::Reformulation(format!(
                    "follower row {} references {}",
                    c.name, self.vars[v].name
                )));
            }
        }
        let objective_ids = self
            .follower_objective
            .linear
            .iter()
            .map(|&(v, _)| v)
            .chain(self.products.iter().map(|p| p.load));
        for v in objective_ids {
            if bad(v) {
                return Err(CoreError::Reformulation(format!(
                    "follower objective references {}",
                    self.vars[v].name
                )));
            }
        }
        Ok(())
    }
}

fn row(coeffs: Vec<(VarId, f64)>, rel: Relation, rhs: f64, tag: Tag, name: String) -> LinearConstraint {
    LinearConstraint::new(coeffs, rel, rhs, tag, name)
}

/// Leader variables, rows and objective, plus the price variables.
pub struct LeaderBlock {
    pub constraints: Vec<LinearConstraint>,
    pub objective: LeaderObjective,
    pub electric: PriceVars,
    pub heat: PriceVars,
    pub layout: LeaderLayout,
}

fn price_vars(
    vars: &mut VarTable,
    rows: &mut Vec<LinearConstraint>,
    label: &str,
    spec: &crate::devices::PriceSpec,
    horizon: usize,
    tolerance: f64,
) -> Result<PriceVars> {
    if !spec.mean_reachable(horizon, tolerance) {
        return Err(CoreError::Config(format!(
            "{label} tier grid cannot meet mean price {} within {tolerance} over {horizon} hours",
            spec.mean
        )));
    }
    let grid = spec.grid();
    let (lo, hi) = (spec.min.min(spec.mean), spec.max.max(spec.mean));
    let mut kappa = Vec::with_capacity(horizon);
    let mut tiers = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let k = vars.add(format!("kappa_{label}[{t}]"), lo, hi, false, Owner::Leader);
        let z: Vec<VarId> = (0..grid.len())
            .map(|j| vars.add(format!("z_{label}[{t}][{j}]"), 0.0, 1.0, true, Owner::Leader))
            .collect();
        rows.push(row(
            z.iter().map(|&v| (v, 1.0)).collect(),
            Relation::Eq,
            1.0,
            Tag::PriceTier,
            format!("tier_select_{label}[{t}]"),
        ));
        let mut def = vec![(k, 1.0)];
        def.extend(z.iter().zip(&grid).map(|(&v, &g)| (v, -g)));
        rows.push(row(def, Relation::Eq, 0.0, Tag::PriceTier, format!("tier_value_{label}[{t}]")));
        rows.push(row(vec![(k, 1.0)], Relation::Ge, spec.min.min(spec.mean), Tag::PriceBounds, format!("price_min_{label}[{t}]")));
        rows.push(row(vec![(k, 1.0)], Relation::Le, spec.max.max(spec.mean), Tag::PriceBounds, format!("price_max_{label}[{t}]")));
        kappa.push(k);
        tiers.push(z);
    }
    let total: Vec<(VarId, f64)> = kappa.iter().map(|&k| (k, 1.0)).collect();
    let target = horizon as f64 * spec.mean;
    rows.push(row(total.clone(), Relation::Le, target + tolerance, Tag::PriceMean, format!("price_mean_hi_{label}")));
    rows.push(row(total, Relation::Ge, target - tolerance, Tag::PriceMean, format!("price_mean_lo_{label}")));
    Ok(PriceVars {
        kappa,
        tiers,
        grid,
        mean: spec.mean,
        tolerance,
    })
}

/// Leader block. `electric_load` and `heat_loads` are the follower load
/// variables that close the balances.
pub fn build_leader(
    scenario: &Scenario,
    vars: &mut VarTable,
    electric_load: &[VarId],
    heat_loads: &[&[VarId]],
) -> Result<LeaderBlock> {
    let s = scenario;
    let t_len = s.horizon;
    let dt = s.dt_h();
    let mut rows = Vec::new();
    let mut obj = LeaderObjective::default();
    let mut lay = LeaderLayout::default();
    let leader = Owner::Leader;

    let electric = price_vars(vars, &mut rows, "e", &s.electric_price, t_len, s.electric_tolerance())?;
    let heat = price_vars(vars, &mut rows, "h", &s.heat_price, t_len, s.heat_tolerance())?;

    for (n, u) in s.chp.iter().enumerate() {
        let p: Vec<VarId> = (0..t_len)
            .map(|t| vars.add(format!("chp{n}.p[{t}]"), u.p_min_kw, u.p_max_kw, false, leader))
            .collect();
        let h: Vec<VarId> = (0..t_len)
            .map(|t| vars.add(format!("chp{n}.h[{t}]"), u.h_min_kw, u.h_max_kw, false, leader))
            .collect();
        for t in 0..t_len {
            obj.quadratic.push(QuadraticCost {
                name: format!("chp{n}.fuel[{t}]"),
                arg: vec![(p[t], 1.0), (h[t], u.cv_ratio)],
                spec: QuadraticSpec {
                    a: u.cost_a,
                    b: u.cost_b,
                    c: u.cost_c,
                },
                scale: dt,
                domain: (
                    u.p_min_kw + u.cv_ratio * u.h_min_kw,
                    u.p_max_kw + u.cv_ratio * u.h_max_kw,
                ),
            });
        }
        if let Some(r) = u.ramp_kw_per_h {
            ramp_rows(&mut rows, &p, r * dt, &format!("chp{n}"));
        }
        lay.chp_p.push(p);
        lay.chp_h.push(h);
    }
    for (m, u) in s.con.iter().enumerate() {
        let p: Vec<VarId> = (0..t_len)
            .map(|t| vars.add(format!("con{m}.p[{t}]"), u.p_min_kw, u.p_max_kw, false, leader))
            .collect();
        for (t, &pv) in p.iter().enumerate() {
            obj.quadratic.push(QuadraticCost {
                name: format!("con{m}.fuel[{t}]"),
                arg: vec![(pv, 1.0)],
                spec: QuadraticSpec {
                    a: u.cost_a,
                    b: u.cost_b,
                    c: u.cost_c,
                },
                scale: dt,
                domain: (u.p_min_kw, u.p_max_kw),
            });
        }
        if let Some(r) = u.ramp_kw_per_h {
            ramp_rows(&mut rows, &p, r * dt, &format!("con{m}"));
        }
        lay.con_p.push(p);
    }
    for (l, st) in s.storage.iter().enumerate() {
        let cha: Vec<VarId> = (0..t_len)
            .map(|t| vars.add(format!("storage{l}.charge[{t}]"), 0.0, st.p_charge_max_kw, false, leader))
            .collect();
        let dis: Vec<VarId> = (0..t_len)
            .map(|t| vars.add(format!("storage{l}.discharge[{t}]"), 0.0, st.p_discharge_max_kw, false, leader))
            .collect();
        let soc: Vec<VarId> = (0..t_len)
            .map(|t| {
                let lo = if t + 1 == t_len {
                    st.soc_min_kwh.max(st.soc_init_kwh)
                } else {
                    st.soc_min_kwh
                };
                vars.add(format!("storage{l}.soc[{t}]"), lo, st.soc_max_kwh, false, leader)
            })
            .collect();
        for t in 0..t_len {
            // soc[t] - soc[t-1] - (charge - discharge) dt = 0
            let mut c = vec![(soc[t], 1.0), (cha[t], -dt), (dis[t], dt)];
            let mut rhs = 0.0;
            if t == 0 {
                rhs = st.soc_init_kwh;
            } else {
                c.push((soc[t - 1], -1.0));
            }
            rows.push(row(c, Relation::Eq, rhs, Tag::StorageDynamics, format!("storage{l}.soc_update[{t}]")));
            obj.linear.push((cha[t], -st.cycling_cost));
            obj.linear.push((dis[t], -st.cycling_cost));
        }
        let reserve = if st.kind == StorageKind::Electric {
            let r: Vec<VarId> = (0..t_len)
                .map(|t| vars.add(format!("storage{l}.reserve[{t}]"), 0.0, f64::INFINITY, false, leader))
                .collect();
            for t in 0..t_len {
                rows.push(row(
                    vec![(r[t], 1.0), (dis[t], 1.0)],
                    Relation::Le,
                    st.p_discharge_max_kw,
                    Tag::Reserve,
                    format!("storage{l}.reserve_headroom[{t}]"),
                ));
                obj.linear.push((r[t], -st.reserve_cost));
            }
            Some(r)
        } else {
            None
        };
        lay.storage_charge.push(cha);
        lay.storage_discharge.push(dis);
        lay.storage_soc.push(soc);
        lay.reserve_storage.push(reserve);
    }
    for (b, eb) in s.boilers.iter().enumerate() {
        lay.boiler_p.push(
            (0..t_len)
                .map(|t| vars.add(format!("boiler{b}.p[{t}]"), 0.0, eb.p_max_kw, false, leader))
                .collect(),
        );
    }
    for (k, re) in s.renewables.iter().enumerate() {
        let mut g = Vec::with_capacity(t_len);
        let mut c = Vec::with_capacity(t_len);
        for t in 0..t_len {
            let avail = re.availability_kw[t];
            let gv = vars.add(format!("renewable{k}.grid[{t}]"), 0.0, avail, false, leader);
            let cv = vars.add(format!("renewable{k}.curtail[{t}]"), 0.0, avail, false, leader);
            rows.push(row(
                vec![(gv, 1.0), (cv, 1.0)],
                Relation::Eq,
                avail,
                Tag::RenewableAvailability,
                format!("renewable{k}.split[{t}]"),
            ));
            obj.linear.push((cv, -re.curtail_penalty));
            g.push(gv);
            c.push(cv);
        }
        lay.renewable_grid.push(g);
        lay.renewable_curtail.push(c);
    }
    for (n, u) in s.chp.iter().enumerate() {
        let r = reserve_vars(vars, &mut rows, &mut obj, &lay.chp_p[n], u.p_max_kw, u.reserve_cost, &format!("chp{n}"));
        lay.reserve_chp.push(r);
    }
    for (m, u) in s.con.iter().enumerate() {
        let r = reserve_vars(vars, &mut rows, &mut obj, &lay.con_p[m], u.p_max_kw, u.reserve_cost, &format!("con{m}"));
        lay.reserve_con.push(r);
    }

    for t in 0..t_len {
        let mut e: Vec<(VarId, f64)> = Vec::new();
        let mut h: Vec<(VarId, f64)> = Vec::new();
        e.extend(lay.chp_p.iter().map(|p| (p[t], 1.0)));
        h.extend(lay.chp_h.iter().map(|p| (p[t], 1.0)));
        e.extend(lay.con_p.iter().map(|p| (p[t], 1.0)));
        e.extend(lay.renewable_grid.iter().map(|g| (g[t], 1.0)));
        for (l, st) in s.storage.iter().enumerate() {
            let side = if st.kind == StorageKind::Electric { &mut e } else { &mut h };
            side.push((lay.storage_discharge[l][t], st.eta_discharge));
            side.push((lay.storage_charge[l][t], -1.0 / st.eta_charge));
        }
        for (b, eb) in s.boilers.iter().enumerate() {
            e.push((lay.boiler_p[b][t], -1.0));
            h.push((lay.boiler_p[b][t], eb.eta_eb));
        }
        e.push((electric_load[t], -1.0));
        for z in heat_loads {
            h.push((z[t], -1.0));
        }
        rows.push(row(e, Relation::Eq, 0.0, Tag::ElectricBalance, format!("electric_balance[{t}]")));
        rows.push(row(h, Relation::Eq, 0.0, Tag::ThermalBalance, format!("thermal_balance[{t}]")));

        let mut req: Vec<(VarId, f64)> = lay.reserve_chp.iter().map(|r| (r[t], 1.0)).collect();
        req.extend(lay.reserve_con.iter().map(|r| (r[t], 1.0)));
        req.extend(lay.reserve_storage.iter().flatten().map(|r| (r[t], 1.0)));
        let need = s.reserve_fraction * s.base_electric_load_kw[t];
        if need > 0.0 || !req.is_empty() {
            rows.push(row(req, Relation::Ge, need, Tag::Reserve, format!("reserve_requirement[{t}]")));
        }
    }

    Ok(LeaderBlock {
        constraints: rows,
        objective: obj,
        electric,
        heat,
        layout: lay,
    })
}

fn ramp_rows(rows: &mut Vec<LinearConstraint>, p: &[VarId], limit: f64, name: &str) {
    for t in 1..p.len() {
        let c = vec![(p[t], 1.0), (p[t - 1], -1.0)];
        rows.push(row(c.clone(), Relation::Le, limit, Tag::Ramp, format!("{name}.ramp_up[{t}]")));
        rows.push(row(c, Relation::Ge, -limit, Tag::Ramp, format!("{name}.ramp_down[{t}]")));
    }
}

fn reserve_vars(
    vars: &mut VarTable,
    rows: &mut Vec<LinearConstraint>,
    obj: &mut LeaderObjective,
    p: &[VarId],
    p_max: f64,
    cost: f64,
    name: &str,
) -> Vec<VarId> {
    p.iter()
        .enumerate()
        .map(|(t, &pv)| {
            let r = vars.add(format!("{name}.reserve[{t}]"), 0.0, f64::INFINITY, false, Owner::Leader);
            rows.push(row(
                vec![(r, 1.0), (pv, 1.0)],
                Relation::Le,
                p_max,
                Tag::Reserve,
                format!("{name}.reserve_headroom[{t}]"),
            ));
            obj.linear.push((r, -cost));
            r
        })
        .collect()
}

/// Follower variables, rows, objective and dual-magnitude hints.
pub struct FollowerBlock {
    pub constraints: Vec<LinearConstraint>,
    pub objective: FollowerObjective,
    pub products: Vec<PriceProduct>,
    pub implied_upper: BTreeMap<VarId, f64>,
    pub bound_dual_hint: BTreeMap<VarId, f64>,
    pub row_dual_hint: Vec<Option<f64>>,
    pub layout: FollowerLayout,
}

/// Consumer block for one mode. `zones` and `bands` are paired residential
/// then public.
pub fn build_follower(
    scenario: &Scenario,
    vars: &mut VarTable,
    zones: [&BuildingZone; 2],
    bands: [&TempBandSchedule; 2],
    pwl_segments: usize,
) -> Result<FollowerBlock> {
    let s = scenario;
    let t_len = s.horizon;
    let fo = Owner::Follower;
    let mut rows = Vec::new();
    let mut obj = FollowerObjective::default();
    let mut products = Vec::new();
    let mut implied = BTreeMap::new();
    let mut hints = BTreeMap::new();
    let kappa_e_max = s.electric_price.max.max(s.electric_price.mean);
    let kappa_h_max = s.heat_price.max.max(s.heat_price.mean);
    let psi = s.comfort_penalty;

    let mut load = Vec::with_capacity(t_len);
    let mut cut = Vec::with_capacity(t_len);
    let mut shift = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let base = s.base_electric_load_kw[t];
        let pl = vars.add(format!("load[{t}]"), 0.0, f64::INFINITY, false, fo);
        let c = vars.add(format!("cut[{t}]"), 0.0, s.cut_max_kw[t], false, fo);
        let sh = vars.add(format!("shift[{t}]"), -s.shift_max_kw, s.shift_max_kw, false, fo);
        rows.push(row(
            vec![(pl, 1.0), (c, 1.0), (sh, -1.0)],
            Relation::Eq,
            base,
            Tag::ReducibleLoad,
            format!("realized_load[{t}]"),
        ));
        implied.insert(pl, base + s.shift_max_kw);
        for v in [pl, c, sh] {
            hints.insert(v, 2.0 * kappa_e_max);
        }
        products.push(PriceProduct {
            commodity: Commodity::Electric,
            hour: t,
            load: pl,
            coeff: 1.0,
        });
        load.push(pl);
        cut.push(c);
        shift.push(sh);
    }
    rows.push(row(
        shift.iter().map(|&v| (v, 1.0)).collect(),
        Relation::Eq,
        0.0,
        Tag::LoadShift,
        "shift_conservation".into(),
    ));

    let mut zone_models = Vec::with_capacity(2);
    for (zone, sched) in zones.into_iter().zip(bands) {
        if sched.len() != t_len {
            return Err(CoreError::Shape(format!(
                "{} band schedule has {} hours, horizon is {t_len}",
                zone.kind,
                sched.len()
            )));
        }
        let kind = zone.kind;
        let c_kw = zone.capacitance() / s.dt_s / 1000.0;
        let u_kw = zone.loss_conductance() / 1000.0;
        let theta0 = zone.initial_temp_c;
        // heating along the PMV-0 trajectory from the initial state, written
        // exactly as ZoneModel::heat_from_temps evaluates it
        let t_ref = temp_from_pmv(0.0, zone);
        let h_ref_kw: Vec<f64> = (0..t_len)
            .map(|t| {
                let prev = if t == 0 { theta0 } else { t_ref };
                c_kw * (t_ref - prev) + u_kw * (prev - s.outdoor_temp_c[t])
            })
            .collect();
        // temperature at clock time t+1 uses the band of that hour; the last
        // one also may not end below the starting temperature
        let band_of = |t: usize| {
            let b = sched.bands[(t + 1).min(t_len - 1)];
            if t + 1 == t_len {
                let lo = b.t_min_c.max(theta0);
                if lo > b.t_max_c {
                    return Err(CoreError::Config(format!(
                        "{kind} zone: terminal band [{}, {}] excludes the initial temperature {theta0}",
                        b.t_min_c, b.t_max_c
                    )));
                }
                Ok((lo, b.t_max_c))
            } else {
                Ok((b.t_min_c, b.t_max_c))
            }
        };
        let mut temp_bounds = Vec::with_capacity(t_len);
        for t in 0..t_len {
            temp_bounds.push(band_of(t)?);
        }
        let temps: Vec<VarId> = temp_bounds
            .iter()
            .enumerate()
            .map(|(t, &(lo, hi))| vars.add(format!("{kind}.temp[{t}]"), lo, hi, false, fo))
            .collect();
        // largest heating any feasible trajectory can require in each hour
        let h_max_kw: Vec<f64> = (0..t_len)
            .map(|t| {
                let next = c_kw * temp_bounds[t].1;
                let now = if t == 0 {
                    (u_kw - c_kw) * theta0
                } else {
                    let (lo, hi) = temp_bounds[t - 1];
                    ((u_kw - c_kw) * lo).max((u_kw - c_kw) * hi)
                };
                (next + now - u_kw * s.outdoor_temp_c[t]).max(0.0)
            })
            .collect();
        let d_max = h_ref_kw
            .iter()
            .zip(&h_max_kw)
            .map(|(&r, &m)| r.abs().max(m - r))
            .fold(0.0, f64::max)
            .max(1e-6);
        let price_scale = kappa_h_max + 2.0 * psi * d_max;
        let mut heat = Vec::with_capacity(t_len);
        let mut weights = Vec::with_capacity(t_len);
        let mut curve = None;
        for t in 0..t_len {
            let h = vars.add(format!("{kind}.heat[{t}]"), 0.0, f64::INFINITY, false, fo);
            implied.insert(h, h_max_kw[t]);
            hints.insert(h, 3.0 * price_scale);
            // c (theta[t] - theta[t-1]) + u (theta[t-1] - T_out) = H
            let mut c = vec![(h, 1.0), (temps[t], -c_kw)];
            let mut rhs = -u_kw * s.outdoor_temp_c[t];
            if t == 0 {
                rhs -= (c_kw - u_kw) * theta0;
            } else {
                c.push((temps[t - 1], c_kw - u_kw));
            }
            rows.push(row(c, Relation::Eq, rhs, Tag::BuildingHeatBalance, format!("{kind}.heat_balance[{t}]")));
            let exp = pwl_expand(
                QuadraticSpec {
                    a: psi,
                    b: 0.0,
                    c: 0.0,
                },
                (-d_max, d_max),
                2 * pwl_segments,
                &[(h, -1.0)],
                h_ref_kw[t],
                vars,
                fo,
                &format!("{kind}.comfort[{t}]"),
                Tag::ComfortPwl,
            )?;
            for &w in &exp.weights {
                implied.insert(w, 1.0);
                hints.insert(w, 6.0 * psi * d_max * d_max);
            }
            rows.extend(exp.rows);
            obj.linear.extend(exp.cost);
            products.push(PriceProduct {
                commodity: Commodity::Heat,
                hour: t,
                load: h,
                coeff: 1.0,
            });
            weights.push(exp.weights);
            curve = Some(exp.curve);
            heat.push(h);
        }
        let theta_hint = 2.0 * price_scale * (c_kw + (c_kw - u_kw).abs());
        for &v in &temps {
            hints.insert(v, theta_hint);
        }
        zone_models.push(ZoneModel {
            kind,
            zone: zone.clone(),
            bands: sched.clone(),
            initial_temp_c: theta0,
            temps,
            heat,
            weights,
            h_ref_kw,
            h_max_kw,
            c_kw,
            u_kw,
            outdoor_c: s.outdoor_temp_c.clone(),
            curve: curve.expect("horizon is positive"),
        });
    }

    let row_dual_hint = vec![None; rows.len()];
    Ok(FollowerBlock {
        constraints: rows,
        objective: obj,
        products,
        implied_upper: implied,
        bound_dual_hint: hints,
        row_dual_hint,
        layout: FollowerLayout {
            load,
            cut,
            shift,
            zones: zone_models,
        },
    })
}

/// Leader and follower blocks for `mode`, with zones rescaled to the
/// scenario's residential share.
pub fn assemble(scenario: &Scenario, mode: Mode, pwl_segments: usize) -> Result<BilevelProblem> {
    let violations = validate_scenario(scenario);
    if !violations.is_empty() {
        return Err(CoreError::Validation(violations));
    }
    if pwl_segments == 0 {
        return Err(CoreError::Config("pwl segments must be at least 1".into()));
    }
    let (res, publ) = scenario.effective_zones()?;
    let t_len = scenario.horizon;
    let res_bands = comfort_band_schedule(&res, &scenario.comfort, mode, t_len, scenario.start_hour)?;
    let pub_bands = comfort_band_schedule(&publ, &scenario.comfort, mode, t_len, scenario.start_hour)?;

    let mut vars = VarTable::default();
    let follower = build_follower(scenario, &mut vars, [&res, &publ], [&res_bands, &pub_bands], pwl_segments)?;
    let heat: Vec<&[VarId]> = follower.layout.zones.iter().map(|z| z.heat.as_slice()).collect();
    let leader = build_leader(scenario, &mut vars, &follower.layout.load, &heat)?;

    let problem = BilevelProblem {
        mode,
        horizon: t_len,
        dt_h: scenario.dt_h(),
        vars: vars.vars,
        leader_constraints: leader.constraints,
        follower_constraints: follower.constraints,
        leader_objective: leader.objective,
        follower_objective: follower.objective,
        products: follower.products,
        electric: leader.electric,
        heat: leader.heat,
        implied_upper: follower.implied_upper,
        bound_dual_hint: follower.bound_dual_hint,
        row_dual_hint: follower.row_dual_hint,
        leader: leader.layout,
        follower: follower.layout,
        pwl_segments,
    };
    problem.check_follower_purity()?;
    Ok(problem)
}
