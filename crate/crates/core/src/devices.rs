//! Generation, conversion and storage assets, their cost functions, and the
//! scenario container that bundles them with profiles and price rules.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::thermal::{BuildingZone, ComfortPolicy, ZoneKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChpUnit {
    pub cost_a: f64,
    pub cost_b: f64,
    pub cost_c: f64,
    pub cv_ratio: f64,
    pub p_min_kw: f64,
    pub p_max_kw: f64,
    pub h_min_kw: f64,
    pub h_max_kw: f64,
    /// Absent means no ramp limit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp_kw_per_h: Option<f64>,
    pub reserve_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConUnit {
    pub cost_a: f64,
    pub cost_b: f64,
    pub cost_c: f64,
    pub p_min_kw: f64,
    pub p_max_kw: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp_kw_per_h: Option<f64>,
    pub reserve_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StorageKind {
    Electric,
    Thermal,
}

/// Charge and discharge powers are measured on the storage side; the network
/// sees `p_dis * eta_discharge` injected and `p_cha / eta_charge` drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Storage {
    pub kind: StorageKind,
    pub capacity_kwh: f64,
    pub p_charge_max_kw: f64,
    pub p_discharge_max_kw: f64,
    pub eta_charge: f64,
    pub eta_discharge: f64,
    pub soc_init_kwh: f64,
    pub soc_min_kwh: f64,
    pub soc_max_kwh: f64,
    pub cycling_cost: f64,
    #[serde(default)]
    pub reserve_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectricBoiler {
    pub p_max_kw: f64,
    pub eta_eb: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenewableKind {
    Wind,
    Pv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Renewable {
    pub kind: RenewableKind,
    pub availability_kw: Vec<f64>,
    pub curtail_penalty: f64,
}

/// Price rules for one commodity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSpec {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub tiers: usize,
}

impl PriceSpec {
    /// Uniform tier grid from `min` to `max`; a single tier sits at the mean.
    pub fn grid(&self) -> Vec<f64> {
        match self.tiers {
            0 => Vec::new(),
            1 => vec![self.mean],
            n => (0..n)
                .map(|j| {
                    if j == n - 1 {
                        self.max
                    } else {
                        self.min + (self.max - self.min) * j as f64 / (n - 1) as f64
                    }
                })
                .collect(),
        }
    }

    pub fn step(&self) -> f64 {
        if self.tiers > 1 {
            (self.max - self.min) / (self.tiers - 1) as f64
        } else {
            0.0
        }
    }

    /// Tolerance on the mean-price constraint: `explicit`, or one grid step
    /// divided by the horizon.
    pub fn mean_tolerance(&self, explicit: Option<f64>, horizon: usize) -> f64 {
        explicit.unwrap_or(self.step() / horizon.max(1) as f64)
    }

    /// Whether some tier sequence of length `horizon` meets the mean within `eps`.
    pub fn mean_reachable(&self, horizon: usize, eps: f64) -> bool {
        let grid = self.grid();
        if grid.is_empty() || horizon == 0 {
            return false;
        }
        // sums over k tiers lie on a lattice; check each count of top-tier hours
        let target = horizon as f64 * self.mean;
        let tol = eps + 1e-9 * (1.0 + target.abs());
        let (lo, hi) = (grid[0], grid[grid.len() - 1]);
        if target < horizon as f64 * lo - tol || target > horizon as f64 * hi + tol {
            return false;
        }
        if grid.len() == 1 {
            return (target - horizon as f64 * lo).abs() <= tol;
        }
        let step = self.step();
        let units = (target - horizon as f64 * lo) / step;
        let max_units = (horizon * (grid.len() - 1)) as f64;
        let nearest = units.round().clamp(0.0, max_units);
        (nearest * step + horizon as f64 * lo - target).abs() <= tol
    }
}

/// Full case definition.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub horizon: usize,
    pub dt_s: f64,
    /// Hour of day of the first step.
    pub start_hour: usize,
    pub outdoor_temp_c: Vec<f64>,
    pub base_electric_load_kw: Vec<f64>,
    pub residential: BuildingZone,
    pub public: BuildingZone,
    pub comfort: ComfortPolicy,
    pub residential_share: f64,
    pub chp: Vec<ChpUnit>,
    pub con: Vec<ConUnit>,
    pub storage: Vec<Storage>,
    pub boilers: Vec<ElectricBoiler>,
    pub renewables: Vec<Renewable>,
    pub electric_price: PriceSpec,
    pub heat_price: PriceSpec,
    pub comfort_penalty: f64,
    pub cut_max_kw: Vec<f64>,
    pub shift_max_kw: f64,
    pub reserve_fraction: f64,
    pub price_mean_tolerance: Option<f64>,
}

impl Scenario {
    pub fn dt_h(&self) -> f64 {
        self.dt_s / 3600.0
    }

    pub fn hour_of_day(&self, t: usize) -> usize {
        (self.start_hour + t) % 24
    }

    pub fn electric_tolerance(&self) -> f64 {
        self.electric_price
            .mean_tolerance(self.price_mean_tolerance, self.horizon)
    }

    pub fn heat_tolerance(&self) -> f64 {
        self.heat_price
            .mean_tolerance(self.price_mean_tolerance, self.horizon)
    }

    /// Zones rescaled so their reference heat totals split `K : 1 - K`
    /// while the combined total stays that of the configured zones.
    pub fn effective_zones(&self) -> Result<(BuildingZone, BuildingZone)> {
        let k = self.residential_share;
        if !(k > 0.0 && k < 1.0) {
            return Err(CoreError::Config(format!(
                "residential_share must lie in (0, 1), got {k}"
            )));
        }
        let total = |z: &BuildingZone| -> f64 {
            crate::thermal::comfort_reference_loads(z, &self.outdoor_temp_c, self.dt_s)
                .iter()
                .sum()
        };
        let (hr, hp) = (total(&self.residential), total(&self.public));
        if !(hr > 0.0 && hp > 0.0) {
            return Err(CoreError::Config(format!(
                "reference heat totals must be positive to rescale, got {hr} and {hp}"
            )));
        }
        let sum = hr + hp;
        Ok((
            self.residential.scaled(k * sum / hr),
            self.public.scaled((1.0 - k) * sum / hp),
        ))
    }
}

/// One invariant violation; `field` is a dotted path into the scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

/// Per-hour device decisions, indexed `[device][hour]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dispatch {
    pub chp_p: Vec<Vec<f64>>,
    pub chp_h: Vec<Vec<f64>>,
    pub con_p: Vec<Vec<f64>>,
    pub storage_charge: Vec<Vec<f64>>,
    pub storage_discharge: Vec<Vec<f64>>,
    pub storage_soc: Vec<Vec<f64>>,
    pub boiler_p: Vec<Vec<f64>>,
    pub renewable_grid: Vec<Vec<f64>>,
    pub renewable_curtail: Vec<Vec<f64>>,
    pub reserve_chp: Vec<Vec<f64>>,
    pub reserve_con: Vec<Vec<f64>>,
    /// Zero rows for thermal storages.
    pub reserve_storage: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OperatingCost {
    pub fuel: f64,
    pub storage_cycling: f64,
    pub reserve: f64,
    pub curtailment: f64,
    pub total: f64,
}

pub fn chp_fuel_cost(unit: &ChpUnit, p_kw: f64, h_kw: f64) -> f64 {
    let q = p_kw + unit.cv_ratio * h_kw;
    unit.cost_a * q * q + unit.cost_b * q + unit.cost_c
}

pub fn con_fuel_cost(unit: &ConUnit, p_kw: f64) -> f64 {
    unit.cost_a * p_kw * p_kw + unit.cost_b * p_kw + unit.cost_c
}

fn check_shape(name: &str, rows: &[Vec<f64>], devices: usize, horizon: usize) -> Result<()> {
    if rows.len() != devices || rows.iter().any(|r| r.len() != horizon) {
        return Err(CoreError::Shape(format!(
            "{name}: expected {devices} series of length {horizon}"
        )));
    }
    Ok(())
}

/// Operating cost over the horizon with its four-way breakdown.
pub fn operating_cost(scenario: &Scenario, d: &Dispatch) -> Result<OperatingCost> {
    let t_len = scenario.horizon;
    let (n_chp, n_con, n_st, n_re) = (
        scenario.chp.len(),
        scenario.con.len(),
        scenario.storage.len(),
        scenario.renewables.len(),
    );
    check_shape("chp_p", &d.chp_p, n_chp, t_len)?;
    check_shape("chp_h", &d.chp_h, n_chp, t_len)?;
    check_shape("con_p", &d.con_p, n_con, t_len)?;
    check_shape("storage_charge", &d.storage_charge, n_st, t_len)?;
    check_shape("storage_discharge", &d.storage_discharge, n_st, t_len)?;
    check_shape("renewable_curtail", &d.renewable_curtail, n_re, t_len)?;
    check_shape("reserve_chp", &d.reserve_chp, n_chp, t_len)?;
    check_shape("reserve_con", &d.reserve_con, n_con, t_len)?;
    check_shape("reserve_storage", &d.reserve_storage, n_st, t_len)?;

    let dt = scenario.dt_h();
    let mut c = OperatingCost::default();
    for t in 0..t_len {
        for (n, u) in scenario.chp.iter().enumerate() {
            c.fuel += chp_fuel_cost(u, d.chp_p[n][t], d.chp_h[n][t]) * dt;
            c.reserve += u.reserve_cost * d.reserve_chp[n][t];
        }
        for (m, u) in scenario.con.iter().enumerate() {
            c.fuel += con_fuel_cost(u, d.con_p[m][t]) * dt;
            c.reserve += u.reserve_cost * d.reserve_con[m][t];
        }
        for (l, s) in scenario.storage.iter().enumerate() {
            c.storage_cycling += s.cycling_cost * (d.storage_charge[l][t] + d.storage_discharge[l][t]);
            c.reserve += s.reserve_cost * d.reserve_storage[l][t];
        }
        for (k, r) in scenario.renewables.iter().enumerate() {
            c.curtailment += r.curtail_penalty * d.renewable_curtail[k][t];
        }
    }
    c.total = c.fuel + c.storage_cycling + c.reserve + c.curtailment;
    Ok(c)
}

/// Income from selling electricity and heat at the given prices.
pub fn revenue(
    price_e: &[f64],
    price_h: &[f64],
    electric_load: &[f64],
    heat_res: &[f64],
    heat_pub: &[f64],
) -> Result<f64> {
    let n = price_e.len();
    if [price_h.len(), electric_load.len(), heat_res.len(), heat_pub.len()]
        .iter()
        .any(|&l| l != n)
    {
        return Err(CoreError::Shape("revenue series lengths differ".into()));
    }
    Ok((0..n)
        .map(|t| price_e[t] * electric_load[t] + price_h[t] * (heat_res[t] + heat_pub[t]))
        .sum())
}

/// Every invariant violation in the scenario; an empty list means valid.
pub fn validate_scenario(s: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |field: String, message: String| out.push(Violation { field, message });
    let t_len = s.horizon;

    if t_len == 0 {
        push("horizon".into(), "must be at least 1".into());
    }
    if !(s.dt_s.is_finite() && s.dt_s > 0.0) {
        push("dt_s".into(), format!("must be positive, got {}", s.dt_s));
    }
    if s.start_hour > 23 {
        push("start_hour".into(), format!("must be in 0..=23, got {}", s.start_hour));
    }
    let profiles: [(&str, &[f64]); 3] = [
        ("outdoor_temp_c", &s.outdoor_temp_c),
        ("base_electric_load_kw", &s.base_electric_load_kw),
        ("cut_max_kw", &s.cut_max_kw),
    ];
    for (name, p) in profiles {
        if p.len() != t_len {
            push(name.into(), format!("has {} entries, horizon is {t_len}", p.len()));
        }
        if p.iter().any(|v| !v.is_finite()) {
            push(name.into(), "contains non-finite values".into());
        }
    }
    if s.base_electric_load_kw.iter().any(|&v| v < 0.0) {
        push("base_electric_load_kw".into(), "must be non-negative".into());
    }
    for (t, (&c, &l)) in s.cut_max_kw.iter().zip(&s.base_electric_load_kw).enumerate() {
        if !(c >= 0.0 && c <= l) {
            push(
                format!("cut_max_kw[{t}]"),
                format!("{c} must lie in [0, base load {l}]"),
            );
        }
    }

    for (label, zone, kind) in [
        ("residential", &s.residential, ZoneKind::Residential),
        ("public", &s.public, ZoneKind::Public),
    ] {
        if zone.kind != kind {
            push(format!("zones.{label}.kind"), format!("expected {kind}, got {}", zone.kind));
        }
        for (field, msg) in zone.check() {
            push(format!("zones.{label}.{field}"), msg);
        }
    }
    for (field, msg) in s.comfort.check() {
        push(format!("comfort.{field}"), msg);
    }
    if !(s.residential_share > 0.0 && s.residential_share < 1.0) {
        push(
            "residential_share".into(),
            format!("must lie in (0, 1), got {}", s.residential_share),
        );
    }

    for (i, u) in s.chp.iter().enumerate() {
        let f = |x: &str| format!("chp[{i}].{x}");
        if !(u.cost_a >= 0.0) {
            push(f("cost_a"), "must be non-negative (convex cost)".into());
        }
        if !(u.p_min_kw <= u.p_max_kw) {
            push(f("p_min_kw"), format!("{} exceeds p_max_kw {}", u.p_min_kw, u.p_max_kw));
        }
        if !(u.h_min_kw <= u.h_max_kw) {
            push(f("h_min_kw"), format!("{} exceeds h_max_kw {}", u.h_min_kw, u.h_max_kw));
        }
        if !(u.cv_ratio >= 0.0) {
            push(f("cv_ratio"), "must be non-negative".into());
        }
        if u.ramp_kw_per_h.is_some_and(|r| !(r >= 0.0)) {
            push(f("ramp_kw_per_h"), "must be non-negative".into());
        }
        if !(u.reserve_cost >= 0.0) {
            push(f("reserve_cost"), "must be non-negative".into());
        }
        let finite = [u.cost_a, u.cost_b, u.cost_c, u.p_min_kw, u.p_max_kw, u.h_min_kw, u.h_max_kw];
        if finite.iter().any(|v| !v.is_finite()) {
            push(format!("chp[{i}]"), "parameters must be finite".into());
        }
    }
    for (i, u) in s.con.iter().enumerate() {
        let f = |x: &str| format!("con[{i}].{x}");
        if !(u.cost_a >= 0.0) {
            push(f("cost_a"), "must be non-negative (convex cost)".into());
        }
        if !(u.p_min_kw <= u.p_max_kw) {
            push(f("p_min_kw"), format!("{} exceeds p_max_kw {}", u.p_min_kw, u.p_max_kw));
        }
        if u.ramp_kw_per_h.is_some_and(|r| !(r >= 0.0)) {
            push(f("ramp_kw_per_h"), "must be non-negative".into());
        }
        if [u.cost_a, u.cost_b, u.cost_c, u.p_min_kw, u.p_max_kw]
            .iter()
            .any(|v| !v.is_finite())
        {
            push(format!("con[{i}]"), "parameters must be finite".into());
        }
    }
    for (i, st) in s.storage.iter().enumerate() {
        let f = |x: &str| format!("storage[{i}].{x}");
        if !(0.0 <= st.soc_min_kwh
            && st.soc_min_kwh <= st.soc_init_kwh
            && st.soc_init_kwh <= st.soc_max_kwh
            && st.soc_max_kwh <= st.capacity_kwh)
        {
            push(
                f("soc_init_kwh"),
                "need 0 <= soc_min <= soc_init <= soc_max <= capacity".into(),
            );
        }
        for (name, eta) in [("eta_charge", st.eta_charge), ("eta_discharge", st.eta_discharge)] {
            if !(eta > 0.0 && eta <= 1.0) {
                push(f(name), format!("must lie in (0, 1], got {eta}"));
            }
        }
        if !(st.p_charge_max_kw >= 0.0 && st.p_discharge_max_kw >= 0.0) {
            push(f("p_charge_max_kw"), "power limits must be non-negative".into());
        }
        if !(st.cycling_cost >= 0.0 && st.reserve_cost >= 0.0) {
            push(f("cycling_cost"), "costs must be non-negative".into());
        }
    }
    for (i, b) in s.boilers.iter().enumerate() {
        if !(b.p_max_kw >= 0.0) {
            push(format!("boilers[{i}].p_max_kw"), "must be non-negative".into());
        }
        if !(b.eta_eb > 0.0 && b.eta_eb <= 1.2) {
            push(format!("boilers[{i}].eta_eb"), format!("must lie in (0, 1.2], got {}", b.eta_eb));
        }
    }
    for (i, r) in s.renewables.iter().enumerate() {
        if r.availability_kw.len() != t_len {
            push(
                format!("renewables[{i}].availability_kw"),
                format!("has {} entries, horizon is {t_len}", r.availability_kw.len()),
            );
        }
        if r.availability_kw.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            push(format!("renewables[{i}].availability_kw"), "must be non-negative".into());
        }
        if !(r.curtail_penalty >= 0.0) {
            push(format!("renewables[{i}].curtail_penalty"), "must be non-negative".into());
        }
    }

    for (label, p) in [("electric", &s.electric_price), ("heat", &s.heat_price)] {
        let field = |x: &str| format!("prices.{label}.{x}");
        if !(p.min.is_finite() && p.max.is_finite() && p.mean.is_finite()) {
            push(field("min"), "price bounds must be finite".into());
            continue;
        }
        if !(p.min <= p.mean && p.mean <= p.max) {
            push(
                field("mean"),
                format!("mean {} must lie in [min {}, max {}]", p.mean, p.min, p.max),
            );
        }
        if p.tiers == 0 {
            push(field("tiers"), "need at least one tier".into());
        } else if t_len > 0 {
            let eps = p.mean_tolerance(s.price_mean_tolerance, t_len);
            if !p.mean_reachable(t_len, eps) {
                push(
                    field("tiers"),
                    format!("no tier sequence meets the mean {} within {eps}", p.mean),
                );
            }
        }
    }
    if s.price_mean_tolerance.is_some_and(|e| !(e >= 0.0)) {
        push("price_mean_tolerance".into(), "must be non-negative".into());
    }
    if !(s.comfort_penalty >= 0.0 && s.comfort_penalty.is_finite()) {
        push("comfort_penalty".into(), "must be non-negative".into());
    }
    if !(s.shift_max_kw >= 0.0 && s.shift_max_kw.is_finite()) {
        push("shift_max_kw".into(), "must be non-negative".into());
    }
    if !(s.reserve_fraction >= 0.0 && s.reserve_fraction < 1.0) {
        push(
            "reserve_fraction".into(),
            format!("must lie in [0, 1), got {}", s.reserve_fraction),
        );
    }
    out
}
