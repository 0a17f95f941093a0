//! Solution reports recomputed from the primary decisions.

use std::fmt::Write as _;
use std::time::Duration;

use ies_milp::{MilpSolution, MilpStatus};

use crate::bilevel::{BilevelProblem, Commodity, Tag, VarId};
use crate::devices::{operating_cost, Dispatch, OperatingCost, RenewableKind, Scenario};
use crate::error::{CoreError, Result};
use crate::oracle::TierSchedule;
use crate::reform::{kkt_residuals, KktResiduals, MilpProblem};
use crate::thermal::{Mode, ZoneKind};

/// Six significant digits, `.` separator, no negative zero.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let exp = v.abs().log10().floor() as i32;
    let s = if (-5..15).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let mut s = format!("{v:.decimals$}");
        if s.contains('.') {
            while s.ends_with('0') {
                s.pop();
            }
            if s.ends_with('.') {
                s.pop();
            }
        }
        s
    } else {
        format!("{v:.5e}")
    };
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        "0".into()
    } else {
        s
    }
}

/// Columns of the mode and sweep tables.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostBreakdown {
    pub net_revenue: f64,
    pub revenue: f64,
    pub operating_cost: f64,
    pub energy_cost: f64,
    pub comfort_loss: f64,
    pub total_cost: f64,
}

impl CostBreakdown {
    pub const HEADER: [&'static str; 6] = [
        "net_revenue",
        "revenue",
        "operating_cost",
        "energy_cost",
        "comfort_loss",
        "total_cost",
    ];

    pub fn values(&self) -> [f64; 6] {
        [
            self.net_revenue,
            self.revenue,
            self.operating_cost,
            self.energy_cost,
            self.comfort_loss,
            self.total_cost,
        ]
    }

    /// Largest relative violation of `net = revenue - operating` and
    /// `total = energy + comfort`.
    pub fn identity_error(&self) -> f64 {
        let net = (self.net_revenue - (self.revenue - self.operating_cost)).abs()
            / (1.0 + self.revenue.abs().max(self.operating_cost.abs()));
        let total = (self.total_cost - (self.energy_cost + self.comfort_loss)).abs()
            / (1.0 + self.energy_cost.abs().max(self.comfort_loss.abs()));
        net.max(total)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZoneSeries {
    pub kind: ZoneKind,
    /// End-of-hour temperatures.
    pub temps: Vec<f64>,
    /// Heating implied by the temperatures, kW.
    pub heat: Vec<f64>,
    pub heat_ref: Vec<f64>,
    /// `heat_ref - heat`.
    pub reducible: Vec<f64>,
    pub band_lo: Vec<f64>,
    pub band_hi: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    pub kkt: KktResiduals,
    /// Worst balance row violation over `1 + load` of its hour.
    pub electric_balance: f64,
    pub thermal_balance: f64,
    /// Worst excursion of a temperature outside its band, K.
    pub temp_band: f64,
    pub shift_sum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverStats {
    pub status: MilpStatus,
    /// Leader profit of the incumbent as the MILP sees it.
    pub objective: f64,
    pub bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
    pub wall_time: Duration,
    pub variables: usize,
    pub rows: usize,
    pub binaries: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionReport {
    pub scenario: String,
    pub mode: Mode,
    /// False when the solver stopped at a limit.
    pub is_final: bool,
    pub schedule: TierSchedule,
    pub electric_price: Vec<f64>,
    pub heat_price: Vec<f64>,
    pub base_load: Vec<f64>,
    pub load: Vec<f64>,
    pub cut: Vec<f64>,
    pub shift: Vec<f64>,
    pub dispatch: Dispatch,
    pub zones: Vec<ZoneSeries>,
    pub operating: OperatingCost,
    pub costs: CostBreakdown,
    pub residuals: Residuals,
    pub stats: SolverStats,
}

fn values(x: &[f64], ids: &[Vec<VarId>]) -> Vec<Vec<f64>> {
    ids.iter().map(|s| s.iter().map(|&v| x[v]).collect()).collect()
}

/// Worst violation of the balance rows tagged `tag`, hour `t` divided by
/// `1 + load_t`.
fn balance_residual(b: &BilevelProblem, x: &[f64], tag: Tag, load: impl Fn(usize) -> f64) -> f64 {
    b.leader_constraints
        .iter()
        .filter(|r| r.tag == tag)
        .enumerate()
        .map(|(t, r)| r.violation(x) / (1.0 + load(t).abs()))
        .fold(0.0, f64::max)
}

/// Builds the report for the incumbent of `sol`.
///
/// Heating is recomputed from the clamped temperatures, comfort loss uses
/// the exact quadratic and operating cost the exact fuel curves, so the
/// cost columns do not inherit any linearization error.
pub fn extract_report(
    scenario: &Scenario,
    b: &BilevelProblem,
    problem: &MilpProblem,
    sol: &MilpSolution,
) -> Result<SolutionReport> {
    let full = sol
        .x
        .as_ref()
        .ok_or_else(|| CoreError::Solver(format!("no incumbent ({:?})", sol.status)))?;
    let x = &full[..b.vars.len()];
    let t_len = b.horizon;
    let schedule = TierSchedule::from_solution(b, x);
    let pe = schedule.prices(b, Commodity::Electric);
    let ph = schedule.prices(b, Commodity::Heat);
    let f = &b.follower;
    let load: Vec<f64> = f.load.iter().map(|&v| x[v]).collect();
    let cut: Vec<f64> = f.cut.iter().map(|&v| x[v]).collect();
    let shift: Vec<f64> = f.shift.iter().map(|&v| x[v]).collect();

    let psi = scenario.comfort_penalty;
    let mut zones = Vec::with_capacity(f.zones.len());
    let mut energy = (0..t_len).map(|t| pe[t] * load[t]).sum::<f64>();
    let mut comfort = 0.0;
    let mut temp_band: f64 = 0.0;
    for z in &f.zones {
        let band_lo: Vec<f64> = z.temps.iter().map(|&v| b.vars[v].lower).collect();
        let band_hi: Vec<f64> = z.temps.iter().map(|&v| b.vars[v].upper).collect();
        let temps: Vec<f64> = z
            .temps
            .iter()
            .enumerate()
            .map(|(t, &v)| {
                temp_band = temp_band.max(band_lo[t] - x[v]).max(x[v] - band_hi[t]);
                x[v].clamp(band_lo[t], band_hi[t])
            })
            .collect();
        let heat = z.heat_from_temps(&temps);
        let reducible: Vec<f64> = z.h_ref_kw.iter().zip(&heat).map(|(r, h)| r - h).collect();
        energy += (0..t_len).map(|t| ph[t] * heat[t]).sum::<f64>();
        comfort += psi * reducible.iter().map(|d| d * d).sum::<f64>();
        zones.push(ZoneSeries {
            kind: z.kind,
            temps,
            heat,
            heat_ref: z.h_ref_kw.clone(),
            reducible,
            band_lo,
            band_hi,
        });
    }

    let l = &b.leader;
    let n_st = l.storage_charge.len();
    let dispatch = Dispatch {
        chp_p: values(x, &l.chp_p),
        chp_h: values(x, &l.chp_h),
        con_p: values(x, &l.con_p),
        storage_charge: values(x, &l.storage_charge),
        storage_discharge: values(x, &l.storage_discharge),
        storage_soc: values(x, &l.storage_soc),
        boiler_p: values(x, &l.boiler_p),
        renewable_grid: values(x, &l.renewable_grid),
        renewable_curtail: values(x, &l.renewable_curtail),
        reserve_chp: values(x, &l.reserve_chp),
        reserve_con: values(x, &l.reserve_con),
        reserve_storage: (0..n_st)
            .map(|k| match &l.reserve_storage[k] {
                Some(ids) => ids.iter().map(|&v| x[v]).collect(),
                None => vec![0.0; t_len],
            })
            .collect(),
    };
    let operating = operating_cost(scenario, &dispatch)?;
    let revenue = energy;
    let costs = CostBreakdown {
        net_revenue: revenue - operating.total,
        revenue,
        operating_cost: operating.total,
        energy_cost: energy,
        comfort_loss: comfort,
        total_cost: energy + comfort,
    };
    let residuals = Residuals {
        kkt: kkt_residuals(full, &problem.kkt),
        electric_balance: balance_residual(b, x, Tag::ElectricBalance, |t| x[b.follower.load[t]]),
        thermal_balance: balance_residual(b, x, Tag::ThermalBalance, |t| {
            b.follower.zones.iter().map(|z| x[z.heat[t]]).sum()
        }),
        temp_band,
        shift_sum: shift.iter().sum::<f64>().abs(),
    };
    let stats = SolverStats {
        status: sol.status,
        objective: sol.objective + problem.objective_constant,
        bound: sol.bound + problem.objective_constant,
        gap: sol.gap,
        nodes: sol.nodes,
        lp_iterations: sol.lp_iterations,
        wall_time: sol.wall_time,
        variables: problem.stats.variables,
        rows: problem.milp.lp.num_rows(),
        binaries: problem.stats.binaries,
        warnings: problem.warnings.clone(),
    };
    Ok(SolutionReport {
        scenario: scenario.name.clone(),
        mode: b.mode,
        is_final: sol.status == MilpStatus::Optimal,
        schedule,
        electric_price: pe,
        heat_price: ph,
        base_load: scenario.base_electric_load_kw.clone(),
        load,
        cut,
        shift,
        dispatch,
        zones,
        operating,
        costs,
        residuals,
        stats,
    })
}

/// Tolerance for the report invariants.
pub const REPORT_TOL: f64 = 1e-6;

impl SolutionReport {
    /// Every violated report invariant, described.
    pub fn invariant_failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        let e = self.costs.identity_error();
        if e > REPORT_TOL {
            out.push(format!("cost identities off by {e:e}"));
        }
        let r = &self.residuals;
        if r.electric_balance > REPORT_TOL {
            out.push(format!("electric balance residual {:e}", r.electric_balance));
        }
        if r.thermal_balance > REPORT_TOL {
            out.push(format!("thermal balance residual {:e}", r.thermal_balance));
        }
        if r.temp_band > REPORT_TOL {
            out.push(format!("temperature outside its band by {:e} K", r.temp_band));
        }
        let shift_scale = 1.0 + self.shift.iter().map(|s| s.abs()).sum::<f64>();
        if r.shift_sum > REPORT_TOL * shift_scale {
            out.push(format!("shift does not sum to zero: {:e}", r.shift_sum));
        }
        let kkt_tol = REPORT_TOL * (1.0 + self.stats.objective.abs());
        for (name, v) in [
            ("stationarity", r.kkt.stationarity),
            ("primal", r.kkt.primal),
            ("dual sign", r.kkt.dual_sign),
            ("complementarity", r.kkt.complementarity),
        ] {
            if v > kkt_tol {
                out.push(format!("KKT {name} residual {v:e}"));
            }
        }
        if self.mode == Mode::M2 && self.costs.comfort_loss != 0.0 {
            out.push(format!("mode 2 comfort loss {:e} is not zero", self.costs.comfort_loss));
        }
        out
    }

    pub fn status_label(&self) -> String {
        status_label(self.stats.status)
    }

    pub fn prices_csv(&self) -> String {
        let mut s = String::from("hour,electric_price,heat_price,electric_tier,heat_tier\n");
        for t in 0..self.electric_price.len() {
            writeln!(
                s,
                "{t},{},{},{},{}",
                fmt_num(self.electric_price[t]),
                fmt_num(self.heat_price[t]),
                self.schedule.electric[t],
                self.schedule.heat[t]
            )
            .unwrap();
        }
        s
    }

    pub fn dispatch_csv(&self, scenario: &Scenario) -> String {
        let d = &self.dispatch;
        let mut cols: Vec<(String, &Vec<f64>)> = vec![
            ("base_load_kw".into(), &self.base_load),
            ("load_kw".into(), &self.load),
            ("cut_kw".into(), &self.cut),
            ("shift_kw".into(), &self.shift),
        ];
        for n in 0..d.chp_p.len() {
            cols.push((format!("chp{n}_p_kw"), &d.chp_p[n]));
            cols.push((format!("chp{n}_h_kw"), &d.chp_h[n]));
            cols.push((format!("chp{n}_reserve_kw"), &d.reserve_chp[n]));
        }
        for m in 0..d.con_p.len() {
            cols.push((format!("con{m}_p_kw"), &d.con_p[m]));
            cols.push((format!("con{m}_reserve_kw"), &d.reserve_con[m]));
        }
        for (l, st) in scenario.storage.iter().enumerate() {
            let k = format!("{:?}", st.kind).to_lowercase();
            cols.push((format!("{k}_storage{l}_charge_kw"), &d.storage_charge[l]));
            cols.push((format!("{k}_storage{l}_discharge_kw"), &d.storage_discharge[l]));
            cols.push((format!("{k}_storage{l}_soc_kwh"), &d.storage_soc[l]));
            cols.push((format!("{k}_storage{l}_reserve_kw"), &d.reserve_storage[l]));
        }
        for e in 0..d.boiler_p.len() {
            cols.push((format!("boiler{e}_p_kw"), &d.boiler_p[e]));
        }
        for (k, r) in scenario.renewables.iter().enumerate() {
            let name = match r.kind {
                RenewableKind::Wind => "wind",
                RenewableKind::Pv => "pv",
            };
            cols.push((format!("{name}{k}_grid_kw"), &d.renewable_grid[k]));
            cols.push((format!("{name}{k}_curtail_kw"), &d.renewable_curtail[k]));
        }
        for z in &self.zones {
            let k = z.kind;
            cols.push((format!("{k}_temp_c"), &z.temps));
            cols.push((format!("{k}_heat_kw"), &z.heat));
            cols.push((format!("{k}_heat_ref_kw"), &z.heat_ref));
            cols.push((format!("{k}_reducible_heat_kw"), &z.reducible));
        }
        let mut s = String::from("hour");
        for (name, _) in &cols {
            s.push(',');
            s.push_str(name);
        }
        s.push('\n');
        for t in 0..self.load.len() {
            s.push_str(&t.to_string());
            for (_, v) in &cols {
                s.push(',');
                s.push_str(&fmt_num(v[t]));
            }
            s.push('\n');
        }
        s
    }

    pub fn residuals_text(&self) -> String {
        let r = &self.residuals;
        let mut s = String::new();
        for (k, v) in [
            ("kkt_stationarity", r.kkt.stationarity),
            ("kkt_primal", r.kkt.primal),
            ("kkt_dual_sign", r.kkt.dual_sign),
            ("kkt_complementarity", r.kkt.complementarity),
            ("electric_balance", r.electric_balance),
            ("thermal_balance", r.thermal_balance),
            ("temperature_band", r.temp_band),
            ("shift_sum", r.shift_sum),
            ("cost_identities", self.costs.identity_error()),
        ] {
            writeln!(s, "{k} {}", fmt_num(v)).unwrap();
        }
        let failures = self.invariant_failures();
        writeln!(s, "invariants {}", if failures.is_empty() { "ok" } else { "violated" }).unwrap();
        for f in failures {
            writeln!(s, "  {f}").unwrap();
        }
        s
    }

    /// Solver summary; wall time is left out so reruns compare equal.
    pub fn solver_log(&self) -> String {
        let st = &self.stats;
        let mut s = String::new();
        writeln!(s, "scenario {}", self.scenario).unwrap();
        writeln!(s, "mode {}", self.mode.index()).unwrap();
        writeln!(s, "status {}", self.status_label()).unwrap();
        writeln!(s, "final {}", self.is_final).unwrap();
        writeln!(s, "objective {}", fmt_num(st.objective)).unwrap();
        writeln!(s, "bound {}", fmt_num(st.bound)).unwrap();
        writeln!(s, "gap {}", fmt_num(st.gap)).unwrap();
        writeln!(s, "nodes {}", st.nodes).unwrap();
        writeln!(s, "lp_iterations {}", st.lp_iterations).unwrap();
        writeln!(s, "variables {}", st.variables).unwrap();
        writeln!(s, "rows {}", st.rows).unwrap();
        writeln!(s, "binaries {}", st.binaries).unwrap();
        writeln!(s, "schedule {}", self.schedule).unwrap();
        for w in &st.warnings {
            writeln!(s, "warning {w}").unwrap();
        }
        s
    }
}

pub fn status_label(s: MilpStatus) -> String {
    match s {
        MilpStatus::Optimal => "optimal",
        MilpStatus::Infeasible => "infeasible",
        MilpStatus::Unbounded => "unbounded",
        MilpStatus::NodeLimit => "node-limit",
        MilpStatus::TimeLimit => "time-limit",
        MilpStatus::Failed => "failed",
    }
    .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt_num(1234.5678), "1234.57");
        assert_eq!(fmt_num(0.000123456789), "0.000123457");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(-1e-20), "-1.00000e-20");
        assert_eq!(fmt_num(100.0), "100");
        assert_eq!(fmt_num(2.5e17), "2.50000e17");
        assert_eq!(fmt_num(-42.0), "-42");
    }
}
