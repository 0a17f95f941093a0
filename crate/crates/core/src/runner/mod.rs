//! Scenario files, synthetic scenarios, experiment harness and reports.

pub mod generate;
pub mod io;
pub mod report;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Duration;

use ies_milp::{solve_milp, MilpOptions, MilpSolution, MilpStatus, Tolerances};

use crate::bilevel::{assemble, BilevelProblem, Owner};
use crate::devices::{validate_scenario, Scenario};
use crate::error::{CoreError, Result};
use crate::oracle::{compare, enumerate_leader, OracleResult, TierSchedule, Verdict, DEFAULT_CAP};
use crate::reform::{export_lp, to_milp, BigM, MilpProblem, ReformOptions};
use crate::thermal::Mode;

pub use generate::{generate_scenario, GenProfile};
pub use io::{load_scenario, parse_scenario, read_profile, save_scenario, write_profile};
pub use report::{extract_report, fmt_num, status_label, CostBreakdown, Residuals, SolutionReport, SolverStats, ZoneSeries};

pub const DEFAULT_K_LIST: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub big_m: BigM,
    pub pwl_segments: usize,
    /// Overrides the tier count of both price specs.
    pub tiers: Option<usize>,
    pub rel_gap: f64,
    pub node_limit: Option<usize>,
    /// Makes results depend on machine speed; off by default.
    pub time_limit: Option<Duration>,
    pub duality_gap_row: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            big_m: BigM::default(),
            pwl_segments: 8,
            tiers: None,
            rel_gap: 1e-6,
            node_limit: Some(2500),
            time_limit: None,
            duality_gap_row: true,
        }
    }
}

/// `scenario` with `options.tiers` applied, validated.
pub fn prepare(scenario: &Scenario, options: &RunOptions) -> Result<Scenario> {
    let mut s = scenario.clone();
    if let Some(n) = options.tiers {
        s.electric_price.tiers = n;
        s.heat_price.tiers = n;
    }
    let v = validate_scenario(&s);
    if !v.is_empty() {
        return Err(CoreError::Validation(v));
    }
    Ok(s)
}

/// Assembled game, its MILP and the raw solver result.
#[derive(Debug, Clone)]
pub struct Solved {
    pub scenario: Scenario,
    pub bilevel: BilevelProblem,
    pub problem: MilpProblem,
    pub solution: MilpSolution,
}

pub fn build(scenario: &Scenario, mode: Mode, options: &RunOptions) -> Result<(Scenario, BilevelProblem, MilpProblem)> {
    let s = prepare(scenario, options)?;
    let b = assemble(&s, mode, options.pwl_segments)?;
    let p = to_milp(
        &b,
        &ReformOptions {
            big_m: options.big_m,
            duality_gap_row: options.duality_gap_row,
        },
    )?;
    Ok((s, b, p))
}

/// Price selectors are branched on before complementarity switches.
fn priorities(p: &MilpProblem) -> Vec<u32> {
    p.vars
        .iter()
        .map(|v| u32::from(v.integer && v.owner == Owner::Leader))
        .collect()
}

pub fn solve(scenario: &Scenario, mode: Mode, options: &RunOptions) -> Result<Solved> {
    let (s, b, p) = build(scenario, mode, options)?;
    let opts = MilpOptions {
        rel_gap: options.rel_gap,
        node_limit: options.node_limit,
        time_limit: options.time_limit,
        priority: Some(priorities(&p)),
        ..Default::default()
    };
    let solution = solve_milp(&p.milp, &opts)?;
    Ok(Solved {
        scenario: s,
        bilevel: b,
        problem: p,
        solution,
    })
}

/// Full pipeline for one mode. A report stopped by a solver limit is
/// returned with `is_final == false`; a limit without any incumbent is an
/// error.
pub fn run_mode(scenario: &Scenario, mode: Mode, options: &RunOptions) -> Result<SolutionReport> {
    let solved = solve(scenario, mode, options)?;
    report_of(&solved)
}

pub fn report_of(solved: &Solved) -> Result<SolutionReport> {
    let sol = &solved.solution;
    match sol.status {
        MilpStatus::Optimal => {}
        s if s.is_limit() && sol.x.is_some() => {}
        s if s.is_limit() => {
            return Err(CoreError::Limit(format!("{} without an incumbent after {} nodes", status_label(s), sol.nodes)))
        }
        s => {
            return Err(CoreError::Solver(format!(
                "MILP {}{}",
                status_label(s),
                sol.message.as_ref().map_or(String::new(), |m| format!(": {m}"))
            )))
        }
    }
    let report = extract_report(&solved.scenario, &solved.bilevel, &solved.problem, sol)?;
    let failures = report.invariant_failures();
    if !failures.is_empty() {
        return Err(CoreError::Invariant(failures));
    }
    Ok(report)
}

/// One row of a mode or sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    /// Mode number or K value, as printed.
    pub key: String,
    pub costs: Option<CostBreakdown>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub key_name: String,
    pub rows: Vec<TableRow>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut s = self.key_name.clone();
        for h in CostBreakdown::HEADER {
            s.push(',');
            s.push_str(h);
        }
        s.push_str(",status\n");
        for r in &self.rows {
            s.push_str(&r.key);
            match &r.costs {
                Some(c) => {
                    for v in c.values() {
                        s.push(',');
                        s.push_str(&fmt_num(v));
                    }
                }
                None => s.push_str(&",".repeat(6)),
            }
            writeln!(s, ",{}", r.status).unwrap();
        }
        s
    }

    /// Reads back what [`Table::to_csv`] wrote.
    pub fn from_csv(text: &str) -> Result<Table> {
        let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let bad = |m: String| CoreError::Parse {
            path: "<table>".into(),
            message: m,
        };
        let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
        if headers.len() != 8 {
            return Err(bad(format!("expected 8 columns, found {}", headers.len())));
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let costs = if rec[1].is_empty() {
                None
            } else {
                let mut v = [0.0; 6];
                for (k, slot) in v.iter_mut().enumerate() {
                    *slot = rec[k + 1].parse().map_err(|_| bad(format!("bad number `{}`", &rec[k + 1])))?;
                }
                Some(CostBreakdown {
                    net_revenue: v[0],
                    revenue: v[1],
                    operating_cost: v[2],
                    energy_cost: v[3],
                    comfort_loss: v[4],
                    total_cost: v[5],
                })
            };
            rows.push(TableRow {
                key: rec[0].to_string(),
                costs,
                status: rec[7].to_string(),
            });
        }
        Ok(Table {
            key_name: headers[0].to_string(),
            rows,
        })
    }
}

fn row_of(key: String, r: &Result<SolutionReport>) -> TableRow {
    match r {
        Ok(rep) => TableRow {
            key,
            costs: Some(rep.costs),
            status: rep.status_label(),
        },
        Err(e) => TableRow {
            key,
            costs: None,
            status: format!("error: {}", e.to_string().replace([',', '\n'], ";")),
        },
    }
}

/// Modes 1 to 5; a failing mode becomes a row status.
pub fn run_all_modes(scenario: &Scenario, options: &RunOptions) -> (Table, Vec<Result<SolutionReport>>) {
    let reports: Vec<Result<SolutionReport>> = Mode::ALL.iter().map(|&m| run_mode(scenario, m, options)).collect();
    let rows = Mode::ALL
        .iter()
        .zip(&reports)
        .map(|(m, r)| row_of(m.index().to_string(), r))
        .collect();
    (
        Table {
            key_name: "mode".into(),
            rows,
        },
        reports,
    )
}

/// Reruns `mode` with the residential share of reference heating set to
/// each K.
pub fn sweep_k(
    scenario: &Scenario,
    k_values: &[f64],
    mode: Mode,
    options: &RunOptions,
) -> Result<(Table, Vec<Result<SolutionReport>>)> {
    if let Some(k) = k_values.iter().find(|k| !(**k > 0.0 && **k < 1.0)) {
        return Err(CoreError::Config(format!("K values must lie in (0, 1), got {k}")));
    }
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &k in k_values {
        let mut s = scenario.clone();
        s.residential_share = k;
        let r = run_mode(&s, mode, options);
        rows.push(row_of(fmt_num(k), &r));
        reports.push(r);
    }
    Ok((
        Table {
            key_name: "k".into(),
            rows,
        },
        reports,
    ))
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub verdict: Verdict,
    pub oracle: OracleResult,
    pub milp_status: MilpStatus,
    pub bilevel: BilevelProblem,
    pub report: Option<SolutionReport>,
}

impl VerifyReport {
    pub fn summary(&self) -> String {
        let v = &self.verdict;
        let opt = |x: Option<f64>| x.map_or("none".to_string(), fmt_num);
        let sched = |s: &Option<TierSchedule>| s.as_ref().map_or("none".to_string(), |s| s.to_string());
        let mut s = String::new();
        writeln!(s, "verdict {}", if v.passed() { "PASS" } else { "FAIL" }).unwrap();
        writeln!(s, "diagnosis {}", v.diagnosis).unwrap();
        writeln!(s, "milp_status {}", status_label(self.milp_status)).unwrap();
        writeln!(s, "milp_objective {}", opt(v.milp)).unwrap();
        writeln!(s, "oracle_objective {}", opt(v.oracle)).unwrap();
        writeln!(s, "abs_deviation {}", fmt_num(v.abs_dev)).unwrap();
        writeln!(s, "rel_deviation {}", fmt_num(v.rel_dev)).unwrap();
        writeln!(s, "milp_schedule {}", sched(&v.milp_schedule)).unwrap();
        writeln!(s, "oracle_schedule {}", sched(&v.oracle_schedule)).unwrap();
        writeln!(s, "oracle_schedules_evaluated {}", self.oracle.table.len()).unwrap();
        if let Some(r) = &self.report {
            writeln!(s, "comfort_loss {}", fmt_num(r.costs.comfort_loss)).unwrap();
        }
        if let Some(best) = self.oracle.best() {
            let comfort = oracle_comfort_loss(&self.bilevel, &best.x);
            writeln!(s, "oracle_comfort_loss {}", fmt_num(comfort)).unwrap();
        }
        s
    }
}

/// Exact quadratic comfort loss of a bilevel solution vector.
pub fn oracle_comfort_loss(b: &BilevelProblem, x: &[f64]) -> f64 {
    let mut total = 0.0;
    for z in &b.follower.zones {
        let temps: Vec<f64> = z.temps.iter().map(|&v| x[v].clamp(b.vars[v].lower, b.vars[v].upper)).collect();
        let heat = z.heat_from_temps(&temps);
        // psi is the curvature of the comfort curve
        let psi = z.curve.points.last().map_or(0.0, |&(d, f)| if d != 0.0 { f / (d * d) } else { 0.0 });
        total += psi * z.h_ref_kw.iter().zip(&heat).map(|(r, h)| (r - h) * (r - h)).sum::<f64>();
    }
    total
}

pub const VERIFY_TOL: f64 = 1e-5;

/// Runs the MILP and the brute-force oracle on the same game and compares
/// leader profits.
pub fn verify(scenario: &Scenario, mode: Mode, options: &RunOptions, tol: f64) -> Result<VerifyReport> {
    let (s, b, p) = build(scenario, mode, options)?;
    let oracle = enumerate_leader(&b, DEFAULT_CAP, &Tolerances::default())?;
    let opts = MilpOptions {
        rel_gap: options.rel_gap,
        node_limit: options.node_limit,
        time_limit: options.time_limit,
        priority: Some(priorities(&p)),
        ..Default::default()
    };
    let solution = solve_milp(&p.milp, &opts)?;
    let solved = Solved {
        scenario: s,
        bilevel: b,
        problem: p,
        solution,
    };
    let sol = &solved.solution;
    let milp_obj = sol.x.as_ref().map(|_| sol.objective + solved.problem.objective_constant);
    let milp_sched = sol.x.as_ref().map(|x| TierSchedule::from_solution(&solved.bilevel, x));
    let mut verdict = compare(milp_obj, milp_sched, &oracle, tol);
    if sol.status.is_limit() && !verdict.passed() {
        verdict.diagnosis.push_str(&format!(" (MILP stopped at {})", status_label(sol.status)));
    }
    let report = report_of(&solved).ok();
    Ok(VerifyReport {
        verdict,
        oracle,
        milp_status: sol.status,
        bilevel: solved.bilevel,
        report,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| CoreError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Writes `summary.csv`, `dispatch.csv`, `prices.csv`, `residuals.txt` and
/// `solver_log.txt` for one run.
pub fn write_run(dir: &Path, scenario: &Scenario, report: &SolutionReport) -> Result<()> {
    create_dir(dir)?;
    let table = Table {
        key_name: "mode".into(),
        rows: vec![TableRow {
            key: report.mode.index().to_string(),
            costs: Some(report.costs),
            status: report.status_label(),
        }],
    };
    io::write_file(&dir.join("summary.csv"), &table.to_csv())?;
    io::write_file(&dir.join("dispatch.csv"), &report.dispatch_csv(scenario))?;
    io::write_file(&dir.join("prices.csv"), &report.prices_csv())?;
    io::write_file(&dir.join("residuals.txt"), &report.residuals_text())?;
    io::write_file(&dir.join("solver_log.txt"), &report.solver_log())
}

/// Writes `table` as `summary.csv` and each successful run into its own
/// subdirectory named by `subdir`.
pub fn write_table(
    dir: &Path,
    scenario: &Scenario,
    table: &Table,
    reports: &[Result<SolutionReport>],
    subdir: impl Fn(&TableRow) -> String,
) -> Result<()> {
    create_dir(dir)?;
    io::write_file(&dir.join("summary.csv"), &table.to_csv())?;
    for (row, r) in table.rows.iter().zip(reports) {
        if let Ok(rep) = r {
            write_run(&dir.join(subdir(row)), scenario, rep)?;
        }
    }
    Ok(())
}

pub fn write_verify(dir: &Path, v: &VerifyReport) -> Result<()> {
    create_dir(dir)?;
    io::write_file(&dir.join("verify.txt"), &v.summary())?;
    io::write_file(&dir.join("oracle.csv"), &v.oracle.to_csv(&v.bilevel))
}

pub fn dump_lp(dir: &Path, problem: &MilpProblem) -> Result<()> {
    create_dir(dir)?;
    io::write_file(&dir.join("model.lp"), &export_lp(problem))
}
