//! Acceptance criteria 1 to 10, one verdict line each:
//!
//! ```text
//! cargo test --offline -p ies-core --test acceptance -- --nocapture
//! ```
//!
//! Everything runs inside one test so the timed criteria are not sharing the
//! CPU with each other. Criterion 9 is reported but does not fail the run.

#[path = "../../milp/tests/support/mod.rs"]
mod lattice;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use ies_core::devices::Scenario;
use ies_core::reform::{BigM, PwlCurve, QuadraticSpec};
use ies_core::runner::{
    generate_scenario, load_scenario, run_all_modes, run_mode, sweep_k, verify, write_table, GenProfile, RunOptions,
    SolutionReport, DEFAULT_K_LIST,
};
use ies_core::thermal::{body_coefficient, heat_power_for_transition, pmv, temp_from_pmv, Mode, ZoneKind};
use ies_milp::{solve_lp, solve_milp, LpStatus, MilpOptions, MilpStatus, Tolerances};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ORACLE_TOL: f64 = 1e-5;
const ORACLE_BUDGET: Duration = Duration::from_secs(60);
const IDENTITY_TOL: f64 = 1e-6;
const BALANCE_TOL: f64 = 1e-6;
const BAND_TOL: f64 = 1e-6;
const KKT_TOL: f64 = 1e-6;
const BIG_M_TOL: f64 = 1e-6;
const LP_TOL: f64 = 1e-8;
const PMV_TOL: f64 = 1e-9;
const HALVING_TOL: f64 = 0.1;
const MODES_BUDGET: Duration = Duration::from_secs(600);

struct Verdicts {
    lines: Vec<(u8, bool, bool)>,
}

impl Verdicts {
    fn record(&mut self, n: u8, soft: bool, failures: &[String], detail: String) {
        let pass = failures.is_empty();
        let label = match (pass, soft) {
            (true, _) => "PASS",
            (false, false) => "FAIL",
            (false, true) => "FAIL (soft)",
        };
        println!("criterion {n}: {label} {detail}");
        for f in failures.iter().take(10) {
            println!("    {f}");
        }
        self.lines.push((n, pass, soft));
    }
}

fn bundled_day() -> Scenario {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/day24/scenario.toml");
    load_scenario(&path).unwrap()
}

/// T in {2, 3}, 2 or 3 tiers, start hours spread over the day.
fn tiny_suite() -> Vec<Scenario> {
    let starts = [0, 6, 7, 9, 12, 16, 18, 20, 22, 3, 14, 23];
    starts
        .iter()
        .enumerate()
        .map(|(i, &start)| generate_scenario(100 + i as u64, &GenProfile::tiny(2 + i % 2, 2 + (i / 2) % 2, start)))
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + b.abs())
}

fn mode_two_failures(tag: &str, r: &SolutionReport) -> Vec<String> {
    let mut out = Vec::new();
    if r.costs.comfort_loss != 0.0 {
        out.push(format!("{tag}: comfort loss {}", r.costs.comfort_loss));
    }
    if r.costs.total_cost != r.costs.energy_cost {
        out.push(format!("{tag}: total {} != energy {}", r.costs.total_cost, r.costs.energy_cost));
    }
    out
}

fn identity_failures(tag: &str, r: &SolutionReport) -> Vec<String> {
    let c = &r.costs;
    let net = rel(c.net_revenue, c.revenue - c.operating_cost);
    let total = rel(c.total_cost, c.energy_cost + c.comfort_loss);
    if net.max(total) > IDENTITY_TOL {
        vec![format!("{tag}: net off by {net:e}, total off by {total:e}")]
    } else {
        Vec::new()
    }
}

fn physical_failures(tag: &str, s: &Scenario, r: &SolutionReport) -> Vec<String> {
    let mut out = Vec::new();
    let res = &r.residuals;
    if res.electric_balance > BALANCE_TOL || res.thermal_balance > BALANCE_TOL {
        out.push(format!(
            "{tag}: balance residuals {:e} / {:e}",
            res.electric_balance, res.thermal_balance
        ));
    }
    for z in &r.zones {
        for t in 0..z.temps.len() {
            let v = z.temps[t];
            if v < z.band_lo[t] - BAND_TOL || v > z.band_hi[t] + BAND_TOL {
                out.push(format!("{tag}: {} hour {t} at {v} outside [{}, {}]", z.kind, z.band_lo[t], z.band_hi[t]));
            }
            let off = !s.comfort.working_hours.contains(&s.hour_of_day(t));
            if r.mode == Mode::M5 && z.kind == ZoneKind::Public && off && v < 5.0 - BAND_TOL {
                out.push(format!("{tag}: public zone at {v} C off-hours, hour {t}"));
            }
        }
    }
    let sum: f64 = r.shift.iter().sum();
    let scale: f64 = 1.0 + r.shift.iter().map(|v| v.abs()).sum::<f64>();
    if sum.abs() > BALANCE_TOL * scale {
        out.push(format!("{tag}: shift sums to {sum:e}"));
    }
    out
}

fn kkt_failures(tag: &str, r: &SolutionReport) -> Vec<String> {
    let worst = r.residuals.kkt.max();
    let limit = KKT_TOL * (1.0 + r.stats.objective.abs());
    if worst > limit {
        vec![format!("{tag}: KKT residual {worst:e} above {limit:e}")]
    } else {
        Vec::new()
    }
}

fn files_under(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn max_chord_gap(curve: &PwlCurve, spec: QuadraticSpec) -> f64 {
    let mut gap: f64 = 0.0;
    for w in curve.points.windows(2) {
        let (x0, x1) = (w[0].0, w[1].0);
        for k in 0..=20 {
            let x = if k == 20 { x1 } else { x0 + (x1 - x0) * k as f64 / 20.0 };
            gap = gap.max(curve.eval(x).unwrap() - spec.eval(x));
        }
    }
    gap
}

#[test]
fn acceptance() {
    let mut v = Verdicts { lines: Vec::new() };
    let opts = RunOptions::default();
    let suite = tiny_suite();

    // 1: MILP against the brute-force oracle
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    let mut tiny_reports = Vec::new();
    for (i, s) in suite.iter().enumerate() {
        for mode in [Mode::M2, Mode::M5] {
            let tag = format!("tiny#{i} T={} tiers={} {mode}", s.horizon, s.electric_price.tiers);
            match verify(s, mode, &opts, ORACLE_TOL) {
                Ok(r) => {
                    worst = worst.max(r.verdict.rel_dev);
                    if !r.verdict.passed() {
                        failures.push(format!("{tag}: {}", r.verdict.diagnosis));
                    }
                    match r.report {
                        Some(rep) => tiny_reports.push((tag, i, rep)),
                        None => failures.push(format!("{tag}: no report")),
                    }
                }
                Err(e) => failures.push(format!("{tag}: {e}")),
            }
        }
    }
    let elapsed = start.elapsed();
    if elapsed > ORACLE_BUDGET {
        failures.push(format!("suite took {elapsed:.1?}"));
    }
    v.record(
        1,
        false,
        &failures,
        format!(
            "{} instances, worst rel deviation {worst:.2e} (tol {ORACLE_TOL:e}), {elapsed:.1?}",
            2 * suite.len()
        ),
    );

    // the 24 h runs feed criteria 2 to 5, 9 and 10
    let day = bundled_day();
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let mut timings = Vec::new();
    let mut day_reports = Vec::new();
    for dir in [&dir_a, &dir_b] {
        let start = Instant::now();
        let (table, reports) = run_all_modes(&day, &opts);
        timings.push(start.elapsed());
        write_table(dir.path(), &day, &table, &reports, |row| format!("mode{}", row.key)).unwrap();
        day_reports = reports;
    }
    let day_ok: Vec<(String, &SolutionReport)> = day_reports
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .map(|r| (format!("day24 {}", r.mode), r))
        .collect();
    let day_errors: Vec<String> = day_reports
        .iter()
        .zip(Mode::ALL)
        .filter_map(|(r, m)| r.as_ref().err().map(|e| format!("day24 {m}: {e}")))
        .collect();

    // 2: mode 2 rows
    let mut failures = Vec::new();
    let mut rows = 0;
    for (tag, _, r) in tiny_reports.iter().filter(|(_, _, r)| r.mode == Mode::M2) {
        failures.extend(mode_two_failures(tag, r));
        rows += 1;
    }
    for (tag, r) in day_ok.iter().filter(|(_, r)| r.mode == Mode::M2) {
        failures.extend(mode_two_failures(tag, r));
        rows += 1;
    }
    if rows != suite.len() + 1 {
        failures.push(format!("only {rows} mode-2 reports"));
    }
    v.record(2, false, &failures, format!("{rows} mode-2 reports"));

    // 3: report identities
    let mut failures = day_errors.clone();
    for (tag, _, r) in &tiny_reports {
        failures.extend(identity_failures(tag, r));
    }
    for (tag, r) in &day_ok {
        failures.extend(identity_failures(tag, r));
    }
    v.record(
        3,
        false,
        &failures,
        format!("{} reports (tol {IDENTITY_TOL:e})", tiny_reports.len() + day_ok.len()),
    );

    // 4: physical feasibility
    let mut failures = day_errors.clone();
    for (tag, i, r) in &tiny_reports {
        failures.extend(physical_failures(tag, &suite[*i], r));
    }
    for (tag, r) in &day_ok {
        failures.extend(physical_failures(tag, &day, r));
    }
    v.record(4, false, &failures, format!("{} reports", tiny_reports.len() + day_ok.len()));

    // 5: KKT residuals, and a Big-M ten times larger
    let mut failures = day_errors.clone();
    for (tag, _, r) in &tiny_reports {
        failures.extend(kkt_failures(tag, r));
    }
    for (tag, r) in &day_ok {
        failures.extend(kkt_failures(tag, r));
    }
    let wide = RunOptions {
        big_m: opts.big_m.scaled(10.0),
        ..opts.clone()
    };
    let mut worst_shift: f64 = 0.0;
    for (tag, i, r) in &tiny_reports {
        match run_mode(&suite[*i], r.mode, &wide) {
            Ok(w) => {
                let d = rel(w.stats.objective, r.stats.objective);
                worst_shift = worst_shift.max(d);
                if d > BIG_M_TOL {
                    failures.push(format!("{tag}: 10x Big-M moves the objective by {d:e}"));
                }
            }
            Err(e) => failures.push(format!("{tag}: 10x Big-M: {e}")),
        }
    }
    assert!(matches!(wide.big_m, BigM::PerPair { .. }));
    v.record(
        5,
        false,
        &failures,
        format!("worst 10x Big-M objective change {worst_shift:.2e} over {} solves", tiny_reports.len()),
    );

    // 6: simplex and branch-and-bound against enumeration
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let tol = Tolerances::default();
    for case in 0..1000 {
        let lp = lattice::random_lp(&mut rng);
        let sol = solve_lp(&lp, &tol);
        match lattice::enumerate_vertices(&lp) {
            Some(best) if sol.status == LpStatus::Optimal && (sol.objective - best).abs() <= LP_TOL * (1.0 + best.abs()) => {}
            None if sol.status == LpStatus::Infeasible => {}
            best => failures.push(format!("LP {case}: {:?} {} vs {best:?}", sol.status, sol.objective)),
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let milp_opts = MilpOptions::default();
    for case in 0..500 {
        let milp = lattice::random_binary_milp(&mut rng);
        let sol = solve_milp(&milp, &milp_opts).unwrap();
        match lattice::enumerate_binaries(&milp) {
            Some(best) if sol.status == MilpStatus::Optimal && sol.objective == best => {}
            None if sol.status == MilpStatus::Infeasible => {}
            best => failures.push(format!("MILP {case}: {:?} {} vs {best:?}", sol.status, sol.objective)),
        }
    }
    v.record(6, false, &failures, "1000 LPs, 500 binary MILPs".into());

    // 7: thermal units
    let mut failures = Vec::new();
    let mut worst_pmv: f64 = 0.0;
    for zone in [&day.residential, &day.public] {
        for k in 0..=600 {
            let target = -3.0 + k as f64 / 100.0;
            let back = pmv(temp_from_pmv(target, zone), zone).unwrap();
            worst_pmv = worst_pmv.max((back - target).abs());
        }
        let at_skin = pmv(zone.skin_temp_c, zone).unwrap();
        if at_skin != 2.43 {
            failures.push(format!("{}: pmv at skin temperature {at_skin}", zone.kind));
        }
        for (t_in, t_out) in [(20.0, -5.0), (18.5, 3.25), (7.0, -12.0)] {
            let h = heat_power_for_transition(t_in, t_in, t_out, zone, day.dt_s);
            if h != zone.loss_conductance() * (t_in - t_out) {
                failures.push(format!("{}: steady heat {h} at {t_in}/{t_out}", zone.kind));
            }
        }
    }
    if worst_pmv > PMV_TOL {
        failures.push(format!("PMV round trip off by {worst_pmv:e}"));
    }
    let public = body_coefficient(day.public.surface_area_m2, day.public.volume_m3).unwrap();
    let residential = body_coefficient(day.residential.surface_area_m2, day.residential.volume_m3).unwrap();
    if public != 0.2 || residential != 0.4 {
        failures.push(format!("body coefficients {public} public, {residential} residential"));
    }
    v.record(7, false, &failures, format!("PMV round trip {worst_pmv:.1e}"));

    // 8: chord approximation
    let mut failures = Vec::new();
    let mut specs: Vec<(QuadraticSpec, f64, f64)> = day
        .chp
        .iter()
        .map(|u| (QuadraticSpec { a: u.cost_a, b: u.cost_b, c: u.cost_c }, u.p_min_kw, u.p_max_kw))
        .collect();
    specs.push((QuadraticSpec { a: 1.0, b: 0.0, c: 0.0 }, -3.0, 3.0));
    specs.push((QuadraticSpec { a: 0.0025, b: -0.4, c: 12.0 }, 10.0, 730.0));
    let mut ratios = Vec::new();
    for (spec, lo, hi) in specs {
        let mut previous = None;
        for n in [2, 4, 8, 16, 32] {
            let curve = PwlCurve::chord(spec, lo, hi, n).unwrap();
            let gap = max_chord_gap(&curve, spec);
            let bound = curve.error_bound(spec.a);
            if gap > bound * (1.0 + 1e-9) + 1e-12 {
                failures.push(format!("{spec:?} n={n}: gap {gap} over {bound}"));
            }
            for &(x, y) in &curve.points {
                if curve.eval(x) != Some(y) || y != spec.eval(x) {
                    failures.push(format!("{spec:?} n={n}: not exact at {x}"));
                }
            }
            if let Some(prev) = previous {
                let ratio: f64 = prev / gap;
                ratios.push(ratio);
                if (ratio / 4.0 - 1.0).abs() > HALVING_TOL {
                    failures.push(format!("{spec:?} n={n}: gap ratio {ratio}"));
                }
            }
            previous = Some(gap);
        }
    }
    let (rmin, rmax) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    v.record(8, false, &failures, format!("halving ratios in [{rmin:.4}, {rmax:.4}]"));

    // 9 (soft): K sweep and off-hours reducible heat
    let mut failures = Vec::new();
    let (_, sweep) = sweep_k(&day, &DEFAULT_K_LIST, Mode::M5, &opts).unwrap();
    let nets: Vec<Option<f64>> = sweep.iter().map(|r| r.as_ref().ok().map(|r| r.costs.net_revenue)).collect();
    let rising = nets
        .windows(2)
        .filter(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if b >= a))
        .count();
    if rising < 7 {
        failures.push(format!("net revenue rises in {rising} of 8 steps: {nets:?}"));
    }
    let reducible = |m: Mode| -> Option<Vec<f64>> {
        let r = day_ok.iter().find(|(_, r)| r.mode == m)?.1;
        Some((0..day.horizon).map(|t| r.zones.iter().map(|z| z.reducible[t]).sum()).collect())
    };
    match (reducible(Mode::M3), reducible(Mode::M4), reducible(Mode::M5)) {
        (Some(r3), Some(r4), Some(r5)) => {
            for t in (0..day.horizon).filter(|&t| {
                let h = day.hour_of_day(t);
                h <= 7 || h >= 22
            }) {
                let slack = 1e-6 * (1.0 + r5[t].abs());
                if r5[t] + slack < r3[t] || r5[t] + slack < r4[t] {
                    failures.push(format!("hour {t}: mode 5 {} vs mode 3 {} mode 4 {}", r5[t], r3[t], r4[t]));
                }
            }
        }
        _ => failures.push("missing mode 3, 4 or 5 report".into()),
    }
    v.record(9, true, &failures, format!("net revenue rises in {rising} of 8 K steps"));

    // 10: full mode table, twice
    let mut failures = day_errors.clone();
    for (i, t) in timings.iter().enumerate() {
        if *t > MODES_BUDGET {
            failures.push(format!("run {i} took {t:.1?}"));
        }
    }
    let (a, b) = (files_under(dir_a.path()), files_under(dir_b.path()));
    if a != b {
        let differ: Vec<_> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
        failures.push(format!("outputs differ: {differ:?}"));
    }
    let finals = day_ok.iter().filter(|(_, r)| r.is_final).count();
    v.record(
        10,
        false,
        &failures,
        format!(
            "{:.1?} and {:.1?}, {} identical files, {finals} of 5 modes proven optimal",
            timings[0],
            timings[1],
            a.len()
        ),
    );

    let hard: Vec<u8> = v.lines.iter().filter(|(_, pass, soft)| !pass && !soft).map(|l| l.0).collect();
    assert!(hard.is_empty(), "failed criteria {hard:?}");
}
