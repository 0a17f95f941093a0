use ies_core::bilevel::{assemble, BilevelProblem, Commodity};
use ies_core::devices::Scenario;
use ies_core::oracle::{
    compare, enumerate_leader, evaluate_prices, follower_grid_check, OracleResult, PriceEvaluation, TierSchedule,
    VerdictKind, DEFAULT_CAP,
};
use ies_core::runner::{generate_scenario, GenProfile};
use ies_core::thermal::Mode;
use ies_core::CoreError;
use ies_milp::Tolerances;

fn tiny(seed: u64, horizon: usize, tiers: usize, start: usize) -> Scenario {
    generate_scenario(seed, &GenProfile::tiny(horizon, tiers, start))
}

fn fixed_loads(mut s: Scenario) -> Scenario {
    s.cut_max_kw = vec![0.0; s.horizon];
    s.shift_max_kw = 0.0;
    s
}

#[test]
fn one_hour_one_tier_is_a_single_evaluation() {
    let mut s = tiny(3, 2, 1, 9);
    s.horizon = 1;
    s.outdoor_temp_c.truncate(1);
    s.base_electric_load_kw.truncate(1);
    s.cut_max_kw.truncate(1);
    let b = assemble(&s, Mode::M5, 4).unwrap();
    let tol = Tolerances::default();
    let o = enumerate_leader(&b, DEFAULT_CAP, &tol).unwrap();
    assert_eq!(o.combinations, 1);
    assert_eq!(o.table.len(), 1);
    let direct = evaluate_prices(&b, &TierSchedule { electric: vec![0], heat: vec![0] }, &tol).unwrap();
    assert_eq!(o.best_profit(), direct.leader_profit);
}

#[test]
fn cap_is_enforced_with_the_required_count() {
    let b = assemble(&tiny(1, 3, 3, 7), Mode::M5, 4).unwrap();
    match enumerate_leader(&b, 500, &Tolerances::default()) {
        Err(CoreError::CapExceeded { required, cap }) => {
            assert_eq!(required, 729);
            assert_eq!(cap, 500);
        }
        other => panic!("expected a cap refusal, got {other:?}"),
    }
}

#[test]
fn table_is_canonical_and_best_is_its_maximum() {
    let b = assemble(&tiny(2, 3, 2, 16), Mode::M1, 4).unwrap();
    let o = enumerate_leader(&b, DEFAULT_CAP, &Tolerances::default()).unwrap();
    let keys: Vec<(Vec<usize>, Vec<usize>)> = o
        .table
        .iter()
        .map(|e| (e.schedule.electric.clone(), e.schedule.heat.clone()))
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    let max = o
        .table
        .iter()
        .filter_map(|e| e.leader_profit)
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(o.best_profit(), Some(max));
    // every row meets the mean within its tolerance and nothing else does
    for c in [Commodity::Electric, Commodity::Heat] {
        let p = b.prices(c);
        for e in &o.table {
            let sum: f64 = e.schedule.prices(&b, c).iter().sum();
            assert!((sum - 3.0 * p.mean).abs() <= p.tolerance + 1e-9);
        }
    }
    let feasible = |grid: &[f64], mean: f64, tol: f64| {
        let mut n = 0;
        for a in grid {
            for b in grid {
                for c in grid {
                    if (a + b + c - 3.0 * mean).abs() <= tol + 1e-9 {
                        n += 1;
                    }
                }
            }
        }
        n
    };
    let ne = feasible(&b.electric.grid, b.electric.mean, b.electric.tolerance);
    let nh = feasible(&b.heat.grid, b.heat.mean, b.heat.tolerance);
    assert_eq!(o.table.len(), ne * nh);
}

fn revenue_at(b: &BilevelProblem, e: &PriceEvaluation) -> f64 {
    b.products
        .iter()
        .map(|p| p.coeff * e.schedule.prices(b, p.commodity)[p.hour] * e.x[p.load])
        .sum()
}

#[test]
fn fixed_loads_in_mode_two_make_profit_track_revenue() {
    let s = fixed_loads(tiny(5, 3, 3, 11));
    let b = assemble(&s, Mode::M2, 4).unwrap();
    let o = enumerate_leader(&b, DEFAULT_CAP, &Tolerances::default()).unwrap();
    let zones = &b.follower.zones;
    // loads are data: base electric load and the reference heat of each zone
    let heat: Vec<f64> = (0..s.horizon).map(|t| zones.iter().map(|z| z.h_ref_kw[t]).sum()).collect();
    let by_hand = |e: &PriceEvaluation| -> f64 {
        let pe = e.schedule.prices(&b, Commodity::Electric);
        let ph = e.schedule.prices(&b, Commodity::Heat);
        (0..s.horizon)
            .map(|t| pe[t] * s.base_electric_load_kw[t] + ph[t] * heat[t])
            .sum()
    };
    let offset = o.table[0].leader_profit.unwrap() - by_hand(&o.table[0]);
    for e in &o.table {
        let r = by_hand(e);
        assert!((revenue_at(&b, e) - r).abs() <= 1e-9 * r);
        assert!((e.leader_profit.unwrap() - r - offset).abs() <= 1e-7 * (1.0 + r));
    }
    let best_by_hand = o
        .table
        .iter()
        .map(|e| by_hand(e))
        .fold(f64::NEG_INFINITY, f64::max);
    assert!((by_hand(o.best().unwrap()) - best_by_hand).abs() <= 1e-9 * best_by_hand);
}

#[test]
fn grid_check_in_mode_two_is_a_direct_evaluation() {
    let s = tiny(6, 2, 2, 7);
    let b = assemble(&s, Mode::M2, 4).unwrap();
    let sched = TierSchedule {
        electric: vec![0, 1],
        heat: vec![1, 0],
    };
    let g = follower_grid_check(&b, &sched, 0.25, 1_000_000).unwrap();
    assert_eq!(g.grid_points, 2 * 2);
    let ph = sched.prices(&b, Commodity::Heat);
    for (z, cost) in b.follower.zones.iter().zip(&g.zone_costs) {
        let direct: f64 = (0..2).map(|t| ph[t] * z.h_ref_kw[t]).sum();
        assert!((cost - direct).abs() <= 1e-9 * (1.0 + direct), "{cost} vs {direct}");
    }
}

#[test]
fn zero_prices_track_the_reference() {
    let mut s = tiny(7, 2, 1, 8);
    for p in [&mut s.electric_price, &mut s.heat_price] {
        p.min = 0.0;
        p.max = 0.0;
        p.mean = 0.0;
    }
    let b = assemble(&s, Mode::M5, 4).unwrap();
    let sched = TierSchedule {
        electric: vec![0, 0],
        heat: vec![0, 0],
    };
    let step = 0.05;
    let g = follower_grid_check(&b, &sched, step, 10_000_000).unwrap();
    for (z, temps) in b.follower.zones.iter().zip(&g.temps) {
        assert_eq!(temps.len(), s.horizon);
        // the reference trajectory holds the PMV-0 temperature
        let neutral = ies_core::thermal::temp_from_pmv(0.0, &z.zone);
        for &t in temps {
            assert!((t - neutral).abs() <= step, "{t} vs {neutral}");
        }
    }
    assert!(g.objective <= g.lipschitz_bound + 1e-12);
}

#[test]
fn grid_and_lp_agree_within_both_bounds() {
    for (seed, mode) in [(8, Mode::M5), (9, Mode::M1), (10, Mode::M3)] {
        let s = tiny(seed, 2, 2, 6);
        let b = assemble(&s, mode, 8).unwrap();
        let sched = TierSchedule {
            electric: vec![1, 0],
            heat: vec![0, 1],
        };
        let lp = evaluate_prices(&b, &sched, &Tolerances::default()).unwrap();
        let g = follower_grid_check(&b, &sched, 0.1, 10_000_000).unwrap();
        // chord error of psi d^2 per zone and hour
        let pwl: f64 = b
            .follower
            .zones
            .iter()
            .map(|z| {
                let (x, y) = *z.curve.points.last().unwrap();
                let psi = y / (x * x);
                s.horizon as f64 * psi * z.curve.max_width().powi(2) / 4.0
            })
            .sum();
        // chords overestimate: true <= lp <= true + pwl, and true <= grid <= true + lipschitz
        let gap = g.objective - lp.follower_cost;
        assert!(gap <= g.lipschitz_bound + 1e-6, "{mode}: grid {} lp {}", g.objective, lp.follower_cost);
        assert!(gap >= -pwl - 1e-6, "{mode}: grid {} lp {}", g.objective, lp.follower_cost);
    }
}

fn result_with(profit: f64) -> OracleResult {
    OracleResult {
        table: vec![PriceEvaluation {
            schedule: TierSchedule {
                electric: vec![0],
                heat: vec![0],
            },
            follower_cost: 0.0,
            leader_profit: Some(profit),
            electric_load: 0.0,
            heat_load: 0.0,
            x: Vec::new(),
        }],
        best: Some(0),
        combinations: 1,
    }
}

#[test]
fn compare_is_closed_at_the_tolerance() {
    let o = result_with(100.0);
    assert!(compare(Some(100.0), None, &o, 1e-12).passed());
    // deviation 0.5 against 0.5 * (1 + 0), both exact in binary
    let at = compare(Some(0.5), None, &result_with(0.0), 0.5);
    assert_eq!(at.kind, VerdictKind::Pass);
    assert_eq!(compare(Some(0.5), None, &result_with(0.0), 0.25).kind, VerdictKind::MilpBetter);
    let beyond = compare(Some(101.0), None, &o, 1e-3);
    assert_eq!(beyond.kind, VerdictKind::MilpBetter);
    assert!(beyond.diagnosis.contains("oracle gap or invalid Big-M"));
    let worse = compare(Some(99.0), None, &o, 1e-3);
    assert_eq!(worse.kind, VerdictKind::MilpWorse);
    let missing = compare(None, None, &o, 1e-3);
    assert_eq!(missing.kind, VerdictKind::Missing);
    assert!(missing.diagnosis.contains("invalid Big-M"));
}
