use std::collections::BTreeMap;

use ies_core::bilevel::{assemble, Commodity, Owner, PriceProduct, PriceVars, VarTable};
use ies_core::devices::{chp_fuel_cost, con_fuel_cost, revenue, ChpUnit, ConUnit};
use ies_core::oracle::{enumerate_leader, evaluate_prices, DEFAULT_CAP};
use ies_core::reform::{linearize_products, to_milp, ModelBuilder, PwlCurve, QuadraticSpec, ReformOptions};
use ies_core::runner::{generate_scenario, GenProfile};
use ies_core::thermal::{heat_power_for_transition, pmv, temp_from_pmv, BuildingZone, Mode, ZoneKind};
use ies_milp::{solve_lp, solve_milp, LpStatus, MilpOptions, MilpStatus, Sense, Tolerances};
use proptest::prelude::*;

fn quadratic() -> impl Strategy<Value = (QuadraticSpec, f64, f64)> {
    (0.01f64..5.0, -10.0f64..10.0, -10.0f64..10.0, -20.0f64..20.0, 0.5f64..30.0)
        .prop_map(|(a, b, c, lo, width)| (QuadraticSpec { a, b, c }, lo, lo + width))
}

/// Largest chord error over a sample that includes every segment midpoint.
fn measured_gap(curve: &PwlCurve, spec: QuadraticSpec) -> f64 {
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

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chords_overestimate_within_the_bound((spec, lo, hi) in quadratic(), n in 1usize..24, t in 0.0f64..1.0) {
        let curve = PwlCurve::chord(spec, lo, hi, n).unwrap();
        let x = lo + t * (hi - lo);
        let scale = 1e-9 * (1.0 + spec.eval(x).abs() + spec.a * hi.abs().max(lo.abs()).powi(2));
        let gap = curve.eval(x).unwrap() - spec.eval(x);
        prop_assert!(gap >= -scale);
        prop_assert!(gap <= curve.error_bound(spec.a) + scale);
        for &(bx, by) in &curve.points {
            prop_assert!((by - spec.eval(bx)).abs() <= scale);
        }
    }

    #[test]
    fn doubling_segments_quarters_the_gap((spec, lo, hi) in quadratic(), n in 1usize..12) {
        let coarse = measured_gap(&PwlCurve::chord(spec, lo, hi, n).unwrap(), spec);
        let fine = measured_gap(&PwlCurve::chord(spec, lo, hi, 2 * n).unwrap(), spec);
        let ratio = coarse / fine;
        prop_assert!((ratio - 4.0).abs() <= 0.4, "ratio {ratio}");
    }

    #[test]
    fn product_envelope_pins_w_to_z_times_y(z in 0u8..=1, frac in 0.0f64..=1.0, y_max in 1.0f64..500.0) {
        let y_val = frac * y_max;
        let mut vars = VarTable::default();
        let y = vars.add("y".into(), y_val, y_val, false, Owner::Follower);
        let k = vars.add("kappa".into(), 0.0, 1.0, false, Owner::Leader);
        let z0 = vars.add("z0".into(), 0.0, 1.0, false, Owner::Leader);
        let z1 = vars.add("z1".into(), z as f64, z as f64, false, Owner::Leader);
        vars.vars[z0].lower = 1.0 - z as f64;
        vars.vars[z0].upper = 1.0 - z as f64;
        let electric = PriceVars { kappa: vec![k], tiers: vec![vec![z0, z1]], grid: vec![0.0, 1.0], mean: 0.5, tolerance: 0.5 };
        let none = PriceVars { kappa: vec![], tiers: vec![], grid: vec![], mean: 0.0, tolerance: 0.0 };
        let products = [PriceProduct { commodity: Commodity::Electric, hour: 0, load: y, coeff: 1.0 }];
        let bounds: BTreeMap<usize, f64> = [(y, y_max)].into_iter().collect();
        let block = linearize_products(&products, &electric, &none, &bounds, &mut vars).unwrap();
        let w = block.links[0][1];
        for sense in [Sense::Minimize, Sense::Maximize] {
            let mut m = ModelBuilder::new(sense, vars.vars.clone());
            m.add_rows(block.rows.iter().cloned());
            m.add_objective([(w, 1.0)]);
            let sol = solve_lp(&m.milp().lp, &Tolerances::default());
            prop_assert_eq!(sol.status, LpStatus::Optimal);
            prop_assert!((sol.objective - z as f64 * y_val).abs() <= 1e-9 * (1.0 + y_max));
        }
    }

    #[test]
    fn pmv_round_trip(v in -3.0f64..=3.0, met in 40.0f64..160.0, clo in 0.0f64..1.5, skin in 30.0f64..36.0) {
        let mut z = BuildingZone::new(ZoneKind::Residential, 100.0, 400.0, 0.5);
        z.metabolic_rate_w_per_m2 = met;
        z.clothing_insulation = clo;
        z.skin_temp_c = skin;
        let back = pmv(temp_from_pmv(v, &z), &z).unwrap();
        prop_assert!((back - v).abs() <= 1e-9);
        prop_assert_eq!(pmv(skin, &z).unwrap(), 2.43);
    }

    #[test]
    fn steady_state_heat_is_loss_times_difference(t_in in 5.0f64..30.0, t_out in -30.0f64..15.0, area in 10.0f64..1e5, k in 0.05f64..3.0) {
        let z = BuildingZone::new(ZoneKind::Public, area, 5.0 * area, k);
        let h = heat_power_for_transition(t_in, t_in, t_out, &z, 3600.0);
        prop_assert_eq!(h, z.loss_conductance() * (t_in - t_out));
    }

    #[test]
    fn fuel_costs_are_convex(p0 in 0.0f64..1200.0, p1 in 0.0f64..1200.0, h0 in 0.0f64..1400.0, h1 in 0.0f64..1400.0, t in 0.0f64..=1.0) {
        let chp = ChpUnit { cost_a: 4e-5, cost_b: 0.18, cost_c: 20.0, cv_ratio: 0.15, p_min_kw: 0.0, p_max_kw: 1200.0, h_min_kw: 0.0, h_max_kw: 1400.0, ramp_kw_per_h: None, reserve_cost: 0.0 };
        let con = ConUnit { cost_a: 5e-5, cost_b: 0.3, cost_c: 10.0, p_min_kw: 0.0, p_max_kw: 2000.0, ramp_kw_per_h: None, reserve_cost: 0.0 };
        let (pm, hm) = (t * p0 + (1.0 - t) * p1, t * h0 + (1.0 - t) * h1);
        let chord = t * chp_fuel_cost(&chp, p0, h0) + (1.0 - t) * chp_fuel_cost(&chp, p1, h1);
        prop_assert!(chp_fuel_cost(&chp, pm, hm) <= chord + 1e-9 * (1.0 + chord));
        let chord = t * con_fuel_cost(&con, p0) + (1.0 - t) * con_fuel_cost(&con, p1);
        prop_assert!(con_fuel_cost(&con, pm) <= chord + 1e-9 * (1.0 + chord));
    }

    #[test]
    fn revenue_is_bilinear(
        pe in prop::collection::vec(0.0f64..1.0, 4),
        ph in prop::collection::vec(0.0f64..1.0, 4),
        load in prop::collection::vec(0.0f64..500.0, 4),
        hr in prop::collection::vec(0.0f64..500.0, 4),
        hp in prop::collection::vec(0.0f64..500.0, 4),
        s in 0.0f64..3.0,
    ) {
        let base = revenue(&pe, &ph, &load, &hr, &hp).unwrap();
        let scaled_prices: (Vec<f64>, Vec<f64>) = (pe.iter().map(|p| s * p).collect(), ph.iter().map(|p| s * p).collect());
        let scaled_loads: Vec<Vec<f64>> = [&load, &hr, &hp].iter().map(|v| v.iter().map(|x| s * x).collect()).collect();
        let a = revenue(&scaled_prices.0, &scaled_prices.1, &load, &hr, &hp).unwrap();
        let b = revenue(&pe, &ph, &scaled_loads[0], &scaled_loads[1], &scaled_loads[2]).unwrap();
        prop_assert!((a - s * base).abs() <= 1e-9 * (1.0 + s * base));
        prop_assert!((b - s * base).abs() <= 1e-9 * (1.0 + s * base));
        let doubled: Vec<f64> = load.iter().map(|x| 2.0 * x).collect();
        let sum = revenue(&pe, &ph, &doubled, &hr, &hp).unwrap() - base;
        let only_load = revenue(&pe, &ph, &load, &[0.0; 4], &[0.0; 4]).unwrap();
        prop_assert!((sum - only_load).abs() <= 1e-9 * (1.0 + base));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn kkt_restricted_to_fixed_prices_solves_the_follower(seed in 0u64..1000, pick in 0usize..1000, mode in 1u8..=5, start in 0usize..24) {
        let s = generate_scenario(seed, &GenProfile::tiny(2, 2, start));
        let b = assemble(&s, Mode::try_from(mode).unwrap(), 4).unwrap();
        let tol = Tolerances::default();
        let o = enumerate_leader(&b, DEFAULT_CAP, &tol).unwrap();
        let sched = o.table[pick % o.table.len()].schedule.clone();
        let direct = evaluate_prices(&b, &sched, &tol).unwrap();
        let mut p = to_milp(&b, &ReformOptions::default()).unwrap();
        for c in [Commodity::Electric, Commodity::Heat] {
            let tiers = match c { Commodity::Electric => &sched.electric, Commodity::Heat => &sched.heat };
            for (t, zs) in b.prices(c).tiers.iter().enumerate() {
                for (j, &z) in zs.iter().enumerate() {
                    let v = (tiers[t] == j) as u8 as f64;
                    p.milp.lp.lower[z] = v;
                    p.milp.lp.upper[z] = v;
                }
            }
        }
        let sol = solve_milp(&p.milp, &MilpOptions::default()).unwrap();
        prop_assert_eq!(sol.status, MilpStatus::Optimal);
        let x = sol.x.unwrap();
        let energy: f64 = b.products.iter().map(|pr| pr.coeff * x[b.prices(pr.commodity).kappa[pr.hour]] * x[pr.load]).sum();
        let other: f64 = b.follower_objective.linear.iter().map(|&(v, c)| c * x[v]).sum();
        let cost = energy + other;
        prop_assert!((cost - direct.follower_cost).abs() <= 1e-6 * (1.0 + direct.follower_cost.abs()), "{} vs {}", cost, direct.follower_cost);
        // profit can only match the optimistic response
        let profit = sol.objective + p.objective_constant;
        prop_assert!((profit - direct.leader_profit.unwrap()).abs() <= 1e-6 * (1.0 + profit.abs()));
    }

    #[test]
    fn wider_price_menu_never_lowers_the_oracle_optimum(seed in 0u64..1000, start in 0usize..24, heat in any::<bool>(), mode in 1u8..=5) {
        let s = generate_scenario(seed, &GenProfile::tiny(2, 2, start));
        let mut wide = s.clone();
        // same mean and tolerance, one extra tier above the old maximum
        let spec = if heat { &mut wide.heat_price } else { &mut wide.electric_price };
        let step = spec.step();
        spec.max += step;
        spec.tiers += 1;
        let eps = if heat { s.heat_tolerance() } else { s.electric_tolerance() };
        wide.price_mean_tolerance = Some(eps);
        let mut narrow = s.clone();
        narrow.price_mean_tolerance = Some(eps);
        if heat {
            wide.electric_price = narrow.electric_price.clone();
        } else {
            wide.heat_price = narrow.heat_price.clone();
        }
        let mode = Mode::try_from(mode).unwrap();
        let tol = Tolerances::default();
        let best = |sc: &ies_core::devices::Scenario| {
            let b = assemble(sc, mode, 4).unwrap();
            enumerate_leader(&b, DEFAULT_CAP, &tol).unwrap().best_profit().unwrap()
        };
        let (n, w) = (best(&narrow), best(&wide));
        prop_assert!(w >= n - 1e-9 * (1.0 + n.abs()), "{} < {}", w, n);
    }
}
