//! Simplex and branch-and-bound checked against exhaustive enumeration.

mod support;

use ies_milp::{
    certificate_margin, solve_lp, solve_milp, LpStatus, MilpOptions, MilpStatus, Relation, Sense,
    Tolerances,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::{enumerate_binaries, enumerate_vertices, random_binary_milp, random_lp};

#[test]
fn simplex_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let tol = Tolerances::default();
    let (mut optimal, mut infeasible) = (0, 0);
    for case in 0..1000 {
        let lp = random_lp(&mut rng);
        let sol = solve_lp(&lp, &tol);
        match enumerate_vertices(&lp) {
            Some(best) => {
                assert_eq!(sol.status, LpStatus::Optimal, "case {case}: {lp:?}");
                assert!(
                    (sol.objective - best).abs() <= 1e-8 * (1.0 + best.abs()),
                    "case {case}: simplex {} vs enumeration {best}",
                    sol.objective
                );
                assert!(lp.max_violation(&sol.x) <= 1e-8);
                optimal += 1;
            }
            None => {
                assert_eq!(sol.status, LpStatus::Infeasible, "case {case}: {lp:?}");
                let y = sol.farkas.expect("certificate");
                assert!(certificate_margin(&lp, &y) < 0.0, "case {case}");
                infeasible += 1;
            }
        }
    }
    assert!(optimal > 300 && infeasible > 20, "{optimal} optimal / {infeasible} infeasible");
}

#[test]
fn optimal_duals_certify_strong_duality() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let tol = Tolerances::default();
    let mut checked = 0;
    while checked < 200 {
        let lp = random_lp(&mut rng);
        let sol = solve_lp(&lp, &tol);
        if sol.status != LpStatus::Optimal {
            continue;
        }
        // objective = sum(dual * rhs) + sum(reduced cost * active bound)
        let mut dual_obj = 0.0;
        for (row, y) in lp.rows.iter().zip(&sol.duals) {
            dual_obj += y * row.rhs;
        }
        for j in 0..lp.num_vars() {
            let d = sol.reduced_costs[j];
            if d.abs() > 1e-9 {
                let at = if (sol.x[j] - lp.lower[j]).abs() < (sol.x[j] - lp.upper[j]).abs() {
                    lp.lower[j]
                } else {
                    lp.upper[j]
                };
                dual_obj += d * at;
            }
        }
        assert!(
            (dual_obj - sol.objective).abs() <= 1e-7 * (1.0 + sol.objective.abs()),
            "dual {dual_obj} primal {}",
            sol.objective
        );
        // sign consistency of row duals
        let orient = if lp.sense == Sense::Maximize { 1.0 } else { -1.0 };
        for (row, y) in lp.rows.iter().zip(&sol.duals) {
            match row.relation {
                Relation::Le => assert!(orient * y >= -1e-7),
                Relation::Ge => assert!(orient * y <= 1e-7),
                Relation::Eq => {}
            }
        }
        checked += 1;
    }
}

#[test]
fn branch_and_bound_matches_lattice_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let opts = MilpOptions::default();
    let mut feasible = 0;
    for case in 0..500 {
        let milp = random_binary_milp(&mut rng);
        let sol = solve_milp(&milp, &opts).unwrap();
        match enumerate_binaries(&milp) {
            Some(best) => {
                assert_eq!(sol.status, MilpStatus::Optimal, "case {case}");
                assert_eq!(sol.objective, best, "case {case}");
                feasible += 1;
            }
            None => assert_eq!(sol.status, MilpStatus::Infeasible, "case {case}"),
        }
    }
    assert!(feasible > 250, "{feasible}");
}

#[test]
fn branch_and_bound_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let opts = MilpOptions {
        trace: true,
        ..Default::default()
    };
    for _ in 0..30 {
        let milp = random_binary_milp(&mut rng);
        let a = solve_milp(&milp, &opts).unwrap();
        let b = solve_milp(&milp, &opts).unwrap();
        assert_eq!(a.status, b.status);
        assert_eq!(a.x, b.x);
        assert_eq!(a.nodes, b.nodes);
        assert_eq!(a.trace, b.trace);
    }
}
