//! Random instance generators and brute-force reference solvers.

#![allow(dead_code)]

use ies_milp::{LinearProgram, Milp, Relation, Sense};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random LP with boxed variables so every instance is bounded.
pub fn random_lp(rng: &mut ChaCha8Rng) -> LinearProgram {
    let n = rng.gen_range(1..=6);
    let m = rng.gen_range(0..=8);
    let sense = if rng.gen_bool(0.5) {
        Sense::Maximize
    } else {
        Sense::Minimize
    };
    let mut lp = LinearProgram::new(sense, n);
    for j in 0..n {
        lp.objective[j] = rng.gen_range(-5..=5) as f64;
        lp.lower[j] = rng.gen_range(-3..=0) as f64;
        lp.upper[j] = lp.lower[j] + rng.gen_range(1..=6) as f64;
    }
    for _ in 0..m {
        let coeffs: Vec<(usize, f64)> = (0..n)
            .filter_map(|j| rng.gen_bool(0.7).then(|| (j, rng.gen_range(-4..=4) as f64)))
            .filter(|e| e.1 != 0.0)
            .collect();
        let rel = match rng.gen_range(0..10) {
            0 => Relation::Eq,
            1..=5 => Relation::Le,
            _ => Relation::Ge,
        };
        let rhs = rng.gen_range(-6..=8) as f64;
        lp.add_row(coeffs, rel, rhs);
    }
    lp
}

/// Dense Gaussian elimination with partial pivoting; `None` when singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &k| a[i][c].abs().total_cmp(&a[k][c].abs()))?;
        if a[p][c].abs() < 1e-10 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                if f != 0.0 {
                    for k in c..n {
                        a[r][k] -= f * a[c][k];
                    }
                    b[r] -= f * b[c];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Best objective over all basic feasible solutions, `None` if none exist.
pub fn enumerate_vertices(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    // hyperplanes: rows (as equalities) then lower and upper bounds
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for row in &lp.rows {
        let mut a = vec![0.0; n];
        for &(j, v) in &row.coeffs {
            a[j] += v;
        }
        planes.push((a, row.rhs));
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), lp.lower[j]));
        planes.push((e, lp.upper[j]));
    }
    let k = planes.len();
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let a: Vec<Vec<f64>> = idx.iter().map(|&i| planes[i].0.clone()).collect();
        let b: Vec<f64> = idx.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = solve_dense(a, b) {
            if lp.max_violation(&x) <= 1e-9 {
                let v = lp.objective_value(&x);
                best = Some(match (best, lp.sense) {
                    (None, _) => v,
                    (Some(b), Sense::Maximize) => b.max(v),
                    (Some(b), Sense::Minimize) => b.min(v),
                });
            }
        }
        // next n-combination of 0..k
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < k - n + i {
                idx[i] += 1;
                for r in i + 1..n {
                    idx[r] = idx[r - 1] + 1;
                }
                break;
            }
        }
    }
}

pub fn random_binary_milp(rng: &mut ChaCha8Rng) -> Milp {
    let n = rng.gen_range(1..=12);
    let m = rng.gen_range(1..=5);
    let sense = if rng.gen_bool(0.5) {
        Sense::Maximize
    } else {
        Sense::Minimize
    };
    let mut lp = LinearProgram::new(sense, n);
    for j in 0..n {
        lp.objective[j] = rng.gen_range(-9..=9) as f64;
        lp.upper[j] = 1.0;
    }
    for _ in 0..m {
        let coeffs: Vec<(usize, f64)> = (0..n)
            .filter_map(|j| rng.gen_bool(0.6).then(|| (j, rng.gen_range(-5..=7) as f64)))
            .collect();
        let rel = match rng.gen_range(0..8) {
            0 => Relation::Eq,
            1..=5 => Relation::Le,
            _ => Relation::Ge,
        };
        let rhs = rng.gen_range(-3..=10) as f64;
        lp.add_row(coeffs, rel, rhs);
    }
    let mut milp = Milp::new(lp);
    milp.integer = vec![true; n];
    milp
}

pub fn enumerate_binaries(milp: &Milp) -> Option<f64> {
    let n = milp.lp.num_vars();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << n) {
        let x: Vec<f64> = (0..n).map(|j| ((mask >> j) & 1) as f64).collect();
        if milp.lp.max_violation(&x) > 0.0 {
            continue;
        }
        let v = milp.lp.objective_value(&x);
        best = Some(match (best, milp.lp.sense) {
            (None, _) => v,
            (Some(b), Sense::Maximize) => b.max(v),
            (Some(b), Sense::Minimize) => b.min(v),
        });
    }
    best
}
