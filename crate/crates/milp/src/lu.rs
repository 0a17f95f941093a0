//! Sparse LU factorization of a simplex basis with product-form updates.
//!
//! The basis `B` (columns indexed by basis position) is factored left-looking
//! as `B = L U` up to row and column permutations. Columns are processed in
//! order of increasing nonzero count and pivots are picked by threshold
//! partial pivoting, preferring rows that are sparse in `B`. Basis changes
//! after a factorization are appended as eta columns.

const NONE: usize = usize::MAX;
/// Candidate pivots must be at least this fraction of the largest entry.
const PIVOT_THRESHOLD: f64 = 0.1;
const SINGULAR_TOL: f64 = 1e-11;
const DROP_TOL: f64 = 1e-14;

#[derive(Debug, Clone)]
struct Eta {
    position: usize,
    pivot: f64,
    start: usize,
    end: usize,
}

/// Basis positions whose columns were dependent, paired with the rows left
/// without a pivot. Replacing each position by the logical of its row makes
/// the basis nonsingular.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Singular {
    pub replacements: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub(crate) struct LuFactor {
    m: usize,
    pivot_row: Vec<usize>,
    pivot_col: Vec<usize>,
    row_step: Vec<usize>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    l_steps: Vec<usize>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    u_diag: Vec<f64>,
    etas: Vec<Eta>,
    eta_idx: Vec<usize>,
    eta_val: Vec<f64>,
}

impl LuFactor {
    /// Factors the `m x m` basis whose column at position `p` is produced by
    /// `column(p, buf)` as sparse `(row, value)` pairs.
    pub fn factor<F>(m: usize, mut column: F) -> Result<Self, Singular>
    where
        F: FnMut(usize, &mut Vec<(usize, f64)>),
    {
        let mut cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
        let mut row_count = vec![0usize; m];
        let mut buf = Vec::new();
        for p in 0..m {
            buf.clear();
            column(p, &mut buf);
            for &(i, _) in &buf {
                row_count[i] += 1;
            }
            cols.push(buf.clone());
        }
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&p| (cols[p].len(), p));

        let mut lu = LuFactor {
            m,
            pivot_row: Vec::with_capacity(m),
            pivot_col: Vec::with_capacity(m),
            row_step: vec![NONE; m],
            l_start: vec![0],
            l_idx: Vec::new(),
            l_val: Vec::new(),
            l_steps: Vec::new(),
            u_start: vec![0],
            u_idx: Vec::new(),
            u_val: Vec::new(),
            u_diag: Vec::with_capacity(m),
            etas: Vec::new(),
            eta_idx: Vec::new(),
            eta_val: Vec::new(),
        };

        let mut x = vec![0.0; m];
        let mut touched: Vec<usize> = Vec::new();
        let mut mark = vec![false; m];
        let mut singular_positions = Vec::new();

        for &p in &order {
            touched.clear();
            for &(i, v) in &cols[p] {
                if !mark[i] {
                    mark[i] = true;
                    touched.push(i);
                }
                x[i] += v;
            }
            for &j in &lu.l_steps {
                let v = x[lu.pivot_row[j]];
                if v == 0.0 {
                    continue;
                }
                for e in lu.l_start[j]..lu.l_start[j + 1] {
                    let i = lu.l_idx[e];
                    if !mark[i] {
                        mark[i] = true;
                        touched.push(i);
                    }
                    x[i] -= lu.l_val[e] * v;
                }
            }

            let mut amax = 0.0_f64;
            for &i in &touched {
                if lu.row_step[i] == NONE {
                    amax = amax.max(x[i].abs());
                }
            }
            if amax <= SINGULAR_TOL {
                singular_positions.push(p);
                for &i in &touched {
                    x[i] = 0.0;
                    mark[i] = false;
                }
                continue;
            }
            let mut best = NONE;
            for &i in &touched {
                if lu.row_step[i] != NONE || x[i].abs() < PIVOT_THRESHOLD * amax {
                    continue;
                }
                if best == NONE
                    || (row_count[i], i) < (row_count[best], best)
                {
                    best = i;
                }
            }
            let step = lu.pivot_row.len();
            let piv = x[best];
            for &i in &touched {
                let v = x[i];
                let s = lu.row_step[i];
                if s != NONE {
                    if v != 0.0 {
                        lu.u_idx.push(s);
                        lu.u_val.push(v);
                    }
                } else if i != best && v.abs() > DROP_TOL {
                    lu.l_idx.push(i);
                    lu.l_val.push(v / piv);
                }
                x[i] = 0.0;
                mark[i] = false;
            }
            lu.u_start.push(lu.u_idx.len());
            lu.u_diag.push(piv);
            if lu.l_idx.len() > *lu.l_start.last().unwrap() {
                lu.l_steps.push(step);
            }
            lu.l_start.push(lu.l_idx.len());
            lu.pivot_row.push(best);
            lu.pivot_col.push(p);
            lu.row_step[best] = step;
        }

        if singular_positions.is_empty() {
            Ok(lu)
        } else {
            let free_rows = (0..m).filter(|&i| lu.row_step[i] == NONE);
            Err(Singular {
                replacements: singular_positions.into_iter().zip(free_rows).collect(),
            })
        }
    }

    pub fn num_etas(&self) -> usize {
        self.etas.len()
    }

    /// Solves `B x = rhs` in place; `rhs` is indexed by row on entry and by
    /// basis position on return.
    pub fn ftran(&self, rhs: &mut [f64], work: &mut [f64]) {
        debug_assert_eq!(rhs.len(), self.m);
        for &j in &self.l_steps {
            let v = rhs[self.pivot_row[j]];
            if v == 0.0 {
                continue;
            }
            for e in self.l_start[j]..self.l_start[j + 1] {
                rhs[self.l_idx[e]] -= self.l_val[e] * v;
            }
        }
        for k in 0..self.m {
            work[k] = rhs[self.pivot_row[k]];
        }
        for k in (0..self.m).rev() {
            let z = work[k] / self.u_diag[k];
            work[k] = z;
            if z == 0.0 {
                continue;
            }
            for e in self.u_start[k]..self.u_start[k + 1] {
                work[self.u_idx[e]] -= self.u_val[e] * z;
            }
        }
        for k in 0..self.m {
            rhs[self.pivot_col[k]] = work[k];
        }
        for eta in &self.etas {
            let xp = rhs[eta.position] / eta.pivot;
            rhs[eta.position] = xp;
            if xp == 0.0 {
                continue;
            }
            for e in eta.start..eta.end {
                rhs[self.eta_idx[e]] -= self.eta_val[e] * xp;
            }
        }
    }

    /// Solves `B^T y = rhs` in place; `rhs` is indexed by basis position on
    /// entry and by row on return.
    pub fn btran(&self, rhs: &mut [f64], work: &mut [f64]) {
        debug_assert_eq!(rhs.len(), self.m);
        for eta in self.etas.iter().rev() {
            let mut s = rhs[eta.position];
            for e in eta.start..eta.end {
                s -= self.eta_val[e] * rhs[self.eta_idx[e]];
            }
            rhs[eta.position] = s / eta.pivot;
        }
        for k in 0..self.m {
            let mut s = rhs[self.pivot_col[k]];
            for e in self.u_start[k]..self.u_start[k + 1] {
                s -= self.u_val[e] * work[self.u_idx[e]];
            }
            work[k] = s / self.u_diag[k];
        }
        for k in (0..self.m).rev() {
            let mut s = work[k];
            for e in self.l_start[k]..self.l_start[k + 1] {
                s -= self.l_val[e] * rhs[self.l_idx[e]];
            }
            rhs[self.pivot_row[k]] = s;
        }
    }

    /// Records the replacement of the column at `position` by a column whose
    /// FTRAN image is `alpha` (indexed by basis position).
    pub fn push_eta(&mut self, position: usize, alpha: &[f64]) {
        let start = self.eta_idx.len();
        for (i, &a) in alpha.iter().enumerate() {
            if i != position && a.abs() > DROP_TOL {
                self.eta_idx.push(i);
                self.eta_val.push(a);
            }
        }
        self.etas.push(Eta {
            position,
            pivot: alpha[position],
            start,
            end: self.eta_idx.len(),
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_cols(a: &[Vec<f64>]) -> impl FnMut(usize, &mut Vec<(usize, f64)>) + '_ {
        move |p, buf| {
            for (i, row) in a.iter().enumerate() {
                if row[p] != 0.0 {
                    buf.push((i, row[p]));
                }
            }
        }
    }

    fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
    }

    fn matvec_t(a: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let m = a.len();
        (0..m).map(|j| (0..m).map(|i| a[i][j] * y[i]).sum()).collect()
    }

    fn random_sparse(rng: &mut ChaCha8Rng, m: usize) -> Vec<Vec<f64>> {
        loop {
            let mut a = vec![vec![0.0; m]; m];
            for (i, row) in a.iter_mut().enumerate() {
                row[(i * 7 + 3) % m] = rng.gen_range(1.0..3.0);
                for v in row.iter_mut() {
                    if rng.gen_bool(0.2) {
                        *v = rng.gen_range(-2.0..2.0);
                    }
                }
            }
            if LuFactor::factor(m, dense_cols(&a)).is_ok() {
                return a;
            }
        }
    }

    #[test]
    fn ftran_btran_solve_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in [1, 2, 5, 12, 30] {
            let a = random_sparse(&mut rng, m);
            let lu = LuFactor::factor(m, dense_cols(&a)).unwrap();
            let mut work = vec![0.0; m];
            let b: Vec<f64> = (0..m).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let mut x = b.clone();
            lu.ftran(&mut x, &mut work);
            for (l, r) in matvec(&a, &x).iter().zip(&b) {
                assert!((l - r).abs() < 1e-9, "ftran residual {l} vs {r}");
            }
            let mut y = b.clone();
            lu.btran(&mut y, &mut work);
            for (l, r) in matvec_t(&a, &y).iter().zip(&b) {
                assert!((l - r).abs() < 1e-9, "btran residual {l} vs {r}");
            }
        }
    }

    #[test]
    fn eta_updates_track_column_replacements() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = 10;
        let mut a = random_sparse(&mut rng, m);
        let mut lu = LuFactor::factor(m, dense_cols(&a)).unwrap();
        let mut work = vec![0.0; m];
        for round in 0..6 {
            let p = (round * 3) % m;
            let col: Vec<f64> = (0..m)
                .map(|i| if i == p { 4.0 } else if rng.gen_bool(0.3) { rng.gen_range(-1.0..1.0) } else { 0.0 })
                .collect();
            let mut alpha = col.clone();
            lu.ftran(&mut alpha, &mut work);
            if alpha[p].abs() < 0.1 {
                continue;
            }
            lu.push_eta(p, &alpha);
            for (i, row) in a.iter_mut().enumerate() {
                row[p] = col[i];
            }
            let b: Vec<f64> = (0..m).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let mut x = b.clone();
            lu.ftran(&mut x, &mut work);
            for (l, r) in matvec(&a, &x).iter().zip(&b) {
                assert!((l - r).abs() < 1e-8, "round {round} residual {l} vs {r}");
            }
            let mut y = b.clone();
            lu.btran(&mut y, &mut work);
            for (l, r) in matvec_t(&a, &y).iter().zip(&b) {
                assert!((l - r).abs() < 1e-8, "round {round} residual {l} vs {r}");
            }
        }
    }

    #[test]
    fn singular_basis_reports_replacements() {
        let a = vec![
            vec![1.0, 2.0, 0.0],
            vec![2.0, 4.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let err = LuFactor::factor(3, dense_cols(&a)).unwrap_err();
        assert_eq!(err.replacements.len(), 1);
        let (pos, row) = err.replacements[0];
        assert!(pos < 2);
        assert!(row < 2);
    }
}
