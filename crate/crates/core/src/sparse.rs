//! Sparse matrices and linear solvers.
//!
//! Assembly produces triplets which are compressed to CSR. Two solvers are
//! provided behind [`solve_linear`]: Jacobi-preconditioned conjugate gradients
//! for symmetric positive-definite systems, and a left-looking sparse LU with
//! threshold partial pivoting for the non-symmetric coupled cell systems.
//! Every solve verifies the true residual ‖Ax−b‖₂ before returning.

use crate::error::{Error, Result};

/// Triplet (COO) accumulator used during assembly. Duplicate entries are
/// summed when compressed.
#[derive(Debug, Clone)]
pub struct Triplets {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Triplets {
            n_rows,
            n_cols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n_rows && col < self.n_cols);
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let mut entries = self.entries.clone();
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));

        let mut row_ptr = vec![0usize; self.n_rows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last = (usize::MAX, usize::MAX);
        for (r, c, v) in entries {
            if (r, c) == last {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = (r, c);
            }
        }
        for r in 0..self.n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }

        CsrMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

/// Compressed sparse row matrix with sorted, duplicate-free columns per row.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(y.len(), self.n_rows);
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                acc += v * x[c];
            }
            y[i] = acc;
        }
    }

    pub fn matvec_alloc(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.matvec(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n_rows.min(self.n_cols)];
        for (i, di) in d.iter_mut().enumerate() {
            *di = self.get(i, i);
        }
        d
    }

    /// max_ij |a_ij − a_ji|, for symmetry checks.
    pub fn symmetry_defect(&self) -> f64 {
        assert_eq!(self.n_rows, self.n_cols);
        let mut defect: f64 = 0.0;
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                defect = defect.max((v - self.get(j, i)).abs());
            }
        }
        defect
    }

    /// Maximum absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Scatter `scale`·self into a triplet accumulator at a block offset.
    pub fn push_scaled_into(&self, t: &mut Triplets, row_off: usize, col_off: usize, scale: f64) {
        if scale == 0.0 {
            return;
        }
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                t.push(row_off + i, col_off + j, scale * v);
            }
        }
    }

    fn to_csc(&self) -> Csc {
        let mut col_ptr = vec![0usize; self.n_cols + 1];
        for &c in &self.col_idx {
            col_ptr[c + 1] += 1;
        }
        for c in 0..self.n_cols {
            col_ptr[c + 1] += col_ptr[c];
        }
        let mut row_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        let mut next = col_ptr.clone();
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                let slot = next[c];
                row_idx[slot] = i;
                values[slot] = v;
                next[c] += 1;
            }
        }
        Csc {
            col_ptr,
            row_idx,
            values,
        }
    }
}

struct Csc {
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Solver selection for [`solve_linear`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Jacobi-preconditioned conjugate gradients (requires SPD).
    ConjugateGradient,
    /// Direct sparse LU with threshold partial pivoting.
    SparseLu,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub method: Method,
    /// Relative residual target ‖Ax−b‖₂ ≤ rtol·‖b‖₂.
    pub rtol: f64,
    /// Iteration cap for iterative methods (0 = 10·n).
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            method: Method::SparseLu,
            rtol: 1e-10,
            max_iter: 0,
        }
    }
}

impl SolveOptions {
    pub fn cg() -> Self {
        SolveOptions {
            method: Method::ConjugateGradient,
            ..Default::default()
        }
    }

    pub fn lu() -> Self {
        SolveOptions::default()
    }
}

/// Solution with its verified residual.
#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    /// ‖Ax−b‖₂ / ‖b‖₂ recomputed from the returned x.
    pub residual: f64,
    pub iterations: usize,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64], bnorm: f64) -> f64 {
    let ax = a.matvec_alloc(x);
    let r: f64 = ax
        .iter()
        .zip(b)
        .map(|(axi, bi)| (bi - axi) * (bi - axi))
        .sum::<f64>()
        .sqrt();
    if bnorm > 0.0 {
        r / bnorm
    } else {
        r
    }
}

/// Solve A x = b. The returned residual is always recomputed from the final
/// iterate; a result that misses `rtol` is reported as `SolverFailure`.
pub fn solve_linear(a: &CsrMatrix, b: &[f64], opts: &SolveOptions) -> Result<Solution> {
    solve_linear_from(a, b, None, opts)
}

/// As [`solve_linear`], warm-starting the iterative path from `x0`.
pub fn solve_linear_from(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: &SolveOptions,
) -> Result<Solution> {
    if a.n_rows() != a.n_cols() {
        return Err(Error::invalid("solve_linear requires a square matrix"));
    }
    if a.n_rows() != b.len() {
        return Err(Error::invalid(format!(
            "dimension mismatch: matrix {}x{}, rhs {}",
            a.n_rows(),
            a.n_cols(),
            b.len()
        )));
    }
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(Solution {
            x: vec![0.0; b.len()],
            residual: 0.0,
            iterations: 0,
        });
    }
    match opts.method {
        Method::ConjugateGradient => cg_solve(a, b, x0, bnorm, opts),
        Method::SparseLu => lu_solve(a, b, bnorm, opts),
    }
}

fn cg_solve(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    bnorm: f64,
    opts: &SolveOptions,
) -> Result<Solution> {
    let n = b.len();
    let max_iter = if opts.max_iter == 0 {
        10 * n.max(10)
    } else {
        opts.max_iter
    };
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut x = match x0 {
        Some(guess) => {
            assert_eq!(guess.len(), n);
            guess.to_vec()
        }
        None => vec![0.0; n],
    };
    let mut r = b.to_vec();
    if x0.is_some() {
        let ax = a.matvec_alloc(&x);
        for (ri, axi) in r.iter_mut().zip(&ax) {
            *ri -= axi;
        }
    }
    if norm2(&r) <= opts.rtol * bnorm {
        let residual = relative_residual(a, &x, b, bnorm);
        if residual <= opts.rtol {
            return Ok(Solution {
                x,
                residual,
                iterations: 0,
            });
        }
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let target = opts.rtol * bnorm;

    let mut iterations = 0;
    for it in 0..max_iter {
        iterations = it + 1;
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::SolverFailure {
                residual: relative_residual(a, &x, b, bnorm),
                message: format!("CG breakdown (pᵀAp = {pap:.3e}); matrix not SPD"),
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm2(&r) <= 0.25 * target {
            break;
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    let residual = relative_residual(a, &x, b, bnorm);
    if residual > opts.rtol {
        return Err(Error::SolverFailure {
            residual,
            message: format!("CG did not converge within {max_iter} iterations"),
        });
    }
    Ok(Solution {
        x,
        residual,
        iterations,
    })
}

/// Left-looking sparse LU with threshold partial pivoting (pivot stays on the
/// diagonal when within a factor 10 of the column maximum).
pub struct SparseLu {
    n: usize,
    // L: unit lower triangular, row indices in pivot-position space
    l_colptr: Vec<usize>,
    l_rows: Vec<usize>,
    l_vals: Vec<f64>,
    // U: strict upper part by column, plus diagonal
    u_colptr: Vec<usize>,
    u_rows: Vec<usize>,
    u_vals: Vec<f64>,
    u_diag: Vec<f64>,
    /// pinv[original row] = pivot position
    pinv: Vec<usize>,
}

impl SparseLu {
    /// Stored factor entries (fill diagnostics).
    pub fn factor_nnz(&self) -> usize {
        self.l_vals.len() + self.u_vals.len() + self.n
    }
}

const PIVOT_THRESHOLD: f64 = 0.1;
const UNSET: usize = usize::MAX;

impl SparseLu {
    pub fn factorize(a: &CsrMatrix) -> Result<SparseLu> {
        if a.n_rows() != a.n_cols() {
            return Err(Error::invalid("LU requires a square matrix"));
        }
        let n = a.n_rows();
        let csc = a.to_csc();

        let mut l_colptr = vec![0usize];
        let mut l_rows: Vec<usize> = Vec::new();
        let mut l_vals: Vec<f64> = Vec::new();
        let mut u_colptr = vec![0usize];
        let mut u_rows: Vec<usize> = Vec::new();
        let mut u_vals: Vec<f64> = Vec::new();
        let mut u_diag = vec![0.0; n];
        let mut pinv = vec![UNSET; n];

        // static row degrees for Markowitz-style pivot selection: keeps dense
        // rows (Lagrange multipliers) out of the factorization until the end
        let row_degree: Vec<usize> = (0..n).map(|i| a.row(i).0.len()).collect();

        // dense workspaces
        let mut x = vec![0.0f64; n];
        let mut mark = vec![false; n];
        let mut pattern: Vec<usize> = Vec::new(); // topological order, reversed
        let mut dfs_stack: Vec<(usize, usize)> = Vec::new();

        for col in 0..n {
            // symbolic: rows reachable from A(:,col) through finished L columns
            pattern.clear();
            let (start, end) = (csc.col_ptr[col], csc.col_ptr[col + 1]);
            for idx in start..end {
                let root = csc.row_idx[idx];
                if mark[root] {
                    continue;
                }
                dfs_stack.push((root, 0));
                mark[root] = true;
                while let Some(&mut (node, ref mut child)) = dfs_stack.last_mut() {
                    let p = pinv[node];
                    let (lo, hi) = if p == UNSET {
                        (0, 0)
                    } else {
                        (l_colptr[p], l_colptr[p + 1])
                    };
                    let mut descended = false;
                    while lo + *child < hi {
                        let next = l_rows[lo + *child];
                        *child += 1;
                        if !mark[next] {
                            mark[next] = true;
                            dfs_stack.push((next, 0));
                            descended = true;
                            break;
                        }
                    }
                    if !descended {
                        pattern.push(node);
                        dfs_stack.pop();
                    }
                }
            }

            // numeric: x = L⁻¹ A(:,col) on the discovered pattern
            for idx in start..end {
                x[csc.row_idx[idx]] = csc.values[idx];
            }
            for &node in pattern.iter().rev() {
                let p = pinv[node];
                if p == UNSET {
                    continue;
                }
                let xv = x[node];
                if xv != 0.0 {
                    for k in l_colptr[p]..l_colptr[p + 1] {
                        x[l_rows[k]] -= l_vals[k] * xv;
                    }
                }
            }

            // threshold pivoting with Markowitz tie-breaking: among rows whose
            // magnitude is within a factor 1/threshold of the column maximum,
            // take the sparsest (then largest, then lowest index)
            let mut best = UNSET;
            let mut best_abs = 0.0f64;
            let mut col_max = 0.0f64;
            for &row in &pattern {
                col_max = col_max.max(x[row].abs());
                if pinv[row] == UNSET {
                    let a = x[row].abs();
                    if a > best_abs {
                        best_abs = a;
                        best = row;
                    }
                }
            }
            // a pivot vanishing relative to its column flags rank deficiency
            if best == UNSET || best_abs == 0.0 || best_abs <= 1e-13 * col_max {
                // clean up workspaces before bailing
                for &row in &pattern {
                    x[row] = 0.0;
                    mark[row] = false;
                }
                return Err(Error::SolverFailure {
                    residual: f64::INFINITY,
                    message: format!("structurally or numerically singular at column {col}"),
                });
            }
            let mut choice = (usize::MAX, 0.0f64, UNSET);
            for &row in &pattern {
                if pinv[row] != UNSET {
                    continue;
                }
                let a = x[row].abs();
                if a < PIVOT_THRESHOLD * best_abs {
                    continue;
                }
                let better = row_degree[row] < choice.0
                    || (row_degree[row] == choice.0
                        && (a > choice.1 || (a == choice.1 && row < choice.2)));
                if better {
                    choice = (row_degree[row], a, row);
                }
            }
            best = choice.2;
            let pivot = x[best];
            pinv[best] = col;
            u_diag[col] = pivot;

            for &row in &pattern {
                let p = pinv[row];
                if row == best {
                    // unit diagonal of L
                } else if p != UNSET && p < col {
                    if x[row] != 0.0 {
                        u_rows.push(p);
                        u_vals.push(x[row]);
                    }
                } else if p == UNSET && x[row] != 0.0 {
                    l_rows.push(row);
                    l_vals.push(x[row] / pivot);
                }
                x[row] = 0.0;
                mark[row] = false;
            }
            u_colptr.push(u_rows.len());
            l_colptr.push(l_rows.len());
        }

        // remap L's original row indices into pivot positions
        for r in l_rows.iter_mut() {
            *r = pinv[*r];
        }

        Ok(SparseLu {
            n,
            l_colptr,
            l_rows,
            l_vals,
            u_colptr,
            u_rows,
            u_vals,
            u_diag,
            pinv,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut y = vec![0.0; self.n];
        for (orig, &pos) in self.pinv.iter().enumerate() {
            y[pos] = b[orig];
        }
        // forward: L y = P b (unit diagonal)
        for k in 0..self.n {
            let yk = y[k];
            if yk != 0.0 {
                for idx in self.l_colptr[k]..self.l_colptr[k + 1] {
                    y[self.l_rows[idx]] -= self.l_vals[idx] * yk;
                }
            }
        }
        // backward: U x = y
        for k in (0..self.n).rev() {
            y[k] /= self.u_diag[k];
            let xk = y[k];
            if xk != 0.0 {
                for idx in self.u_colptr[k]..self.u_colptr[k + 1] {
                    y[self.u_rows[idx]] -= self.u_vals[idx] * xk;
                }
            }
        }
        y
    }
}

fn lu_solve(a: &CsrMatrix, b: &[f64], bnorm: f64, opts: &SolveOptions) -> Result<Solution> {
    let lu = SparseLu::factorize(a)?;
    let mut x = lu.solve(b);

    // one step of iterative refinement
    let ax = a.matvec_alloc(&x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect();
    let dx = lu.solve(&r);
    for (xi, di) in x.iter_mut().zip(&dx) {
        *xi += di;
    }

    let residual = relative_residual(a, &x, b, bnorm);
    if residual > opts.rtol {
        return Err(Error::SolverFailure {
            residual,
            message: "sparse LU residual above tolerance".to_string(),
        });
    }
    Ok(Solution {
        x,
        residual,
        iterations: 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    /// Dense Gaussian elimination with partial pivoting; the independent
    /// oracle for the sparse solvers.
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
        let n = b.len();
        for k in 0..n {
            let piv = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
            if a[piv][k].abs() < 1e-300 {
                return None;
            }
            a.swap(k, piv);
            b.swap(k, piv);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..n {
                s -= a[k][j] * x[j];
            }
            x[k] = s / a[k][k];
        }
        Some(x)
    }

    fn csr_from_dense(a: &[Vec<f64>]) -> CsrMatrix {
        let n = a.len();
        let mut t = Triplets::new(n, n);
        for (i, row) in a.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    t.push(i, j, v);
                }
            }
        }
        t.to_csr()
    }

    #[test]
    fn triplets_sum_duplicates() {
        let mut t = Triplets::new(2, 2);
        t.push(0, 0, 1.0);
        t.push(0, 0, 2.0);
        t.push(1, 0, 4.0);
        t.push(0, 1, -1.0);
        let a = t.to_csr();
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(0, 1), -1.0);
        assert_eq!(a.get(1, 0), 4.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.nnz(), 3);
    }

    #[test]
    fn identity_returns_rhs() {
        let a = CsrMatrix::identity(5);
        let b = vec![3.0, -1.0, 0.5, 2.0, 9.0];
        for opts in [SolveOptions::cg(), SolveOptions::lu()] {
            let sol = solve_linear(&a, &b, &opts).unwrap();
            for (xi, bi) in sol.x.iter().zip(&b) {
                assert!((xi - bi).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn two_by_two_cramer() {
        // [[2,1],[1,3]] x = [3,5] has x = (0.8, 1.4) by Cramer's rule
        let a = csr_from_dense(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let b = vec![3.0, 5.0];
        for opts in [SolveOptions::cg(), SolveOptions::lu()] {
            let sol = solve_linear(&a, &b, &opts).unwrap();
            assert!((sol.x[0] - 0.8).abs() <= 1e-12);
            assert!((sol.x[1] - 1.4).abs() <= 1e-12);
            assert!(sol.residual <= 1e-10);
        }
    }

    #[test]
    fn singular_matrix_fails_with_residual() {
        // graph Laplacian of an edge: constants in the kernel
        let a = csr_from_dense(&[vec![1.0, -1.0], vec![-1.0, 1.0]]);
        let b = vec![1.0, 1.0];
        let err = solve_linear(&a, &b, &SolveOptions::lu()).unwrap_err();
        match err {
            Error::SolverFailure { .. } => {}
            other => panic!("expected SolverFailure, got {other:?}"),
        }
        let err = solve_linear(&a, &b, &SolveOptions::cg()).unwrap_err();
        match err {
            Error::SolverFailure { .. } => {}
            other => panic!("expected SolverFailure, got {other:?}"),
        }
    }

    #[test]
    fn random_spd_matches_dense_oracle() {
        let mut rng = StdRng::seed_from_u64(7);
        for trial in 0..5 {
            let n = 20 + 5 * trial;
            // A = BᵀB + n·I is SPD
            let mut dense = vec![vec![0.0; n]; n];
            let mut b_mat = vec![vec![0.0; n]; n];
            for row in b_mat.iter_mut() {
                for v in row.iter_mut() {
                    if rng.gen::<f64>() < 0.2 {
                        *v = rng.gen_range(-1.0..1.0);
                    }
                }
            }
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for (k, bk) in b_mat.iter().enumerate() {
                        s += bk[i] * bk[j];
                        let _ = k;
                    }
                    dense[i][j] = s + if i == j { n as f64 } else { 0.0 };
                }
            }
            let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let expected = dense_solve(dense.clone(), rhs.clone()).unwrap();
            let a = csr_from_dense(&dense);
            for opts in [SolveOptions::cg(), SolveOptions::lu()] {
                let sol = solve_linear(&a, &rhs, &opts).unwrap();
                for (xi, ei) in sol.x.iter().zip(&expected) {
                    assert!((xi - ei).abs() <= 1e-8, "mismatch {xi} vs {ei}");
                }
            }
        }
    }

    #[test]
    fn random_nonsymmetric_lu_matches_dense_oracle() {
        let mut rng = StdRng::seed_from_u64(42);
        for trial in 0..8 {
            let n = 15 + 7 * trial;
            let mut dense = vec![vec![0.0; n]; n];
            for (i, row) in dense.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    if i == j {
                        *v = rng.gen_range(1.0..3.0); // keep it comfortably nonsingular
                    } else if rng.gen::<f64>() < 0.15 {
                        *v = rng.gen_range(-1.0..1.0);
                    }
                }
            }
            let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let expected = dense_solve(dense.clone(), rhs.clone()).unwrap();
            let a = csr_from_dense(&dense);
            let sol = solve_linear(&a, &rhs, &SolveOptions::lu()).unwrap();
            for (xi, ei) in sol.x.iter().zip(&expected) {
                assert!((xi - ei).abs() <= 1e-9, "mismatch {xi} vs {ei}");
            }
            assert!(sol.residual <= 1e-10);
        }
    }

    #[test]
    fn badly_scaled_blocks_still_solve() {
        // mimics the cell system: O(1e-4) block coupled to O(1) block
        let mut rng = StdRng::seed_from_u64(3);
        let n = 40;
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            let scale = if i < n / 2 { 1e-4 } else { 1.0 };
            dense[i][i] = scale * rng.gen_range(1.0..2.0);
            let j = rng.gen_range(0..n);
            if j != i {
                dense[i][j] += rng.gen_range(-0.3..0.3) * scale;
            }
            // cross-block coupling
            let j2 = (i + n / 2) % n;
            dense[i][j2] += 1e-2 * rng.gen_range(-1.0..1.0);
        }
        let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if let Some(expected) = dense_solve(dense.clone(), rhs.clone()) {
            let a = csr_from_dense(&dense);
            let sol = solve_linear(&a, &rhs, &SolveOptions::lu()).unwrap();
            for (xi, ei) in sol.x.iter().zip(&expected) {
                assert!(
                    (xi - ei).abs() <= 1e-6 * (1.0 + ei.abs()),
                    "mismatch {xi} vs {ei}"
                );
            }
        }
    }

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let a = CsrMatrix::identity(4);
        let sol = solve_linear(&a, &[0.0; 4], &SolveOptions::lu()).unwrap();
        assert_eq!(sol.x, vec![0.0; 4]);
        assert_eq!(sol.residual, 0.0);
    }
}
