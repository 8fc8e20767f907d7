//! Sparse matrix storage and the linear solvers used by assembly and Newton steps.
//!
//! The iterative solvers (CG for the SPD state/adjoint operators, BiCGStab for
//! nonsymmetric systems) are matrix-based and dependency-free. Two direct
//! factorizations back them up: a dense LU for small systems (also the test
//! oracle) and a banded LU with partial pivoting for the coupled Newton
//! systems of the semismooth inner solver.

use crate::error::{invalid, Error, Result};

/// Compressed sparse row matrix. Column indices are strictly increasing
/// within each row; duplicate triplets are summed during construction.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Assemble a CSR matrix from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(
        triplets: &[(usize, usize, f64)],
        n_rows: usize,
        n_cols: usize,
    ) -> Result<Self> {
        for &(r, c, _) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(invalid(format!(
                    "triplet ({r}, {c}) out of range for a {n_rows}x{n_cols} matrix"
                )));
            }
        }
        // Counting sort by row, then sort each row by column and merge duplicates.
        let mut counts = vec![0usize; n_rows + 1];
        for &(r, _, _) in triplets {
            counts[r + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        let mut per_row: Vec<(usize, f64)> = vec![(0, 0.0); triplets.len()];
        {
            let mut cursor = counts.clone();
            for &(r, c, v) in triplets {
                per_row[cursor[r]] = (c, v);
                cursor[r] += 1;
            }
        }
        let mut row_offsets = Vec::with_capacity(n_rows + 1);
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_offsets.push(0);
        for r in 0..n_rows {
            let slice = &mut per_row[counts[r]..counts[r + 1]];
            slice.sort_unstable_by_key(|&(c, _)| c);
            let mut i = 0;
            while i < slice.len() {
                let col = slice[i].0;
                let mut sum = 0.0;
                while i < slice.len() && slice[i].0 == col {
                    sum += slice[i].1;
                    i += 1;
                }
                col_indices.push(col);
                values.push(sum);
            }
            row_offsets.push(col_indices.len());
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let range = self.row_offsets[r]..self.row_offsets[r + 1];
        (&self.col_indices[range.clone()], &self.values[range])
    }

    /// Entry lookup by binary search within the row; zero if absent.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_cols {
            return Err(invalid(format!(
                "matvec dimension mismatch: matrix has {} columns, vector has {}",
                self.n_cols,
                x.len()
            )));
        }
        let mut y = vec![0.0; self.n_rows];
        self.matvec_into(x, &mut y);
        Ok(y)
    }

    fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n_rows {
            let mut sum = 0.0;
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                sum += self.values[k] * x[self.col_indices[k]];
            }
            y[r] = sum;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let n = self.n_rows.min(self.n_cols);
        (0..n).map(|i| self.get(i, i)).collect()
    }

    /// Returns a copy with `diag[i]` added to entry (i, i). The diagonal must
    /// already be part of the sparsity pattern (always true for FEM operators).
    pub fn with_added_diagonal(&self, diag: &[f64]) -> Result<Self> {
        if diag.len() != self.n_rows || self.n_rows != self.n_cols {
            return Err(invalid("with_added_diagonal requires a matching square matrix"));
        }
        let mut out = self.clone();
        for r in 0..self.n_rows {
            let (cols, _) = self.row(r);
            match cols.binary_search(&r) {
                Ok(k) => out.values[self.row_offsets[r] + k] += diag[r],
                Err(_) => {
                    return Err(invalid(format!(
                        "diagonal entry ({r}, {r}) missing from sparsity pattern"
                    )))
                }
            }
        }
        Ok(out)
    }

    /// Returns A * diag(s) (column scaling).
    pub fn scale_columns(&self, s: &[f64]) -> Result<Self> {
        if s.len() != self.n_cols {
            return Err(invalid("scale_columns dimension mismatch"));
        }
        let mut out = self.clone();
        for k in 0..out.values.len() {
            out.values[k] *= s[out.col_indices[k]];
        }
        Ok(out)
    }

    /// Dense copy, row-major. Intended for tests and small oracles.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.n_rows * self.n_cols];
        for r in 0..self.n_rows {
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                dense[r * self.n_cols + self.col_indices[k]] = self.values[k];
            }
        }
        dense
    }

    /// Max |A_ij - A_ji|; used by debug checks before CG.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (k, &c) in cols.iter().enumerate() {
                worst = worst.max((vals[k] - self.get(c, r)).abs());
            }
        }
        worst
    }
}

/// Method selection for [`solve`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    Cg,
    BiCgStab,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preconditioner {
    None,
    Jacobi,
}

/// Settings for the iterative solvers.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct SolveConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Defaults to 10 * n when absent.
    pub max_iter: Option<usize>,
    pub method: SolveMethod,
    pub preconditioner: Preconditioner,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_iter: None,
            method: SolveMethod::Cg,
            preconditioner: Preconditioner::Jacobi,
        }
    }
}

impl SolveConfig {
    pub fn bicgstab() -> Self {
        Self {
            method: SolveMethod::BiCgStab,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(invalid("solver tolerances must be positive"));
        }
        if let Some(m) = self.max_iter {
            if m == 0 {
                return Err(invalid("max_iter must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Result of an iterative solve.
#[derive(Clone, Debug)]
pub struct Solution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Solve A x = b so that ||A x - b|| <= max(rel_tol * ||b||, abs_tol).
///
/// On non-convergence the error carries the best iterate seen.
pub fn solve(a: &SparseMatrix, b: &[f64], cfg: &SolveConfig) -> Result<Solution> {
    cfg.validate()?;
    let n = a.n_rows();
    if a.n_cols() != n {
        return Err(invalid("solve requires a square matrix"));
    }
    if b.len() != n {
        return Err(invalid("solve right-hand side has wrong length"));
    }
    if cfg.method == SolveMethod::Cg && n <= 200 {
        debug_assert!(
            a.asymmetry() <= 1e-10,
            "CG called on a matrix with asymmetry {:.3e}",
            a.asymmetry()
        );
    }
    let tol = (cfg.rel_tol * norm2(b)).max(cfg.abs_tol);
    if norm2(b) == 0.0 {
        return Ok(Solution {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let max_iter = cfg.max_iter.unwrap_or(10 * n.max(1));
    let precond: Option<Vec<f64>> = match cfg.preconditioner {
        Preconditioner::None => None,
        Preconditioner::Jacobi => {
            let d = a.diagonal();
            if d.iter().any(|&x| x == 0.0) {
                // Zero diagonal entries: fall back to the identity there.
                Some(d.iter().map(|&x| if x == 0.0 { 1.0 } else { 1.0 / x }).collect())
            } else {
                Some(d.iter().map(|&x| 1.0 / x).collect())
            }
        }
    };
    match cfg.method {
        SolveMethod::Cg => cg(a, b, tol, max_iter, precond.as_deref()),
        SolveMethod::BiCgStab => bicgstab(a, b, tol, max_iter, precond.as_deref()),
    }
}

fn apply_precond(p: Option<&[f64]>, r: &[f64]) -> Vec<f64> {
    match p {
        Some(d) => r.iter().zip(d).map(|(ri, di)| ri * di).collect(),
        None => r.to_vec(),
    }
}

fn cg(
    a: &SparseMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    precond: Option<&[f64]>,
) -> Result<Solution> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = apply_precond(precond, &r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut best = x.clone();
    let mut best_res = norm2(&r);
    for it in 1..=max_iter {
        a.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            break; // not SPD along p, or numerical breakdown
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let res = norm2(&r);
        if res < best_res {
            best_res = res;
            best.copy_from_slice(&x);
        }
        if res <= tol {
            // Recurrence residuals drift; confirm with the true residual.
            let true_r: Vec<f64> = {
                let ax = a.matvec(&x).expect("dims checked");
                b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
            };
            let true_res = norm2(&true_r);
            if true_res <= tol {
                return Ok(Solution {
                    x,
                    iterations: it,
                    residual: true_res,
                });
            }
            r = true_r;
            z = apply_precond(precond, &r);
            p = z.clone();
            rz = dot(&r, &z);
            continue;
        }
        z = apply_precond(precond, &r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::LinearSolve {
        iterations: max_iter,
        residual: best_res,
        best,
    })
}

fn bicgstab(
    a: &SparseMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    precond: Option<&[f64]>,
) -> Result<Solution> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut best = x.clone();
    let mut best_res = norm2(&r);
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() < 1e-300 {
            break; // breakdown
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let p_hat = apply_precond(precond, &p);
        a.matvec_into(&p_hat, &mut v);
        let denom = dot(&r_hat, &v);
        if denom.abs() < 1e-300 {
            break;
        }
        alpha = rho / denom;
        let s: Vec<f64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
        if norm2(&s) <= tol {
            // Half-step exit; verified on a trial vector so a false alarm
            // leaves the iteration state untouched.
            let mut x_try = x.clone();
            axpy(alpha, &p_hat, &mut x_try);
            let ax = a.matvec(&x_try).expect("dims checked");
            let res = norm2(
                &b.iter()
                    .zip(&ax)
                    .map(|(bi, ai)| bi - ai)
                    .collect::<Vec<_>>(),
            );
            if res <= tol {
                return Ok(Solution {
                    x: x_try,
                    iterations: it,
                    residual: res,
                });
            }
        }
        let s_hat = apply_precond(precond, &s);
        let t = a.matvec(&s_hat).expect("dims checked");
        let tt = dot(&t, &t);
        if tt == 0.0 {
            break;
        }
        omega = dot(&t, &s) / tt;
        if omega.abs() < 1e-300 {
            break;
        }
        axpy(alpha, &p_hat, &mut x);
        axpy(omega, &s_hat, &mut x);
        for i in 0..n {
            r[i] = s[i] - omega * t[i];
        }
        let res = norm2(&r);
        if res < best_res {
            best_res = res;
            best.copy_from_slice(&x);
        }
        if res <= tol {
            let ax = a.matvec(&x).expect("dims checked");
            let true_r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            let true_res = norm2(&true_r);
            if true_res <= tol {
                return Ok(Solution {
                    x,
                    iterations: it,
                    residual: true_res,
                });
            }
            r = true_r;
        }
    }
    Err(Error::LinearSolve {
        iterations: max_iter,
        residual: best_res,
        best,
    })
}

/// Dense LU solve with partial pivoting. `a` is row-major n x n.
/// Intended for small systems (oracles, coarse sub-problems).
pub fn dense_solve(a: &[f64], b: &[f64], n: usize) -> Result<Vec<f64>> {
    if a.len() != n * n || b.len() != n {
        return Err(invalid("dense_solve dimension mismatch"));
    }
    let mut lu = a.to_vec();
    let mut x = b.to_vec();
    let mut piv: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut p = k;
        let mut pmax = lu[k * n + k].abs();
        for i in k + 1..n {
            let v = lu[i * n + k].abs();
            if v > pmax {
                pmax = v;
                p = i;
            }
        }
        if pmax == 0.0 {
            return Err(invalid("dense_solve: singular matrix"));
        }
        if p != k {
            for j in 0..n {
                lu.swap(k * n + j, p * n + j);
            }
            piv.swap(k, p);
            x.swap(k, p);
        }
        let pivot = lu[k * n + k];
        for i in k + 1..n {
            let l = lu[i * n + k] / pivot;
            lu[i * n + k] = l;
            for j in k + 1..n {
                lu[i * n + j] -= l * lu[k * n + j];
            }
            x[i] -= l * x[k];
        }
    }
    for i in (0..n).rev() {
        let mut sum = x[i];
        for j in i + 1..n {
            sum -= lu[i * n + j] * x[j];
        }
        x[i] = sum / lu[i * n + i];
    }
    Ok(x)
}

/// Banded matrix with half-bandwidths `bl` (sub) and `bu` (super), stored
/// LAPACK-style with `bl` extra super-diagonals of fill space for pivoting.
pub struct BandMatrix {
    n: usize,
    bl: usize,
    bu: usize,
    /// Column-major, `2*bl + bu + 1` entries per column.
    ab: Vec<f64>,
    /// Pivot rows, populated by `factor`.
    ipiv: Vec<usize>,
    factored: bool,
}

impl BandMatrix {
    pub fn zeros(n: usize, bl: usize, bu: usize) -> Self {
        let ldab = 2 * bl + bu + 1;
        Self {
            n,
            bl,
            bu,
            ab: vec![0.0; ldab * n],
            ipiv: Vec::new(),
            factored: false,
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        // Entry (i, j) sits at offset bl + bu + i - j within column j.
        let ldab = 2 * self.bl + self.bu + 1;
        j * ldab + (self.bl + self.bu + i) - j
    }

    /// Add `v` to entry (i, j). Panics if outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(!self.factored);
        debug_assert!(i < self.n && j < self.n);
        debug_assert!(
            (j as isize - i as isize) <= self.bu as isize
                && (i as isize - j as isize) <= self.bl as isize,
            "entry ({i}, {j}) outside band (bl={}, bu={})",
            self.bl,
            self.bu
        );
        let k = self.idx(i, j);
        self.ab[k] += v;
    }

    /// In-place LU factorization with partial pivoting.
    pub fn factor(&mut self) -> Result<()> {
        let n = self.n;
        let bl = self.bl;
        let width = bl + self.bu; // fill-widened upper bandwidth
        self.ipiv = (0..n).collect();
        for k in 0..n {
            let row_end = (k + bl).min(n - 1);
            let mut p = k;
            let mut pmax = self.ab[self.idx(k, k)].abs();
            for i in k + 1..=row_end {
                let v = self.ab[self.idx(i, k)].abs();
                if v > pmax {
                    pmax = v;
                    p = i;
                }
            }
            if pmax == 0.0 || !pmax.is_finite() {
                return Err(invalid(format!(
                    "band factorization failed at column {k} (pivot {pmax})"
                )));
            }
            self.ipiv[k] = p;
            let col_end = (k + width).min(n - 1);
            if p != k {
                for j in k..=col_end {
                    let a = self.idx(k, j);
                    let b = self.idx(p, j);
                    self.ab.swap(a, b);
                }
            }
            let pivot = self.ab[self.idx(k, k)];
            for i in k + 1..=row_end {
                let ik = self.idx(i, k);
                self.ab[ik] /= pivot;
            }
            for j in k + 1..=col_end {
                let akj = self.ab[self.idx(k, j)];
                if akj != 0.0 {
                    let base_j = self.idx(k + 1, j);
                    let base_k = self.idx(k + 1, k);
                    // Contiguous along each column.
                    for off in 0..row_end.saturating_sub(k) {
                        self.ab[base_j + off] -= self.ab[base_k + off] * akj;
                    }
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Back-substitute one right-hand side against the stored factors.
    pub fn solve_factored(&self, rhs: &mut [f64]) -> Result<()> {
        if !self.factored {
            return Err(invalid("solve_factored called before factor"));
        }
        if rhs.len() != self.n {
            return Err(invalid("band solve dimension mismatch"));
        }
        let n = self.n;
        let width = self.bl + self.bu;
        for k in 0..n {
            let p = self.ipiv[k];
            if p != k {
                rhs.swap(k, p);
            }
            let row_end = (k + self.bl).min(n - 1);
            let rk = rhs[k];
            for i in k + 1..=row_end {
                rhs[i] -= self.ab[self.idx(i, k)] * rk;
            }
        }
        for i in (0..n).rev() {
            let mut sum = rhs[i];
            let col_end = (i + width).min(n - 1);
            for j in i + 1..=col_end {
                sum -= self.ab[self.idx(i, j)] * rhs[j];
            }
            rhs[i] = sum / self.ab[self.idx(i, i)];
        }
        Ok(())
    }

    /// Factor and solve in one call.
    pub fn solve_in_place(&mut self, rhs: &mut [f64]) -> Result<()> {
        if !self.factored {
            self.factor()?;
        }
        self.solve_factored(rhs)
    }
}

/// Reverse Cuthill-McKee ordering of a symmetric adjacency pattern.
/// `adjacency[i]` lists the neighbors of node i (self-loops ignored).
/// Returns `perm` with `perm[old] = new`.
pub fn reverse_cuthill_mckee(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let degree: Vec<usize> = adjacency.iter().map(|a| a.len()).collect();
    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    let component_start = |visited: &[bool]| -> Option<usize> {
        (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (degree[i], i))
    };
    while let Some(seed) = component_start(&visited) {
        // One BFS pass to find a pseudo-peripheral start.
        let start = {
            let mut level = vec![usize::MAX; n];
            level[seed] = 0;
            let mut queue = std::collections::VecDeque::from([seed]);
            let mut last = seed;
            while let Some(u) = queue.pop_front() {
                last = u;
                let mut nbrs: Vec<usize> = adjacency[u]
                    .iter()
                    .copied()
                    .filter(|&v| v != u && level[v] == usize::MAX && !visited[v])
                    .collect();
                nbrs.sort_unstable_by_key(|&v| (degree[v], v));
                for v in nbrs {
                    if level[v] == usize::MAX {
                        level[v] = level[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            last
        };
        // Cuthill-McKee BFS from the start node.
        let mut queue = std::collections::VecDeque::from([start]);
        visited[start] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut nbrs: Vec<usize> = adjacency[u]
                .iter()
                .copied()
                .filter(|&v| v != u && !visited[v])
                .collect();
            nbrs.sort_unstable_by_key(|&v| (degree[v], v));
            for v in nbrs {
                visited[v] = true;
                queue.push_back(v);
            }
        }
    }
    order.reverse();
    let mut perm = vec![0usize; n];
    for (new, &old) in order.iter().enumerate() {
        perm[old] = new;
    }
    perm
}
