//! Dense real matrices with the factorizations the estimators need: LU
//! solve, cyclic-Jacobi symmetric eigendecomposition, Cholesky, and the
//! discrete Lyapunov equation for stationary covariances.

use crate::error::{Error, Result};
use std::fmt;
use std::ops::{Index, IndexMut};

/// Numerical tolerances shared by the matrix routines.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Minimum pivot magnitude accepted during LU elimination.
    pub lu_pivot_min: f64,
    /// Minimum Cholesky diagonal pivot.
    pub cholesky_pivot_min: f64,
    /// Maximum elementwise asymmetry accepted by symmetric routines.
    pub symmetry_abs: f64,
    /// Off-diagonal Frobenius target for the Jacobi sweeps, taken relative
    /// to max(1, ||S||_F) so unnormalized inputs still converge.
    pub jacobi_offdiag: f64,
    /// Cap on Jacobi sweeps before giving up.
    pub jacobi_max_sweeps: usize,
    /// A spectral radius of at least 1 - margin counts as non-stationary.
    pub stationarity_margin: f64,
    /// Condition-number guard applied to the moment systems before solving.
    pub condition_limit: f64,
}

pub const TOL: Tolerances = Tolerances {
    lu_pivot_min: 1e-12,
    cholesky_pivot_min: 1e-12,
    symmetry_abs: 1e-10,
    jacobi_offdiag: 1e-12,
    jacobi_max_sweeps: 64,
    stationarity_margin: 1e-9,
    condition_limit: 1e10,
};

/// Row-major dense matrix of `f64`.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        assert!(!rows.is_empty(), "matrix needs at least one row");
        let cols = rows[0].len();
        assert!(cols > 0 && rows.iter().all(|r| r.len() == cols), "ragged rows");
        let data = rows.iter().flatten().copied().collect();
        Matrix { rows: rows.len(), cols, data }
    }

    /// Fills row-major (row index outer), which matters for stateful closures.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Matrix::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn to_nested(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn mul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch in matrix product");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &Matrix) -> Matrix {
        assert!(self.rows == rhs.rows && self.cols == rhs.cols);
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, rhs: &Matrix) -> Matrix {
        assert!(self.rows == rhs.rows && self.cols == rhs.cols);
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
        out
    }

    pub fn scale(&self, s: f64) -> Matrix {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a *= s;
        }
        out
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// Operator infinity norm (max absolute row sum).
    pub fn inf_norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0f64, f64::max)
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        assert!(self.is_square());
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    pub fn max_asymmetry(&self) -> f64 {
        assert!(self.is_square());
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn symmetrized(&self) -> Matrix {
        assert!(self.is_square());
        Matrix::from_fn(self.rows, self.cols, |i, j| 0.5 * (self[(i, j)] + self[(j, i)]))
    }

    /// Copies `block` into self with its top-left corner at (`r0`, `c0`).
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Matrix) {
        assert!(r0 + block.rows <= self.rows && c0 + block.cols <= self.cols);
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Matrix {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols);
        Matrix::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    /// Solves `self * X = rhs` by LU factorization with partial pivoting.
    pub fn solve(&self, rhs: &Matrix) -> Result<Matrix> {
        assert!(self.is_square(), "solve needs a square matrix");
        assert_eq!(rhs.rows, self.rows, "right-hand side height mismatch");
        let (lu, perm) = self.lu_factor()?;
        Ok(lu_solve(&lu, &perm, rhs))
    }

    pub fn inverse(&self) -> Result<Matrix> {
        self.solve(&Matrix::identity(self.rows))
    }

    /// Infinity-norm condition number estimate; `f64::INFINITY` when singular.
    pub fn condition_inf(&self) -> f64 {
        match self.inverse() {
            Ok(inv) => self.inf_norm() * inv.inf_norm(),
            Err(_) => f64::INFINITY,
        }
    }

    pub fn det(&self) -> f64 {
        match self.lu_factor() {
            Ok((lu, perm)) => {
                let mut d = if permutation_sign(&perm) { 1.0 } else { -1.0 };
                for i in 0..self.rows {
                    d *= lu[(i, i)];
                }
                d
            }
            Err(_) => 0.0,
        }
    }

    fn lu_factor(&self) -> Result<(Matrix, Vec<usize>)> {
        let n = self.rows;
        let mut a = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut pivot_row = k;
            let mut pivot_val = a[(k, k)].abs();
            for i in (k + 1)..n {
                let v = a[(i, k)].abs();
                if v > pivot_val {
                    pivot_val = v;
                    pivot_row = i;
                }
            }
            if pivot_val < TOL.lu_pivot_min {
                return Err(Error::SingularMatrix { pivot: pivot_val, limit: TOL.lu_pivot_min });
            }
            if pivot_row != k {
                perm.swap(k, pivot_row);
                for j in 0..n {
                    let tmp = a[(k, j)];
                    a[(k, j)] = a[(pivot_row, j)];
                    a[(pivot_row, j)] = tmp;
                }
            }
            let inv_pivot = 1.0 / a[(k, k)];
            for i in (k + 1)..n {
                let factor = a[(i, k)] * inv_pivot;
                a[(i, k)] = factor;
                for j in (k + 1)..n {
                    a[(i, j)] -= factor * a[(k, j)];
                }
            }
        }
        Ok((a, perm))
    }

    /// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
    ///
    /// Returns eigenvalues in ascending order together with the matrix whose
    /// columns are the matching orthonormal eigenvectors.
    pub fn sym_eig(&self) -> Result<(Vec<f64>, Matrix)> {
        assert!(self.is_square());
        let asym = self.max_asymmetry();
        if asym > TOL.symmetry_abs {
            return Err(Error::NotSymmetric(asym));
        }
        let n = self.rows;
        let mut a = self.symmetrized();
        let mut v = Matrix::identity(n);
        let target = TOL.jacobi_offdiag * a.fro_norm().max(1.0);
        let mut converged = false;
        for _ in 0..TOL.jacobi_max_sweeps {
            if off_diag_norm(&a) <= target {
                converged = true;
                break;
            }
            for p in 0..n.saturating_sub(1) {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                    let t = if theta.abs() > 1e150 {
                        0.5 / theta
                    } else {
                        let s = if theta >= 0.0 { 1.0 } else { -1.0 };
                        s / (theta.abs() + (theta * theta + 1.0).sqrt())
                    };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    apply_jacobi_rotation(&mut a, &mut v, p, q, c, s, t);
                }
            }
        }
        if !converged && off_diag_norm(&a) > target {
            return Err(Error::NoConvergence(TOL.jacobi_max_sweeps));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap());
        let values: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
        let vectors = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
        Ok((values, vectors))
    }

    /// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
    pub fn cholesky(&self) -> Result<Matrix> {
        assert!(self.is_square());
        let asym = self.max_asymmetry();
        if asym > TOL.symmetry_abs {
            return Err(Error::NotSymmetric(asym));
        }
        let n = self.rows;
        let mut l = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut sum = self[(i, j)];
                for k in 0..j {
                    sum -= l[(i, k)] * l[(j, k)];
                }
                if i == j {
                    if sum <= TOL.cholesky_pivot_min {
                        return Err(Error::NotPositiveDefinite(sum));
                    }
                    l[(i, i)] = sum.sqrt();
                } else {
                    l[(i, j)] = sum / l[(j, j)];
                }
            }
        }
        Ok(l)
    }

    /// Spectral radius via scaled repeated squaring: after k squarings
    /// ||F^(2^k)||^(1/2^k) converges to the radius for any matrix norm.
    pub fn spectral_radius(&self) -> f64 {
        assert!(self.is_square());
        let mut norm = self.inf_norm();
        if norm == 0.0 || !norm.is_finite() {
            return norm;
        }
        let mut g = self.scale(1.0 / norm);
        let mut log_scale = norm.ln();
        const SQUARINGS: i32 = 32;
        for _ in 0..SQUARINGS {
            g = g.mul(&g);
            log_scale *= 2.0;
            norm = g.inf_norm();
            if norm == 0.0 {
                return 0.0;
            }
            g = g.scale(1.0 / norm);
            log_scale += norm.ln();
        }
        (log_scale / 2f64.powi(SQUARINGS)).exp()
    }
}

fn off_diag_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[(i, j)] * a[(i, j)];
            }
        }
    }
    sum.sqrt()
}

fn apply_jacobi_rotation(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize, c: f64, s: f64, t: f64) {
    let n = a.rows();
    let apq = a[(p, q)];
    let app = a[(p, p)];
    let aqq = a[(q, q)];
    a[(p, p)] = app - t * apq;
    a[(q, q)] = aqq + t * apq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        if k != p && k != q {
            let akp = a[(k, p)];
            let akq = a[(k, q)];
            a[(k, p)] = c * akp - s * akq;
            a[(p, k)] = a[(k, p)];
            a[(k, q)] = s * akp + c * akq;
            a[(q, k)] = a[(k, q)];
        }
    }
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

fn permutation_sign(perm: &[usize]) -> bool {
    let mut seen = vec![false; perm.len()];
    let mut even = true;
    for start in 0..perm.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            i = perm[i];
            len += 1;
        }
        if len % 2 == 0 {
            even = !even;
        }
    }
    even
}

fn lu_solve(lu: &Matrix, perm: &[usize], rhs: &Matrix) -> Matrix {
    let n = lu.rows();
    let m = rhs.cols();
    let mut x = Matrix::zeros(n, m);
    for c in 0..m {
        // forward substitution on the permuted rhs
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut sum = rhs[(perm[i], c)];
            for k in 0..i {
                sum -= lu[(i, k)] * y[k];
            }
            y[i] = sum;
        }
        for i in (0..n).rev() {
            let mut sum = y[i];
            for k in (i + 1)..n {
                sum -= lu[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = sum / lu[(i, i)];
        }
    }
    x
}

/// Solves the discrete Lyapunov equation `P = F P F' + Q` through the
/// Kronecker vectorization `(I - F (x) F) vec(P) = vec(Q)`.
pub fn stationary_covariance(companion: &Matrix, noise_cov: &Matrix) -> Result<Matrix> {
    assert!(companion.is_square() && noise_cov.is_square());
    assert_eq!(companion.rows(), noise_cov.rows(), "dimension mismatch");
    let radius = companion.spectral_radius();
    if radius >= 1.0 - TOL.stationarity_margin {
        return Err(Error::NotStationary(radius));
    }
    let n = companion.rows();
    let mut system = Matrix::identity(n * n);
    // column-major vec: index (i, j) -> j * n + i
    for ja in 0..n {
        for ja2 in 0..n {
            let f_right = companion[(ja, ja2)];
            if f_right == 0.0 {
                continue;
            }
            for ia in 0..n {
                for ia2 in 0..n {
                    let v = companion[(ia, ia2)] * f_right;
                    if v != 0.0 {
                        system[(ja * n + ia, ja2 * n + ia2)] -= v;
                    }
                }
            }
        }
    }
    let mut rhs = Matrix::zeros(n * n, 1);
    for j in 0..n {
        for i in 0..n {
            rhs[(j * n + i, 0)] = noise_cov[(i, j)];
        }
    }
    let x = system.solve(&rhs)?;
    let p = Matrix::from_fn(n, n, |i, j| x[(j * n + i, 0)]);
    Ok(p.symmetrized())
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}
