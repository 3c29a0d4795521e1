//! Dense linear algebra for the baselines and metrics: covariance, a cyclic
//! Jacobi symmetric eigensolver, Cholesky factorization and PSD square roots.
//!
//! Matrices are small (tens to a few hundred columns), so everything is a
//! straightforward row-major `Vec<f64>`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative ridge added to covariances before inversion or factorization.
pub const RIDGE: f64 = 1e-6;

const SYM_TOL: f64 = 1e-8;
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;
const QL_MAX_ITERATIONS: usize = 60;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::Shape(format!("ragged rows: {} vs {c}", row.len())));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { rows: r, cols: c, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols;
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// Keeps the first `k` columns.
    pub fn leading_columns(&self, k: usize) -> Mat {
        let mut out = Mat::zeros(self.rows, k);
        for i in 0..self.rows {
            out.row_mut(i).copy_from_slice(&self.row(i)[..k]);
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Mat) -> Result<Mat> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, a) in self.row(i).iter().enumerate() {
                if *a == 0.0 {
                    continue;
                }
                for (o, b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Mat) -> Result<Mat> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Mat) -> Result<Mat> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Mat, f: impl Fn(f64, f64) -> f64) -> Result<Mat> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect();
        Ok(Mat { rows: self.rows, cols: self.cols, data })
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|v| v * v).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest |A_ij − A_ji|.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Column means.
    pub fn column_means(&self) -> Vec<f64> {
        let mut mu = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (m, v) in mu.iter_mut().zip(self.row(i)) {
                *m += v;
            }
        }
        let n = self.rows.max(1) as f64;
        mu.iter_mut().for_each(|m| *m /= n);
        mu
    }

    /// Subtracts `mean` from every row.
    pub fn center_with(&self, mean: &[f64]) -> Result<Mat> {
        if mean.len() != self.cols {
            return Err(Error::Shape(format!("mean of length {} for {} columns", mean.len(), self.cols)));
        }
        let mut out = self.clone();
        for i in 0..self.rows {
            for (v, m) in out.row_mut(i).iter_mut().zip(mean) {
                *v -= m;
            }
        }
        Ok(out)
    }

    /// Adds `ridge · mean(diag) · I`.
    pub fn with_ridge(&self, ridge: f64) -> Mat {
        let n = self.rows.min(self.cols);
        if n == 0 {
            return self.clone();
        }
        let mean_diag = self.trace() / n as f64;
        let eps = ridge * if mean_diag > 0.0 { mean_diag } else { 1.0 };
        let mut out = self.clone();
        for i in 0..n {
            out[(i, i)] += eps;
        }
        out
    }

    /// `(A + Aᵀ)/2`.
    pub fn symmetrized(&self) -> Mat {
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Sample covariance with divisor `n − 1`.
///
/// `centered = true` means the caller guarantees zero column means; otherwise
/// the column means are subtracted first.
pub fn covariance(x: &Mat, centered: bool) -> Result<Mat> {
    let n = x.rows();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let d = x.cols();
    let mean = if centered { vec![0.0; d] } else { x.column_means() };
    let mut cov = Mat::zeros(d, d);
    let mut centered_row = vec![0.0; d];
    for i in 0..n {
        for ((c, v), m) in centered_row.iter_mut().zip(x.row(i)).zip(&mean) {
            *c = v - m;
        }
        for a in 0..d {
            let ca = centered_row[a];
            if ca == 0.0 {
                continue;
            }
            let row = &mut cov.data[a * d..(a + 1) * d];
            for b in a..d {
                row[b] += ca * centered_row[b];
            }
        }
    }
    let denom = (n - 1) as f64;
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / denom;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    Ok(cov)
}

/// Eigendecomposition of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymEig {
    /// Eigenvalues, descending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, in the order of `values`.
    pub vectors: Mat,
}

impl SymEig {
    /// `V · diag(f(λ)) · Vᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> Mat {
        let d = self.values.len();
        let mut out = Mat::zeros(d, d);
        let mapped: Vec<f64> = self.values.iter().map(|v| f(*v)).collect();
        for i in 0..d {
            for j in i..d {
                let mut s = 0.0;
                for (k, l) in mapped.iter().enumerate() {
                    s += self.vectors[(i, k)] * l * self.vectors[(j, k)];
                }
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        out
    }
}

/// Largest dimension handled by Jacobi rotations; bigger matrices go
/// through Householder tridiagonalization and implicit QL.
pub const JACOBI_MAX_DIM: usize = 200;

/// Symmetric eigendecomposition: cyclic Jacobi rotations up to
/// [`JACOBI_MAX_DIM`], tridiagonal QL above.
///
/// Eigenvalues come back in descending order. Each eigenvector is signed so
/// its first non-negligible component is positive.
pub fn sym_eig(a: &Mat) -> Result<SymEig> {
    let d = a.rows();
    if a.cols() != d {
        return Err(Error::Shape(format!("eigendecomposition needs a square matrix, got {}x{}", d, a.cols())));
    }
    let asym = a.asymmetry();
    if asym > SYM_TOL {
        return Err(Error::Contract(format!("matrix is not symmetric (|A - Aᵀ|∞ = {asym:e})")));
    }
    if d <= JACOBI_MAX_DIM {
        let (values, vectors) = jacobi(a);
        Ok(ordered(&values, |i| vectors.column(i)))
    } else {
        let (values, rows) = tridiagonal_ql(a)?;
        Ok(ordered(&values, |i| rows[i * d..(i + 1) * d].to_vec()))
    }
}

/// Sorts eigenpairs descending and fixes eigenvector signs.
fn ordered(values: &[f64], vector: impl Fn(usize) -> Vec<f64>) -> SymEig {
    let d = values.len();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    let mut vectors = Mat::zeros(d, d);
    for (new_col, &old_col) in order.iter().enumerate() {
        let col = vector(old_col);
        let pivot_tol = 1e-12 * col.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        let sign = col.iter().find(|x| x.abs() > pivot_tol).map_or(1.0, |x| x.signum());
        for (i, x) in col.iter().enumerate() {
            vectors[(i, new_col)] = sign * x;
        }
    }
    SymEig { values: order.iter().map(|&i| values[i]).collect(), vectors }
}

/// Unsorted eigenvalues and eigenvector columns.
fn jacobi(a: &Mat) -> (Vec<f64>, Mat) {
    let d = a.rows();
    let mut m = a.symmetrized();
    let mut v = Mat::identity(d);
    let scale = a.frobenius().max(f64::MIN_POSITIVE);
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&m) < JACOBI_TOL * scale {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                rotate(&mut m, &mut v, p, q, c, s);
            }
        }
    }
    ((0..d).map(|i| m[(i, i)]).collect(), v)
}

/// Householder reduction to tridiagonal form followed by implicit QL with
/// Wilkinson-style shifts. Returns unsorted eigenvalues and the
/// eigenvectors as consecutive rows of a flat `d x d` buffer.
fn tridiagonal_ql(a: &Mat) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = a.rows();
    let sym = a.symmetrized();
    // v is row-major and holds the accumulated transform, column j being
    // the j-th basis vector.
    let mut v: Vec<f64> = sym.as_slice().to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let at = |i: usize, j: usize| i * n + j;

    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let f = d[i - 1];
            let g = if f > 0.0 { -libm::sqrt(h) } else { libm::sqrt(h) };
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            e[..i].iter_mut().for_each(|x| *x = 0.0);
            for j in 0..i {
                let f = d[j];
                v[at(j, i)] = f;
                let mut g = e[j] + v[at(j, j)] * f;
                for k in j + 1..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            let mut f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let (f, g) = (d[j], e[j]);
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n.saturating_sub(1) {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;

    // QL on the tridiagonal (d, e); rotations act on rows of z = vᵀ so the
    // inner loop walks contiguous memory.
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            z[at(j, i)] = v[at(i, j)];
        }
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iterations = 0;
            loop {
                iterations += 1;
                if iterations > QL_MAX_ITERATIONS {
                    return Err(Error::Convergence(format!("tridiagonal QL did not converge for eigenvalue {l}")));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = libm::hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for x in &mut d[l + 2..n] {
                    *x -= h;
                }
                f += h;

                p = d[m];
                let (mut c, mut c2, mut c3) = (1.0, 1.0, 1.0);
                let el1 = e[l + 1];
                let (mut s, mut s2) = (0.0, 0.0);
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = libm::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (lo, hi) = z.split_at_mut(at(i + 1, 0));
                    for (zi, zi1) in lo[at(i, 0)..].iter_mut().zip(&mut hi[..n]) {
                        let h = *zi1;
                        *zi1 = s * *zi + c * h;
                        *zi = c * *zi - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok((d, z))
}

fn off_diagonal_norm(m: &Mat) -> f64 {
    let mut s = 0.0;
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if i != j {
                s += m[(i, j)] * m[(i, j)];
            }
        }
    }
    libm::sqrt(s)
}

fn rotate(m: &mut Mat, v: &mut Mat, p: usize, q: usize, c: f64, s: f64) {
    let d = m.rows();
    // A ← Jᵀ A J applied as row then column updates.
    for k in 0..d {
        let mkp = m[(k, p)];
        let mkq = m[(k, q)];
        m[(k, p)] = c * mkp - s * mkq;
        m[(k, q)] = s * mkp + c * mkq;
    }
    for k in 0..d {
        let mpk = m[(p, k)];
        let mqk = m[(q, k)];
        m[(p, k)] = c * mpk - s * mqk;
        m[(q, k)] = s * mpk + c * mqk;
    }
    m[(p, q)] = 0.0;
    m[(q, p)] = 0.0;
    for k in 0..d {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Lower-triangular `L` with `L·Lᵀ = A`.
pub fn cholesky(a: &Mat) -> Result<Mat> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Shape(format!("cholesky needs a square matrix, got {}x{}", n, a.cols())));
    }
    let asym = a.asymmetry();
    if asym > SYM_TOL * a.max_abs().max(1.0) {
        return Err(Error::Contract(format!("matrix is not symmetric (|A - Aᵀ|∞ = {asym:e})")));
    }
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: j, value: diag });
        }
        let ljj = libm::sqrt(diag);
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves `L·X = B` for lower-triangular `L`.
pub fn solve_lower(l: &Mat, b: &Mat) -> Result<Mat> {
    let n = l.rows();
    if b.rows() != n {
        return Err(Error::Shape(format!("{}x{} system with {} right-hand rows", n, n, b.rows())));
    }
    let mut x = b.clone();
    for col in 0..b.cols() {
        for i in 0..n {
            let mut s = x[(i, col)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, col)];
            }
            x[(i, col)] = s / l[(i, i)];
        }
    }
    Ok(x)
}

/// Solves `Lᵀ·X = B` for lower-triangular `L`.
pub fn solve_upper_transposed(l: &Mat, b: &Mat) -> Result<Mat> {
    let n = l.rows();
    if b.rows() != n {
        return Err(Error::Shape(format!("{}x{} system with {} right-hand rows", n, n, b.rows())));
    }
    let mut x = b.clone();
    for col in 0..b.cols() {
        for i in (0..n).rev() {
            let mut s = x[(i, col)];
            for k in (i + 1)..n {
                s -= l[(k, i)] * x[(k, col)];
            }
            x[(i, col)] = s / l[(i, i)];
        }
    }
    Ok(x)
}

/// Solves `A·X = B` for symmetric positive definite `A`.
pub fn spd_solve(a: &Mat, b: &Mat) -> Result<Mat> {
    let l = cholesky(a)?;
    let y = solve_lower(&l, b)?;
    solve_upper_transposed(&l, &y)
}

fn check_psd_input(a: &Mat) -> Result<SymEig> {
    let asym = a.asymmetry();
    if asym > SYM_TOL * a.max_abs().max(1.0) {
        return Err(Error::Contract(format!("matrix is not symmetric (|A - Aᵀ|∞ = {asym:e})")));
    }
    let eig = sym_eig(&a.symmetrized())?;
    let floor = eig.values.last().copied().unwrap_or(0.0);
    if floor < -1e-6 * a.max_abs().max(1.0) {
        return Err(Error::NotPsd(floor));
    }
    Ok(eig)
}

/// Principal square root of a symmetric PSD matrix. Slightly negative
/// eigenvalues from round-off are clamped to zero.
pub fn sqrtm_psd(a: &Mat) -> Result<Mat> {
    let eig = check_psd_input(a)?;
    Ok(eig.reconstruct_with(|l| libm::sqrt(l.max(0.0))))
}

/// `A^{-1/2}` for a symmetric positive definite matrix.
pub fn inv_sqrtm_spd(a: &Mat) -> Result<Mat> {
    let eig = check_psd_input(a)?;
    if let Some(&min) = eig.values.last() {
        if !(min > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: eig.values.len() - 1, value: min });
        }
    }
    Ok(eig.reconstruct_with(|l| 1.0 / libm::sqrt(l)))
}

/// Spectral regularization: eigenvalues below `ridge · mean(diag)` are
/// raised to it. Well-conditioned matrices come back unchanged (up to
/// round-off), near-singular ones become safely positive definite.
pub fn floor_spectrum(a: &Mat, ridge: f64) -> Result<Mat> {
    let eig = check_psd_input(a)?;
    let n = a.rows().max(1);
    let mean_diag = a.trace() / n as f64;
    let floor = ridge * if mean_diag > 0.0 { mean_diag } else { 1.0 };
    if eig.values.last().map_or(true, |&v| v >= floor) {
        return Ok(a.symmetrized());
    }
    Ok(eig.reconstruct_with(|l| l.max(floor)))
}

/// `A^{-1/2}` with the spectrum floored at `ridge · mean(diag)`.
pub fn inv_sqrtm_floored(a: &Mat, ridge: f64) -> Result<Mat> {
    let eig = check_psd_input(a)?;
    let n = a.rows().max(1);
    let mean_diag = a.trace() / n as f64;
    let floor = ridge * if mean_diag > 0.0 { mean_diag } else { 1.0 };
    Ok(eig.reconstruct_with(|l| 1.0 / libm::sqrt(l.max(floor))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx_eq(a: &Mat, b: &Mat, tol: f64) -> bool {
        a.sub(b).unwrap().max_abs() <= tol
    }

    #[test]
    fn covariance_of_identical_rows_is_zero() {
        let x = Mat::from_rows(&[&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(covariance(&x, false).unwrap(), Mat::zeros(3, 3));
    }

    #[test]
    fn covariance_single_axis_spread() {
        let x = Mat::from_rows(&[&[0.0, 0.0], &[2.0, 0.0]]).unwrap();
        let c = covariance(&x, false).unwrap();
        assert_eq!(c, Mat::from_rows(&[&[2.0, 0.0], &[0.0, 0.0]]).unwrap());
    }

    #[test]
    fn covariance_needs_two_rows() {
        let x = Mat::from_rows(&[&[1.0, 2.0]]).unwrap();
        assert_eq!(covariance(&x, false), Err(Error::InsufficientSamples { needed: 2, got: 1 }));
    }

    #[test]
    fn eig_of_diagonal() {
        let e = sym_eig(&Mat::diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(e.values, vec![3.0, 2.0, 1.0]);
        let expected = Mat::from_rows(&[&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0], &[0.0, 1.0, 0.0]]).unwrap();
        assert!(approx_eq(&e.vectors, &expected, 0.0));
    }

    #[test]
    fn eig_of_identity() {
        let e = sym_eig(&Mat::identity(4)).unwrap();
        assert!(e.values.iter().all(|v| (v - 1.0).abs() < 1e-15));
        assert!(approx_eq(&e.reconstruct_with(|l| l), &Mat::identity(4), 1e-12));
    }

    #[test]
    fn eig_rejects_asymmetric() {
        let a = Mat::from_rows(&[&[1.0, 2.0], &[0.0, 1.0]]).unwrap();
        assert!(matches!(sym_eig(&a), Err(Error::Contract(_))));
    }

    #[test]
    fn eig_sign_convention() {
        let a = Mat::from_rows(&[&[2.0, -1.0], &[-1.0, 2.0]]).unwrap();
        let e = sym_eig(&a).unwrap();
        for k in 0..2 {
            let col = e.vectors.column(k);
            assert!(col.iter().find(|v| v.abs() > 1e-12).unwrap() > &0.0);
        }
        assert!((e.values[0] - 3.0).abs() < 1e-12 && (e.values[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cholesky_known_values() {
        let l = cholesky(&Mat::identity(3)).unwrap();
        assert_eq!(l, Mat::identity(3));
        let a = Mat::from_rows(&[&[4.0, 2.0], &[2.0, 3.0]]).unwrap();
        let l = cholesky(&a).unwrap();
        let expected = Mat::from_rows(&[&[2.0, 0.0], &[1.0, libm::sqrt(2.0)]]).unwrap();
        assert!(approx_eq(&l, &expected, 1e-15));
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]).unwrap();
        assert!(matches!(cholesky(&a), Err(Error::NotPositiveDefinite { pivot: 1, .. })));
    }

    #[test]
    fn sqrtm_known_values() {
        assert!(approx_eq(&sqrtm_psd(&Mat::identity(3)).unwrap(), &Mat::identity(3), 1e-15));
        let s = sqrtm_psd(&Mat::diag(&[4.0, 9.0])).unwrap();
        assert!(approx_eq(&s, &Mat::diag(&[2.0, 3.0]), 1e-14));
    }

    #[test]
    fn sqrtm_rejects_negative_eigenvalue() {
        assert!(matches!(sqrtm_psd(&Mat::diag(&[1.0, -0.5])), Err(Error::NotPsd(_))));
        // round-off level negatives are clamped
        let s = sqrtm_psd(&Mat::diag(&[1.0, -1e-12])).unwrap();
        assert_eq!(s[(1, 1)], 0.0);
    }

    #[test]
    fn ridge_scales_with_mean_diagonal() {
        let a = Mat::diag(&[2.0, 4.0]).with_ridge(RIDGE);
        assert!((a[(0, 0)] - (2.0 + 3e-6)).abs() < 1e-15);
    }

    #[test]
    fn spd_solve_roundtrip() {
        let a = Mat::from_rows(&[&[4.0, 1.0], &[1.0, 3.0]]).unwrap();
        let b = Mat::from_rows(&[&[1.0], &[2.0]]).unwrap();
        let x = spd_solve(&a, &b).unwrap();
        assert!(approx_eq(&a.matmul(&x).unwrap(), &b, 1e-14));
    }
}
