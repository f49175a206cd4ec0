//! Dense complex linear algebra and scalar root bracketing.
//!
//! Problem sizes here are tiny (M = 8 antennas, N ≤ 50 elements), so
//! everything is stored densely and solved by Cholesky factorization.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(rows: usize, columns: &[Vec<C64>]) -> Self {
        Self::from_fn(rows, columns.len(), |i, j| columns[j][i])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[C64]) {
        assert_eq!(v.len(), self.rows);
        for (i, &x) in v.iter().enumerate() {
            self[(i, j)] = x;
        }
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self[(i, l)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(l, j)];
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    /// Squared Frobenius norm, i.e. tr(A Aᴴ).
    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn scale(&mut self, s: f64) {
        for z in &mut self.data {
            *z *= s;
        }
    }

    /// self += alpha · v vᴴ
    pub fn add_outer(&mut self, alpha: f64, v: &[C64]) {
        assert!(self.rows == v.len() && self.cols == v.len());
        for i in 0..v.len() {
            let vi = v[i] * alpha;
            for j in 0..v.len() {
                self[(i, j)] += vi * v[j].conj();
            }
        }
    }

    pub fn add_diagonal(&mut self, mu: f64) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] += mu;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn trace_re(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)].re).sum()
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

/// A square matrix known to be conjugate-symmetric.
#[derive(Debug, Clone)]
pub struct HermitianMatrix(Mat);

impl HermitianMatrix {
    /// Validates squareness, finiteness and conjugate symmetry (1e-12 relative).
    pub fn new(m: Mat) -> Result<Self> {
        if m.rows != m.cols {
            return Err(Error::InvalidInput(format!(
                "hermitian matrix must be square, got {}x{}",
                m.rows, m.cols
            )));
        }
        if !m.is_finite() {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        let scale = m.data.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for i in 0..m.rows {
            for j in i..m.cols {
                if (m[(i, j)] - m[(j, i)].conj()).norm() > 1e-12 * scale {
                    return Err(Error::InvalidInput(format!(
                        "matrix is not hermitian at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self(m))
    }

    /// Wraps a matrix that is Hermitian by construction (sums of outer
    /// products plus real diagonal shifts).
    pub(crate) fn from_parts_unchecked(m: Mat) -> Self {
        debug_assert_eq!(m.rows, m.cols);
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn as_mat(&self) -> &Mat {
        &self.0
    }

    pub fn into_mat(self) -> Mat {
        self.0
    }
}

/// Lower-triangular factor L with A = L Lᴴ.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Mat,
}

impl Cholesky {
    pub fn factor(a: &HermitianMatrix) -> Result<Self> {
        let a = a.as_mat();
        let n = a.rows;
        let mut l = Mat::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite {
                    block: "cholesky".into(),
                    pivot: j,
                    value: d,
                });
            }
            let djj = d.sqrt();
            l[(j, j)] = C64::new(djj, 0.0);
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { l })
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.l.rows;
        assert_eq!(b.len(), n);
        // L y = b
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)].re;
        }
        // Lᴴ x = y
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[(k, i)].conj() * y[k];
            }
            y[i] = s / self.l[(i, i)].re;
        }
        y
    }
}

/// Solves A x = b for Hermitian positive-definite A.
pub fn solve_hpd(a: &HermitianMatrix, b: &[C64]) -> Result<Vec<C64>> {
    if b.len() != a.dim() {
        return Err(Error::InvalidInput(format!(
            "rhs length {} does not match matrix dimension {}",
            b.len(),
            a.dim()
        )));
    }
    if !a.as_mat().is_finite() || !all_finite(b) {
        return Err(Error::InvalidInput("non-finite entries in linear system".into()));
    }
    let chol = Cholesky::factor(a)?;
    Ok(chol.solve(b))
}

/// Finds a root of a continuous nonincreasing function on `[lo, hi]`.
///
/// Requires `f(lo) >= 0 >= f(hi)`. Returns as soon as `|f(mu)| <= tol`, or
/// once the bracket is narrower than `tol * max(1, |mu|)`, in which case the
/// upper end (where `f <= 0`) is returned.
pub fn bisect_decreasing<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if !(lo <= hi) || !(tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "bisection needs lo <= hi and tol > 0 (lo={lo}, hi={hi}, tol={tol})"
        )));
    }
    let f_lo = f(lo);
    let f_hi = f(hi);
    if !(f_lo >= 0.0 && f_hi <= 0.0) {
        return Err(Error::InvalidBracket { f_lo, f_hi });
    }
    if f_lo.abs() <= tol {
        return Ok(lo);
    }
    if f_hi.abs() <= tol {
        return Ok(hi);
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol * mid.abs().max(1.0) || mid <= lo || mid >= hi {
            return Ok(hi);
        }
        let fm = f(mid);
        if fm.abs() <= tol {
            return Ok(mid);
        }
        if fm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

pub fn all_finite(v: &[C64]) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// xᴴ y
pub fn dot_h(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

/// xᵀ y (no conjugation)
pub fn dot_t(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm_sq(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

pub fn norm_inf_diff(x: &[C64], y: &[C64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
}

/// Orthonormal basis of the span of `vectors` by modified Gram-Schmidt with
/// one re-orthogonalization pass. A vector whose remainder is below
/// `rel_tol` times the largest input norm is treated as dependent.
pub fn orthonormal_basis(vectors: &[Vec<C64>], rel_tol: f64) -> Vec<Vec<C64>> {
    let scale = vectors.iter().map(|v| norm_sq(v).sqrt()).fold(0.0, f64::max);
    let mut basis: Vec<Vec<C64>> = Vec::new();
    if scale == 0.0 {
        return basis;
    }
    for v in vectors {
        let mut u = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let p = dot_h(q, &u);
                for (ui, qi) in u.iter_mut().zip(q) {
                    *ui -= qi * p;
                }
            }
        }
        let nrm = norm_sq(&u).sqrt();
        if nrm > rel_tol * scale {
            basis.push(u.into_iter().map(|z| z / nrm).collect());
        }
    }
    basis
}
