//! Small dense linear algebra: Cholesky solves, quadratic norms, rank-1
//! updates and Householder null-space bases.
//!
//! Dimensions here are tiny (d around 10), so everything is plain row-major
//! storage with no blocking. Vectors are ordinary slices.

use thiserror::Error;

use crate::scalar::Real;

/// Relative tolerance used when checking symmetry of a matrix tagged SPD.
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("matrix is not symmetric positive definite (pivot {pivot} at row {row})")]
    NotSpd { row: usize, pivot: f64 },
    #[error("matrix is not symmetric within tolerance at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("null-space basis requested for the zero vector")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// `a + s * b`
pub fn add_scaled<T: Real>(a: &[T], s: T, b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x + s * y).collect()
}

pub fn sub<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn scale<T: Real>(s: T, a: &[T]) -> Vec<T> {
    a.iter().map(|&x| s * x).collect()
}

pub fn max_abs<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, T::one())
    }

    pub fn scaled_identity(n: usize, s: T) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = s;
        }
        m
    }

    pub fn diag(values: &[T]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from rows; all rows must share a length.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            assert_eq!(r.len(), n_cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: n_rows,
            cols: n_cols,
            data,
        }
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

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `M x`
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `Mᵀ x`
    pub fn tr_mul_vec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == T::zero() {
                continue;
            }
            for (o, &m) in out.iter_mut().zip(self.row(i)) {
                *o = *o + m * xi;
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        out
    }

    /// In-place `self += s * x xᵀ`.
    pub fn add_outer_scaled(&mut self, s: T, x: &[T]) {
        assert!(self.is_square() && x.len() == self.rows);
        let n = self.rows;
        for i in 0..n {
            let sxi = s * x[i];
            if sxi == T::zero() {
                continue;
            }
            for j in 0..n {
                self.data[i * n + j] = self.data[i * n + j] + sxi * x[j];
            }
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    fn check_symmetric(&self) -> Result<(), NumericsError> {
        if !self.is_square() {
            return Err(NumericsError::DimensionMismatch {
                expected: self.rows,
                found: self.cols,
            });
        }
        let tol = T::lit(SYMMETRY_TOL);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let (a, b) = (self[(i, j)], self[(j, i)]);
                let scale = T::one().max(a.abs()).max(b.abs());
                if (a - b).abs() > tol * scale {
                    return Err(NumericsError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(())
    }
}

impl<T> std::ops::Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    l: Mat<T>,
}

impl<T: Real> Cholesky<T> {
    pub fn new(a: &Mat<T>) -> Result<Self, NumericsError> {
        a.check_symmetric()?;
        let n = a.rows();
        let mut l = Mat::zeros(n, n);
        for j in 0..n {
            let mut diag = a[(j, j)];
            for k in 0..j {
                diag = diag - l[(j, k)] * l[(j, k)];
            }
            if !(diag > T::zero()) {
                return Err(NumericsError::NotSpd {
                    row: j,
                    pivot: diag.as_f64(),
                });
            }
            let ljj = diag.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn factor(&self) -> &Mat<T> {
        &self.l
    }

    /// Solves `L y = b`.
    pub fn forward(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s = s - self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    /// Solves `Lᵀ x = y`.
    pub fn backward(&self, y: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut x = y.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s = s - self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        self.backward(&self.forward(b))
    }

    /// `‖x‖_{A⁻¹} = ‖L⁻¹ x‖`
    pub fn inv_quad_norm(&self, x: &[T]) -> T {
        norm2(&self.forward(x))
    }

    /// `‖x‖_A = ‖Lᵀ x‖`
    pub fn quad_norm(&self, x: &[T]) -> T {
        let n = self.dim();
        let mut acc = T::zero();
        for j in 0..n {
            let mut s = T::zero();
            for i in j..n {
                s = s + self.l[(i, j)] * x[i];
            }
            acc = acc + s * s;
        }
        acc.sqrt()
    }
}

/// Solves `A x = b` for symmetric positive-definite `A`.
pub fn spd_solve<T: Real>(a: &Mat<T>, b: &[T]) -> Result<Vec<T>, NumericsError> {
    if b.len() != a.rows() {
        return Err(NumericsError::DimensionMismatch {
            expected: a.rows(),
            found: b.len(),
        });
    }
    Ok(Cholesky::new(a)?.solve(b))
}

/// `‖x‖_M = √(xᵀ M x)` for SPD `M`. For `‖x‖_{A⁻¹}` use
/// [`Cholesky::inv_quad_norm`] on the factor of `A`.
pub fn quad_norm<T: Real>(x: &[T], m: &Mat<T>) -> Result<T, NumericsError> {
    if x.len() != m.rows() {
        return Err(NumericsError::DimensionMismatch {
            expected: m.rows(),
            found: x.len(),
        });
    }
    Ok(Cholesky::new(m)?.quad_norm(x))
}

/// Returns `A + x xᵀ`.
pub fn rank1_update<T: Real>(a: &Mat<T>, x: &[T]) -> Mat<T> {
    let mut out = a.clone();
    out.add_outer_scaled(T::one(), x);
    out
}

/// Orthonormal basis (as the columns of a `d × (d−1)` matrix) of the
/// complement of `v`.
///
/// Uses the Householder reflector that maps `e₁` onto `±v/‖v‖`; its remaining
/// columns are the basis. The sign convention avoids cancellation and makes
/// the result a deterministic function of `v`.
pub fn nullspace_basis<T: Real>(v: &[T]) -> Result<Mat<T>, NumericsError> {
    let nv = norm2(v);
    if !(nv > T::zero()) {
        return Err(NumericsError::ZeroVector);
    }
    let d = v.len();
    let mut u: Vec<T> = v.iter().map(|&x| x / nv).collect();
    let sign = if u[0] >= T::zero() { T::one() } else { -T::one() };
    u[0] = u[0] + sign;
    let uu = dot(&u, &u);
    let two = T::lit(2.0);
    let mut basis = Mat::zeros(d, d - 1);
    for i in 0..d {
        for j in 1..d {
            let delta = if i == j { T::one() } else { T::zero() };
            basis[(i, j - 1)] = delta - two * u[i] * u[j] / uu;
        }
    }
    Ok(basis)
}

/// Orthonormal basis of the span of `vectors` via modified Gram–Schmidt with
/// re-orthogonalization. Directions whose residual norm falls below
/// `rel_tol` times the largest input norm are dropped. Rows of the result are
/// the basis vectors.
pub fn span_basis<T: Real>(vectors: &[Vec<T>], rel_tol: T) -> Vec<Vec<T>> {
    let scale = vectors.iter().map(|v| norm2(v)).fold(T::zero(), T::max);
    if !(scale > T::zero()) {
        return Vec::new();
    }
    let mut basis: Vec<Vec<T>> = Vec::new();
    for v in vectors {
        let mut r = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &r);
                for (ri, &qi) in r.iter_mut().zip(q) {
                    *ri = *ri - c * qi;
                }
            }
        }
        let nr = norm2(&r);
        if nr > rel_tol * scale {
            basis.push(r.into_iter().map(|x| x / nr).collect());
        }
    }
    basis
}
