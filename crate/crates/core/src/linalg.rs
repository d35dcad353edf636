//! Small dense complex and real matrices.
//!
//! The tomography problems never exceed 36x36, so matrices are stored as flat
//! row-major vectors. Decompositions delegate to `nalgebra`.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

/// Relative singular-value cutoff used by [`pinv`].
pub const PINV_RCOND: f64 = 1e-12;

/// Absolute tolerance used by [`eig_hermitian`] when checking Hermiticity.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is singular to working precision (smallest singular value {smallest:e}, largest {largest:e})")]
    Singular { smallest: f64, largest: f64 },
    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("matrix contains non-finite entries")]
    NonFinite,
}

/// Dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

/// Dense real matrix.
#[derive(Clone, PartialEq)]
pub struct RMat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

macro_rules! dense_common {
    ($ty:ident, $elem:ty, $zero:expr, $one:expr, $norm:expr) => {
        impl $ty {
            pub fn zeros(rows: usize, cols: usize) -> Self {
                Self { rows, cols, data: vec![$zero; rows * cols] }
            }

            pub fn identity(n: usize) -> Self {
                let mut m = Self::zeros(n, n);
                for i in 0..n {
                    m[(i, i)] = $one;
                }
                m
            }

            pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> $elem) -> Self {
                let mut data = Vec::with_capacity(rows * cols);
                for i in 0..rows {
                    for j in 0..cols {
                        data.push(f(i, j));
                    }
                }
                Self { rows, cols, data }
            }

            /// Builds a matrix from row-major data.
            pub fn from_rows(rows: usize, cols: usize, data: Vec<$elem>) -> Result<Self, LinalgError> {
                if data.len() != rows * cols {
                    return Err(LinalgError::DimensionMismatch(format!(
                        "{} entries for a {rows}x{cols} matrix",
                        data.len()
                    )));
                }
                Ok(Self { rows, cols, data })
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

            /// Row-major view of the entries.
            pub fn as_slice(&self) -> &[$elem] {
                &self.data
            }

            pub fn transpose(&self) -> Self {
                Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
            }

            pub fn scale(&self, s: $elem) -> Self {
                Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| x * s).collect() }
            }

            pub fn trace(&self) -> $elem {
                (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
            }

            /// Kronecker product `self ⊗ other`.
            pub fn kron(&self, other: &Self) -> Self {
                let (r2, c2) = (other.rows, other.cols);
                Self::from_fn(self.rows * r2, self.cols * c2, |i, j| {
                    self[(i / r2, j / c2)] * other[(i % r2, j % c2)]
                })
            }

            pub fn matmul(&self, other: &Self) -> Result<Self, LinalgError> {
                if self.cols != other.rows {
                    return Err(LinalgError::DimensionMismatch(format!(
                        "{}x{} times {}x{}",
                        self.rows, self.cols, other.rows, other.cols
                    )));
                }
                let mut out = Self::zeros(self.rows, other.cols);
                for i in 0..self.rows {
                    for k in 0..self.cols {
                        let a = self[(i, k)];
                        for j in 0..other.cols {
                            out.data[i * other.cols + j] += a * other[(k, j)];
                        }
                    }
                }
                Ok(out)
            }

            pub fn matvec(&self, v: &[$elem]) -> Result<Vec<$elem>, LinalgError> {
                if v.len() != self.cols {
                    return Err(LinalgError::DimensionMismatch(format!(
                        "{}x{} times vector of length {}",
                        self.rows,
                        self.cols,
                        v.len()
                    )));
                }
                Ok((0..self.rows)
                    .map(|i| self.data[i * self.cols..(i + 1) * self.cols].iter().zip(v).map(|(&a, &b)| a * b).sum())
                    .collect())
            }

            /// Largest absolute entry-wise difference. Panics on shape mismatch.
            pub fn max_abs_diff(&self, other: &Self) -> f64 {
                assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
                self.data.iter().zip(&other.data).map(|(a, b)| ($norm)(*a - *b)).fold(0.0, f64::max)
            }
        }

        impl Index<(usize, usize)> for $ty {
            type Output = $elem;
            fn index(&self, (i, j): (usize, usize)) -> &$elem {
                debug_assert!(i < self.rows && j < self.cols);
                &self.data[i * self.cols + j]
            }
        }

        impl IndexMut<(usize, usize)> for $ty {
            fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut $elem {
                debug_assert!(i < self.rows && j < self.cols);
                &mut self.data[i * self.cols + j]
            }
        }

        impl Add for &$ty {
            type Output = $ty;
            fn add(self, rhs: &$ty) -> $ty {
                assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
                $ty {
                    rows: self.rows,
                    cols: self.cols,
                    data: self.data.iter().zip(&rhs.data).map(|(a, b)| *a + *b).collect(),
                }
            }
        }

        impl Sub for &$ty {
            type Output = $ty;
            fn sub(self, rhs: &$ty) -> $ty {
                assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
                $ty {
                    rows: self.rows,
                    cols: self.cols,
                    data: self.data.iter().zip(&rhs.data).map(|(a, b)| *a - *b).collect(),
                }
            }
        }

        /// Panics on inner-dimension mismatch; use `matmul` for a checked product.
        impl Mul for &$ty {
            type Output = $ty;
            fn mul(self, rhs: &$ty) -> $ty {
                self.matmul(rhs).expect("matrix product dimension mismatch")
            }
        }

        impl fmt::Debug for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                writeln!(f, "{}x{} {}", self.rows, self.cols, stringify!($ty))?;
                for i in 0..self.rows {
                    let row: Vec<_> = (0..self.cols).map(|j| self[(i, j)]).collect();
                    writeln!(f, "  {row:?}")?;
                }
                Ok(())
            }
        }
    };
}

dense_common!(CMat, Complex64, Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), |z: Complex64| z.norm());
dense_common!(RMat, f64, 0.0, 1.0, f64::abs);

impl CMat {
    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn from_real(m: &RMat) -> Self {
        Self::from_fn(m.rows, m.cols, |i, j| Complex64::new(m[(i, j)], 0.0))
    }

    /// Largest `|A - A†|` entry.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut dev: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    /// `⟨u| self |v⟩` for column vectors `u`, `v`.
    pub fn sandwich(&self, u: &[Complex64], v: &[Complex64]) -> Complex64 {
        let mv = self.matvec(v).expect("sandwich dimension mismatch");
        u.iter().zip(&mv).map(|(a, b)| a.conj() * b).sum()
    }

    fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

impl RMat {
    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    fn from_nalgebra(m: &DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

/// Kronecker product of two complex matrices.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kron(b)
}

/// Moore-Penrose pseudo-inverse of a full-rank real matrix.
///
/// Singular values below `PINV_RCOND` times the largest are treated as a
/// rank deficiency and reported as [`LinalgError::Singular`].
pub fn pinv(m: &RMat) -> Result<RMat, LinalgError> {
    if m.data.iter().any(|x| !x.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    if m.rows == 0 || m.cols == 0 {
        return Err(LinalgError::DimensionMismatch("empty matrix".into()));
    }
    let svd = m.to_nalgebra().svd(true, true);
    let s = &svd.singular_values;
    let largest = s.iter().copied().fold(0.0, f64::max);
    let smallest = s.iter().copied().fold(f64::INFINITY, f64::min);
    if largest == 0.0 || smallest < PINV_RCOND * largest {
        return Err(LinalgError::Singular { smallest, largest });
    }
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested V^T");
    let mut sinv_ut = u.transpose();
    for (i, mut row) in sinv_ut.row_iter_mut().enumerate() {
        row /= s[i];
    }
    Ok(RMat::from_nalgebra(&(vt.transpose() * sinv_ut)))
}

/// Eigenvalues (ascending) and column eigenvectors of a Hermitian matrix.
pub fn eig_hermitian(m: &CMat) -> Result<(Vec<f64>, CMat), LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::DimensionMismatch(format!("{}x{} is not square", m.rows, m.cols)));
    }
    if m.data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let dev = m.hermitian_deviation();
    if dev > HERMITIAN_TOL {
        return Err(LinalgError::NotHermitian(dev));
    }
    let eig = m.to_nalgebra().symmetric_eigen();
    let n = m.rows;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMat::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn kron_of_identities_is_identity() {
        let k = CMat::identity(2).kron(&CMat::identity(3));
        assert_eq!(k, CMat::identity(6));
    }

    #[test]
    fn kron_block_layout() {
        let a = RMat::from_rows(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = RMat::from_rows(1, 2, vec![1.0, -1.0]).unwrap();
        let k = a.kron(&b);
        assert_eq!(k.as_slice(), &[1.0, -1.0, 2.0, -2.0, 3.0, -3.0, 4.0, -4.0]);
    }

    #[test]
    fn pinv_of_invertible_is_inverse() {
        let m = RMat::from_rows(3, 3, vec![2.0, 1.0, 0.0, 0.5, 3.0, 1.0, 0.0, 1.0, 4.0]).unwrap();
        let p = pinv(&m).unwrap();
        assert!((&m * &p).max_abs_diff(&RMat::identity(3)) < 1e-12);
    }

    #[test]
    fn pinv_rejects_singular() {
        let m = RMat::from_rows(2, 2, vec![1.0, 2.0, 2.0, 4.0]).unwrap();
        assert!(matches!(pinv(&m), Err(LinalgError::Singular { .. })));
    }

    #[test]
    fn eig_hermitian_sorted_and_reconstructs() {
        let m = CMat::from_rows(2, 2, vec![c(2.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(2.0, 0.0)]).unwrap();
        let (vals, vecs) = eig_hermitian(&m).unwrap();
        assert_abs_diff_eq!(vals[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1], 3.0, epsilon = 1e-12);
        let d = CMat::from_fn(2, 2, |i, j| if i == j { c(vals[i], 0.0) } else { c(0.0, 0.0) });
        let back = &(&vecs * &d) * &vecs.adjoint();
        assert!(back.max_abs_diff(&m) < 1e-12);
    }

    #[test]
    fn eig_hermitian_rejects_non_hermitian() {
        let m = CMat::from_rows(2, 2, vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!(matches!(eig_hermitian(&m), Err(LinalgError::NotHermitian(_))));
    }

    #[test]
    fn matmul_dimension_mismatch() {
        let a = RMat::zeros(2, 3);
        assert!(a.matmul(&RMat::zeros(2, 3)).is_err());
    }
}
