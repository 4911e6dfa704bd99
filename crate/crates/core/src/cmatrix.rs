//! Minimal dense complex matrix, column-major.
//!
//! Only what the channel model needs: column access, Gram products and the
//! inverse of a Hermitian positive-definite matrix via Cholesky.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

/// Dense `rows x cols` complex matrix stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    /// Identity of size `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Build from a column-major buffer.
    ///
    /// # Panics
    /// If `data.len() != rows * cols`.
    pub fn from_column_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer does not match shape");
        CMatrix { rows, cols, data }
    }

    /// Fill entry by entry, columns outermost.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for c in 0..cols {
            for r in 0..rows {
                data.push(f(r, c));
            }
        }
        CMatrix { rows, cols, data }
    }

    /// Number of rows.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of columns.
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Column `c` as a slice.
    pub fn col(&self, c: usize) -> &[Complex64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    /// Raw column-major storage.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// `a^H b` for two columns of equal length.
    pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
    }

    /// `self^H other`, a `cols x other.cols` matrix.
    pub fn gram(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.rows, other.rows, "row mismatch in gram product");
        CMatrix::from_fn(self.cols, other.cols, |i, j| {
            Self::inner(self.col(i), other.col(j))
        })
    }

    /// Ordinary product `self * other`.
    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows, "inner dimension mismatch");
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            for k in 0..self.cols {
                let s = other[(k, j)];
                let src = self.col(k);
                let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
                for (d, a) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        out
    }

    /// Sum of squared magnitudes, i.e. `tr(A^H A)`.
    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Largest entry-wise magnitude of `self - other`.
    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| libm::sqrt((a - b).norm_sqr()))
            .fold(0.0, f64::max)
    }

    /// Inverse of a Hermitian positive-definite matrix. `None` when the
    /// Cholesky factorization breaks down.
    pub fn hermitian_inverse(&self) -> Option<CMatrix> {
        assert_eq!(self.rows, self.cols, "inverse of a non-square matrix");
        let n = self.rows;
        // Lower factor L with A = L L^H.
        let mut l = CMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            let djj = libm::sqrt(d);
            l[(j, j)] = Complex64::new(djj, 0.0);
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / djj;
            }
        }
        // Solve L L^H X = I column by column.
        let mut inv = CMatrix::zeros(n, n);
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        for c in 0..n {
            for i in 0..n {
                let mut s = if i == c {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                for k in 0..i {
                    s -= l[(i, k)] * y[k];
                }
                y[i] = s / l[(i, i)];
            }
            for i in (0..n).rev() {
                let mut s = y[i];
                for k in i + 1..n {
                    s -= l[(k, i)].conj() * inv[(k, c)];
                }
                inv[(i, c)] = s / l[(i, i)];
            }
        }
        Some(inv)
    }
}

impl core::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[c * self.rows + r]
    }
}

impl core::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[c * self.rows + r]
    }
}
