//! Dense row-major complex matrices: the carrier type for every operator in
//! the crate, plus the small set of kernels (multiply, adjoint, Kronecker
//! product) the state layer builds on.

use num_complex::Complex64;

use crate::error::TelecapError;
use crate::Result;

/// Dense complex matrix with row-major storage.
///
/// Dimensions in this crate stay small (a few thousand at most), so a plain
/// contiguous `Vec` with straightforward loops is both simple and fast
/// enough; no sparse or blocked representation is attempted.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    /// Identity matrix of size `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    /// Build from row-major data, validating length and finiteness.
    pub fn from_data(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(TelecapError::dim_mismatch(
                "matrix entry count",
                rows * cols,
                data.len(),
            ));
        }
        let m = ComplexMatrix { rows, cols, data };
        if !m.is_finite() {
            return Err(TelecapError::InvalidParameter(
                "matrix entries must be finite".into(),
            ));
        }
        Ok(m)
    }

    /// Build entrywise from a closure over `(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        ComplexMatrix { rows, cols, data }
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
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] = v;
    }

    /// Row-major entry slice.
    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub(crate) fn entries_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Matrix product `self · rhs`.
    pub fn mul(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.rows, rhs.cols);
        self.mul_into(rhs, &mut out);
        out
    }

    /// Matrix product into a preallocated output (`out = self · rhs`).
    pub fn mul_into(&self, rhs: &ComplexMatrix, out: &mut ComplexMatrix) {
        assert_eq!(self.cols, rhs.rows, "inner dimensions must agree");
        assert_eq!(out.rows, self.rows);
        assert_eq!(out.cols, rhs.cols);
        let n = rhs.cols;
        out.data.fill(Complex64::new(0.0, 0.0));
        // i-k-j order keeps the inner loop contiguous in both rhs and out.
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[k * n..(k + 1) * n];
                let out_row = &mut out.data[i * n..(i + 1) * n];
                for j in 0..n {
                    out_row[j] += a * rhs_row[j];
                }
            }
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r).conj())
    }

    /// Plain transpose.
    pub fn transpose(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    /// Scalar multiple.
    pub fn scale(&self, s: Complex64) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// Entrywise sum.
    pub fn add(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// In-place `self += a · x`.
    pub fn axpy(&mut self, a: Complex64, x: &ComplexMatrix) {
        assert_eq!((self.rows, self.cols), (x.rows, x.cols));
        for (s, v) in self.data.iter_mut().zip(&x.data) {
            *s += a * v;
        }
    }

    pub fn trace(&self) -> Complex64 {
        assert_eq!(self.rows, self.cols, "trace needs a square matrix");
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise magnitude of `self − rhs`.
    pub fn max_abs_diff(&self, rhs: &ComplexMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest deviation from Hermitian symmetry, `max |a_ij − conj(a_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let mut worst = 0.0f64;
        for r in 0..self.rows {
            for c in r..self.cols {
                let e = (self.get(r, c) - self.get(c, r).conj()).norm();
                worst = worst.max(e);
            }
        }
        worst
    }

    /// Largest entrywise deviation of `self† · self` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let gram = self.adjoint().mul(self);
        let mut worst = 0.0f64;
        for r in 0..self.rows {
            for c in 0..self.cols {
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((gram.get(r, c) - Complex64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    /// Kronecker product with the left operand as the slower-varying index.
    pub fn kron(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.rows * rhs.rows, self.cols * rhs.cols);
        for ar in 0..self.rows {
            for ac in 0..self.cols {
                let a = self.get(ar, ac);
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for br in 0..rhs.rows {
                    for bc in 0..rhs.cols {
                        out.set(ar * rhs.rows + br, ac * rhs.cols + bc, a * rhs.get(br, bc));
                    }
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len());
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows];
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let mut acc = Complex64::new(0.0, 0.0);
            for (a, x) in row.iter().zip(v) {
                acc += a * x;
            }
            out[r] = acc;
        }
        out
    }

    /// True when no entry is NaN or infinite.
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Squared Euclidean norm of a complex vector.
pub fn vec_norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Hermitian inner product `⟨a|b⟩` (conjugate-linear in the first slot).
pub fn vec_inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Kronecker product of two vectors, left factor slower-varying.
pub fn vec_kron(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(x * y);
        }
    }
    out
}
