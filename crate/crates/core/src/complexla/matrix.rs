//! Dense row-major complex matrices and vectors.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// A complex column vector.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ComplexVector(Vec<C64>);

impl ComplexVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![ZERO; len])
    }

    pub fn from_vec(entries: Vec<C64>) -> Self {
        Self(entries)
    }

    pub fn from_real(entries: &[f64]) -> Self {
        Self(entries.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Canonical basis vector `e_index`.
    pub fn unit(len: usize, index: usize) -> Self {
        let mut v = Self::zeros(len);
        v.0[index] = ONE;
        v
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, C64> {
        self.0.iter()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Inner product `selfᴴ other`.
    pub fn dot(&self, other: &Self) -> C64 {
        assert_eq!(self.len(), other.len(), "dot: length mismatch");
        self.0
            .iter()
            .zip(&other.0)
            .fold(ZERO, |acc, (a, b)| acc + a.conj() * b)
    }

    pub fn conj(&self) -> Self {
        Self(self.0.iter().map(|z| z.conj()).collect())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(self.0.iter().map(|z| z * s).collect())
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self(self.0.iter().map(|z| z * s).collect())
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: C64, x: &Self) {
        assert_eq!(self.len(), x.len(), "axpy: length mismatch");
        for (y, xi) in self.0.iter_mut().zip(&x.0) {
            *y += a * xi;
        }
    }

    /// Unit-norm copy; `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self.scale_real(1.0 / n))
    }

    /// Stacks `self` on top of `other`.
    pub fn concat(&self, other: &Self) -> Self {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Self(v)
    }

    pub fn outer(&self, other: &Self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.len(), other.len(), |i, j| self.0[i] * other.0[j].conj())
    }
}

impl From<Vec<C64>> for ComplexVector {
    fn from(v: Vec<C64>) -> Self {
        Self(v)
    }
}

impl FromIterator<C64> for ComplexVector {
    fn from_iter<I: IntoIterator<Item = C64>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl Index<usize> for ComplexVector {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for ComplexVector {
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.0[i]
    }
}

impl Add for &ComplexVector {
    type Output = ComplexVector;
    fn add(self, rhs: &ComplexVector) -> ComplexVector {
        assert_eq!(self.len(), rhs.len(), "add: length mismatch");
        self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect()
    }
}

impl Sub for &ComplexVector {
    type Output = ComplexVector;
    fn sub(self, rhs: &ComplexVector) -> ComplexVector {
        assert_eq!(self.len(), rhs.len(), "sub: length mismatch");
        self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect()
    }
}

/// A dense complex matrix stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
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

    /// Builds from row-major entries; panics when the length is not `rows * cols`.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), rows * cols, "entries length must equal rows × cols");
        Self { rows, cols, data }
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        Self::from_fn(r, c, |i, j| C64::new(rows[i][j], 0.0))
    }

    pub fn diag_real(d: &[f64]) -> Self {
        Self::from_fn(d.len(), d.len(), |i, j| {
            if i == j {
                C64::new(d[i], 0.0)
            } else {
                ZERO
            }
        })
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[ComplexVector]) -> Self {
        let rows = cols.first().map_or(0, |c| c.len());
        assert!(cols.iter().all(|c| c.len() == rows), "columns must share a length");
        Self::from_fn(rows, cols.len(), |i, j| cols[j][i])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> ComplexVector {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &ComplexVector) {
        assert_eq!(v.len(), self.rows);
        for i in 0..self.rows {
            self[(i, j)] = v[i];
        }
    }

    /// Conjugate transpose.
    pub fn h(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diag(&self) -> f64 {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)].norm())
            .fold(0.0, f64::max)
    }

    /// `‖A − Aᴴ‖_F`, zero for exactly Hermitian input.
    pub fn hermitian_defect(&self) -> f64 {
        assert!(self.is_square());
        let mut acc = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                acc += (self[(i, j)] - self[(j, i)].conj()).norm_sqr();
            }
        }
        acc.sqrt()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        for i in 0..self.rows {
            for j in i..self.cols {
                if (self[(i, j)] - self[(j, i)].conj()).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Replaces `A` by `(A + Aᴴ)/2`.
    pub fn symmetrize(&mut self) {
        assert!(self.is_square());
        let n = self.rows;
        for i in 0..n {
            let d = self[(i, i)].re;
            self[(i, i)] = C64::new(d, 0.0);
            for j in (i + 1)..n {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)].conj());
                self[(i, j)] = avg;
                self[(j, i)] = avg.conj();
            }
        }
    }

    pub fn mul_vec(&self, x: &ComplexVector) -> ComplexVector {
        assert_eq!(self.cols, x.len(), "mul_vec: dimension mismatch");
        let xs = x.as_slice();
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(xs)
                    .fold(ZERO, |acc, (a, b)| acc + a * b)
            })
            .collect()
    }

    /// `Aᴴ x` without forming the conjugate transpose.
    pub fn h_mul_vec(&self, x: &ComplexVector) -> ComplexVector {
        assert_eq!(self.rows, x.len(), "h_mul_vec: dimension mismatch");
        let mut out = vec![ZERO; self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            if xi == ZERO {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a.conj() * xi;
            }
        }
        ComplexVector::from_vec(out)
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul: dimension mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, b) in dst.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `Aᴴ B`.
    pub fn h_matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.rows, rhs.rows, "h_matmul: dimension mismatch");
        let mut out = Self::zeros(self.cols, rhs.cols);
        for k in 0..self.rows {
            for i in 0..self.cols {
                let a = self[(k, i)].conj();
                if a == ZERO {
                    continue;
                }
                let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, b) in dst.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self += c · x yᴴ`
    pub fn add_outer(&mut self, c: C64, x: &ComplexVector, y: &ComplexVector) {
        assert_eq!(self.rows, x.len());
        assert_eq!(self.cols, y.len());
        for i in 0..self.rows {
            let cx = c * x[i];
            let row = &mut self.data[i * self.cols..(i + 1) * self.cols];
            for (o, yj) in row.iter_mut().zip(y.iter()) {
                *o += cx * yj.conj();
            }
        }
    }

    /// Copies `block` into `self` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Self) {
        assert!(r0 + block.rows <= self.rows && c0 + block.cols <= self.cols);
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    /// Horizontal concatenation `[self other]`.
    pub fn hstack(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows);
        Self::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self[(i, j)]
            } else {
                other[(i, j - self.cols)]
            }
        })
    }

    pub fn nnz(&self) -> usize {
        self.data.iter().filter(|z| **z != ZERO).count()
    }
}

/// Conjugate transpose of `a`.
pub fn hermitian(a: &ComplexMatrix) -> ComplexMatrix {
    a.h()
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.shape(), rhs.shape(), "add: shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.shape(), rhs.shape(), "sub: shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl Mul<&ComplexVector> for &ComplexMatrix {
    type Output = ComplexVector;
    fn mul(self, rhs: &ComplexVector) -> ComplexVector {
        self.mul_vec(rhs)
    }
}
