//! Small dense linear algebra: row-major matrices, order-3/4 tensors and a
//! partial-pivoting LU solver with a reciprocal condition number estimate.
//!
//! Coupling problems here have at most a few dozen unknowns, so everything is
//! dense and allocation is kept straightforward.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Pivots smaller than this fraction of the largest matrix entry are treated
/// as zero.
pub const SINGULARITY_THRESHOLD: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims(
                "DenseMatrix::from_vec",
                rows * cols,
                data.len(),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows. Panics on ragged input, so this is
    /// meant for literals.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn column(values: &[f64]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
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
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
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

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::dims(
                "DenseMatrix::add",
                self.rows * self.cols,
                other.rows * other.cols,
            ));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::dims("DenseMatrix::matmul", self.cols, other.rows));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                for (o, b) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::dims("DenseMatrix::matvec", self.cols, x.len()));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Order-3 tensor, row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: (usize, usize, usize),
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(d1: usize, d2: usize, d3: usize) -> Self {
        Self {
            dims: (d1, d2, d3),
            data: vec![0.0; d1 * d2 * d3],
        }
    }

    pub fn from_vec(dims: (usize, usize, usize), data: Vec<f64>) -> Result<Self> {
        let len = dims.0 * dims.1 * dims.2;
        if data.len() != len {
            return Err(Error::dims("Tensor3::from_vec", len, data.len()));
        }
        Ok(Self { dims, data })
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Contiguous slice over the last axis at `(i, j)`.
    #[inline]
    pub fn fiber(&self, i: usize, j: usize) -> &[f64] {
        let start = (i * self.dims.1 + j) * self.dims.2;
        &self.data[start..start + self.dims.2]
    }

    #[inline]
    pub fn fiber_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let start = (i * self.dims.1 + j) * self.dims.2;
        &mut self.data[start..start + self.dims.2]
    }
}

impl Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j, k): (usize, usize, usize)) -> &f64 {
        debug_assert!(i < self.dims.0 && j < self.dims.1 && k < self.dims.2);
        &self.data[(i * self.dims.1 + j) * self.dims.2 + k]
    }
}

impl IndexMut<(usize, usize, usize)> for Tensor3 {
    #[inline]
    fn index_mut(&mut self, (i, j, k): (usize, usize, usize)) -> &mut f64 {
        debug_assert!(i < self.dims.0 && j < self.dims.1 && k < self.dims.2);
        &mut self.data[(i * self.dims.1 + j) * self.dims.2 + k]
    }
}

/// Order-4 tensor, row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    dims: (usize, usize, usize, usize),
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(d1: usize, d2: usize, d3: usize, d4: usize) -> Self {
        Self {
            dims: (d1, d2, d3, d4),
            data: vec![0.0; d1 * d2 * d3 * d4],
        }
    }

    /// Identity over the paired axes: `t[a,b,a,b] = 1`.
    pub fn identity(d1: usize, d2: usize) -> Self {
        let mut t = Self::zeros(d1, d2, d1, d2);
        for a in 0..d1 {
            for b in 0..d2 {
                t[(a, b, a, b)] = 1.0;
            }
        }
        t
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        self.dims
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    fn offset(&self, (a, b, c, d): (usize, usize, usize, usize)) -> usize {
        debug_assert!(a < self.dims.0 && b < self.dims.1 && c < self.dims.2 && d < self.dims.3);
        ((a * self.dims.1 + b) * self.dims.2 + c) * self.dims.3 + d
    }
}

impl Index<(usize, usize, usize, usize)> for Tensor4 {
    type Output = f64;

    #[inline]
    fn index(&self, idx: (usize, usize, usize, usize)) -> &f64 {
        &self.data[self.offset(idx)]
    }
}

impl IndexMut<(usize, usize, usize, usize)> for Tensor4 {
    #[inline]
    fn index_mut(&mut self, idx: (usize, usize, usize, usize)) -> &mut f64 {
        let o = self.offset(idx);
        &mut self.data[o]
    }
}

/// LU factorization `P·A = L·U` with partial pivoting, stored compactly.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    norm_one: f64,
}

impl LuFactors {
    pub fn factor(m: &DenseMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dims("LuFactors::factor", m.rows(), m.cols()));
        }
        let n = m.rows();
        let threshold = SINGULARITY_THRESHOLD * m.max_abs();
        let mut lu = m.as_slice().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let (p, pivot) =
                (k..n)
                    .map(|i| (i, lu[i * n + k].abs()))
                    .fold(
                        (k, -1.0),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if !(pivot > threshold) {
                return Err(Error::SingularMatrix {
                    column: k,
                    pivot,
                    threshold,
                });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let diag = lu[k * n + k];
            for i in k + 1..n {
                let factor = lu[i * n + k] / diag;
                lu[i * n + k] = factor;
                if factor != 0.0 {
                    for j in k + 1..n {
                        lu[i * n + j] -= factor * lu[k * n + j];
                    }
                }
            }
        }
        Ok(Self {
            n,
            lu,
            perm,
            norm_one: m.norm_one(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if rhs.len() != n {
            return Err(Error::dims("LuFactors::solve", n, rhs.len()));
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        Ok(x)
    }

    pub fn inverse(&self) -> DenseMatrix {
        let n = self.n;
        let mut inv = DenseMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e).expect("unit vector has the right length");
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }

    /// Reciprocal 1-norm condition number, `1 / (‖A‖₁ ‖A⁻¹‖₁)`.
    ///
    /// Computed from the explicit inverse, which is affordable at the sizes
    /// handled here and makes the estimate exact.
    pub fn rcond(&self) -> f64 {
        if self.n == 0 {
            return 1.0;
        }
        let inv_norm = self.inverse().norm_one();
        if self.norm_one == 0.0 || inv_norm == 0.0 {
            0.0
        } else {
            1.0 / (self.norm_one * inv_norm)
        }
    }
}

/// Solves `m·x = rhs` with partial pivoting.
pub fn lu_solve(m: &DenseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    if rhs.len() != m.rows() {
        return Err(Error::dims("lu_solve", m.rows(), rhs.len()));
    }
    LuFactors::factor(m)?.solve(rhs)
}

/// `out[i] = Σ_j Σ_p g[i,j,p]·xi[j,p]`.
pub fn contract_gp(g: &Tensor3, xi: &DenseMatrix) -> Result<Vec<f64>> {
    let (r, c, np1) = g.dims();
    if xi.rows() != c {
        return Err(Error::dims("contract_gp (channels)", c, xi.rows()));
    }
    if xi.cols() != np1 {
        return Err(Error::dims("contract_gp (degree)", np1, xi.cols()));
    }
    Ok((0..r)
        .map(|i| {
            (0..c)
                .map(|j| {
                    g.fiber(i, j)
                        .iter()
                        .zip(xi.row(j))
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
                })
                .sum()
        })
        .collect())
}

/// `out[j,p] = Σ_{j2,q} c4[j,p,j2,q]·xi[j2,q]`.
pub fn contract_shift(c4: &Tensor4, xi: &DenseMatrix) -> Result<DenseMatrix> {
    let (c, np1, c2, nq) = c4.dims();
    if c2 != xi.rows() || c != xi.rows() {
        return Err(Error::dims("contract_shift (channels)", c2, xi.rows()));
    }
    if nq != xi.cols() || np1 != xi.cols() {
        return Err(Error::dims("contract_shift (degree)", nq, xi.cols()));
    }
    let mut out = DenseMatrix::zeros(c, np1);
    for j in 0..c {
        for p in 0..np1 {
            let mut s = 0.0;
            for j2 in 0..c2 {
                for q in 0..nq {
                    s += c4[(j, p, j2, q)] * xi[(j2, q)];
                }
            }
            out[(j, p)] = s;
        }
    }
    Ok(out)
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
