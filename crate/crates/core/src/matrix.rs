//! Dense and {0,1} matrix kernels.
//!
//! [`DenseMatrix`] is a row-major dense matrix with deterministic summation
//! order in every product: for each output cell the reduction runs over the
//! inner index in ascending order, so repeated runs (and the naive reference
//! implementations used in tests) produce bit-identical results.
//! [`BoolMatrix`] carries the {0,1}-valued graph matrices (adjacency, k-hop
//! neighborhoods, reachability, support masks).

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major dense matrix over a [`Scalar`] type.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Scalar> DenseMatrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: F) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = F::one();
        }
        m
    }

    /// Builds a matrix from a flat row-major buffer, rejecting non-finite
    /// entries and length mismatches.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "from_vec",
                format!("{rows}x{cols}"),
                format!("{} values", data.len()),
            ));
        }
        let m = DenseMatrix { rows, cols, data };
        m.validate_finite("from_vec")?;
        Ok(m)
    }

    pub fn from_rows(rows: Vec<Vec<F>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in &rows {
            if row.len() != c {
                return Err(Error::shape("from_rows", format!("{c} cols"), format!("{} cols", row.len())));
            }
            data.extend_from_slice(row);
        }
        Self::from_vec(r, c, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
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

    fn shape_str(&self) -> String {
        format!("{}x{}", self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> F {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: F) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn validate_finite(&self, context: &str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(context.to_string()))
        }
    }

    /// Standard matrix product. The reduction over the inner dimension runs
    /// in ascending index order for every output cell.
    pub fn matmul(&self, rhs: &DenseMatrix<F>) -> Result<DenseMatrix<F>> {
        if self.cols != rhs.rows {
            return Err(Error::shape("matmul", self.shape_str(), rhs.shape_str()));
        }
        let mut out = DenseMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let lhs_row = self.row(i);
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in lhs_row.iter().enumerate() {
                let rhs_row = rhs.row(k);
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o = *o + a * b;
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product `A x`.
    pub fn matvec(&self, x: &[F]) -> Result<Vec<F>> {
        if self.cols != x.len() {
            return Err(Error::shape("matvec", self.shape_str(), format!("len {}", x.len())));
        }
        let mut out = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            let mut acc = F::zero();
            for (&a, &b) in self.row(i).iter().zip(x) {
                acc = acc + a * b;
            }
            out.push(acc);
        }
        Ok(out)
    }

    /// Transposed matrix-vector product `A^T x`.
    pub fn matvec_t(&self, x: &[F]) -> Result<Vec<F>> {
        if self.rows != x.len() {
            return Err(Error::shape("matvec_t", self.shape_str(), format!("len {}", x.len())));
        }
        let mut out = vec![F::zero(); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + a * xi;
            }
        }
        Ok(out)
    }

    /// Element-wise (Hadamard) product.
    pub fn hadamard(&self, rhs: &DenseMatrix<F>) -> Result<DenseMatrix<F>> {
        if self.shape() != rhs.shape() {
            return Err(Error::shape("hadamard", self.shape_str(), rhs.shape_str()));
        }
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(&a, &b)| a * b)
            .collect();
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn transpose(&self) -> DenseMatrix<F> {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// `self += scale * rhs`, shapes must match.
    pub fn add_scaled_assign(&mut self, rhs: &DenseMatrix<F>, scale: F) -> Result<()> {
        if self.shape() != rhs.shape() {
            return Err(Error::shape("add_scaled_assign", self.shape_str(), rhs.shape_str()));
        }
        for (a, &b) in self.data.iter_mut().zip(&rhs.data) {
            *a = *a + scale * b;
        }
        Ok(())
    }

    /// Accumulates the outer product `u v^T` into `self`, optionally
    /// restricted to the support of `mask` (entries outside stay untouched).
    pub fn add_outer_assign(&mut self, u: &[F], v: &[F], mask: Option<&BoolMatrix>) -> Result<()> {
        if self.rows != u.len() || self.cols != v.len() {
            return Err(Error::shape(
                "add_outer_assign",
                self.shape_str(),
                format!("{}x{}", u.len(), v.len()),
            ));
        }
        for (i, &ui) in u.iter().enumerate() {
            let row = &mut self.data[i * self.cols..(i + 1) * self.cols];
            match mask {
                None => {
                    for (o, &vj) in row.iter_mut().zip(v) {
                        *o = *o + ui * vj;
                    }
                }
                Some(m) => {
                    for (j, (o, &vj)) in row.iter_mut().zip(v).enumerate() {
                        if m.get(i, j) {
                            *o = *o + ui * vj;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn scale_assign(&mut self, s: F) {
        for v in &mut self.data {
            *v = *v * s;
        }
    }

    pub fn fill(&mut self, v: F) {
        self.data.fill(v);
    }

    pub fn is_symmetric(&self) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if self.get(i, j) != self.get(j, i) {
                    return false;
                }
            }
        }
        true
    }
}

/// {0,1}-valued matrix used for graph structure and weight support masks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoolMatrix {
    rows: usize,
    cols: usize,
    data: Vec<bool>,
}

impl BoolMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        BoolMatrix {
            rows,
            cols,
            data: vec![false; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = true;
        }
        m
    }

    pub fn filled(rows: usize, cols: usize, value: bool) -> Self {
        BoolMatrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        BoolMatrix { rows, cols, data }
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

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[bool] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Element-wise AND, the {0,1} Hadamard product.
    pub fn and(&self, rhs: &BoolMatrix) -> Result<BoolMatrix> {
        if self.shape() != rhs.shape() {
            return Err(Error::shape(
                "bool and",
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", rhs.rows, rhs.cols),
            ));
        }
        let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| a && b).collect();
        Ok(BoolMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// Boolean matrix product: `C[i][j] = OR_k (A[i][k] AND B[k][j])`.
    /// This is the clipped product used to grow k-hop neighborhoods.
    pub fn bool_matmul(&self, rhs: &BoolMatrix) -> Result<BoolMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::shape(
                "bool_matmul",
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", rhs.rows, rhs.cols),
            ));
        }
        let mut out = BoolMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for (k, &a) in self.row(i).iter().enumerate() {
                if !a {
                    continue;
                }
                let rhs_row = rhs.row(k);
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o = *o || b;
                }
            }
        }
        Ok(out)
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn is_symmetric(&self) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if self.get(i, j) != self.get(j, i) {
                    return false;
                }
            }
        }
        true
    }

    /// True when every set entry of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BoolMatrix) -> bool {
        self.shape() == other.shape()
            && self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }

    pub fn has_full_diagonal(&self) -> bool {
        self.rows == self.cols && (0..self.rows).all(|i| self.get(i, i))
    }

    /// Converts to a dense matrix of zeros and ones.
    pub fn to_dense<F: Scalar>(&self) -> DenseMatrix<F> {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .map(|&v| if v { F::one() } else { F::zero() })
                .collect(),
        }
    }
}
