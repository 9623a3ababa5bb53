//! Dense complex tensors with labeled legs, plus the small dense matrix
//! type used for flattened views, decompositions and isometry checks.
//!
//! Index fusion is row-major throughout: when legs are grouped, the leftmost
//! leg is the most significant digit of the fused index.

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

pub const ZERO: C64 = Complex::new(0.0, 0.0);
pub const ONE: C64 = Complex::new(1.0, 0.0);

/// A dense complex tensor over an ordered list of labeled legs.
///
/// Entries are stored row-major over `shape` (leftmost leg most significant).
/// Labels must be unique within a tensor. Tensors are immutable once built;
/// every operation returns a new value.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    labels: Vec<String>,
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl DenseTensor {
    pub fn new<S: Into<String>>(
        labels: impl IntoIterator<Item = S>,
        shape: Vec<usize>,
        data: Vec<C64>,
    ) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() != shape.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} legs",
                labels.len(),
                shape.len()
            )));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::DuplicateLabel(l.clone()));
            }
        }
        if shape.contains(&0) {
            return Err(Error::DimensionMismatch("zero-dimensional leg".into()));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::DimensionMismatch(format!(
                "shape holds {} entries, data holds {}",
                n,
                data.len()
            )));
        }
        Ok(Self { labels, shape, data })
    }

    pub fn zeros<S: Into<String>>(labels: impl IntoIterator<Item = S>, shape: Vec<usize>) -> Self {
        let n: usize = shape.iter().product();
        Self::new(labels, shape, vec![ZERO; n]).expect("consistent zero tensor")
    }

    /// A rank-0 tensor holding a single value.
    pub fn scalar(v: C64) -> Self {
        Self { labels: vec![], shape: vec![], data: vec![v] }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Value of a rank-0 tensor.
    pub fn scalar_value(&self) -> Result<C64> {
        if self.rank() != 0 {
            return Err(Error::DimensionMismatch(format!(
                "expected rank-0 tensor, got rank {}",
                self.rank()
            )));
        }
        Ok(self.data[0])
    }

    pub fn leg_position(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn leg_dim(&self, label: &str) -> Result<usize> {
        Ok(self.shape[self.leg_position(label)?])
    }

    /// Entrywise complex conjugate (no leg reordering).
    pub fn conj(&self) -> Self {
        Self {
            labels: self.labels.clone(),
            shape: self.shape.clone(),
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            labels: self.labels.clone(),
            shape: self.shape.clone(),
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.labels != other.labels || self.shape != other.shape {
            return Err(Error::DimensionMismatch("tensor add on non-matching legs".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self { labels: self.labels.clone(), shape: self.shape.clone(), data })
    }

    /// Replace every leg label through `map`, keeping order and entries.
    pub fn relabeled(&self, map: impl Fn(&str) -> String) -> Result<Self> {
        Self::new(
            self.labels.iter().map(|l| map(l)).collect::<Vec<_>>(),
            self.shape.clone(),
            self.data.clone(),
        )
    }

    fn strides(shape: &[usize]) -> Vec<usize> {
        let mut strides = vec![1usize; shape.len()];
        for i in (0..shape.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * shape[i + 1];
        }
        strides
    }

    /// Reorder legs to `order` (a permutation of the current labels).
    pub fn permuted(&self, order: &[&str]) -> Result<Self> {
        if order.len() != self.labels.len() {
            return Err(Error::DimensionMismatch("permutation length mismatch".into()));
        }
        let mut perm = Vec::with_capacity(order.len());
        for label in order {
            let p = self.leg_position(label)?;
            if perm.contains(&p) {
                return Err(Error::DuplicateLabel((*label).to_string()));
            }
            perm.push(p);
        }
        if perm.iter().enumerate().all(|(i, &p)| i == p) {
            return Ok(self.clone());
        }
        let old_strides = Self::strides(&self.shape);
        let new_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let new_labels: Vec<String> = perm.iter().map(|&p| self.labels[p].clone()).collect();
        let mut data = vec![ZERO; self.data.len()];
        let mut idx = vec![0usize; new_shape.len()];
        for slot in data.iter_mut() {
            let mut src = 0usize;
            for (i, &ix) in idx.iter().enumerate() {
                src += ix * old_strides[perm[i]];
            }
            *slot = self.data[src];
            // row-major increment of the multi-index
            for i in (0..idx.len()).rev() {
                idx[i] += 1;
                if idx[i] < new_shape[i] {
                    break;
                }
                idx[i] = 0;
            }
        }
        Ok(Self { labels: new_labels, shape: new_shape, data })
    }

    /// Group legs into a matrix: `row_legs` fuse to the row index and
    /// `col_legs` to the column index. Together they must be exactly the
    /// tensor's leg set.
    pub fn flatten(&self, row_legs: &[&str], col_legs: &[&str]) -> Result<Matrix> {
        if row_legs.len() + col_legs.len() != self.labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "flatten uses {} legs, tensor has {}",
                row_legs.len() + col_legs.len(),
                self.labels.len()
            )));
        }
        let order: Vec<&str> = row_legs.iter().chain(col_legs.iter()).copied().collect();
        let permuted = self.permuted(&order)?;
        let rows: usize = permuted.shape[..row_legs.len()].iter().product();
        let cols: usize = permuted.shape[row_legs.len()..].iter().product();
        Matrix::new(rows, cols, permuted.data)
    }

    /// Inverse of [`flatten`](Self::flatten) for the given leg order and dims.
    pub fn unflatten(m: &Matrix, row_legs: &[(&str, usize)], col_legs: &[(&str, usize)]) -> Result<Self> {
        let rows: usize = row_legs.iter().map(|&(_, d)| d).product();
        let cols: usize = col_legs.iter().map(|&(_, d)| d).product();
        if rows != m.rows() || cols != m.cols() {
            return Err(Error::DimensionMismatch(format!(
                "unflatten into {}x{} from a {}x{} matrix",
                rows,
                cols,
                m.rows(),
                m.cols()
            )));
        }
        let labels: Vec<&str> = row_legs.iter().chain(col_legs.iter()).map(|&(l, _)| l).collect();
        let shape: Vec<usize> = row_legs.iter().chain(col_legs.iter()).map(|&(_, d)| d).collect();
        Self::new(labels, shape, m.data().to_vec())
    }

    pub fn to_record(&self) -> TensorRecord {
        TensorRecord {
            leg_labels: self.labels.clone(),
            shape: self.shape.clone(),
            data: self.data.iter().map(|z| [z.re, z.im]).collect(),
        }
    }

    pub fn from_record(record: &TensorRecord) -> Result<Self> {
        Self::new(
            record.leg_labels.clone(),
            record.shape.clone(),
            record.data.iter().map(|&[re, im]| C64::new(re, im)).collect(),
        )
    }
}

/// Contract `a` and `b` over the paired legs `legs_a[i] <-> legs_b[i]`.
///
/// The result carries the remaining legs of `a` (in their original order)
/// followed by the remaining legs of `b`.
pub fn contract(a: &DenseTensor, legs_a: &[&str], b: &DenseTensor, legs_b: &[&str]) -> Result<DenseTensor> {
    if legs_a.len() != legs_b.len() {
        return Err(Error::DimensionMismatch(format!(
            "pairing lists of length {} and {}",
            legs_a.len(),
            legs_b.len()
        )));
    }
    for (i, l) in legs_a.iter().enumerate() {
        if legs_a[..i].contains(l) {
            return Err(Error::DuplicateLabel((*l).to_string()));
        }
    }
    for (i, l) in legs_b.iter().enumerate() {
        if legs_b[..i].contains(l) {
            return Err(Error::DuplicateLabel((*l).to_string()));
        }
    }
    for (la, lb) in legs_a.iter().zip(legs_b) {
        let da = a.leg_dim(la)?;
        let db = b.leg_dim(lb)?;
        if da != db {
            return Err(Error::DimensionMismatch(format!(
                "paired legs `{la}` (dim {da}) and `{lb}` (dim {db})"
            )));
        }
    }
    let keep_a: Vec<&str> =
        a.labels.iter().map(String::as_str).filter(|l| !legs_a.contains(l)).collect();
    let keep_b: Vec<&str> =
        b.labels.iter().map(String::as_str).filter(|l| !legs_b.contains(l)).collect();
    for l in &keep_b {
        if keep_a.contains(l) {
            return Err(Error::DuplicateLabel((*l).to_string()));
        }
    }

    let ma = a.flatten(&keep_a, legs_a)?;
    let mb = b.flatten(legs_b, &keep_b)?;
    let prod = ma.mul(&mb)?;

    let labels: Vec<String> = keep_a
        .iter()
        .chain(keep_b.iter())
        .map(|l| (*l).to_string())
        .collect();
    let shape: Vec<usize> = keep_a
        .iter()
        .map(|l| a.leg_dim(l).unwrap())
        .chain(keep_b.iter().map(|l| b.leg_dim(l).unwrap()))
        .collect();
    DenseTensor::new(labels, shape, prod.into_data())
}

/// Serialized form of a [`DenseTensor`]: flat `[re, im]` pairs in row-major
/// order over the shape.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TensorRecord {
    pub leg_labels: Vec<String>,
    pub shape: Vec<usize>,
    pub data: Vec<[f64; 2]>,
}

/// Dense complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix from {} entries",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        Self::new(rows, cols, entries.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "product of {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = vec![ZERO; self.rows * other.cols];
        for i in 0..self.rows {
            let row_out = &mut out[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let row_b = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in row_out.iter_mut().zip(row_b) {
                    *o += a * b;
                }
            }
        }
        Ok(Self { rows: self.rows, cols: other.cols, data: out })
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
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

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "elementwise op on {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn kron(&self, other: &Self) -> Self {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let mut out = Self::zeros(rows, cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.data[i * self.cols + j];
                if a == ZERO {
                    continue;
                }
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out.data[(i * other.rows + k) * cols + (j * other.cols + l)] =
                            a * other.data[k * other.cols + l];
                    }
                }
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self.data[i * self.cols + i]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        self.max_abs_diff_adjoint()
    }

    fn max_abs_diff_adjoint(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let mut dev: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let d = (self.data[i * self.cols + j] - self.data[j * self.cols + i].conj()).norm();
                dev = dev.max(d);
            }
        }
        dev
    }

    /// Column `j` as an owned vector.
    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    /// Apply self to a vector.
    pub fn mul_vec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix applied to vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![ZERO; self.rows];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            out[i] = row.iter().zip(v).map(|(&a, &b)| a * b).sum();
        }
        Ok(out)
    }

    fn to_na(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.data[i * self.cols + j])
    }
}

/// Result of [`check_isometry`].
#[derive(Clone, Copy, Debug)]
pub struct IsometryCheck {
    pub is_isometry: bool,
    /// Max-entry deviation of `V†V` from the identity.
    pub max_deviation: f64,
}

/// Check whether `v` (with `rows >= cols`) satisfies `V†V = 1` within `tol`.
pub fn check_isometry(v: &Matrix, tol: f64) -> Result<IsometryCheck> {
    if v.rows() < v.cols() {
        return Err(Error::NotIsometry(format!(
            "{}x{} matrix cannot be an isometry (rows < cols)",
            v.rows(),
            v.cols()
        )));
    }
    if !v.is_finite() {
        return Err(Error::NonFinite);
    }
    let gram = v.adjoint().mul(v)?;
    let dev = gram.max_abs_diff(&Matrix::identity(v.cols()));
    Ok(IsometryCheck { is_isometry: dev <= tol, max_deviation: dev })
}

/// Full singular value decomposition `m = U diag(sigma) V†`, with singular
/// values sorted in descending order (deterministic for a fixed input).
pub struct Svd {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v_dagger: Matrix,
}

pub fn svd(m: &Matrix) -> Result<Svd> {
    if !m.is_finite() {
        return Err(Error::NonFinite);
    }
    let na = m.to_na();
    let svd = na.svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let u_sorted = Matrix::from_fn(u.nrows(), order.len(), |i, j| u[(i, order[j])]);
    let vt_sorted = Matrix::from_fn(order.len(), vt.ncols(), |i, j| vt[(order[i], j)]);
    Ok(Svd { u: u_sorted, sigma, v_dagger: vt_sorted })
}

/// Singular values of `m`, descending.
pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    Ok(svd(m)?.sigma)
}

/// Eigendecomposition of a Hermitian matrix: eigenvalues descending, each
/// eigenvector phase-normalized so its largest-magnitude entry is real and
/// positive; exact ties are broken by lexicographic eigenvector comparison.
pub struct Eigh {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, matching `values`.
    pub vectors: Matrix,
}

pub fn eigh(m: &Matrix, tol: f64) -> Result<Eigh> {
    if m.rows() != m.cols() {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition of a {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    let dev = m.hermiticity_deviation();
    if dev > tol {
        return Err(Error::NotHermitian(dev));
    }
    let eig = m.to_na().symmetric_eigen();
    let n = m.rows();
    let mut cols: Vec<(f64, Vec<C64>)> = (0..n)
        .map(|j| {
            let mut v: Vec<C64> = (0..n).map(|i| eig.eigenvectors[(i, j)]).collect();
            canonical_phase(&mut v);
            (eig.eigenvalues[j], v)
        })
        .collect();
    cols.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| lex_cmp(&a.1, &b.1)));
    let values: Vec<f64> = cols.iter().map(|c| c.0).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| cols[j].1[i]);
    Ok(Eigh { values, vectors })
}

fn canonical_phase(v: &mut [C64]) {
    let mut best = 0usize;
    let mut best_norm = 0.0f64;
    for (i, z) in v.iter().enumerate() {
        let n = z.norm();
        if n > best_norm + 1e-12 {
            best_norm = n;
            best = i;
        }
    }
    if best_norm > 0.0 {
        let phase = v[best] / best_norm;
        for z in v.iter_mut() {
            *z /= phase;
        }
    }
}

fn lex_cmp(a: &[C64], b: &[C64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let ord = x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im));
        if ord != std::cmp::Ordering::Equal {
            return ord;
        }
    }
    std::cmp::Ordering::Equal
}
