//! Dense d-way tensors.
//!
//! Entries are stored column-major by mode index: the linear index of the
//! multi-index `(i_0, ..., i_{d-1})` is `i_0 + n_0 * (i_1 + n_1 * (i_2 + ...))`.
//! Mode indices are zero-based throughout the crate.
//!
//! Dense tensors are the oracle substrate for every low-rank operation and are
//! capped by a process-wide element budget (see [`set_dense_budget`]).

use std::io::{BufRead, Read, Write};
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};

use crate::error::{invalid, Error, Result};

pub type Matrix = DMatrix<f64>;

pub const DEFAULT_DENSE_BUDGET: usize = 10_000_000;

static DENSE_BUDGET: AtomicUsize = AtomicUsize::new(DEFAULT_DENSE_BUDGET);

/// Sets the maximum number of elements a dense tensor may hold.
pub fn set_dense_budget(elements: usize) {
    DENSE_BUDGET.store(elements, Ordering::Relaxed);
}

pub fn dense_budget() -> usize {
    DENSE_BUDGET.load(Ordering::Relaxed)
}

pub(crate) fn check_budget(dims: &[usize]) -> Result<usize> {
    let budget = dense_budget();
    let mut total: usize = 1;
    for &n in dims {
        total = total.checked_mul(n).ok_or(Error::BudgetExceeded {
            requested: usize::MAX,
            budget,
        })?;
    }
    if total > budget {
        return Err(Error::BudgetExceeded {
            requested: total,
            budget,
        });
    }
    Ok(total)
}

/// Ordered, strictly increasing set of mode indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ModeSet(Vec<usize>);

impl ModeSet {
    pub fn new(modes: Vec<usize>, order: usize) -> Result<Self> {
        if modes.is_empty() {
            return Err(invalid("mode set must be nonempty"));
        }
        if modes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid(format!("mode set {modes:?} is not strictly increasing")));
        }
        if *modes.last().unwrap() >= order {
            return Err(invalid(format!(
                "mode set {modes:?} out of bounds for a {order}-way tensor"
            )));
        }
        Ok(Self(modes))
    }

    pub fn range(lo: usize, hi: usize) -> Self {
        Self((lo..hi).collect())
    }

    pub fn modes(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, k: usize) -> bool {
        self.0.binary_search(&k).is_ok()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        validate_dims(dims)?;
        let len = check_budget(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            data: vec![0.0; len],
        })
    }

    pub fn from_vec(dims: &[usize], data: Vec<f64>) -> Result<Self> {
        validate_dims(dims)?;
        let len = check_budget(dims)?;
        if data.len() != len {
            return Err(invalid(format!(
                "data length {} does not match dims {dims:?}",
                data.len()
            )));
        }
        Ok(Self {
            dims: dims.to_vec(),
            data,
        })
    }

    /// Fills a tensor by evaluating `f` at every multi-index.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let mut t = Self::zeros(dims)?;
        let mut idx = vec![0usize; dims.len()];
        for v in t.data.iter_mut() {
            *v = f(&idx);
            increment(&mut idx, dims);
        }
        Ok(t)
    }

    /// Outer product `v_0 ⊗ v_1 ⊗ ... ⊗ v_{d-1}`.
    pub fn outer(vectors: &[&[f64]]) -> Result<Self> {
        let dims: Vec<usize> = vectors.iter().map(|v| v.len()).collect();
        Self::from_fn(&dims, |idx| {
            idx.iter().zip(vectors).map(|(&i, v)| v[i]).product()
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        let mut lin = 0;
        for k in (0..self.dims.len()).rev() {
            lin = lin * self.dims[k] + idx[k];
        }
        lin
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.linear_index(idx)]
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.iter().map(|x| alpha * x).collect(),
        }
    }

    /// Reshapes without touching the data.
    pub fn reshape(self, dims: &[usize]) -> Result<Self> {
        Self::from_vec(dims, self.data)
    }

    fn check_same_dims(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims.clone(),
                got: other.dims.clone(),
            });
        }
        Ok(())
    }

    /// Elementwise `alpha * x + beta * y`.
    pub fn linear_combine(alpha: f64, x: &Self, beta: f64, y: &Self) -> Result<Self> {
        x.check_same_dims(y)?;
        let data = x
            .data
            .iter()
            .zip(&y.data)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Ok(Self {
            dims: x.dims.clone(),
            data,
        })
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Self) -> Result<()> {
        self.check_same_dims(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_same_dims(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    /// Unfolds the tensor: rows run over the multi-index of `modes` (first
    /// mode fastest), columns over the complementary modes in increasing order.
    pub fn matricize(&self, modes: &ModeSet) -> Result<Matrix> {
        let layout = Unfolding::new(&self.dims, modes)?;
        let mut m = Matrix::zeros(layout.rows, layout.cols);
        let mut idx = vec![0usize; self.dims.len()];
        for &v in &self.data {
            let (r, c) = layout.position(&idx);
            m[(r, c)] = v;
            increment(&mut idx, &self.dims);
        }
        Ok(m)
    }

    /// Inverse of [`DenseTensor::matricize`].
    pub fn dematricize(m: &Matrix, dims: &[usize], modes: &ModeSet) -> Result<Self> {
        let layout = Unfolding::new(dims, modes)?;
        if m.nrows() != layout.rows || m.ncols() != layout.cols {
            return Err(Error::DimensionMismatch {
                expected: vec![layout.rows, layout.cols],
                got: vec![m.nrows(), m.ncols()],
            });
        }
        Self::from_fn(dims, |idx| {
            let (r, c) = layout.position(idx);
            m[(r, c)]
        })
    }

    /// Mode-`k` product: replaces `n_k` by the row count of `a`.
    pub fn mode_apply(&self, k: usize, a: &Matrix) -> Result<Self> {
        if k >= self.dims.len() {
            return Err(invalid(format!("mode {k} out of range")));
        }
        let nk = self.dims[k];
        if a.ncols() != nk {
            return Err(Error::DimensionMismatch {
                expected: vec![a.nrows(), nk],
                got: vec![a.nrows(), a.ncols()],
            });
        }
        let m = a.nrows();
        let mut dims = self.dims.clone();
        dims[k] = m;
        let mut out = Self::zeros(&dims)?;
        let left: usize = self.dims[..k].iter().product();
        let right: usize = self.dims[k + 1..].iter().product();
        if left == 1 {
            let x = DMatrixView::from_slice(&self.data, nk, right);
            let mut y = DMatrixViewMut::from_slice(&mut out.data, m, right);
            y.gemm(1.0, a, &x, 0.0);
        } else {
            let at = a.transpose();
            for r in 0..right {
                let x = DMatrixView::from_slice(&self.data[r * left * nk..(r + 1) * left * nk], left, nk);
                let mut y =
                    DMatrixViewMut::from_slice(&mut out.data[r * left * m..(r + 1) * left * m], left, m);
                y.gemm(1.0, &x, &at, 0.0);
            }
        }
        Ok(out)
    }

    /// Mode-`k` product with the diagonal matrix `diag(d)`.
    pub fn mode_scale(&self, k: usize, d: &[f64]) -> Result<Self> {
        if k >= self.dims.len() || d.len() != self.dims[k] {
            return Err(invalid(format!("diagonal of length {} does not fit mode {k}", d.len())));
        }
        let left: usize = self.dims[..k].iter().product();
        let nk = self.dims[k];
        let mut out = self.clone();
        for (chunk_idx, chunk) in out.data.chunks_mut(left).enumerate() {
            let s = d[chunk_idx % nk];
            for v in chunk {
                *v *= s;
            }
        }
        Ok(out)
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# htstep tensor v1")?;
        writeln!(w, "{}", self.dims.len())?;
        let dims: Vec<String> = self.dims.iter().map(|n| n.to_string()).collect();
        writeln!(w, "{}", dims.join(" "))?;
        for v in &self.data {
            writeln!(w, "{v:e}")?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r
            .lines()
            .filter(|l| l.as_ref().map(|s| !s.trim_start().starts_with('#') && !s.trim().is_empty()).unwrap_or(true));
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::Format("unexpected end of tensor file".into()))?
                .map_err(Error::from)
        };
        let d: usize = parse_field(&next()?)?;
        let dims: Vec<usize> = next()?
            .split_whitespace()
            .map(parse_field)
            .collect::<Result<_>>()?;
        if dims.len() != d {
            return Err(Error::Format(format!("header declares {d} modes, found {}", dims.len())));
        }
        let len = check_budget(&dims)?;
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(parse_field(&next()?)?);
        }
        Self::from_vec(&dims, data)
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(TENSOR_MAGIC)?;
        w.write_all(&(self.dims.len() as u32).to_le_bytes())?;
        for &n in &self.dims {
            w.write_all(&(n as u64).to_le_bytes())?;
        }
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != TENSOR_MAGIC {
            return Err(Error::Format("not a binary tensor file".into()));
        }
        let d = read_u32(&mut r)? as usize;
        let dims = (0..d)
            .map(|_| read_u64(&mut r).map(|n| n as usize))
            .collect::<Result<Vec<_>>>()?;
        validate_dims(&dims)?;
        let len = check_budget(&dims)?;
        let data = (0..len).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
        Self::from_vec(&dims, data)
    }
}

const TENSOR_MAGIC: &[u8; 8] = b"HTSTTNS1";

fn parse_field<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Format(format!("cannot parse {s:?}")))
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() {
        return Err(invalid("a tensor needs at least one mode"));
    }
    if dims.contains(&0) {
        return Err(invalid(format!("all dimensions must be positive, got {dims:?}")));
    }
    Ok(())
}

/// Advances a column-major multi-index.
pub(crate) fn increment(idx: &mut [usize], dims: &[usize]) {
    for k in 0..idx.len() {
        idx[k] += 1;
        if idx[k] < dims[k] {
            return;
        }
        idx[k] = 0;
    }
}

struct Unfolding {
    rows: usize,
    cols: usize,
    row_stride: Vec<usize>,
    col_stride: Vec<usize>,
}

impl Unfolding {
    fn new(dims: &[usize], modes: &ModeSet) -> Result<Self> {
        ModeSet::new(modes.modes().to_vec(), dims.len())?;
        let mut row_stride = vec![0; dims.len()];
        let mut col_stride = vec![0; dims.len()];
        let (mut rows, mut cols) = (1, 1);
        for (k, &n) in dims.iter().enumerate() {
            if modes.contains(k) {
                row_stride[k] = rows;
                rows *= n;
            } else {
                col_stride[k] = cols;
                cols *= n;
            }
        }
        Ok(Self {
            rows,
            cols,
            row_stride,
            col_stride,
        })
    }

    fn position(&self, idx: &[usize]) -> (usize, usize) {
        let mut r = 0;
        let mut c = 0;
        for (k, &i) in idx.iter().enumerate() {
            r += i * self.row_stride[k];
            c += i * self.col_stride[k];
        }
        (r, c)
    }
}
