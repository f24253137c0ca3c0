//! Dense N-way tensor storage and mode-k canonical matricization.
//!
//! A tensor `X` with extents `I_1 x ... x I_N` is stored in one flat buffer
//! with the first index fastest: the 0-based multi-index `(i_1, ..., i_N)`
//! lives at `i_1 + i_2*I_1 + i_3*I_1*I_2 + ...`. Under this linearization the
//! mode-k canonical matricization `X_<k>` (first k modes as rows, the rest as
//! columns) is the *same* buffer read as an `m_k x n_k` column-major matrix
//! with `m_k = I_1*...*I_k` and `n_k = I_{k+1}*...*I_N`, so matricize/fold
//! are exact bijections with no index arithmetic at all.

use crate::error::{Error, Result};
use crate::mat::Matrix;

/// Dense real tensor of order N >= 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    /// All-zero tensor with the given extents.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        let len = check_dims(dims)?;
        Ok(DenseTensor {
            dims: dims.to_vec(),
            data: vec![0.0; len],
        })
    }

    /// Constant tensor.
    pub fn filled(dims: &[usize], value: f64) -> Result<Self> {
        let len = check_dims(dims)?;
        Ok(DenseTensor {
            dims: dims.to_vec(),
            data: vec![value; len],
        })
    }

    /// Wraps an existing flat buffer in the fixed linearization.
    pub fn from_vec(dims: &[usize], data: Vec<f64>) -> Result<Self> {
        let len = check_dims(dims)?;
        if data.len() != len {
            return Err(Error::InvalidArgument(format!(
                "buffer holds {} entries but dims {:?} require {}",
                data.len(),
                dims,
                len
            )));
        }
        Ok(DenseTensor {
            dims: dims.to_vec(),
            data,
        })
    }

    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let mut t = DenseTensor::zeros(dims)?;
        let mut idx = vec![0usize; dims.len()];
        for flat in 0..t.len() {
            t.data[flat] = f(&idx);
            increment_index(&mut idx, dims);
            let _ = flat;
        }
        Ok(t)
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Flat offset of a 0-based multi-index.
    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.dims.len());
        let mut flat = 0;
        let mut stride = 1;
        for (i, d) in index.iter().zip(&self.dims) {
            debug_assert!(i < d);
            flat += i * stride;
            stride *= d;
        }
        flat
    }

    /// Entry at a 0-based multi-index.
    pub fn at(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    pub fn at_mut(&mut self, index: &[usize]) -> &mut f64 {
        let o = self.offset(index);
        &mut self.data[o]
    }

    /// Frobenius norm: square root of the sum of squared entries.
    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Elementwise product with an equally shaped tensor.
    pub fn hadamard(&self, other: &DenseTensor) -> Result<DenseTensor> {
        if self.dims != other.dims {
            return Err(Error::InvalidArgument(format!(
                "hadamard shape mismatch: {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .collect();
        Ok(DenseTensor {
            dims: self.dims.clone(),
            data,
        })
    }
}

fn check_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() {
        return Err(Error::InvalidArgument("tensor order must be >= 1".into()));
    }
    let mut len = 1usize;
    for &d in dims {
        if d == 0 {
            return Err(Error::InvalidArgument(format!(
                "zero extent in dims {dims:?}"
            )));
        }
        len = len.checked_mul(d).ok_or_else(|| {
            Error::InvalidArgument(format!("element count overflows for dims {dims:?}"))
        })?;
    }
    Ok(len)
}

/// Advances a 0-based multi-index by one in the fixed linearization order.
pub(crate) fn increment_index(index: &mut [usize], dims: &[usize]) {
    for (i, d) in index.iter_mut().zip(dims) {
        *i += 1;
        if *i < *d {
            return;
        }
        *i = 0;
    }
}

/// Mode-k canonical matricization of a tensor: the first `mode` extents
/// enumerate the rows, the remaining ones the columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeMatrix {
    /// Number of leading modes folded into the rows; `1 <= mode <= N-1`.
    pub mode: usize,
    /// Extents of the originating tensor.
    pub parent_dims: Vec<usize>,
    /// The `m_k x n_k` matrix sharing the tensor's flat buffer.
    pub mat: Matrix,
}

impl ModeMatrix {
    pub fn rows(&self) -> usize {
        self.mat.rows()
    }

    pub fn cols(&self) -> usize {
        self.mat.cols()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mat.frobenius_sq().sqrt()
    }

    pub fn hadamard(&self, other: &ModeMatrix) -> Result<ModeMatrix> {
        if self.rows() != other.rows() || self.cols() != other.cols() {
            return Err(Error::InvalidArgument(format!(
                "hadamard shape mismatch: {}x{} vs {}x{}",
                self.rows(),
                self.cols(),
                other.rows(),
                other.cols()
            )));
        }
        let data = self
            .mat
            .as_slice()
            .iter()
            .zip(other.mat.as_slice())
            .map(|(a, b)| a * b)
            .collect();
        Ok(ModeMatrix {
            mode: self.mode,
            parent_dims: self.parent_dims.clone(),
            mat: Matrix::from_vec(self.rows(), self.cols(), data),
        })
    }
}

/// Row and column counts of the mode-k matricization of `dims`.
pub fn mode_shape(dims: &[usize], mode: usize) -> (usize, usize) {
    let rows = dims[..mode].iter().product();
    let cols = dims[mode..].iter().product();
    (rows, cols)
}

/// Reshapes `t` into its mode-k canonical matrix, `1 <= k <= N-1`.
pub fn matricize(t: &DenseTensor, mode: usize) -> Result<ModeMatrix> {
    if mode == 0 || mode >= t.order() {
        return Err(Error::InvalidArgument(format!(
            "mode {} out of range for order-{} tensor",
            mode,
            t.order()
        )));
    }
    let (rows, cols) = mode_shape(t.dims(), mode);
    Ok(ModeMatrix {
        mode,
        parent_dims: t.dims.clone(),
        mat: Matrix::from_vec(rows, cols, t.data.clone()),
    })
}

/// Inverse of [`matricize`]: rebuilds the tensor recorded in `parent_dims`.
pub fn fold_matricize(m: &ModeMatrix) -> Result<DenseTensor> {
    let (rows, cols) = mode_shape(&m.parent_dims, m.mode);
    if m.mode == 0 || m.mode >= m.parent_dims.len() || rows != m.rows() || cols != m.cols() {
        return Err(Error::InvalidArgument(format!(
            "mode matrix {}x{} (mode {}) does not match parent dims {:?}",
            m.rows(),
            m.cols(),
            m.mode,
            m.parent_dims
        )));
    }
    DenseTensor::from_vec(&m.parent_dims, m.mat.as_slice().to_vec())
}
