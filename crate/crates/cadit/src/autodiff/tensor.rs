use thiserror::Error;

/// Errors raised by tensor construction and tape operations.
#[derive(Debug, Error)]
pub enum AdError {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    ShapeMismatch { op: &'static str, lhs: Vec<usize>, rhs: Vec<usize> },
    #[error("{op}: invalid input shape {shape:?}: {reason}")]
    BadShape { op: &'static str, shape: Vec<usize>, reason: String },
    #[error("{op}: produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("backward requires a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
    #[error("backward called twice without zero_grads")]
    BackwardTwice,
    #[error("backward on an empty tape")]
    EmptyTape,
    #[error("tensor data length {len} does not match shape {shape:?}")]
    DataLength { len: usize, shape: Vec<usize> },
    #[error("{op}: {reason}")]
    Invalid { op: &'static str, reason: String },
}

pub type AdResult<T> = Result<T, AdError>;

/// Dense n-dimensional array of `f64` in row-major order.
///
/// Plain values are immutable once built and freely shareable across threads;
/// gradient participation happens through [`crate::autodiff::Tape`] handles,
/// never on the value itself.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![0.0; n] }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![value; n] }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor { shape: vec![1], data: vec![value] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> AdResult<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(AdError::DataLength { len: data.len(), shape: shape.to_vec() });
        }
        Ok(Tensor { shape: shape.to_vec(), data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
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

    /// The single value of a scalar (one-element) tensor.
    pub fn item(&self) -> AdResult<f64> {
        if self.numel() != 1 {
            return Err(AdError::NonScalarLoss { shape: self.shape.clone() });
        }
        Ok(self.data[0])
    }

    pub fn is_finite(&self) -> bool {
        // One vectorizable pass: any NaN/Inf propagates into the sum.
        self.data.iter().map(|v| v.abs()).sum::<f64>().is_finite()
    }

    /// Reinterpret with a new shape of equal element count.
    pub fn reshaped(&self, shape: &[usize]) -> AdResult<Self> {
        Tensor::from_vec(shape, self.data.clone())
    }

    /// Row `i` of a rank-2 tensor.
    pub fn row(&self, i: usize) -> &[f64] {
        debug_assert_eq!(self.rank(), 2);
        let w = self.shape[1];
        &self.data[i * w..(i + 1) * w]
    }

    /// Stack rank-(r-1) slices of `self` selected by `indices` along axis 0.
    pub fn gather_rows(&self, indices: &[usize]) -> Tensor {
        assert!(self.rank() >= 1);
        let row: usize = self.shape[1..].iter().product();
        let mut data = Vec::with_capacity(indices.len() * row);
        for &i in indices {
            data.extend_from_slice(&self.data[i * row..(i + 1) * row]);
        }
        let mut shape = self.shape.clone();
        shape[0] = indices.len();
        Tensor { shape, data }
    }

    /// Argmax per row of a rank-2 tensor, lowest index winning ties.
    pub fn argmax_rows(&self) -> Vec<usize> {
        debug_assert_eq!(self.rank(), 2);
        (0..self.shape[0])
            .map(|i| {
                let r = self.row(i);
                let mut best = 0;
                for (j, &v) in r.iter().enumerate() {
                    if v > r[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }
}
