//! Dense row-major `f32` tensors.

use std::fmt;

/// A dense, row-major tensor of `f32` values.
///
/// Images travel through the network in `[batch, channels, height, width]`
/// layout; token sequences in `[rows, features]`.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "shape {shape:?} does not match buffer of {} values",
            data.len()
        );
        Self { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![0.0; n] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dim(&self, axis: usize) -> usize {
        self.shape[axis]
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), self.data.len());
        self.shape = shape;
        self
    }

    /// Splits the leading axis into `[rows, rest]` and returns row `i`.
    pub fn row(&self, i: usize) -> &[f32] {
        let stride = self.data.len() / self.shape[0];
        &self.data[i * stride..(i + 1) * stride]
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Number of values per leading-axis entry.
    pub fn row_len(&self) -> usize {
        if self.shape[0] == 0 {
            0
        } else {
            self.data.len() / self.shape[0]
        }
    }

    /// Stacks equally shaped tensors along a new leading axis.
    pub fn stack(items: &[Tensor]) -> Self {
        assert!(!items.is_empty(), "cannot stack zero tensors");
        let inner = items[0].shape.clone();
        let mut data = Vec::with_capacity(items.len() * items[0].numel());
        for t in items {
            assert_eq!(t.shape, inner, "stack requires identical shapes");
            data.extend_from_slice(&t.data);
        }
        let mut shape = vec![items.len()];
        shape.extend(inner);
        Self { shape, data }
    }

    /// Concatenates tensors along the leading axis.
    pub fn concat_rows(items: &[&Tensor]) -> Self {
        assert!(!items.is_empty());
        let tail = &items[0].shape[1..];
        let mut rows = 0;
        let mut data = Vec::new();
        for t in items {
            assert_eq!(&t.shape[1..], tail, "concat requires matching trailing dims");
            rows += t.shape[0];
            data.extend_from_slice(&t.data);
        }
        let mut shape = vec![rows];
        shape.extend_from_slice(tail);
        Self { shape, data }
    }

    /// Returns rows `[start, end)` of the leading axis.
    pub fn slice_rows(&self, start: usize, end: usize) -> Self {
        let stride = self.row_len();
        let mut shape = self.shape.clone();
        shape[0] = end - start;
        Self { shape, data: self.data[start * stride..end * stride].to_vec() }
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}", self.shape)?;
        if self.data.len() <= 16 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}
