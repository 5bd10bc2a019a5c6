//! Row-major, shape-tagged dense array of scalars.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// The numerical substrate for every token sequence and weight matrix in
/// this crate. Two invariants hold after construction and after every
/// public numerics operation: `data.len() == shape.iter().product()`, and
/// all values are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor<T: Scalar> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> DenseTensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::Dimension(format!(
                "zero dimension in shape {shape:?}"
            )));
        }
        let expect: usize = shape.iter().product();
        if data.len() != expect {
            return Err(Error::Dimension(format!(
                "data length {} != product of shape {:?}",
                data.len(),
                shape
            )));
        }
        let t = Self { shape, data };
        t.debug_check_finite();
        Ok(t)
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![T::ZERO; n],
        }
    }

    /// Identity matrix, mostly for tests.
    pub fn eye(n: usize) -> Self {
        let mut t = Self::zeros(vec![n, n]);
        for i in 0..n {
            t.data[i * n + i] = T::ONE;
        }
        t
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::new(vec![r, c], rows.concat())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Rows of a rank-2 tensor.
    pub fn rows(&self) -> usize {
        assert_eq!(self.shape.len(), 2, "rows() requires rank 2");
        self.shape[0]
    }

    /// Columns of a rank-2 tensor.
    pub fn cols(&self) -> usize {
        assert_eq!(self.shape.len(), 2, "cols() requires rank 2");
        self.shape[1]
    }

    /// Borrow row `r` of a rank-2 tensor.
    pub fn row(&self, r: usize) -> &[T] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        let c = self.cols();
        &mut self.data[r * c..(r + 1) * c]
    }

    pub fn at(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols() + c]
    }

    /// Copy of rows `range` as a new rank-2 tensor.
    pub fn slice_rows(&self, start: usize, end: usize) -> Self {
        let c = self.cols();
        Self {
            shape: vec![end - start, c],
            data: self.data[start * c..end * c].to_vec(),
        }
    }

    /// Stack rank-2 tensors with equal column counts along rows.
    pub fn concat_rows(parts: &[&Self]) -> Result<Self> {
        let c = parts
            .first()
            .ok_or_else(|| Error::Dimension("concat of zero tensors".into()))?
            .cols();
        if parts.iter().any(|p| p.cols() != c) {
            return Err(Error::Dimension("column mismatch in concat".into()));
        }
        let rows = parts.iter().map(|p| p.rows()).sum();
        let mut data = Vec::with_capacity(rows * c);
        for p in parts {
            data.extend_from_slice(&p.data);
        }
        Ok(Self {
            shape: vec![rows, c],
            data,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Finiteness is asserted in debug builds after every public operation.
    pub(crate) fn debug_check_finite(&self) {
        debug_assert!(self.is_finite(), "non-finite value in tensor");
    }

    /// Little-endian bytes of the payload, in row-major order.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() * std::mem::size_of::<T>());
        for &x in &self.data {
            x.write_le_bytes(&mut out);
        }
        out
    }

    pub fn map<F: Fn(T) -> T>(&self, f: F) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Elementwise sum; shapes must match.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::Dimension(format!(
                "add shape mismatch {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a + b)
            .collect();
        Ok(Self {
            shape: self.shape.clone(),
            data,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_length_mismatch() {
        assert!(DenseTensor::<f32>::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(DenseTensor::<f32>::new(vec![2, 0], vec![]).is_err());
    }

    #[test]
    fn row_access_is_row_major() {
        let t = DenseTensor::from_rows(&[vec![1.0f32, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(t.row(1), &[3.0, 4.0]);
        assert_eq!(t.at(0, 1), 2.0);
    }

    #[test]
    fn concat_and_slice_roundtrip() {
        let a = DenseTensor::from_rows(&[vec![1.0f32, 2.0]]).unwrap();
        let b = DenseTensor::from_rows(&[vec![3.0f32, 4.0], vec![5.0, 6.0]]).unwrap();
        let cat = DenseTensor::concat_rows(&[&a, &b]).unwrap();
        assert_eq!(cat.rows(), 3);
        assert_eq!(cat.slice_rows(1, 3), b);
    }
}
