//! Minimal dense matrix/vector arithmetic with deterministic seeded init.
//!
//! All values are 64-bit floats and all reductions run in a fixed
//! left-to-right order, so repeated evaluation on identical inputs is
//! bitwise-identical.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::seeds;
use crate::{Error, Result};

/// Dense row-major matrix of f64.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "matrix {}x{} needs {} values, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Construction that rejects NaN/Inf.
    pub fn from_vec_checked(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        let m = Self::from_vec(rows, cols, data)?;
        m.check_finite("matrix construction")?;
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::Shape("ragged row lengths".into()));
            }
            data.extend_from_slice(row);
        }
        Matrix::from_vec(r, c, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn check_finite(&self, ctx: &str) -> Result<()> {
        for (i, v) in self.data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!(
                    "{ctx}: element {} of {}x{} matrix is {v}",
                    i, self.rows, self.cols
                )));
            }
        }
        Ok(())
    }

    /// Standard matrix product with deterministic left-to-right accumulation.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "matmul: lhs is {}x{}, rhs is {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = 0.0;
                for t in 0..self.cols {
                    acc += self.get(i, t) * other.get(t, j);
                }
                out.set(i, j, acc);
            }
        }
        Ok(out)
    }

    /// Sum of elementwise products of `kernel` against the window of `self`
    /// starting at `row_offset` (full column overlap).
    pub fn frobenius_window_dot(&self, kernel: &Matrix, row_offset: usize) -> Result<f64> {
        if kernel.cols != self.cols {
            return Err(Error::Shape(format!(
                "window dot: kernel has {} cols, matrix has {}",
                kernel.cols, self.cols
            )));
        }
        if row_offset + kernel.rows > self.rows {
            return Err(Error::Shape(format!(
                "window dot: offset {} + kernel height {} exceeds {} rows",
                row_offset, kernel.rows, self.rows
            )));
        }
        let mut acc = 0.0;
        for r in 0..kernel.rows {
            let a = self.row(row_offset + r);
            let k = kernel.row(r);
            for c in 0..kernel.cols {
                acc += a[c] * k[c];
            }
        }
        Ok(acc)
    }

    /// Xavier/Glorot uniform init in ±sqrt(6/(rows+cols)) from a fresh
    /// ChaCha8 stream; same seed gives a bitwise-identical matrix.
    pub fn xavier_init(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = seeds::rng_for(seed, "xavier");
        Self::xavier_from_rng(rows, cols, &mut rng)
    }

    /// Xavier init drawing from an existing stream (used by model init so a
    /// whole parameter set comes from one documented sequence).
    pub fn xavier_from_rng(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        Matrix { rows, cols, data }
    }
}

/// Dense f64 vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn zeros(len: usize) -> Self {
        Vector {
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Vector { data }
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

    pub fn check_finite(&self, ctx: &str) -> Result<()> {
        for (i, v) in self.data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("{ctx}: element {i} is {v}")));
            }
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl std::ops::IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let i = Matrix::identity(2);
        assert_eq!(i.matmul(&a).unwrap(), a);
        assert_eq!(a.matmul(&i).unwrap(), a);
    }

    #[test]
    fn matmul_dot_product() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![3.0], vec![4.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.rows(), 1);
        assert_eq!(c.cols(), 1);
        assert_eq!(c.get(0, 0), 11.0);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 2);
        let err = a.matmul(&b).unwrap_err().to_string();
        assert!(err.contains("2x3") && err.contains("2x2"), "{err}");
    }

    #[test]
    fn window_dot_matches_spec_examples() {
        let a = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let ones = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(a.frobenius_window_dot(&ones, 0).unwrap(), 2.0);
        assert_eq!(a.frobenius_window_dot(&ones, 1).unwrap(), 3.0);
        let zero = Matrix::zeros(2, 2);
        assert_eq!(a.frobenius_window_dot(&zero, 1).unwrap(), 0.0);
    }

    #[test]
    fn window_dot_out_of_bounds() {
        let a = Matrix::zeros(3, 2);
        let k = Matrix::zeros(2, 2);
        assert!(a.frobenius_window_dot(&k, 2).is_err());
    }

    // Oracle: full-height window dot equals a naive double loop.
    #[test]
    fn window_dot_full_height_oracle() {
        let a = Matrix::from_rows(&[vec![1.5, -2.0], vec![0.25, 3.0]]).unwrap();
        let k = Matrix::from_rows(&[vec![2.0, 0.5], vec![-1.0, 4.0]]).unwrap();
        let mut naive = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                naive += a.get(r, c) * k.get(r, c);
            }
        }
        assert_eq!(a.frobenius_window_dot(&k, 0).unwrap(), naive);
    }

    #[test]
    fn xavier_deterministic_and_bounded() {
        let a = Matrix::xavier_init(3, 3, 7);
        let b = Matrix::xavier_init(3, 3, 7);
        assert_eq!(a, b);

        let big = Matrix::xavier_init(100, 100, 11);
        let bound = (6.0f64 / 200.0).sqrt();
        assert!(big.data().iter().all(|v| v.abs() <= bound));

        let one = Matrix::xavier_init(1, 1, 3);
        assert!(one.get(0, 0).abs() <= 3.0f64.sqrt());
    }

    #[test]
    fn checked_construction_rejects_nan() {
        assert!(Matrix::from_vec_checked(1, 2, vec![1.0, f64::NAN]).is_err());
    }
}
