//! Envelope (skyline) Cholesky for the symmetric normal matrix.
//!
//! With epoch-major column ordering a GNSS chain has a narrow envelope: each
//! row only reaches back to the previous epoch. Cholesky fill stays inside
//! the envelope, so storage and work scale with the envelope size rather
//! than `n²`.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

#[derive(Debug, Clone)]
pub(crate) struct Skyline {
    first: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl Skyline {
    /// `first[i]` is the leftmost structurally nonzero column of row `i`.
    pub fn new(first: Vec<usize>) -> Self {
        let mut offset = Vec::with_capacity(first.len() + 1);
        let mut total = 0;
        for (i, &f) in first.iter().enumerate() {
            debug_assert!(f <= i);
            offset.push(total);
            total += i - f + 1;
        }
        offset.push(total);
        Skyline {
            first,
            offset,
            data: vec![0.0; total],
        }
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && j >= self.first[i], "({i},{j}) outside envelope");
        self.offset[i] + (j - self.first[i])
    }

    /// Adds `v` to the lower-triangle entry `(i, j)`, `j <= i`.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    #[cfg(test)]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        if j < self.first[i] {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[self.offset[i]..self.offset[i + 1]]
    }

    /// In-place `A = L Lᵀ`. On failure returns the column whose pivot was not
    /// positive relative to its original diagonal.
    pub fn factorize(&mut self) -> Result<(), usize> {
        let n = self.dim();
        for i in 0..n {
            let fi = self.first[i];
            let diag = self.data[self.idx(i, i)];
            for j in fi..=i {
                let fj = self.first[j];
                let start = fi.max(fj);
                let ri = self.row(i);
                let rj = self.row(j);
                let mut dot = 0.0;
                for k in start..j {
                    dot += ri[k - fi] * rj[k - fj];
                }
                let k = self.idx(i, j);
                let s = self.data[k] - dot;
                if j < i {
                    let ljj = self.data[self.idx(j, j)];
                    self.data[k] = s / ljj;
                } else {
                    if !(s > 1e-13 * diag.abs()) || !s.is_finite() {
                        return Err(i);
                    }
                    self.data[k] = math::sqrt(s);
                }
            }
        }
        Ok(())
    }

    /// Solves `L Lᵀ x = b` in place after [`Skyline::factorize`].
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let fi = self.first[i];
            let row = self.row(i);
            let mut s = b[i];
            for k in fi..i {
                s -= row[k - fi] * b[k];
            }
            b[i] = s / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = self.row(i);
            b[i] /= row[i - fi];
            let xi = b[i];
            for k in fi..i {
                b[k] -= row[k - fi] * xi;
            }
        }
    }
}
