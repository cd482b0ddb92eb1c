//! Minimal dense numerical kernel.
//!
//! Everything the model needs and nothing more: row-major `f64` matrices, the
//! handful of forward/backward primitives used by the affine+activation graph
//! ([`tape`]), and Adam parameter updates ([`adam`]). Training runs in 64-bit
//! so analytic gradients can be checked against central finite differences at
//! tight tolerances; checkpoints quantize to 32-bit on disk.

mod adam;
mod tape;

pub use adam::{AdamConfig, AdamState};
pub use tape::{NodeId, Tape};

use crate::error::{Error, Result};

/// Dense row-major matrix of 64-bit floats.
///
/// Bias vectors are stored as `n x 1` matrices so parameters, gradients and
/// optimizer moments all share one shape type.
#[derive(Debug, Clone, PartialEq)]
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
                "matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric("matrix entries must be finite".into()));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn fill(&mut self, v: f64) {
        self.data.fill(v);
    }

    /// Dot product of column `col` with a vector of length `rows`.
    pub fn col_dot(&self, col: usize, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.rows);
        let mut acc = 0.0;
        for i in 0..self.rows {
            acc += self.data[i * self.cols + col] * v[i];
        }
        acc
    }

    /// Round every entry through `f32`, mirroring a checkpoint round-trip.
    pub fn quantize_f32(&mut self) {
        for v in &mut self.data {
            *v = *v as f32 as f64;
        }
    }
}

/// Dot product with four independent accumulators.
///
/// The lane split keeps the summation order fixed (so results are bit-stable
/// between the pointwise and bulk inference paths) while still letting the
/// compiler vectorize.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let chunks = n / 4;
    let mut acc = [0.0f64; 4];
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..n {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `out = W x + b` where `b` is an `n x 1` matrix.
pub fn affine_into(out: &mut [f64], weight: &Matrix, bias: &Matrix, x: &[f64]) {
    debug_assert_eq!(out.len(), weight.rows());
    debug_assert_eq!(bias.rows(), weight.rows());
    debug_assert_eq!(bias.cols(), 1);
    for (i, o) in out.iter_mut().enumerate() {
        *o = dot(weight.row(i), x) + bias.data()[i];
    }
}

/// Affine map `W x + b` with shape validation.
pub fn affine(weight: &Matrix, bias: &Matrix, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != weight.cols() {
        return Err(Error::Shape(format!(
            "affine input length {} does not match weight cols {}",
            x.len(),
            weight.cols()
        )));
    }
    if bias.rows() != weight.rows() || bias.cols() != 1 {
        return Err(Error::Shape(format!(
            "affine bias shape {}x{} does not match weight rows {}",
            bias.rows(),
            bias.cols(),
            weight.rows()
        )));
    }
    let mut out = vec![0.0; weight.rows()];
    affine_into(&mut out, weight, bias, x);
    Ok(out)
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(sigmoid(z))` computed without underflow.
pub fn log_sigmoid(z: f64) -> f64 {
    -softplus(-z)
}

/// `log(1 - sigmoid(z))` computed without underflow.
pub fn log_one_minus_sigmoid(z: f64) -> f64 {
    -softplus(z)
}

fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// Handle into a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(&self) -> usize {
        self.0
    }
}

/// Flat registry of parameter tensors.
///
/// All trainable state lives here; layouts elsewhere hold [`ParamId`]s into
/// it so gradients and optimizer moments can mirror the same ordering.
#[derive(Debug, Clone)]
pub struct ParamSet {
    mats: Vec<Matrix>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet { mats: Vec::new() }
    }

    pub fn add(&mut self, m: Matrix) -> ParamId {
        self.mats.push(m);
        ParamId(self.mats.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.mats[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.mats[id.0]
    }

    pub fn num_tensors(&self) -> usize {
        self.mats.len()
    }

    pub fn tensor(&self, i: usize) -> &Matrix {
        &self.mats[i]
    }

    pub fn tensor_mut(&mut self, i: usize) -> &mut Matrix {
        &mut self.mats[i]
    }

    /// Total number of scalar parameters.
    pub fn total_len(&self) -> usize {
        self.mats.iter().map(Matrix::len).sum()
    }

    /// Read a scalar by flat coordinate (tensors concatenated in id order).
    pub fn flat_get(&self, idx: usize) -> f64 {
        let (t, o) = self.locate(idx);
        self.mats[t].data()[o]
    }

    /// Add `delta` to a scalar by flat coordinate.
    pub fn flat_add(&mut self, idx: usize, delta: f64) {
        let (t, o) = self.locate(idx);
        self.mats[t].data_mut()[o] += delta;
    }

    fn locate(&self, mut idx: usize) -> (usize, usize) {
        for (t, m) in self.mats.iter().enumerate() {
            if idx < m.len() {
                return (t, idx);
            }
            idx -= m.len();
        }
        panic!("flat parameter index out of range");
    }

    /// Round every parameter through `f32`.
    pub fn quantize_f32(&mut self) {
        for m in &mut self.mats {
            m.quantize_f32();
        }
    }
}

impl Default for ParamSet {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradient buffers mirroring a [`ParamSet`] tensor for tensor.
#[derive(Debug, Clone)]
pub struct Gradients {
    mats: Vec<Matrix>,
}

impl Gradients {
    pub fn zeros_like(params: &ParamSet) -> Self {
        Gradients {
            mats: params
                .mats
                .iter()
                .map(|m| Matrix::zeros(m.rows(), m.cols()))
                .collect(),
        }
    }

    pub fn zero(&mut self) {
        for m in &mut self.mats {
            m.fill(0.0);
        }
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.mats[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.mats[id.0]
    }

    pub fn num_tensors(&self) -> usize {
        self.mats.len()
    }

    pub fn tensor(&self, i: usize) -> &Matrix {
        &self.mats[i]
    }

    pub fn tensor_mut(&mut self, i: usize) -> &mut Matrix {
        &mut self.mats[i]
    }

    pub fn flat_get(&self, mut idx: usize) -> f64 {
        for m in &self.mats {
            if idx < m.len() {
                return m.data()[idx];
            }
            idx -= m.len();
        }
        panic!("flat gradient index out of range");
    }

    pub fn is_finite(&self) -> bool {
        self.mats
            .iter()
            .all(|m| m.data().iter().all(|v| v.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn affine_identity_passes_input_through() {
        let w = Matrix::identity(2);
        let b = Matrix::zeros(2, 1);
        let out = affine(&w, &b, &[3.0, 4.0]).unwrap();
        assert_eq!(out, vec![3.0, 4.0]);
    }

    #[test]
    fn affine_hand_sum() {
        let w = Matrix::from_vec(1, 2, vec![1.0, 1.0]).unwrap();
        let b = Matrix::from_vec(1, 1, vec![1.0]).unwrap();
        let out = affine(&w, &b, &[2.0, 3.0]).unwrap();
        assert_eq!(out, vec![6.0]);
    }

    #[test]
    fn affine_matches_brute_force_dot_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w = Matrix::from_vec(
            4,
            4,
            (0..16).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let b = Matrix::from_vec(4, 1, (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap();
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let out = affine(&w, &b, &x).unwrap();
        for i in 0..4 {
            let mut expect = b.data()[i];
            for j in 0..4 {
                expect += w.get(i, j) * x[j];
            }
            assert_relative_eq!(out[i], expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn affine_rejects_dimension_mismatch() {
        let w = Matrix::identity(2);
        let b = Matrix::zeros(2, 1);
        assert!(matches!(
            affine(&w, &b, &[1.0, 2.0, 3.0]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn stable_log_sigmoid_agrees_with_naive_form() {
        // moderate arguments, where 1 - sigmoid(z) is still well conditioned
        for z in [-8.0, -2.5, 0.0, 1.0, 8.0] {
            assert_relative_eq!(log_sigmoid(z), sigmoid(z).ln(), max_relative = 1e-12);
            assert_relative_eq!(
                log_one_minus_sigmoid(z),
                (1.0 - sigmoid(z)).ln(),
                max_relative = 1e-9
            );
        }
        // deep tails: the naive form cancels or underflows, the asymptote
        // log(1 - sigmoid(z)) ~ -z holds to machine precision
        assert_relative_eq!(log_one_minus_sigmoid(25.0), -25.0, max_relative = 1e-11);
        assert_relative_eq!(log_sigmoid(-25.0), -25.0, max_relative = 1e-11);
        assert!(log_sigmoid(-800.0).is_finite());
        assert!(log_one_minus_sigmoid(800.0).is_finite());
    }

    #[test]
    fn flat_indexing_walks_tensors_in_order() {
        let mut p = ParamSet::new();
        p.add(Matrix::from_vec(1, 2, vec![1.0, 2.0]).unwrap());
        p.add(Matrix::from_vec(2, 1, vec![3.0, 4.0]).unwrap());
        assert_eq!(p.total_len(), 4);
        assert_eq!(p.flat_get(0), 1.0);
        assert_eq!(p.flat_get(3), 4.0);
        p.flat_add(2, 0.5);
        assert_eq!(p.tensor(1).data()[0], 3.5);
    }
}
