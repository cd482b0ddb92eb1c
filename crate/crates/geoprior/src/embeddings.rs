//! Affinity heads over the shared embedding space.
//!
//! Three sigmoid inner products tie the space together: location-object,
//! location-photographer, and object-photographer. Outputs are independent
//! Bernoulli probabilities, never normalized across categories. The
//! photographer matrix is a training-time device only; inference paths never
//! read it.

use crate::error::{Error, Result};
use crate::numcore::{sigmoid, Matrix};

/// Per-category presence probabilities at one spatio-temporal point.
/// Entries live in `[0, 1]` independently; the vector does not sum to one.
pub type PriorVector = Vec<f64>;

/// `sigmoid(embedding . O[:, c])` for every category `c`.
pub fn object_affinity(embedding: &[f64], objects: &Matrix) -> PriorVector {
    debug_assert_eq!(embedding.len(), objects.rows());
    let mut out = vec![0.0; objects.cols()];
    // accumulate row-by-row so we stream the matrix once
    for (d, &e) in embedding.iter().enumerate() {
        for (o, w) in out.iter_mut().zip(objects.row(d)) {
            *o += e * w;
        }
    }
    for v in &mut out {
        *v = sigmoid(*v);
    }
    out
}

/// Affinity between a location embedding and one photographer.
pub fn photographer_location_affinity(
    embedding: &[f64],
    photographers: &Matrix,
    photographer: usize,
) -> Result<f64> {
    if photographer >= photographers.cols() {
        return Err(Error::Vocabulary(format!(
            "photographer id {photographer} out of range (known: {})",
            photographers.cols()
        )));
    }
    Ok(sigmoid(photographers.col_dot(photographer, embedding)))
}

/// Affinity between one category and one photographer.
pub fn photographer_object_affinity(
    objects: &Matrix,
    photographers: &Matrix,
    category: usize,
    photographer: usize,
) -> Result<f64> {
    if category >= objects.cols() {
        return Err(Error::Vocabulary(format!(
            "category id {category} out of range (known: {})",
            objects.cols()
        )));
    }
    if photographer >= photographers.cols() {
        return Err(Error::Vocabulary(format!(
            "photographer id {photographer} out of range (known: {})",
            photographers.cols()
        )));
    }
    let mut acc = 0.0;
    for d in 0..objects.rows() {
        acc += objects.get(d, category) * photographers.get(d, photographer);
    }
    Ok(sigmoid(acc))
}
