//! Parameter bundle: encoder weights plus the object and photographer
//! embedding matrices, with the structural metadata needed to rebuild them.

use rand::Rng;

use crate::encoder::{encode_features, EncoderLayout, SpatioTemporalPoint, VariantFlags};
use crate::error::{Error, Result};
use crate::numcore::{Matrix, ParamId, ParamSet};

/// Structural description of a model: dimensions plus variant flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelShape {
    /// Shared embedding dimensionality `D`.
    pub embed_dim: usize,
    /// Number of residual blocks in the encoder.
    pub blocks: usize,
    /// Number of object categories `C`.
    pub categories: usize,
    /// Number of photographers (0 disables the photographer matrix even when
    /// the flag is on).
    pub photographers: usize,
    pub variants: VariantFlags,
}

impl ModelShape {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 {
            return Err(Error::Config("embedding dimension must be >= 1".into()));
        }
        if self.blocks == 0 {
            return Err(Error::Config("encoder needs at least one residual block".into()));
        }
        if self.categories == 0 {
            return Err(Error::Config("model needs at least one category".into()));
        }
        Ok(())
    }

    fn has_photographers(&self) -> bool {
        self.variants.use_photographer && self.photographers > 0
    }
}

fn init_embedding(
    params: &mut ParamSet,
    rows: usize,
    cols: usize,
    rng: &mut impl Rng,
) -> ParamId {
    let bound = (1.0 / rows as f64).sqrt();
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    params.add(Matrix::from_vec(rows, cols, data).expect("finite init"))
}

/// All trainable parameters of one model.
#[derive(Debug, Clone)]
pub struct ModelParams {
    shape: ModelShape,
    params: ParamSet,
    encoder: EncoderLayout,
    objects: ParamId,
    photographers: Option<ParamId>,
}

impl ModelParams {
    /// Initialize with uniform `[-sqrt(1/fan_in), sqrt(1/fan_in)]` weights.
    /// Embedding matrices use `fan_in = D`.
    pub fn init(shape: ModelShape, rng: &mut impl Rng) -> Result<Self> {
        shape.validate()?;
        let mut params = ParamSet::new();
        let encoder = EncoderLayout::init(
            &mut params,
            shape.variants.input_dims(),
            shape.embed_dim,
            shape.blocks,
            rng,
        );
        let objects = init_embedding(&mut params, shape.embed_dim, shape.categories, rng);
        let photographers = shape
            .has_photographers()
            .then(|| init_embedding(&mut params, shape.embed_dim, shape.photographers, rng));
        Ok(ModelParams {
            shape,
            params,
            encoder,
            objects,
            photographers,
        })
    }

    /// All-zero parameters (every affinity is exactly 0.5).
    pub fn zeros(shape: ModelShape) -> Result<Self> {
        shape.validate()?;
        let mut params = ParamSet::new();
        let encoder = EncoderLayout::zeros(
            &mut params,
            shape.variants.input_dims(),
            shape.embed_dim,
            shape.blocks,
        );
        let objects = params.add(Matrix::zeros(shape.embed_dim, shape.categories));
        let photographers = shape
            .has_photographers()
            .then(|| params.add(Matrix::zeros(shape.embed_dim, shape.photographers)));
        Ok(ModelParams {
            shape,
            params,
            encoder,
            objects,
            photographers,
        })
    }

    pub fn shape(&self) -> &ModelShape {
        &self.shape
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn encoder(&self) -> &EncoderLayout {
        &self.encoder
    }

    /// Object embedding matrix `O` (`D x C`; column `c` is category `c`).
    pub fn objects(&self) -> &Matrix {
        self.params.get(self.objects)
    }

    pub fn objects_id(&self) -> ParamId {
        self.objects
    }

    /// Photographer embedding matrix `P` (`D x |P|`), absent under the
    /// no-photographer variant. Only read at training time.
    pub fn photographer_matrix(&self) -> Option<&Matrix> {
        self.photographers.map(|id| self.params.get(id))
    }

    pub fn photographers_id(&self) -> Option<ParamId> {
        self.photographers
    }

    /// Inference-mode embedding of a point (dropout disabled; deterministic).
    pub fn embed(&self, point: &SpatioTemporalPoint) -> Vec<f64> {
        let features = encode_features(point, &self.shape.variants);
        self.encoder.embed_features(&self.params, &features)
    }

    /// Round every parameter through `f32`, as a checkpoint round-trip does.
    pub fn quantize_f32(&mut self) {
        self.params.quantize_f32();
    }
}
