//! Location encoder: wrap-encoded spatio-temporal inputs through a residual
//! fully-connected network to a `D`-dimensional embedding.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{affine_into, Matrix, NodeId, ParamId, ParamSet, Tape};

/// A longitude/latitude pair plus a time-of-year fraction.
///
/// Longitude is in degrees in `[-180, 180]`, latitude in `[-90, 90]`, and
/// time is the fraction of the year in `[0, 1]`. Both ends of the periodic
/// ranges are accepted; the wrap encoding maps them to the same features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatioTemporalPoint {
    lon: f64,
    lat: f64,
    time: f64,
}

impl SpatioTemporalPoint {
    pub fn new(lon: f64, lat: f64, time: f64) -> Result<Self> {
        if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::Data(format!(
                "longitude {lon} out of range [-180, 180]"
            )));
        }
        if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(Error::Data(format!("latitude {lat} out of range [-90, 90]")));
        }
        if !time.is_finite() || !(0.0..=1.0).contains(&time) {
            return Err(Error::Data(format!(
                "time-of-year {time} out of range [0, 1]"
            )));
        }
        Ok(SpatioTemporalPoint { lon, lat, time })
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn time_of_year(&self) -> f64 {
        self.time
    }

    /// Map to `[-1, 1]^3` as `[lon/180, lat/90, 2t - 1]`.
    pub fn normalize(&self) -> [f64; 3] {
        [self.lon / 180.0, self.lat / 90.0, 2.0 * self.time - 1.0]
    }
}

/// Which optional parts of the model are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantFlags {
    /// Feed the time-of-year input dimension.
    pub use_date: bool,
    /// Learn photographer embeddings and their loss terms.
    pub use_photographer: bool,
    /// Apply the `[sin(pi x), cos(pi x)]` wrap encoding to each input.
    pub use_wrap: bool,
}

impl Default for VariantFlags {
    fn default() -> Self {
        VariantFlags {
            use_date: true,
            use_photographer: true,
            use_wrap: true,
        }
    }
}

impl VariantFlags {
    /// Length of the encoder input vector under these flags.
    pub fn input_dims(&self) -> usize {
        let base = if self.use_date { 3 } else { 2 };
        if self.use_wrap {
            2 * base
        } else {
            base
        }
    }
}

/// Wrap each normalized coordinate onto the circle: `x -> [sin(pi x), cos(pi x)]`.
///
/// Entries at `-1` and `+1` produce identical features, which is what makes
/// December 31st meet January 1st and longitude -180 meet +180.
pub fn wrap_encode(normalized: &[f64]) -> Vec<f64> {
    debug_assert!(normalized.iter().all(|v| (-1.0..=1.0).contains(v)));
    let mut out = Vec::with_capacity(2 * normalized.len());
    for &x in normalized {
        let a = std::f64::consts::PI * x;
        out.push(a.sin());
        out.push(a.cos());
    }
    out
}

/// Build the encoder input feature vector for a point under the given flags.
pub fn encode_features(point: &SpatioTemporalPoint, flags: &VariantFlags) -> Vec<f64> {
    let n = point.normalize();
    let active: &[f64] = if flags.use_date { &n[..3] } else { &n[..2] };
    if flags.use_wrap {
        wrap_encode(active)
    } else {
        active.to_vec()
    }
}

/// Parameter ids for one residual block: two affine layers with one dropout
/// site between them.
#[derive(Debug, Clone)]
pub struct ResidualBlockIds {
    pub weight1: ParamId,
    pub bias1: ParamId,
    pub weight2: ParamId,
    pub bias2: ParamId,
}

/// Parameter ids for the whole encoder: an input affine layer, `B` residual
/// blocks, and a final output embedding layer. Hidden width and the output
/// embedding length are both `D`.
///
/// Activations: ReLU after the input layer and after each block's first
/// affine; the residual sum and the output layer stay linear. Dropout is
/// applied once per block, between the block's two affines.
#[derive(Debug, Clone)]
pub struct EncoderLayout {
    pub input_weight: ParamId,
    pub input_bias: ParamId,
    pub blocks: Vec<ResidualBlockIds>,
    pub output_weight: ParamId,
    pub output_bias: ParamId,
}

fn init_matrix(params: &mut ParamSet, rows: usize, cols: usize, rng: &mut impl Rng) -> ParamId {
    // uniform in [-sqrt(1/fan_in), +sqrt(1/fan_in)], fan_in = cols
    let bound = (1.0 / cols as f64).sqrt();
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    params.add(Matrix::from_vec(rows, cols, data).expect("init values are finite"))
}

fn init_bias(params: &mut ParamSet, rows: usize, fan_in: usize, rng: &mut impl Rng) -> ParamId {
    let bound = (1.0 / fan_in as f64).sqrt();
    let data: Vec<f64> = (0..rows).map(|_| rng.random_range(-bound..bound)).collect();
    params.add(Matrix::from_vec(rows, 1, data).expect("init values are finite"))
}

impl EncoderLayout {
    /// Register freshly initialized encoder weights into `params`.
    pub fn init(
        params: &mut ParamSet,
        input_dims: usize,
        embed_dim: usize,
        blocks: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let input_weight = init_matrix(params, embed_dim, input_dims, rng);
        let input_bias = init_bias(params, embed_dim, input_dims, rng);
        let blocks = (0..blocks)
            .map(|_| ResidualBlockIds {
                weight1: init_matrix(params, embed_dim, embed_dim, rng),
                bias1: init_bias(params, embed_dim, embed_dim, rng),
                weight2: init_matrix(params, embed_dim, embed_dim, rng),
                bias2: init_bias(params, embed_dim, embed_dim, rng),
            })
            .collect();
        let output_weight = init_matrix(params, embed_dim, embed_dim, rng);
        let output_bias = init_bias(params, embed_dim, embed_dim, rng);
        EncoderLayout {
            input_weight,
            input_bias,
            blocks,
            output_weight,
            output_bias,
        }
    }

    /// Register zero-valued encoder weights (tests and oracles).
    pub fn zeros(
        params: &mut ParamSet,
        input_dims: usize,
        embed_dim: usize,
        blocks: usize,
    ) -> Self {
        let mut add = |r, c| params.add(Matrix::zeros(r, c));
        let input_weight = add(embed_dim, input_dims);
        let input_bias = add(embed_dim, 1);
        let blocks = (0..blocks)
            .map(|_| ResidualBlockIds {
                weight1: add(embed_dim, embed_dim),
                bias1: add(embed_dim, 1),
                weight2: add(embed_dim, embed_dim),
                bias2: add(embed_dim, 1),
            })
            .collect();
        let output_weight = add(embed_dim, embed_dim);
        let output_bias = add(embed_dim, 1);
        EncoderLayout {
            input_weight,
            input_bias,
            blocks,
            output_weight,
            output_bias,
        }
    }

    /// Inference-mode forward pass (dropout disabled).
    pub fn embed_features(&self, params: &ParamSet, features: &[f64]) -> Vec<f64> {
        let embed_dim = params.get(self.input_weight).rows();
        let mut h = vec![0.0; embed_dim];
        affine_into(
            &mut h,
            params.get(self.input_weight),
            params.get(self.input_bias),
            features,
        );
        for v in &mut h {
            *v = v.max(0.0);
        }
        let mut t = vec![0.0; embed_dim];
        let mut out = vec![0.0; embed_dim];
        for block in &self.blocks {
            affine_into(&mut t, params.get(block.weight1), params.get(block.bias1), &h);
            for v in &mut t {
                *v = v.max(0.0);
            }
            affine_into(&mut out, params.get(block.weight2), params.get(block.bias2), &t);
            for (hv, ov) in h.iter_mut().zip(&out) {
                *hv += ov;
            }
        }
        affine_into(
            &mut out,
            params.get(self.output_weight),
            params.get(self.output_bias),
            &h,
        );
        out
    }

    /// Training-mode forward pass recorded on a tape.
    ///
    /// `dropout_masks`, when present, holds one mask per block (already
    /// scaled by `1/(1-rate)`), applied at the block's single dropout site.
    pub fn embed_on_tape(
        &self,
        tape: &mut Tape,
        params: &ParamSet,
        features: Vec<f64>,
        dropout_masks: Option<&[Vec<f64>]>,
    ) -> NodeId {
        let mut h = tape.input(features);
        h = tape.affine(params, self.input_weight, self.input_bias, h);
        h = tape.relu(h);
        for (i, block) in self.blocks.iter().enumerate() {
            let mut t = tape.affine(params, block.weight1, block.bias1, h);
            t = tape.relu(t);
            if let Some(masks) = dropout_masks {
                t = tape.dropout(t, masks[i].clone());
            }
            t = tape.affine(params, block.weight2, block.bias2, t);
            h = tape.add(h, t);
        }
        tape.affine(params, self.output_weight, self.output_bias, h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn normalize_midpoints_and_extremes() {
        let mid = SpatioTemporalPoint::new(0.0, 0.0, 0.5).unwrap();
        assert_eq!(mid.normalize(), [0.0, 0.0, 0.0]);
        let ext = SpatioTemporalPoint::new(180.0, -90.0, 0.0).unwrap();
        assert_eq!(ext.normalize(), [1.0, -1.0, -1.0]);
        let q = SpatioTemporalPoint::new(90.0, 45.0, 0.25).unwrap();
        assert_eq!(q.normalize(), [0.5, 0.5, -0.5]);
    }

    #[test]
    fn out_of_range_inputs_are_rejected() {
        assert!(SpatioTemporalPoint::new(181.0, 0.0, 0.5).is_err());
        assert!(SpatioTemporalPoint::new(0.0, 91.0, 0.5).is_err());
        assert!(SpatioTemporalPoint::new(0.0, 0.0, 1.5).is_err());
        assert!(SpatioTemporalPoint::new(f64::NAN, 0.0, 0.5).is_err());
    }

    #[test]
    fn wrap_encode_hits_the_unit_circle_landmarks() {
        let z = wrap_encode(&[0.0]);
        assert_relative_eq!(z[0], 0.0);
        assert_relative_eq!(z[1], 1.0);

        let hi = wrap_encode(&[1.0]);
        let lo = wrap_encode(&[-1.0]);
        assert_relative_eq!(hi[1], -1.0);
        assert_relative_eq!(lo[1], -1.0);
        assert!((hi[0] - lo[0]).abs() < 1e-15);

        let half = wrap_encode(&[0.5]);
        assert_relative_eq!(half[0], 1.0);
        assert!(half[1].abs() < 1e-15);
    }

    #[test]
    fn feature_length_tracks_variant_flags() {
        let p = SpatioTemporalPoint::new(10.0, 20.0, 0.3).unwrap();
        let full = VariantFlags::default();
        assert_eq!(encode_features(&p, &full).len(), 6);
        let no_date = VariantFlags {
            use_date: false,
            ..full
        };
        assert_eq!(encode_features(&p, &no_date).len(), 4);
        let raw = VariantFlags {
            use_wrap: false,
            ..full
        };
        assert_eq!(encode_features(&p, &raw), p.normalize().to_vec());
        let raw_no_date = VariantFlags {
            use_date: false,
            use_wrap: false,
            ..full
        };
        assert_eq!(encode_features(&p, &raw_no_date), p.normalize()[..2].to_vec());
    }

    #[test]
    fn zero_network_embeds_everything_to_zero() {
        let mut params = ParamSet::new();
        let layout = EncoderLayout::zeros(&mut params, 6, 8, 2);
        let p = SpatioTemporalPoint::new(12.0, -30.0, 0.7).unwrap();
        let features = encode_features(&p, &VariantFlags::default());
        let e = layout.embed_features(&params, &features);
        assert!(e.iter().all(|&v| v == 0.0));
    }

    // Independent layer-by-layer oracle for a 2-block D=4 network.
    fn oracle_forward(params: &ParamSet, layout: &EncoderLayout, x: &[f64]) -> Vec<f64> {
        let matvec = |w: &Matrix, b: &Matrix, v: &[f64]| -> Vec<f64> {
            (0..w.rows())
                .map(|i| {
                    let mut acc = b.get(i, 0);
                    for j in 0..w.cols() {
                        acc += w.get(i, j) * v[j];
                    }
                    acc
                })
                .collect()
        };
        let relu = |v: Vec<f64>| v.into_iter().map(|a| a.max(0.0)).collect::<Vec<_>>();

        let mut h = relu(matvec(
            params.get(layout.input_weight),
            params.get(layout.input_bias),
            x,
        ));
        for block in &layout.blocks {
            let t = relu(matvec(
                params.get(block.weight1),
                params.get(block.bias1),
                &h,
            ));
            let t = matvec(params.get(block.weight2), params.get(block.bias2), &t);
            h = h.iter().zip(&t).map(|(a, b)| a + b).collect();
        }
        matvec(
            params.get(layout.output_weight),
            params.get(layout.output_bias),
            &h,
        )
    }

    #[test]
    fn embed_matches_layer_by_layer_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut params = ParamSet::new();
        let layout = EncoderLayout::init(&mut params, 6, 4, 2, &mut rng);
        let p = SpatioTemporalPoint::new(-45.0, 33.0, 0.2).unwrap();
        let features = encode_features(&p, &VariantFlags::default());
        let got = layout.embed_features(&params, &features);
        let want = oracle_forward(&params, &layout, &features);
        assert_eq!(got.len(), 4);
        for (g, w) in got.iter().zip(&want) {
            assert_relative_eq!(g, w, max_relative = 1e-12);
        }
    }

    #[test]
    fn tape_forward_equals_plain_forward_without_dropout() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut params = ParamSet::new();
        let layout = EncoderLayout::init(&mut params, 6, 8, 3, &mut rng);
        let p = SpatioTemporalPoint::new(101.0, -12.0, 0.9).unwrap();
        let features = encode_features(&p, &VariantFlags::default());
        let plain = layout.embed_features(&params, &features);
        let mut tape = Tape::new();
        let node = layout.embed_on_tape(&mut tape, &params, features, None);
        assert_eq!(tape.value(node), plain.as_slice());
    }

    proptest! {
        #[test]
        fn wrap_features_always_lie_in_unit_interval(
            lon in -180.0f64..=180.0,
            lat in -90.0f64..=90.0,
            time in 0.0f64..=1.0,
        ) {
            let p = SpatioTemporalPoint::new(lon, lat, time).unwrap();
            let f = encode_features(&p, &VariantFlags::default());
            prop_assert_eq!(f.len(), 6);
            for v in f {
                prop_assert!((-1.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn year_boundary_and_antimeridian_wrap_to_equal_embeddings(
            lon in -180.0f64..=180.0,
            lat in -90.0f64..=90.0,
            seed in 0u64..1000,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut params = ParamSet::new();
            let layout = EncoderLayout::init(&mut params, 6, 8, 2, &mut rng);
            let flags = VariantFlags::default();

            let jan = SpatioTemporalPoint::new(lon, lat, 0.0).unwrap();
            let dec = SpatioTemporalPoint::new(lon, lat, 1.0).unwrap();
            let e0 = layout.embed_features(&params, &encode_features(&jan, &flags));
            let e1 = layout.embed_features(&params, &encode_features(&dec, &flags));
            for (a, b) in e0.iter().zip(&e1) {
                prop_assert!((a - b).abs() <= 1e-9);
            }

            let west = SpatioTemporalPoint::new(-180.0, lat, 0.25).unwrap();
            let east = SpatioTemporalPoint::new(180.0, lat, 0.25).unwrap();
            let w = layout.embed_features(&params, &encode_features(&west, &flags));
            let e = layout.embed_features(&params, &encode_features(&east, &flags));
            for (a, b) in w.iter().zip(&e) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }
    }
}
