//! Presence-only training objective.
//!
//! Each observation contributes three log-likelihood components built from
//! sigmoid affinities: the observed category is encouraged at the observed
//! location (weighted by `lambda`) while all other categories are discouraged
//! there, every category is discouraged at a sampled pseudo-negative point,
//! and the photographer is tied to both the location and the category. The
//! total is a value to be maximized; the trainer negates it.
//!
//! One pseudo-negative point is drawn per example per epoch and shared by the
//! object-location and photographer-location components.

use rand::Rng;

use crate::encoder::{encode_features, SpatioTemporalPoint};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numcore::{log_one_minus_sigmoid, log_sigmoid, Gradients, NodeId, Tape};

/// How pseudo-negative locations are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NegativeSampler {
    /// Uniform over the sphere's surface and over the year.
    #[default]
    UniformSphere,
    /// Uniform over the observed training locations.
    PositivePool,
}

impl NegativeSampler {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(NegativeSampler::UniformSphere),
            "pool" => Ok(NegativeSampler::PositivePool),
            other => Err(Error::Config(format!(
                "unknown sampler '{other}' (expected 'sphere' or 'pool')"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NegativeSampler::UniformSphere => "sphere",
            NegativeSampler::PositivePool => "pool",
        }
    }
}

/// Loss hyperparameters. Variant flags live on the model shape; `lambda`
/// weights the positive terms of both affected components.
#[derive(Debug, Clone, Copy)]
pub struct LossConfig {
    pub lambda: f64,
    pub sampler: NegativeSampler,
}

impl LossConfig {
    pub fn new(lambda: f64, sampler: NegativeSampler) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::Config(format!("lambda must be > 0, got {lambda}")));
        }
        Ok(LossConfig { lambda, sampler })
    }
}

/// One observation prepared for a training step: the presence point, its
/// category, the photographer (if known), and a freshly drawn negative.
#[derive(Debug, Clone)]
pub struct TrainingExample {
    pub point: SpatioTemporalPoint,
    pub category: usize,
    pub photographer: Option<usize>,
    pub negative: SpatioTemporalPoint,
}

/// A point uniform over the sphere surface and the year: longitude uniform,
/// latitude area-corrected via `asin`, time uniform.
pub fn uniform_sphere_point(rng: &mut impl Rng) -> SpatioTemporalPoint {
    let lon = rng.random_range(-180.0..180.0);
    let z: f64 = rng.random_range(-1.0..1.0);
    let lat = z.asin().to_degrees();
    let time = rng.random_range(0.0..1.0);
    SpatioTemporalPoint::new(lon, lat, time).expect("sampled point is in range")
}

/// Draw one pseudo-negative location.
pub fn sample_negative(
    sampler: NegativeSampler,
    rng: &mut impl Rng,
    positive_pool: &[SpatioTemporalPoint],
) -> Result<SpatioTemporalPoint> {
    match sampler {
        NegativeSampler::UniformSphere => Ok(uniform_sphere_point(rng)),
        NegativeSampler::PositivePool => {
            if positive_pool.is_empty() {
                return Err(Error::Config(
                    "positive-pool negative sampling requires a non-empty pool".into(),
                ));
            }
            let idx = rng.random_range(0..positive_pool.len());
            Ok(positive_pool[idx])
        }
    }
}

/// Dropout masks for the two encoder passes of one example (presence point
/// and negative point), one mask per residual block. Entries are either `0`
/// or `1/(1-rate)` so the expected activation is rate-invariant.
#[derive(Debug, Clone)]
pub struct DropoutMasks {
    pub point: Vec<Vec<f64>>,
    pub negative: Vec<Vec<f64>>,
}

impl DropoutMasks {
    pub fn sample(blocks: usize, width: usize, rate: f64, rng: &mut impl Rng) -> Self {
        let scale = 1.0 / (1.0 - rate);
        let mut draw = |_: usize| -> Vec<Vec<f64>> {
            (0..blocks)
                .map(|_| {
                    (0..width)
                        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { scale })
                        .collect()
                })
                .collect()
        };
        DropoutMasks {
            point: draw(0),
            negative: draw(1),
        }
    }
}

fn check_category(model: &ModelParams, category: usize) -> Result<()> {
    let c = model.shape().categories;
    if category >= c {
        return Err(Error::Vocabulary(format!(
            "category id {category} out of range (known: {c})"
        )));
    }
    Ok(())
}

fn check_photographer(model: &ModelParams, photographer: usize) -> Result<()> {
    let p = model.shape().photographers;
    if photographer >= p {
        return Err(Error::Vocabulary(format!(
            "photographer id {photographer} out of range (known: {p})"
        )));
    }
    Ok(())
}

/// Object-location component: reward the observed category at the observed
/// point, discourage every other category there and every category at the
/// negative point.
pub fn object_location_loss(
    model: &ModelParams,
    point: &SpatioTemporalPoint,
    negative: &SpatioTemporalPoint,
    category: usize,
    lambda: f64,
) -> Result<f64> {
    check_category(model, category)?;
    let objects = model.objects();
    let at_point = model.embed(point);
    let at_negative = model.embed(negative);
    let mut total = lambda * log_sigmoid(objects.col_dot(category, &at_point));
    for c in 0..objects.cols() {
        if c != category {
            total += log_one_minus_sigmoid(objects.col_dot(c, &at_point));
        }
    }
    for c in 0..objects.cols() {
        total += log_one_minus_sigmoid(objects.col_dot(c, &at_negative));
    }
    Ok(total)
}

/// Photographer-location component: the photographer was at the observed
/// point and (as far as the proxy goes) not at the negative point.
pub fn photographer_location_loss(
    model: &ModelParams,
    point: &SpatioTemporalPoint,
    negative: &SpatioTemporalPoint,
    photographer: usize,
) -> Result<f64> {
    check_photographer(model, photographer)?;
    let matrix = model.photographer_matrix().ok_or_else(|| {
        Error::Config("photographer loss requires the photographer matrix".into())
    })?;
    let at_point = model.embed(point);
    let at_negative = model.embed(negative);
    Ok(log_sigmoid(matrix.col_dot(photographer, &at_point))
        + log_one_minus_sigmoid(matrix.col_dot(photographer, &at_negative)))
}

/// Photographer-object component: a photographer has low affinity for every
/// category they have not reported.
pub fn photographer_object_loss(
    model: &ModelParams,
    category: usize,
    photographer: usize,
    lambda: f64,
) -> Result<f64> {
    check_category(model, category)?;
    check_photographer(model, photographer)?;
    let objects = model.objects();
    let matrix = model.photographer_matrix().ok_or_else(|| {
        Error::Config("photographer loss requires the photographer matrix".into())
    })?;
    let col_col = |c: usize| -> f64 {
        let mut acc = 0.0;
        for d in 0..objects.rows() {
            acc += objects.get(d, c) * matrix.get(d, photographer);
        }
        acc
    };
    let mut total = lambda * log_sigmoid(col_col(category));
    for c in 0..objects.cols() {
        if c != category {
            total += log_one_minus_sigmoid(col_col(c));
        }
    }
    Ok(total)
}

/// Sum of the enabled components for one example (inference-mode embeddings;
/// no dropout). Photographer components are skipped when the variant is off
/// or the example has no photographer.
pub fn total_loss(model: &ModelParams, example: &TrainingExample, config: &LossConfig) -> Result<f64> {
    let mut total = object_location_loss(
        model,
        &example.point,
        &example.negative,
        example.category,
        config.lambda,
    )?;
    if model.photographer_matrix().is_some() {
        if let Some(p) = example.photographer {
            total += photographer_location_loss(model, &example.point, &example.negative, p)?;
            total += photographer_object_loss(model, example.category, p, config.lambda)?;
        }
    }
    Ok(total)
}

/// Record the full per-example objective on a tape and return the root node.
///
/// The same negative embedding node feeds both the object-location and
/// photographer-location components.
pub fn loss_graph(
    tape: &mut Tape,
    model: &ModelParams,
    example: &TrainingExample,
    lambda: f64,
    masks: Option<&DropoutMasks>,
) -> Result<NodeId> {
    check_category(model, example.category)?;
    let flags = model.shape().variants;
    let params = model.params();
    let encoder = model.encoder();

    let at_point = encoder.embed_on_tape(
        tape,
        params,
        encode_features(&example.point, &flags),
        masks.map(|m| m.point.as_slice()),
    );
    let at_negative = encoder.embed_on_tape(
        tape,
        params,
        encode_features(&example.negative, &flags),
        masks.map(|m| m.negative.as_slice()),
    );

    let objects = model.objects_id();
    let categories = model.shape().categories;
    let mut terms = Vec::with_capacity(2 * categories + 4);

    let z = tape.dot_col(params, objects, example.category, at_point);
    let t = tape.log_sigmoid(z);
    terms.push((lambda, t));
    for c in 0..categories {
        if c != example.category {
            let z = tape.dot_col(params, objects, c, at_point);
            let t = tape.log_one_minus_sigmoid(z);
            terms.push((1.0, t));
        }
    }
    for c in 0..categories {
        let z = tape.dot_col(params, objects, c, at_negative);
        let t = tape.log_one_minus_sigmoid(z);
        terms.push((1.0, t));
    }

    if let (Some(photographers), Some(p)) = (model.photographers_id(), example.photographer) {
        check_photographer(model, p)?;
        let z = tape.dot_col(params, photographers, p, at_point);
        let t = tape.log_sigmoid(z);
        terms.push((1.0, t));
        let z = tape.dot_col(params, photographers, p, at_negative);
        let t = tape.log_one_minus_sigmoid(z);
        terms.push((1.0, t));

        let z = tape.dot_col_col(params, objects, example.category, photographers, p);
        let t = tape.log_sigmoid(z);
        terms.push((lambda, t));
        for c in 0..categories {
            if c != example.category {
                let z = tape.dot_col_col(params, objects, c, photographers, p);
                let t = tape.log_one_minus_sigmoid(z);
                terms.push((1.0, t));
            }
        }
    }

    Ok(tape.weighted_sum(terms))
}

/// Evaluate one example's objective and accumulate `seed * d(objective)/d(theta)`
/// into `grads`. Returns the objective value.
pub fn example_loss_and_grad(
    model: &ModelParams,
    example: &TrainingExample,
    lambda: f64,
    masks: Option<&DropoutMasks>,
    seed: f64,
    grads: &mut Gradients,
) -> Result<f64> {
    let mut tape = Tape::new();
    let root = loss_graph(&mut tape, model, example, lambda, masks)?;
    tape.backward(model.params(), root, seed, grads)?;
    Ok(tape.scalar(root))
}

/// Evaluate one example's objective without touching gradients.
pub fn example_loss(
    model: &ModelParams,
    example: &TrainingExample,
    lambda: f64,
    masks: Option<&DropoutMasks>,
) -> Result<f64> {
    let mut tape = Tape::new();
    let root = loss_graph(&mut tape, model, example, lambda, masks)?;
    Ok(tape.scalar(root))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::object_affinity;
    use crate::encoder::VariantFlags;
    use crate::model::ModelShape;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn shape(categories: usize, photographers: usize) -> ModelShape {
        ModelShape {
            embed_dim: 6,
            blocks: 2,
            categories,
            photographers,
            variants: VariantFlags::default(),
        }
    }

    fn example(photographer: Option<usize>) -> TrainingExample {
        TrainingExample {
            point: SpatioTemporalPoint::new(12.0, 40.0, 0.3).unwrap(),
            category: 0,
            photographer,
            negative: SpatioTemporalPoint::new(-100.0, -20.0, 0.8).unwrap(),
        }
    }

    const LN_HALF: f64 = -std::f64::consts::LN_2;

    #[test]
    fn zero_model_object_location_is_eight_log_half() {
        // C = 3, lambda = 3: 3 + 2 + 3 log-half terms
        let model = ModelParams::zeros(shape(3, 0)).unwrap();
        let ex = example(None);
        let loss =
            object_location_loss(&model, &ex.point, &ex.negative, ex.category, 3.0).unwrap();
        assert_relative_eq!(loss, 8.0 * LN_HALF, max_relative = 1e-12);
    }

    #[test]
    fn single_category_has_no_other_category_terms() {
        let model = ModelParams::zeros(shape(1, 0)).unwrap();
        let ex = example(None);
        let loss =
            object_location_loss(&model, &ex.point, &ex.negative, ex.category, 1.0).unwrap();
        assert_relative_eq!(loss, 2.0 * LN_HALF, max_relative = 1e-12);
    }

    #[test]
    fn object_location_matches_term_by_term_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let model = ModelParams::init(shape(4, 0), &mut rng).unwrap();
        let ex = example(None);
        let lambda = 2.5;
        let loss =
            object_location_loss(&model, &ex.point, &ex.negative, ex.category, lambda).unwrap();

        // independent oracle: probabilities via the affinity head, plain logs
        let probs_x = object_affinity(&model.embed(&ex.point), model.objects());
        let probs_r = object_affinity(&model.embed(&ex.negative), model.objects());
        let mut want = lambda * probs_x[ex.category].ln();
        for c in 0..4 {
            if c != ex.category {
                want += (1.0 - probs_x[c]).ln();
            }
        }
        for c in 0..4 {
            want += (1.0 - probs_r[c]).ln();
        }
        assert_relative_eq!(loss, want, max_relative = 1e-9);
    }

    #[test]
    fn zero_model_photographer_location_is_two_log_half() {
        let model = ModelParams::zeros(shape(2, 3)).unwrap();
        let ex = example(Some(1));
        let loss = photographer_location_loss(&model, &ex.point, &ex.negative, 1).unwrap();
        assert_relative_eq!(loss, 2.0 * LN_HALF, max_relative = 1e-12);
    }

    #[test]
    fn perfectly_fit_photographer_location_loss_approaches_zero() {
        // Rig a D=1 model whose embedding is +k at lon 90 and -k at lon -90:
        // relu keeps only the positive sine response, the output layer
        // recenters it. A large photographer weight then saturates both
        // affinity terms the right way.
        let mut model = ModelParams::zeros(ModelShape {
            embed_dim: 1,
            blocks: 1,
            categories: 1,
            photographers: 1,
            variants: VariantFlags::default(),
        })
        .unwrap();
        let input_w = model.encoder().input_weight;
        let out_w = model.encoder().output_weight;
        let out_b = model.encoder().output_bias;
        let objects = model.objects_id();
        let photographers = model.photographers_id().unwrap();
        {
            let p = model.params_mut();
            p.get_mut(input_w).set(0, 0, 20.0); // picks sin(pi * lon/180)
            p.get_mut(out_w).set(0, 0, 2.0);
            p.get_mut(out_b).set(0, 0, -20.0);
            p.get_mut(objects).set(0, 0, 20.0);
            p.get_mut(photographers).set(0, 0, 20.0);
        }
        let x = SpatioTemporalPoint::new(90.0, 0.0, 0.5).unwrap();
        let r = SpatioTemporalPoint::new(-90.0, 0.0, 0.5).unwrap();
        assert_relative_eq!(model.embed(&x)[0], 20.0, max_relative = 1e-12);
        assert_relative_eq!(model.embed(&r)[0], -20.0, max_relative = 1e-12);
        let loss = photographer_location_loss(&model, &x, &r, 0).unwrap();
        assert!(loss < 0.0 && loss > -1e-9, "loss = {loss}");
    }

    #[test]
    fn photographer_location_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let model = ModelParams::init(shape(2, 3), &mut rng).unwrap();
        let ex = example(Some(2));
        let loss = photographer_location_loss(&model, &ex.point, &ex.negative, 2).unwrap();
        let matrix = model.photographer_matrix().unwrap();
        let ax = crate::embeddings::photographer_location_affinity(
            &model.embed(&ex.point),
            matrix,
            2,
        )
        .unwrap();
        let ar = crate::embeddings::photographer_location_affinity(
            &model.embed(&ex.negative),
            matrix,
            2,
        )
        .unwrap();
        assert_relative_eq!(loss, ax.ln() + (1.0 - ar).ln(), max_relative = 1e-9);
    }

    #[test]
    fn zero_model_photographer_object_is_three_log_half() {
        // C = 2, lambda = 2: 2 + 1 log-half terms
        let model = ModelParams::zeros(shape(2, 2)).unwrap();
        let loss = photographer_object_loss(&model, 0, 1, 2.0).unwrap();
        assert_relative_eq!(loss, 3.0 * LN_HALF, max_relative = 1e-12);
    }

    #[test]
    fn single_category_photographer_object_keeps_only_positive_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        let model = ModelParams::init(shape(1, 2), &mut rng).unwrap();
        let loss = photographer_object_loss(&model, 0, 1, 1.0).unwrap();
        let a =
            crate::embeddings::photographer_object_affinity(
                model.objects(),
                model.photographer_matrix().unwrap(),
                0,
                1,
            )
            .unwrap();
        assert_relative_eq!(loss, a.ln(), max_relative = 1e-9);
    }

    #[test]
    fn photographer_object_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let model = ModelParams::init(shape(3, 4), &mut rng).unwrap();
        let lambda = 3.0;
        let loss = photographer_object_loss(&model, 1, 2, lambda).unwrap();
        let objects = model.objects();
        let matrix = model.photographer_matrix().unwrap();
        let aff = |c: usize| {
            crate::embeddings::photographer_object_affinity(objects, matrix, c, 2).unwrap()
        };
        let want = lambda * aff(1).ln() + (1.0 - aff(0)).ln() + (1.0 - aff(2)).ln();
        assert_relative_eq!(loss, want, max_relative = 1e-9);
    }

    #[test]
    fn total_loss_without_photographer_equals_object_location_alone() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let model = ModelParams::init(shape(3, 2), &mut rng).unwrap();
        let ex = example(None);
        let cfg = LossConfig::new(3.0, NegativeSampler::UniformSphere).unwrap();
        let total = total_loss(&model, &ex, &cfg).unwrap();
        let obj =
            object_location_loss(&model, &ex.point, &ex.negative, ex.category, 3.0).unwrap();
        assert_eq!(total, obj);
    }

    #[test]
    fn zero_model_total_is_sum_of_component_cases() {
        // C = 3, lambda = 3, photographer present: (3+2+3) + 2 + (3+2) halves
        let model = ModelParams::zeros(shape(3, 2)).unwrap();
        let ex = example(Some(0));
        let cfg = LossConfig::new(3.0, NegativeSampler::UniformSphere).unwrap();
        let total = total_loss(&model, &ex, &cfg).unwrap();
        assert_relative_eq!(total, 15.0 * LN_HALF, max_relative = 1e-12);
    }

    #[test]
    fn total_loss_matches_sum_of_components() {
        let mut rng = ChaCha8Rng::seed_from_u64(38);
        let model = ModelParams::init(shape(4, 3), &mut rng).unwrap();
        let ex = example(Some(1));
        let cfg = LossConfig::new(4.0, NegativeSampler::UniformSphere).unwrap();
        let total = total_loss(&model, &ex, &cfg).unwrap();
        let want = object_location_loss(&model, &ex.point, &ex.negative, ex.category, 4.0)
            .unwrap()
            + photographer_location_loss(&model, &ex.point, &ex.negative, 1).unwrap()
            + photographer_object_loss(&model, ex.category, 1, 4.0).unwrap();
        assert_relative_eq!(total, want, max_relative = 1e-12);
    }

    #[test]
    fn tape_loss_agrees_with_plain_loss_when_dropout_is_off() {
        let mut rng = ChaCha8Rng::seed_from_u64(39);
        let model = ModelParams::init(shape(4, 3), &mut rng).unwrap();
        let ex = example(Some(2));
        let cfg = LossConfig::new(4.0, NegativeSampler::UniformSphere).unwrap();
        let plain = total_loss(&model, &ex, &cfg).unwrap();
        let taped = example_loss(&model, &ex, cfg.lambda, None).unwrap();
        assert_relative_eq!(taped, plain, max_relative = 1e-12);
    }

    #[test]
    fn presence_absence_log_likelihood_is_recovered_without_the_negative_term() {
        // Reference: the full-information multi-label objective for a label
        // vector that marks the observed category present and all others
        // absent. With lambda = 1 the presence-only objective minus the
        // independently computed pseudo-negative term must equal it.
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let model = ModelParams::init(shape(5, 0), &mut rng).unwrap();
        let ex = example(None);

        let probs_x = object_affinity(&model.embed(&ex.point), model.objects());
        let mut labels = vec![0.0; 5];
        labels[ex.category] = 1.0;
        let reference: f64 = probs_x
            .iter()
            .zip(&labels)
            .map(|(p, y)| y * p.ln() + (1.0 - y) * (1.0 - p).ln())
            .sum();

        let probs_r = object_affinity(&model.embed(&ex.negative), model.objects());
        let negative_term: f64 = probs_r.iter().map(|p| (1.0 - p).ln()).sum();

        let loss =
            object_location_loss(&model, &ex.point, &ex.negative, ex.category, 1.0).unwrap();
        assert_relative_eq!(loss - negative_term, reference, max_relative = 1e-9);
    }

    #[test]
    fn uniform_sphere_latitude_area_fraction_and_time_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let n = 1_000_000;
        let mut below_30 = 0usize;
        let mut times = Vec::with_capacity(100_000);
        for i in 0..n {
            let p = uniform_sphere_point(&mut rng);
            if p.lat().abs() < 30.0 {
                below_30 += 1;
            }
            if i < 100_000 {
                times.push(p.time_of_year());
            }
        }
        // |lat| < 30 deg covers exactly half the sphere's area
        let frac = below_30 as f64 / n as f64;
        assert!((frac - 0.5).abs() < 5e-3, "fraction = {frac}");

        // Kolmogorov-Smirnov against U(0,1) at alpha = 0.01
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let m = times.len();
        let mut d = 0.0f64;
        for (i, t) in times.iter().enumerate() {
            let hi = (i + 1) as f64 / m as f64 - t;
            let lo = t - i as f64 / m as f64;
            d = d.max(hi.max(lo));
        }
        let critical = 1.628 / (m as f64).sqrt();
        assert!(d < critical, "KS statistic {d} exceeds {critical}");
    }

    #[test]
    fn positive_pool_sampling_draws_from_the_pool() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let only = SpatioTemporalPoint::new(5.0, 5.0, 0.5).unwrap();
        for _ in 0..10 {
            let p = sample_negative(NegativeSampler::PositivePool, &mut rng, &[only]).unwrap();
            assert_eq!(p, only);
        }
        assert!(sample_negative(NegativeSampler::PositivePool, &mut rng, &[]).is_err());
    }

    #[test]
    fn dropout_mask_scaling_keeps_expected_activation() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let rate = 0.4;
        let mut sum = 0.0;
        let mut count = 0usize;
        for _ in 0..2000 {
            let masks = DropoutMasks::sample(1, 50, rate, &mut rng);
            for v in &masks.point[0] {
                assert!(*v == 0.0 || (*v - 1.0 / (1.0 - rate)).abs() < 1e-12);
                sum += v;
                count += 1;
            }
        }
        let mean = sum / count as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean mask value = {mean}");
    }

    #[test]
    fn unknown_ids_are_rejected() {
        let model = ModelParams::zeros(shape(2, 2)).unwrap();
        let ex = example(None);
        assert!(object_location_loss(&model, &ex.point, &ex.negative, 5, 1.0).is_err());
        assert!(photographer_location_loss(&model, &ex.point, &ex.negative, 7).is_err());
    }

    #[test]
    fn analytic_gradients_match_central_finite_differences() {
        // full model loss on a 3-category toy instance, with and without a
        // frozen dropout mask
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let model = ModelParams::init(shape(3, 2), &mut rng).unwrap();
        let ex = TrainingExample {
            point: SpatioTemporalPoint::new(40.0, -25.0, 0.6).unwrap(),
            category: 1,
            photographer: Some(0),
            negative: SpatioTemporalPoint::new(-140.0, 55.0, 0.1).unwrap(),
        };
        let lambda = 3.0;
        for masks in [
            None,
            Some(DropoutMasks::sample(2, 6, 0.5, &mut rng)),
        ] {
            let mut grads = crate::numcore::Gradients::zeros_like(model.params());
            example_loss_and_grad(&model, &ex, lambda, masks.as_ref(), 1.0, &mut grads)
                .unwrap();
            let h = 1e-6;
            let total = model.params().total_len();
            for idx in (0..total).step_by(7) {
                let mut plus = model.clone();
                plus.params_mut().flat_add(idx, h);
                let mut minus = model.clone();
                minus.params_mut().flat_add(idx, -h);
                let fd = (example_loss(&plus, &ex, lambda, masks.as_ref()).unwrap()
                    - example_loss(&minus, &ex, lambda, masks.as_ref()).unwrap())
                    / (2.0 * h);
                let analytic = grads.flat_get(idx);
                let denom = analytic.abs().max(fd.abs()).max(1e-8);
                assert!(
                    (analytic - fd).abs() / denom <= 1e-5,
                    "coordinate {idx}: analytic {analytic} vs fd {fd}"
                );
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn every_component_is_nonpositive(
            seed in 0u64..500,
            lambda in 0.5f64..6.0,
            category in 0usize..3,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let model = ModelParams::init(shape(3, 2), &mut rng).unwrap();
            let ex = TrainingExample {
                point: uniform_sphere_point(&mut rng),
                category,
                photographer: Some(1),
                negative: uniform_sphere_point(&mut rng),
            };
            let o = object_location_loss(&model, &ex.point, &ex.negative, category, lambda).unwrap();
            let pl = photographer_location_loss(&model, &ex.point, &ex.negative, 1).unwrap();
            let po = photographer_object_loss(&model, category, 1, lambda).unwrap();
            prop_assert!(o <= 0.0);
            prop_assert!(pl <= 0.0);
            prop_assert!(po <= 0.0);
        }
    }
}
