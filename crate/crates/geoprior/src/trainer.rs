//! Epoch loop with per-category capping, mini-batching, Adam updates, and
//! checkpoint serialization.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, Observation, Vocabulary};
use crate::encoder::{SpatioTemporalPoint, VariantFlags};
use crate::error::{Error, Result};
use crate::loss::{
    example_loss_and_grad, sample_negative, DropoutMasks, LossConfig, NegativeSampler,
    TrainingExample,
};
use crate::model::{ModelParams, ModelShape};
use crate::numcore::{AdamConfig, AdamState, Gradients};

/// Training hyperparameters. Defaults: 30 epochs, batch 1024, D=256, four
/// residual blocks, cap 100, lambda = number of categories.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub embed_dim: usize,
    pub blocks: usize,
    /// Per-epoch example cap per category; 0 disables capping.
    pub per_category_cap: usize,
    /// Positive-term weight; `None` resolves to the number of categories.
    pub lambda: Option<f64>,
    pub dropout: f64,
    pub seed: u64,
    pub sampler: NegativeSampler,
    pub variants: VariantFlags,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 1024,
            embed_dim: 256,
            blocks: 4,
            per_category_cap: 100,
            lambda: None,
            dropout: 0.5,
            seed: 0,
            sampler: NegativeSampler::UniformSphere,
            variants: VariantFlags::default(),
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        if self.embed_dim == 0 {
            return Err(Error::Config("embedding dimension must be >= 1".into()));
        }
        if self.blocks == 0 {
            return Err(Error::Config("residual block count must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout rate {} must lie in [0, 1)",
                self.dropout
            )));
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0) {
                return Err(Error::Config(format!("lambda must be > 0, got {l}")));
            }
        }
        Ok(())
    }
}

/// Assemble one epoch: at most `cap` examples per category (a fresh random
/// subset each call), shuffled, each with a freshly sampled negative.
pub fn build_epoch(
    observations: &[Observation],
    n_categories: usize,
    cap: usize,
    sampler: NegativeSampler,
    pool: &[SpatioTemporalPoint],
    rng: &mut impl Rng,
) -> Result<Vec<TrainingExample>> {
    let mut by_category: Vec<Vec<usize>> = vec![Vec::new(); n_categories];
    for (i, obs) in observations.iter().enumerate() {
        if obs.point.is_some() {
            by_category[obs.category].push(i);
        }
    }
    if by_category.iter().all(|v| v.is_empty()) {
        return Err(Error::Config(
            "no located observations to train on".into(),
        ));
    }

    let mut chosen = Vec::new();
    for members in &by_category {
        if cap > 0 && members.len() > cap {
            let picks = rand::seq::index::sample(rng, members.len(), cap);
            chosen.extend(picks.iter().map(|j| members[j]));
        } else {
            chosen.extend_from_slice(members);
        }
    }
    chosen.shuffle(rng);

    chosen
        .into_iter()
        .map(|i| {
            let obs = &observations[i];
            Ok(TrainingExample {
                point: obs.point.expect("located observations only"),
                category: obs.category,
                photographer: obs.photographer,
                negative: sample_negative(sampler, rng, pool)?,
            })
        })
        .collect()
}

/// Train a model on a dataset. Writes one `epoch <n> loss <float>
/// examples <n>` line per epoch (mean per-example negated objective) plus
/// any warnings to `log`.
pub fn train(dataset: &Dataset, config: &TrainConfig, log: &mut dyn Write) -> Result<Checkpoint> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Config("training dataset is empty".into()));
    }
    let n_categories = dataset.categories.len();
    let located: Vec<SpatioTemporalPoint> = dataset.located_points();
    if located.is_empty() {
        return Err(Error::Config(
            "training dataset has no located observations".into(),
        ));
    }

    let mut counts = vec![0usize; n_categories];
    for obs in &dataset.observations {
        if obs.point.is_some() {
            counts[obs.category] += 1;
        }
    }
    for (c, &n) in counts.iter().enumerate() {
        if n == 0 {
            writeln!(
                log,
                "warning: category {} has no located observations",
                dataset.categories.name(c)
            )
            .map_err(|e| Error::io("<log>", e))?;
        }
    }

    let loss_config = LossConfig::new(
        config.lambda.unwrap_or(n_categories as f64),
        config.sampler,
    )?;

    let shape = ModelShape {
        embed_dim: config.embed_dim,
        blocks: config.blocks,
        categories: n_categories,
        photographers: dataset.photographers.len(),
        variants: config.variants,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = ModelParams::init(shape, &mut rng)?;
    let mut grads = Gradients::zeros_like(model.params());
    let mut adam = AdamState::new(model.params(), config.adam);

    for epoch in 1..=config.epochs {
        let examples = build_epoch(
            &dataset.observations,
            n_categories,
            config.per_category_cap,
            loss_config.sampler,
            &located,
            &mut rng,
        )?;
        let mut loss_sum = 0.0;
        for (batch_idx, batch) in examples.chunks(config.batch_size).enumerate() {
            grads.zero();
            let scale = -1.0 / batch.len() as f64;
            for example in batch {
                let masks = (config.dropout > 0.0).then(|| {
                    DropoutMasks::sample(
                        config.blocks,
                        config.embed_dim,
                        config.dropout,
                        &mut rng,
                    )
                });
                let value = example_loss_and_grad(
                    &model,
                    example,
                    loss_config.lambda,
                    masks.as_ref(),
                    scale,
                    &mut grads,
                )?;
                if !value.is_finite() {
                    return Err(Error::Numeric(format!(
                        "non-finite loss at epoch {epoch} batch {batch_idx}"
                    )));
                }
                loss_sum += -value;
            }
            adam.update(model.params_mut(), &grads).map_err(|e| {
                Error::Numeric(format!("epoch {epoch} batch {batch_idx}: {e}"))
            })?;
        }
        writeln!(
            log,
            "epoch {epoch} loss {:.6} examples {}",
            loss_sum / examples.len() as f64,
            examples.len()
        )
        .map_err(|e| Error::io("<log>", e))?;
    }

    Ok(Checkpoint {
        model,
        categories: dataset.categories.clone(),
        photographers: dataset.photographers.clone(),
    })
}

/// A trained model plus the vocabularies frozen at training start.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: ModelParams,
    pub categories: Vocabulary,
    pub photographers: Vocabulary,
}

const MAGIC: &[u8; 8] = b"GEOPRIOR";
const VERSION: u32 = 1;
const DROPOUT_SITES_PER_BLOCK: u8 = 1;

impl Checkpoint {
    /// Serialize to the documented little-endian layout; weights as `f32`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let shape = self.model.shape();
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let mut flags = 0u8;
        if shape.variants.use_date {
            flags |= 1;
        }
        if shape.variants.use_photographer {
            flags |= 2;
        }
        if shape.variants.use_wrap {
            flags |= 4;
        }
        out.push(flags);
        out.push(DROPOUT_SITES_PER_BLOCK);
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&(shape.categories as u32).to_le_bytes());
        out.extend_from_slice(&(shape.photographers as u32).to_le_bytes());
        out.extend_from_slice(&(shape.embed_dim as u32).to_le_bytes());
        out.extend_from_slice(&(shape.blocks as u32).to_le_bytes());
        out.extend_from_slice(&self.categories.digest().to_le_bytes());
        out.extend_from_slice(&self.photographers.digest().to_le_bytes());
        for name in self.categories.names() {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
        }
        for name in self.photographers.names() {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
        }
        let params = self.model.params();
        for t in 0..params.num_tensors() {
            for &v in params.tensor(t).data() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Reader { bytes, pos: 0 };
        let magic = cur.take(8, "magic")?;
        if magic != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = cur.u32("version")?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {version} (expected {VERSION})"
            )));
        }
        let flags = cur.u8("flags")?;
        if flags & !0b111 != 0 {
            return Err(Error::Checkpoint(format!("unknown flag bits {flags:#b}")));
        }
        let dropout_sites = cur.u8("dropout_sites")?;
        if dropout_sites != DROPOUT_SITES_PER_BLOCK {
            return Err(Error::Checkpoint(format!(
                "unsupported dropout sites per block: {dropout_sites}"
            )));
        }
        let _reserved = cur.u16("reserved")?;
        let categories = cur.u32("categories")? as usize;
        let photographers = cur.u32("photographers")? as usize;
        let embed_dim = cur.u32("embed_dim")? as usize;
        let blocks = cur.u32("blocks")? as usize;
        let cat_digest = cur.u64("category_digest")?;
        let phot_digest = cur.u64("photographer_digest")?;

        let mut read_vocab = |n: usize, what: &str| -> Result<Vocabulary> {
            let mut names = Vec::with_capacity(n);
            for i in 0..n {
                let len = cur.u32(&format!("{what}[{i}].len"))? as usize;
                let raw = cur.take(len, &format!("{what}[{i}]"))?;
                names.push(
                    String::from_utf8(raw.to_vec())
                        .map_err(|_| Error::Checkpoint(format!("{what}[{i}] is not UTF-8")))?,
                );
            }
            Vocabulary::from_names(names)
                .map_err(|e| Error::Checkpoint(format!("{what}: {e}")))
        };
        let category_vocab = read_vocab(categories, "category")?;
        let photographer_vocab = read_vocab(photographers, "photographer")?;
        if category_vocab.digest() != cat_digest {
            return Err(Error::Checkpoint("category_digest mismatch".into()));
        }
        if photographer_vocab.digest() != phot_digest {
            return Err(Error::Checkpoint("photographer_digest mismatch".into()));
        }

        let shape = ModelShape {
            embed_dim,
            blocks,
            categories,
            photographers,
            variants: VariantFlags {
                use_date: flags & 1 != 0,
                use_photographer: flags & 2 != 0,
                use_wrap: flags & 4 != 0,
            },
        };
        let mut model =
            ModelParams::zeros(shape).map_err(|e| Error::Checkpoint(format!("dims: {e}")))?;
        let params = model.params_mut();
        for t in 0..params.num_tensors() {
            let tensor = params.tensor_mut(t);
            let n = tensor.len();
            let raw = cur.take(4 * n, &format!("weights[{t}]"))?;
            for (i, chunk) in raw.chunks_exact(4).enumerate() {
                tensor.data_mut()[i] =
                    f64::from(f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]));
            }
        }
        if cur.pos != bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes after weights",
                bytes.len() - cur.pos
            )));
        }
        Ok(Checkpoint {
            model,
            categories: category_vocab,
            photographers: photographer_vocab,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, field: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let slice = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(slice)
            }
            None => Err(Error::Checkpoint(format!("truncated at field '{field}'"))),
        }
    }

    fn u8(&mut self, field: &str) -> Result<u8> {
        Ok(self.take(1, field)?[0])
    }

    fn u16(&mut self, field: &str) -> Result<u16> {
        let b = self.take(2, field)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, field: &str) -> Result<u32> {
        let b = self.take(4, field)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self, field: &str) -> Result<u64> {
        let b = self.take(8, field)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }
}
