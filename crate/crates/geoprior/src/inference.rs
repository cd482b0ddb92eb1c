//! Evaluating a trained prior, combining it with classifier scores, and
//! rasterizing per-category maps.

use std::fs;
use std::path::Path;

use crate::embeddings::{object_affinity, PriorVector};
use crate::encoder::SpatioTemporalPoint;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numcore::sigmoid;

/// Per-category presence probabilities at a point, dropout disabled.
pub fn prior(model: &ModelParams, point: &SpatioTemporalPoint) -> PriorVector {
    object_affinity(&model.embed(point), model.objects())
}

/// Add a constant to every prior entry. With the nearest-neighbor baselines
/// this is the robustness fix that keeps empty neighborhoods from zeroing
/// the posterior; it works on the learned prior too.
pub fn smooth_prior(prior: &[f64], alpha: f64) -> PriorVector {
    prior.iter().map(|p| p + alpha).collect()
}

/// Multiply classifier scores by a prior and renormalize to sum one. Returns
/// the posterior and its argmax (ties broken by lowest category id).
///
/// With no prior the classifier distribution is returned unchanged apart
/// from renormalization, which is also the fallback when the product
/// vanishes everywhere.
pub fn combine(scores: &[f64], prior: Option<&[f64]>) -> Result<(Vec<f64>, usize)> {
    if scores.is_empty() {
        return Err(Error::Vocabulary("empty score vector".into()));
    }
    if let Some(p) = prior {
        if p.len() != scores.len() {
            return Err(Error::Vocabulary(format!(
                "prior has {} categories but scores have {}",
                p.len(),
                scores.len()
            )));
        }
    }
    let mut posterior: Vec<f64> = match prior {
        Some(p) => scores.iter().zip(p).map(|(s, q)| s * q).collect(),
        None => scores.to_vec(),
    };
    let sum: f64 = posterior.iter().sum();
    if sum > 0.0 {
        for v in &mut posterior {
            *v /= sum;
        }
    } else {
        // degenerate product: fall back to the classifier distribution
        posterior = scores.to_vec();
        let s: f64 = posterior.iter().sum();
        if s > 0.0 {
            for v in &mut posterior {
                *v /= s;
            }
        }
    }
    let argmax = argmax_lowest_id(&posterior);
    Ok((posterior, argmax))
}

pub(crate) fn argmax_lowest_id(values: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Anything that can produce a prior vector at a point: the learned model,
/// or one of the reference baselines.
pub trait PriorSource {
    fn name(&self) -> String;
    fn categories(&self) -> usize;
    fn prior_at(&self, point: &SpatioTemporalPoint) -> PriorVector;
}

/// The trained model as a prior source, with optional uniform smoothing.
pub struct LearnedSource<'a> {
    model: &'a ModelParams,
    alpha: f64,
}

impl<'a> LearnedSource<'a> {
    pub fn new(model: &'a ModelParams, alpha: f64) -> Self {
        LearnedSource { model, alpha }
    }
}

impl PriorSource for LearnedSource<'_> {
    fn name(&self) -> String {
        if self.alpha == 0.0 {
            "learned".into()
        } else {
            format!("learned alpha={}", self.alpha)
        }
    }

    fn categories(&self) -> usize {
        self.model.shape().categories
    }

    fn prior_at(&self, point: &SpatioTemporalPoint) -> PriorVector {
        let p = prior(self.model, point);
        if self.alpha == 0.0 {
            p
        } else {
            smooth_prior(&p, self.alpha)
        }
    }
}

/// Longitude/latitude of the center of raster cell `(row, col)` on an
/// equirectangular grid; row 0 touches the +90 degree edge.
pub fn cell_center(height: usize, width: usize, row: usize, col: usize) -> (f64, f64) {
    let lat = 90.0 - (row as f64 + 0.5) * 180.0 / height as f64;
    let lon = -180.0 + (col as f64 + 0.5) * 360.0 / width as f64;
    (lon, lat)
}

/// Location embeddings for every cell of a raster grid at one time point.
///
/// Computing this once amortizes the encoder across categories: rasterizing
/// another category afterwards costs only one dot product and sigmoid per
/// cell.
pub struct EmbeddingField {
    height: usize,
    width: usize,
    time: f64,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingField {
    pub fn compute(model: &ModelParams, time: f64, height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Config("raster dimensions must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&time) {
            return Err(Error::Data(format!("time-of-year {time} out of range [0, 1]")));
        }
        let dim = model.shape().embed_dim;
        let mut data = vec![0.0; height * width * dim];
        for row in 0..height {
            for col in 0..width {
                let (lon, lat) = cell_center(height, width, row, col);
                let point = SpatioTemporalPoint::new(lon, lat, time)?;
                let e = model.embed(&point);
                let off = (row * width + col) * dim;
                data[off..off + dim].copy_from_slice(&e);
            }
        }
        Ok(EmbeddingField {
            height,
            width,
            time,
            dim,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn embedding(&self, row: usize, col: usize) -> &[f64] {
        let off = (row * self.width + col) * self.dim;
        &self.data[off..off + self.dim]
    }
}

/// Equirectangular grid of prior values for one category at one time point.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub height: usize,
    pub width: usize,
    pub time: f64,
    pub category: usize,
    pub values: Vec<f64>,
}

impl Raster {
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// Binary PGM (P5, maxval 255); pixel = `round(255 * value)`, half up.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(
            self.values
                .iter()
                .map(|v| (255.0 * v + 0.5).floor().clamp(0.0, 255.0) as u8),
        );
        out
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_pgm()).map_err(|e| Error::io(path, e))
    }
}

/// Rasterize one category from a precomputed embedding field.
pub fn rasterize_from_field(
    model: &ModelParams,
    field: &EmbeddingField,
    category: usize,
) -> Result<Raster> {
    let shape = model.shape();
    if category >= shape.categories {
        return Err(Error::Vocabulary(format!(
            "category id {category} out of range (known: {})",
            shape.categories
        )));
    }
    if field.dim != shape.embed_dim {
        return Err(Error::Shape(format!(
            "embedding field dim {} does not match model dim {}",
            field.dim, shape.embed_dim
        )));
    }
    let objects = model.objects();
    let mut values = Vec::with_capacity(field.height * field.width);
    for row in 0..field.height {
        for col in 0..field.width {
            let z = objects.col_dot(category, field.embedding(row, col));
            values.push(sigmoid(z));
        }
    }
    Ok(Raster {
        height: field.height,
        width: field.width,
        time: field.time,
        category,
        values,
    })
}

/// Rasterize one category, computing the embedding field internally and
/// applying an optional mask (masked cells become zero).
pub fn rasterize(
    model: &ModelParams,
    category: usize,
    time: f64,
    height: usize,
    width: usize,
    mask: Option<&Mask>,
) -> Result<Raster> {
    let field = EmbeddingField::compute(model, time, height, width)?;
    let mut raster = rasterize_from_field(model, &field, category)?;
    if let Some(m) = mask {
        m.apply(&mut raster)?;
    }
    Ok(raster)
}

/// Keep/zero mask over raster cells, read from a PGM file where pixel value
/// zero means "mask out".
#[derive(Debug, Clone)]
pub struct Mask {
    height: usize,
    width: usize,
    keep: Vec<bool>,
}

impl Mask {
    pub fn from_pgm_bytes(bytes: &[u8]) -> Result<Self> {
        let err = |m: &str| Error::Data(format!("mask PGM: {m}"));
        let mut pos = 0usize;
        let mut token = || -> Result<String> {
            loop {
                while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                    pos += 1;
                }
                if pos < bytes.len() && bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    break;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(err("truncated header"));
            }
            Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
        };
        if token()? != "P5" {
            return Err(err("expected magic P5"));
        }
        let width: usize = token()?.parse().map_err(|_| err("bad width"))?;
        let height: usize = token()?.parse().map_err(|_| err("bad height"))?;
        let maxval: usize = token()?.parse().map_err(|_| err("bad maxval"))?;
        if maxval == 0 || maxval > 255 {
            return Err(err("maxval must be in 1..=255"));
        }
        let data_start = pos + 1; // single whitespace after maxval
        let expected = width * height;
        let data = bytes
            .get(data_start..data_start + expected)
            .ok_or_else(|| err("truncated pixel data"))?;
        Ok(Mask {
            height,
            width,
            keep: data.iter().map(|&b| b > 0).collect(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_pgm_bytes(&bytes)
    }

    pub fn apply(&self, raster: &mut Raster) -> Result<()> {
        if self.height != raster.height || self.width != raster.width {
            return Err(Error::Shape(format!(
                "mask is {}x{} but raster is {}x{}",
                self.height, self.width, raster.height, raster.width
            )));
        }
        for (v, keep) in raster.values.iter_mut().zip(&self.keep) {
            if !keep {
                *v = 0.0;
            }
        }
        Ok(())
    }
}

/// Classifier score vectors keyed by example id, with named category columns.
#[derive(Debug, Clone)]
pub struct ScoreTable {
    pub ids: Vec<usize>,
    pub labels: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ScoreTable {
    /// Load from CSV with header `id,<label>,<label>,...`. Every row is
    /// validated (entries in `[0,1]`, sum within `1e-4` of one) and then
    /// renormalized to sum exactly one.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::Data(format!("cannot read score header: {e}")))?
            .clone();
        if headers.len() < 2 || headers.get(0).map(str::trim) != Some("id") {
            return Err(Error::Data(
                "score file must start with an 'id' column followed by one column per category"
                    .into(),
            ));
        }
        let labels: Vec<String> = headers.iter().skip(1).map(|h| h.trim().to_string()).collect();
        let mut ids = Vec::new();
        let mut rows = Vec::new();
        for record in reader.records() {
            let rec = record.map_err(|e| Error::Data(format!("malformed score row: {e}")))?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            if rec.len() != labels.len() + 1 {
                return Err(Error::Data(format!(
                    "line {line}: expected {} fields, got {}",
                    labels.len() + 1,
                    rec.len()
                )));
            }
            let id: usize = rec
                .get(0)
                .unwrap()
                .trim()
                .parse()
                .map_err(|_| Error::Data(format!("line {line}: bad id")))?;
            let mut row = Vec::with_capacity(labels.len());
            for field in rec.iter().skip(1) {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Data(format!("line {line}: bad score '{field}'")))?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Data(format!(
                        "line {line}: score {v} outside [0, 1]"
                    )));
                }
                row.push(v);
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-4 {
                return Err(Error::Data(format!(
                    "line {line}: scores sum to {sum}, not 1"
                )));
            }
            for v in &mut row {
                *v /= sum;
            }
            ids.push(id);
            rows.push(row);
        }
        Ok(ScoreTable { ids, labels, rows })
    }

    /// Reorder columns to match `vocab` exactly. Errors name the offending
    /// labels on either side.
    pub fn align_to(&self, vocab: &[String]) -> Result<Vec<Vec<f64>>> {
        let missing: Vec<&String> = vocab
            .iter()
            .filter(|v| !self.labels.contains(v))
            .collect();
        if !missing.is_empty() {
            return Err(Error::Vocabulary(format!(
                "score file lacks categories: {}",
                missing
                    .iter()
                    .map(|s| s.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            )));
        }
        let extra: Vec<&String> = self
            .labels
            .iter()
            .filter(|l| !vocab.contains(l))
            .collect();
        if !extra.is_empty() {
            return Err(Error::Vocabulary(format!(
                "score file has unknown categories: {}",
                extra
                    .iter()
                    .map(|s| s.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            )));
        }
        let perm: Vec<usize> = vocab
            .iter()
            .map(|v| self.labels.iter().position(|l| l == v).unwrap())
            .collect();
        Ok(self
            .rows
            .iter()
            .map(|row| perm.iter().map(|&j| row[j]).collect())
            .collect())
    }
}

/// Write a score table in the documented CSV schema.
pub fn write_scores_csv(
    path: &Path,
    labels: &[String],
    rows: &[Vec<f64>],
) -> Result<()> {
    let mut out = String::from("id");
    for l in labels {
        out.push(',');
        out.push_str(l);
    }
    out.push('\n');
    for (i, row) in rows.iter().enumerate() {
        out.push_str(&i.to_string());
        for v in row {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
