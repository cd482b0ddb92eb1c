//! Observation ingestion, date conversion, and the synthetic world generator
//! used to verify the pipeline end to end.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::great_circle_rad;
use crate::encoder::SpatioTemporalPoint;
use crate::error::{Error, Result};

/// String labels mapped to dense ids in order of first appearance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Vocabulary::default()
    }

    pub fn from_names<I: IntoIterator<Item = String>>(names: I) -> Result<Self> {
        let mut v = Vocabulary::new();
        for n in names {
            let before = v.len();
            v.intern(&n);
            if v.len() == before {
                return Err(Error::Vocabulary(format!("duplicate label '{n}'")));
            }
        }
        Ok(v)
    }

    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// FNV-1a 64 over the labels joined by newlines; stored in checkpoint
    /// headers as a cheap integrity check.
    pub fn digest(&self) -> u64 {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for (i, name) in self.names.iter().enumerate() {
            if i > 0 {
                hash ^= b'\n' as u64;
                hash = hash.wrapping_mul(0x1000_0000_01b3);
            }
            for b in name.as_bytes() {
                hash ^= *b as u64;
                hash = hash.wrapping_mul(0x1000_0000_01b3);
            }
        }
        hash
    }
}

/// One ingested presence record. `point` is `None` when the row carried no
/// location (allowed for evaluation data; training skips such rows).
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub point: Option<SpatioTemporalPoint>,
    pub category: usize,
    pub photographer: Option<usize>,
}

/// Observations plus their label vocabularies and any per-line diagnostics
/// produced during ingestion.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub observations: Vec<Observation>,
    pub categories: Vocabulary,
    pub photographers: Vocabulary,
    pub diagnostics: Vec<String>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Points of every located observation, in dataset order.
    pub fn located_points(&self) -> Vec<SpatioTemporalPoint> {
        self.observations.iter().filter_map(|o| o.point).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObsFormat {
    Csv,
    Jsonl,
}

impl ObsFormat {
    /// Pick a format from the file extension (`.jsonl`/`.ndjson` vs CSV).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") | Some("json") => ObsFormat::Jsonl,
            _ => ObsFormat::Csv,
        }
    }
}

/// Ingestion knobs.
#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    /// Abort when more than this fraction of data rows is invalid.
    pub max_bad_fraction: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            max_bad_fraction: 0.5,
        }
    }
}

struct RawRow {
    line: u64,
    lon: Option<String>,
    lat: Option<String>,
    time: Option<String>,
    category: String,
    photographer: Option<String>,
}

fn parse_location(
    lon: Option<&str>,
    lat: Option<&str>,
    time: Option<&str>,
) -> std::result::Result<Option<SpatioTemporalPoint>, String> {
    let fields = [lon, lat, time];
    let present = fields.iter().filter(|f| f.is_some_and(|s| !s.is_empty())).count();
    if present == 0 {
        return Ok(None);
    }
    if present != 3 {
        return Err("location needs all of lon, lat, time or none of them".into());
    }
    let parse = |name: &str, s: Option<&str>| -> std::result::Result<f64, String> {
        s.unwrap()
            .trim()
            .parse::<f64>()
            .map_err(|_| format!("unparseable {name} '{}'", s.unwrap()))
    };
    let lon = parse("lon", lon)?;
    let lat = parse("lat", lat)?;
    let time = parse("time", time)?;
    SpatioTemporalPoint::new(lon, lat, time)
        .map(Some)
        .map_err(|e| e.to_string())
}

fn rows_to_dataset(rows: Vec<std::result::Result<RawRow, (u64, String)>>, opts: &LoadOptions) -> Result<Dataset> {
    let mut dataset = Dataset::default();
    let total = rows.len();
    let mut bad = 0usize;
    for row in rows {
        let parsed = row.and_then(|r| {
            let point = parse_location(
                r.lon.as_deref(),
                r.lat.as_deref(),
                r.time.as_deref(),
            )
            .map_err(|m| (r.line, m))?;
            if r.category.is_empty() {
                return Err((r.line, "empty category label".into()));
            }
            Ok((point, r.category, r.photographer, r.line))
        });
        match parsed {
            Ok((point, category, photographer, _)) => {
                let category = dataset.categories.intern(&category);
                let photographer = photographer
                    .filter(|p| !p.is_empty())
                    .map(|p| dataset.photographers.intern(&p));
                dataset.observations.push(Observation {
                    point,
                    category,
                    photographer,
                });
            }
            Err((line, msg)) => {
                bad += 1;
                dataset.diagnostics.push(format!("line {line}: {msg}"));
            }
        }
    }
    if total > 0 && bad as f64 / total as f64 > opts.max_bad_fraction {
        return Err(Error::Data(format!(
            "{bad} of {total} rows invalid (limit {:.0}%): {}",
            opts.max_bad_fraction * 100.0,
            dataset.diagnostics.join("; ")
        )));
    }
    Ok(dataset)
}

/// Load observations from CSV (header `lon,lat,time,category,photographer`)
/// or JSONL (same field names). Invalid rows are rejected individually with
/// line numbers; the load aborts when too many rows are bad.
pub fn load_observations(path: &Path, format: ObsFormat, opts: &LoadOptions) -> Result<Dataset> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        ObsFormat::Csv => load_csv(&text, opts),
        ObsFormat::Jsonl => load_jsonl(&text, opts),
    }
}

fn load_csv(text: &str, opts: &LoadOptions) -> Result<Dataset> {
    // not flexible: ragged rows surface as per-line errors below
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("cannot read CSV header: {e}")))?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Data(format!("missing column '{name}'")))
    };
    let lon_col = col("lon")?;
    let lat_col = col("lat")?;
    let time_col = col("time")?;
    let cat_col = col("category")?;
    let phot_col = col("photographer")?;

    let mut rows = Vec::new();
    for record in reader.records() {
        match record {
            Ok(rec) => {
                let line = rec.position().map(|p| p.line()).unwrap_or(0);
                let field = |i: usize| rec.get(i).map(|s| s.trim().to_string());
                match field(cat_col) {
                    Some(category) => rows.push(Ok(RawRow {
                        line,
                        lon: field(lon_col),
                        lat: field(lat_col),
                        time: field(time_col),
                        category,
                        photographer: field(phot_col),
                    })),
                    None => rows.push(Err((line, "row has too few fields".into()))),
                }
            }
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                rows.push(Err((line, format!("malformed CSV row: {e}"))));
            }
        }
    }
    rows_to_dataset(rows, opts)
}

#[derive(Deserialize)]
struct RawJsonRow {
    lon: Option<f64>,
    lat: Option<f64>,
    time: Option<f64>,
    category: String,
    #[serde(default)]
    photographer: Option<String>,
}

fn load_jsonl(text: &str, opts: &LoadOptions) -> Result<Dataset> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = (i + 1) as u64;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RawJsonRow>(line) {
            Ok(raw) => rows.push(Ok(RawRow {
                line: lineno,
                lon: raw.lon.map(|v| v.to_string()),
                lat: raw.lat.map(|v| v.to_string()),
                time: raw.time.map(|v| v.to_string()),
                category: raw.category.trim().to_string(),
                photographer: raw.photographer,
            })),
            Err(e) => rows.push(Err((lineno, format!("malformed JSON: {e}")))),
        }
    }
    rows_to_dataset(rows, opts)
}

/// Write observations back out in the CSV schema.
pub fn write_observations_csv(path: &Path, dataset: &Dataset) -> Result<()> {
    let mut out = String::from("lon,lat,time,category,photographer\n");
    for obs in &dataset.observations {
        match obs.point {
            Some(p) => {
                out.push_str(&format!("{},{},{}", p.lon(), p.lat(), p.time_of_year()))
            }
            None => out.push_str(",,"),
        }
        out.push(',');
        out.push_str(dataset.categories.name(obs.category));
        out.push(',');
        if let Some(p) = obs.photographer {
            out.push_str(dataset.photographers.name(p));
        }
        out.push('\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

const DAYS_BEFORE_MONTH: [u32; 12] = [0, 31, 59, 90, 120, 151, 181, 212, 243, 273, 304, 334];

/// Convert an ISO `YYYY-MM-DD` date to a fraction of the year in `[0, 1)`.
///
/// Uses a fixed 365-day year: `(day_of_year - 1) / 365` with the non-leap
/// month lengths, so February 29th shares March 1st's fraction and
/// December 31st lands at `364/365`, adjacent to January 1st under the wrap
/// encoding.
pub fn date_to_fraction(iso_date: &str) -> Result<f64> {
    use chrono::Datelike;
    let date = chrono::NaiveDate::parse_from_str(iso_date.trim(), "%Y-%m-%d")
        .map_err(|e| Error::Data(format!("invalid date '{iso_date}': {e}")))?;
    let doy = DAYS_BEFORE_MONTH[date.month0() as usize] + date.day();
    Ok(f64::from(doy - 1) / 365.0)
}

/// Convert a CSV with header `lon,lat,date,category,photographer` into the
/// observation schema, mapping each ISO date to its fraction of the year.
/// Returns per-line diagnostics for rejected rows.
pub fn convert_dates_csv(input: &Path, output: &Path, opts: &LoadOptions) -> Result<Vec<String>> {
    let text = fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("cannot read CSV header: {e}")))?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Data(format!("missing column '{name}'")))
    };
    let cols = [
        col("lon")?,
        col("lat")?,
        col("date")?,
        col("category")?,
        col("photographer")?,
    ];

    let mut out = String::from("lon,lat,time,category,photographer\n");
    let mut diagnostics = Vec::new();
    let mut total = 0usize;
    for record in reader.records() {
        total += 1;
        let rec = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                diagnostics.push(format!("line {line}: malformed CSV row: {e}"));
                continue;
            }
        };
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| rec.get(cols[i]).unwrap_or("").trim();
        match date_to_fraction(field(2)) {
            Ok(fraction) => {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    field(0),
                    field(1),
                    fraction,
                    field(3),
                    field(4)
                ));
            }
            Err(e) => diagnostics.push(format!("line {line}: {e}")),
        }
    }
    if total > 0 && diagnostics.len() as f64 / total as f64 > opts.max_bad_fraction {
        return Err(Error::Data(format!(
            "{} of {total} rows invalid: {}",
            diagnostics.len(),
            diagnostics.join("; ")
        )));
    }
    let mut f = fs::File::create(output).map_err(|e| Error::io(output, e))?;
    f.write_all(out.as_bytes())
        .map_err(|e| Error::io(output, e))?;
    Ok(diagnostics)
}

/// Ground-truth occupancy region for one synthetic category: a spherical cap
/// plus an optional seasonal window (which may wrap across the year end).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CategoryRegion {
    pub name: String,
    pub center_lon: f64,
    pub center_lat: f64,
    /// Cap radius in radians of great-circle distance.
    pub radius: f64,
    #[serde(default)]
    pub season: Option<(f64, f64)>,
}

/// A synthetic photographer biased toward a home region: observations inside
/// the home cap are attributed to them with weight 1, elsewhere with
/// `away_weight`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhotographerHome {
    pub name: String,
    pub center_lon: f64,
    pub center_lat: f64,
    pub radius: f64,
    #[serde(default = "default_away_weight")]
    pub away_weight: f64,
}

fn default_away_weight() -> f64 {
    0.05
}

/// Ground-truth world for the synthetic verifier. Doubles as the membership
/// oracle for everything it generates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticWorld {
    #[serde(default)]
    pub seed: u64,
    #[serde(rename = "category")]
    pub categories: Vec<CategoryRegion>,
    #[serde(rename = "photographer", default)]
    pub photographers: Vec<PhotographerHome>,
}

fn season_contains(window: (f64, f64), time: f64) -> bool {
    let (a, b) = window;
    if a <= b {
        (a..=b).contains(&time)
    } else {
        time >= a || time <= b
    }
}

impl SyntheticWorld {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let world: SyntheticWorld =
            toml::from_str(text).map_err(|e| Error::Config(format!("world config: {e}")))?;
        world.validate()?;
        Ok(world)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.categories.is_empty() {
            return Err(Error::Config("world defines no categories".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for c in &self.categories {
            if c.name.is_empty() || !seen.insert(&c.name) {
                return Err(Error::Config(format!(
                    "category names must be unique and non-empty (offender: '{}')",
                    c.name
                )));
            }
            if !(c.radius > 0.0) || c.radius > std::f64::consts::PI {
                return Err(Error::Config(format!(
                    "category '{}' has degenerate radius {}",
                    c.name, c.radius
                )));
            }
            SpatioTemporalPoint::new(c.center_lon, c.center_lat, 0.0)?;
            if let Some((a, b)) = c.season {
                if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
                    return Err(Error::Config(format!(
                        "category '{}' season window must lie in [0, 1]",
                        c.name
                    )));
                }
            }
        }
        for p in &self.photographers {
            if !(p.radius > 0.0) {
                return Err(Error::Config(format!(
                    "photographer '{}' has degenerate radius {}",
                    p.name, p.radius
                )));
            }
            if p.away_weight < 0.0 {
                return Err(Error::Config(format!(
                    "photographer '{}' away_weight must be >= 0",
                    p.name
                )));
            }
            SpatioTemporalPoint::new(p.center_lon, p.center_lat, 0.0)?;
        }
        Ok(())
    }

    /// Ground-truth membership oracle: is the point inside category
    /// `category`'s cap and season?
    pub fn contains(&self, category: usize, point: &SpatioTemporalPoint) -> bool {
        let region = &self.categories[category];
        let d = great_circle_rad(
            point.lon(),
            point.lat(),
            region.center_lon,
            region.center_lat,
        );
        if d > region.radius {
            return false;
        }
        match region.season {
            Some(window) => season_contains(window, point.time_of_year()),
            None => true,
        }
    }

    /// Sample `n_per_category` presence observations per category, each
    /// inside its cap and season, attributed to photographers by home-region
    /// weight. Deterministic for a fixed world (seeded internally).
    pub fn generate(&self, n_per_category: usize) -> Result<Dataset> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        self.generate_with(n_per_category, &mut rng)
    }

    /// Like [`generate`](Self::generate) but drawing from a caller-supplied
    /// stream, for producing disjoint train/test splits.
    pub fn generate_with(&self, n_per_category: usize, rng: &mut impl Rng) -> Result<Dataset> {
        self.validate()?;
        let mut dataset = Dataset::default();
        for c in &self.categories {
            dataset.categories.intern(&c.name);
        }
        for p in &self.photographers {
            dataset.photographers.intern(&p.name);
        }
        for (cid, region) in self.categories.iter().enumerate() {
            for _ in 0..n_per_category {
                let (lon, lat) = sample_cap(
                    region.center_lon,
                    region.center_lat,
                    region.radius,
                    rng,
                );
                let time = match region.season {
                    None => rng.random_range(0.0..1.0),
                    Some((a, b)) => {
                        if a <= b {
                            rng.random_range(a..=b)
                        } else {
                            // wrapped window
                            let span = (1.0 - a) + b;
                            let u = rng.random_range(0.0..span);
                            let t = a + u;
                            if t > 1.0 {
                                t - 1.0
                            } else {
                                t
                            }
                        }
                    }
                };
                let point = SpatioTemporalPoint::new(lon, lat, time)?;
                let photographer = self.pick_photographer(&point, rng);
                dataset.observations.push(Observation {
                    point: Some(point),
                    category: cid,
                    photographer,
                });
            }
        }
        Ok(dataset)
    }

    fn pick_photographer(&self, point: &SpatioTemporalPoint, rng: &mut impl Rng) -> Option<usize> {
        if self.photographers.is_empty() {
            return None;
        }
        let weights: Vec<f64> = self
            .photographers
            .iter()
            .map(|p| {
                let d = great_circle_rad(point.lon(), point.lat(), p.center_lon, p.center_lat);
                if d <= p.radius {
                    1.0
                } else {
                    p.away_weight
                }
            })
            .collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return None;
        }
        let mut draw = rng.random_range(0.0..total);
        for (i, w) in weights.iter().enumerate() {
            if draw < *w {
                return Some(i);
            }
            draw -= w;
        }
        Some(self.photographers.len() - 1)
    }
}

/// Uniform sample from the spherical cap of the given angular radius.
fn sample_cap(center_lon: f64, center_lat: f64, radius: f64, rng: &mut impl Rng) -> (f64, f64) {
    // local frame at the cap center
    let lon = center_lon.to_radians();
    let lat = center_lat.to_radians();
    let center = [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()];
    let mut east = [-center[1], center[0], 0.0];
    let norm = (east[0] * east[0] + east[1] * east[1]).sqrt();
    if norm < 1e-12 {
        east = [1.0, 0.0, 0.0];
    } else {
        east[0] /= norm;
        east[1] /= norm;
    }
    let north = [
        center[1] * east[2] - center[2] * east[1],
        center[2] * east[0] - center[0] * east[2],
        center[0] * east[1] - center[1] * east[0],
    ];

    // area-uniform polar angle within the cap, uniform azimuth
    let cos_theta = 1.0 - rng.random_range(0.0..1.0) * (1.0 - radius.cos());
    let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    let (sp, cp) = phi.sin_cos();

    let mut v = [0.0f64; 3];
    for i in 0..3 {
        v[i] = sin_theta * cp * east[i] + sin_theta * sp * north[i] + cos_theta * center[i];
    }
    let out_lat = v[2].clamp(-1.0, 1.0).asin().to_degrees();
    let out_lon = v[1].atan2(v[0]).to_degrees();
    (out_lon, out_lat)
}

/// Synthetic classifier scores that confuse adjacent category pairs.
///
/// Categories are paired `(0,1), (2,3), ...`; the true label receives the
/// `top_share` mass with probability `accuracy`, otherwise its partner does.
/// An unpaired final category always scores correctly.
pub fn confusable_pair_scores(
    labels: &[usize],
    n_categories: usize,
    accuracy: f64,
    top_share: f64,
    rng: &mut impl Rng,
) -> Vec<Vec<f64>> {
    assert!(
        (0.5..=1.0).contains(&top_share),
        "top_share must be in [0.5, 1]"
    );
    labels
        .iter()
        .map(|&y| {
            let mut row = vec![0.0; n_categories];
            let partner = if y % 2 == 0 { y + 1 } else { y - 1 };
            if partner >= n_categories {
                row[y] = 1.0;
            } else if rng.random::<f64>() < accuracy {
                row[y] = top_share;
                row[partner] = 1.0 - top_share;
            } else {
                row[partner] = top_share;
                row[y] = 1.0 - top_share;
            }
            row
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn csv_row_parses_into_a_record() {
        let text = "lon,lat,time,category,photographer\n0,0,0.5,toad,alice\n";
        let d = load_csv(text, &LoadOptions::default()).unwrap();
        assert_eq!(d.len(), 1);
        let obs = &d.observations[0];
        assert_eq!(obs.point.unwrap().time_of_year(), 0.5);
        assert_eq!(d.categories.name(obs.category), "toad");
        assert_eq!(d.photographers.name(obs.photographer.unwrap()), "alice");
    }

    #[test]
    fn out_of_range_latitude_is_rejected_with_a_line_number() {
        let text = "lon,lat,time,category,photographer\n0,91,0.5,toad,\n";
        let d = load_csv(text, &LoadOptions { max_bad_fraction: 1.0 }).unwrap();
        assert_eq!(d.len(), 0);
        assert_eq!(d.diagnostics.len(), 1);
        assert!(d.diagnostics[0].starts_with("line 2:"), "{:?}", d.diagnostics);
        assert!(d.diagnostics[0].contains("latitude"));
    }

    #[test]
    fn one_bad_row_of_three_still_loads_the_rest() {
        let text = "lon,lat,time,category,photographer\n\
                    0,0,0.5,toad,alice\n\
                    0,notanumber,0.5,toad,\n\
                    10,10,0.25,newt,bob\n";
        let d = load_csv(text, &LoadOptions::default()).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.diagnostics.len(), 1);
    }

    #[test]
    fn too_many_bad_rows_abort_the_load() {
        let text = "lon,lat,time,category,photographer\n\
                    bad,0,0.5,toad,\n\
                    0,bad,0.5,toad,\n\
                    10,10,0.25,newt,\n";
        let err = load_csv(
            text,
            &LoadOptions {
                max_bad_fraction: 0.5,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn ragged_rows_are_rejected_per_line() {
        let text = "lon,lat,time,category,photographer\n\
                    0,0,0.5,toad,alice\n\
                    0,0\n";
        let d = load_csv(text, &LoadOptions::default()).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.diagnostics.len(), 1);
        assert!(d.diagnostics[0].contains("line 3"), "{:?}", d.diagnostics);
    }

    #[test]
    fn missing_column_is_an_error() {
        let text = "lon,lat,category,photographer\n0,0,toad,\n";
        assert!(matches!(
            load_csv(text, &LoadOptions::default()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn empty_location_fields_give_a_locationless_record() {
        let text = "lon,lat,time,category,photographer\n,,,toad,\n";
        let d = load_csv(text, &LoadOptions::default()).unwrap();
        assert_eq!(d.len(), 1);
        assert!(d.observations[0].point.is_none());
        assert!(d.observations[0].photographer.is_none());
    }

    #[test]
    fn jsonl_rows_parse_like_csv_rows() {
        let text = r#"{"lon": 0.0, "lat": 0.0, "time": 0.5, "category": "toad", "photographer": "alice"}
{"category": "newt"}
{"lon": 200.0, "lat": 0.0, "time": 0.5, "category": "toad"}"#;
        let d = load_jsonl(text, &LoadOptions::default()).unwrap();
        assert_eq!(d.len(), 2);
        assert!(d.observations[1].point.is_none());
        assert_eq!(d.diagnostics.len(), 1);
        assert!(d.diagnostics[0].contains("line 3"));
    }

    #[test]
    fn vocabulary_ids_follow_first_appearance() {
        let text = "lon,lat,time,category,photographer\n\
                    0,0,0.1,b,\n\
                    0,0,0.2,a,\n\
                    0,0,0.3,b,\n";
        let d = load_csv(text, &LoadOptions::default()).unwrap();
        assert_eq!(d.categories.get("b"), Some(0));
        assert_eq!(d.categories.get("a"), Some(1));
        assert_eq!(d.observations[2].category, 0);
    }

    #[test]
    fn date_fractions_match_the_fixed_365_day_year() {
        assert_eq!(date_to_fraction("2015-01-01").unwrap(), 0.0);
        assert_relative_eq!(
            date_to_fraction("2015-12-31").unwrap(),
            364.0 / 365.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            date_to_fraction("2015-07-02").unwrap(),
            182.0 / 365.0,
            max_relative = 1e-15
        );
        // leap day shares March 1st's fraction
        assert_eq!(
            date_to_fraction("2016-02-29").unwrap(),
            date_to_fraction("2015-03-01").unwrap()
        );
        assert!(date_to_fraction("2015-02-29").is_err());
        assert!(date_to_fraction("not-a-date").is_err());
    }

    fn two_cap_world() -> SyntheticWorld {
        SyntheticWorld {
            seed: 7,
            categories: vec![
                CategoryRegion {
                    name: "a".into(),
                    center_lon: 0.0,
                    center_lat: 0.0,
                    radius: 0.1,
                    season: None,
                },
                CategoryRegion {
                    name: "b".into(),
                    center_lon: 120.0,
                    center_lat: 30.0,
                    radius: 0.1,
                    season: Some((0.2, 0.4)),
                },
            ],
            photographers: vec![],
        }
    }

    #[test]
    fn generated_points_stay_inside_their_cap() {
        let world = two_cap_world();
        let d = world.generate(100).unwrap();
        for obs in d.observations.iter().filter(|o| o.category == 0) {
            let p = obs.point.unwrap();
            let dist = great_circle_rad(p.lon(), p.lat(), 0.0, 0.0);
            assert!(dist <= 0.1 + 1e-9, "distance {dist}");
        }
    }

    #[test]
    fn disjoint_caps_never_overlap_and_every_point_satisfies_its_oracle() {
        let world = two_cap_world();
        let d = world.generate(100).unwrap();
        for obs in &d.observations {
            let p = obs.point.unwrap();
            assert!(world.contains(obs.category, &p));
            let other = 1 - obs.category;
            assert!(!world.contains(other, &p), "point in both caps");
        }
    }

    #[test]
    fn seasonal_window_constrains_generated_times() {
        let world = two_cap_world();
        let d = world.generate(200).unwrap();
        for obs in d.observations.iter().filter(|o| o.category == 1) {
            let t = obs.point.unwrap().time_of_year();
            assert!((0.2..=0.4).contains(&t), "time {t}");
        }
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let world = two_cap_world();
        let a = world.generate(50).unwrap();
        let b = world.generate(50).unwrap();
        assert_eq!(a.observations, b.observations);
    }

    #[test]
    fn degenerate_region_is_a_configuration_error() {
        let mut world = two_cap_world();
        world.categories[0].radius = 0.0;
        assert!(matches!(world.generate(10), Err(Error::Config(_))));
    }

    #[test]
    fn world_round_trips_through_toml() {
        let text = "seed = 9\n\
                    [[category]]\n\
                    name = \"a\"\n\
                    center_lon = 10.0\n\
                    center_lat = 45.0\n\
                    radius = 0.3\n\
                    season = [0.25, 0.5]\n\
                    [[photographer]]\n\
                    name = \"alice\"\n\
                    center_lon = 12.0\n\
                    center_lat = 47.0\n\
                    radius = 0.5\n";
        let world = SyntheticWorld::from_toml_str(text).unwrap();
        assert_eq!(world.seed, 9);
        assert_eq!(world.categories[0].season, Some((0.25, 0.5)));
        assert_relative_eq!(world.photographers[0].away_weight, 0.05);
    }

    #[test]
    fn photographer_bias_prefers_home_regions() {
        let mut world = two_cap_world();
        world.photographers = vec![
            PhotographerHome {
                name: "home_a".into(),
                center_lon: 0.0,
                center_lat: 0.0,
                radius: 0.2,
                away_weight: 0.0,
            },
            PhotographerHome {
                name: "roamer".into(),
                center_lon: -90.0,
                center_lat: 0.0,
                radius: 0.2,
                away_weight: 0.1,
            },
        ];
        let d = world.generate(200).unwrap();
        let cat_a: Vec<_> = d
            .observations
            .iter()
            .filter(|o| o.category == 0)
            .collect();
        let home_a = cat_a
            .iter()
            .filter(|o| o.photographer == Some(0))
            .count();
        // home_a has weight 1 inside its cap vs 0.1 for the roamer
        assert!(home_a as f64 / cat_a.len() as f64 > 0.8);
    }

    #[test]
    fn confusable_scores_have_the_requested_accuracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let labels: Vec<usize> = (0..4000).map(|i| i % 4).collect();
        let scores = confusable_pair_scores(&labels, 4, 0.55, 0.55, &mut rng);
        let correct = scores
            .iter()
            .zip(&labels)
            .filter(|(row, &y)| {
                let best = row
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap()
                    .0;
                best == y
            })
            .count();
        let acc = correct as f64 / labels.len() as f64;
        assert!((acc - 0.55).abs() < 0.03, "accuracy {acc}");
        for row in &scores {
            assert_relative_eq!(row.iter().sum::<f64>(), 1.0, max_relative = 1e-12);
        }
    }
}
