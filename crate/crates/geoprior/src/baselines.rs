//! Reference priors: uniform, k-nearest-neighbor count voting, fixed-radius
//! neighbor counting, and a discretized lon/lat grid.
//!
//! All of them ignore the time field, return smoothed category frequencies
//! compatible with [`combine`](crate::inference::combine), and fall back to
//! a pure uniform vector when no training data is in scope.

use crate::data::Dataset;
use crate::embeddings::PriorVector;
use crate::encoder::SpatioTemporalPoint;
use crate::error::{Error, Result};
use crate::inference::PriorSource;

/// Great-circle distance between two lon/lat points in degrees, returned in
/// radians on the unit sphere (haversine form).
pub fn great_circle_rad(lon1: f64, lat1: f64, lon2: f64, lat2: f64) -> f64 {
    let phi1 = lat1.to_radians();
    let phi2 = lat2.to_radians();
    let dphi = (lat2 - lat1).to_radians();
    let dlambda = (lon2 - lon1).to_radians();
    let a = (dphi / 2.0).sin().powi(2)
        + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * a.sqrt().clamp(0.0, 1.0).asin()
}

/// The all-equal prior: `1/C` per category.
pub fn uniform_prior(categories: usize) -> Result<PriorVector> {
    if categories == 0 {
        return Err(Error::Config("uniform prior needs at least one category".into()));
    }
    Ok(vec![1.0 / categories as f64; categories])
}

/// Every located training observation with its category, queryable by
/// great-circle distance.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    points: Vec<(f64, f64, usize)>,
    categories: usize,
}

impl NeighborIndex {
    pub fn build(dataset: &Dataset) -> Self {
        let points = dataset
            .observations
            .iter()
            .filter_map(|o| o.point.map(|p| (p.lon(), p.lat(), o.category)))
            .collect();
        NeighborIndex {
            points,
            categories: dataset.categories.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn categories(&self) -> usize {
        self.categories
    }

    /// Category frequencies among the `k` nearest training points, plus `alpha`.
    /// `k` is clamped to the index size; distance ties break by insertion order.
    pub fn nn_num_prior(
        &self,
        point: &SpatioTemporalPoint,
        k: usize,
        alpha: f64,
    ) -> Result<PriorVector> {
        if k == 0 {
            return Err(Error::Config("nearest-neighbor count k must be >= 1".into()));
        }
        if self.points.is_empty() {
            return Err(Error::Config("neighbor index is empty".into()));
        }
        let mut dists: Vec<(f64, usize, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, &(lon, lat, cat))| {
                (great_circle_rad(point.lon(), point.lat(), lon, lat), i, cat)
            })
            .collect();
        let k = k.min(dists.len());
        dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let mut counts = vec![0usize; self.categories];
        for &(_, _, cat) in dists.iter().take(k) {
            counts[cat] += 1;
        }
        Ok(counts
            .iter()
            .map(|&c| c as f64 / k as f64 + alpha)
            .collect())
    }

    /// Category frequencies among training points within `radius` radians,
    /// plus `alpha`; a ball holding no points yields the pure uniform vector.
    pub fn nn_spatial_prior(
        &self,
        point: &SpatioTemporalPoint,
        radius: f64,
        alpha: f64,
    ) -> Result<PriorVector> {
        if !(radius > 0.0) {
            return Err(Error::Config("nearest-neighbor radius must be > 0".into()));
        }
        let mut counts = vec![0usize; self.categories];
        let mut total = 0usize;
        for &(lon, lat, cat) in &self.points {
            if great_circle_rad(point.lon(), point.lat(), lon, lat) <= radius {
                counts[cat] += 1;
                total += 1;
            }
        }
        if total == 0 {
            return uniform_prior(self.categories);
        }
        Ok(counts
            .iter()
            .map(|&c| c as f64 / total as f64 + alpha)
            .collect())
    }
}

/// Per-bin category counts on an equirectangular lon/lat grid.
///
/// Bins are half-open `[lo, hi)` in both axes; the top edges (`lon = 180`,
/// `lat = 90`) belong to the last bin.
#[derive(Debug, Clone)]
pub struct GridIndex {
    lat_bins: usize,
    lon_bins: usize,
    categories: usize,
    counts: Vec<u32>,
}

impl GridIndex {
    pub fn build(dataset: &Dataset, lat_bins: usize, lon_bins: usize) -> Result<Self> {
        if lat_bins == 0 || lon_bins == 0 {
            return Err(Error::Config("grid needs at least one bin per axis".into()));
        }
        let categories = dataset.categories.len();
        let mut grid = GridIndex {
            lat_bins,
            lon_bins,
            categories,
            counts: vec![0; lat_bins * lon_bins * categories],
        };
        for obs in &dataset.observations {
            if let Some(p) = obs.point {
                let bin = grid.bin_of(&p);
                grid.counts[bin * categories + obs.category] += 1;
            }
        }
        Ok(grid)
    }

    pub fn lat_bins(&self) -> usize {
        self.lat_bins
    }

    pub fn lon_bins(&self) -> usize {
        self.lon_bins
    }

    fn bin_of(&self, point: &SpatioTemporalPoint) -> usize {
        let lat_idx = (((point.lat() + 90.0) / 180.0) * self.lat_bins as f64) as usize;
        let lon_idx = (((point.lon() + 180.0) / 360.0) * self.lon_bins as f64) as usize;
        let lat_idx = lat_idx.min(self.lat_bins - 1);
        let lon_idx = lon_idx.min(self.lon_bins - 1);
        lat_idx * self.lon_bins + lon_idx
    }

    /// Smoothed category frequencies of the bin containing `point`; an empty
    /// bin yields the pure uniform vector.
    pub fn grid_prior(&self, point: &SpatioTemporalPoint, alpha: f64) -> Result<PriorVector> {
        let bin = self.bin_of(point);
        let slice = &self.counts[bin * self.categories..(bin + 1) * self.categories];
        let total: u32 = slice.iter().sum();
        if total == 0 {
            return uniform_prior(self.categories);
        }
        Ok(slice
            .iter()
            .map(|&c| f64::from(c) / f64::from(total) + alpha)
            .collect())
    }
}

/// Uniform prior as a named source for evaluation runs.
#[derive(Debug, Clone)]
pub struct UniformSource {
    categories: usize,
}

impl UniformSource {
    pub fn new(categories: usize) -> Result<Self> {
        if categories == 0 {
            return Err(Error::Config("uniform prior needs at least one category".into()));
        }
        Ok(UniformSource { categories })
    }
}

impl PriorSource for UniformSource {
    fn name(&self) -> String {
        "uniform".into()
    }

    fn categories(&self) -> usize {
        self.categories
    }

    fn prior_at(&self, _point: &SpatioTemporalPoint) -> PriorVector {
        vec![1.0 / self.categories as f64; self.categories]
    }
}

/// k-nearest-count baseline as a named source.
pub struct NearestCountSource<'a> {
    index: &'a NeighborIndex,
    k: usize,
    alpha: f64,
}

impl<'a> NearestCountSource<'a> {
    pub fn new(index: &'a NeighborIndex, k: usize, alpha: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("nearest-neighbor count k must be >= 1".into()));
        }
        if index.is_empty() {
            return Err(Error::Config("neighbor index is empty".into()));
        }
        Ok(NearestCountSource { index, k, alpha })
    }
}

impl PriorSource for NearestCountSource<'_> {
    fn name(&self) -> String {
        format!("nn-num k={} alpha={}", self.k, self.alpha)
    }

    fn categories(&self) -> usize {
        self.index.categories()
    }

    fn prior_at(&self, point: &SpatioTemporalPoint) -> PriorVector {
        self.index
            .nn_num_prior(point, self.k, self.alpha)
            .expect("validated at construction")
    }
}

/// Fixed-radius neighbor baseline as a named source.
pub struct NearestRadiusSource<'a> {
    index: &'a NeighborIndex,
    radius: f64,
    alpha: f64,
}

impl<'a> NearestRadiusSource<'a> {
    pub fn new(index: &'a NeighborIndex, radius: f64, alpha: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Config("nearest-neighbor radius must be > 0".into()));
        }
        Ok(NearestRadiusSource {
            index,
            radius,
            alpha,
        })
    }
}

impl PriorSource for NearestRadiusSource<'_> {
    fn name(&self) -> String {
        format!("nn-spatial radius={} alpha={}", self.radius, self.alpha)
    }

    fn categories(&self) -> usize {
        self.index.categories()
    }

    fn prior_at(&self, point: &SpatioTemporalPoint) -> PriorVector {
        self.index
            .nn_spatial_prior(point, self.radius, self.alpha)
            .expect("validated at construction")
    }
}

/// Discretized-grid baseline as a named source.
pub struct GridSource<'a> {
    grid: &'a GridIndex,
    alpha: f64,
}

impl<'a> GridSource<'a> {
    pub fn new(grid: &'a GridIndex, alpha: f64) -> Self {
        GridSource { grid, alpha }
    }
}

impl PriorSource for GridSource<'_> {
    fn name(&self) -> String {
        format!(
            "grid {}x{} alpha={}",
            self.grid.lat_bins, self.grid.lon_bins, self.alpha
        )
    }

    fn categories(&self) -> usize {
        self.grid.categories
    }

    fn prior_at(&self, point: &SpatioTemporalPoint) -> PriorVector {
        self.grid
            .grid_prior(point, self.alpha)
            .expect("grid validated at construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Observation, Vocabulary};
    use approx::assert_relative_eq;

    fn point(lon: f64, lat: f64) -> SpatioTemporalPoint {
        SpatioTemporalPoint::new(lon, lat, 0.5).unwrap()
    }

    fn toy_dataset(points: &[(f64, f64, usize)], categories: usize) -> Dataset {
        let mut cats = Vocabulary::new();
        for c in 0..categories {
            cats.intern(&format!("cat{c}"));
        }
        Dataset {
            observations: points
                .iter()
                .map(|&(lon, lat, category)| Observation {
                    point: Some(point(lon, lat)),
                    category,
                    photographer: None,
                })
                .collect(),
            categories: cats,
            photographers: Vocabulary::new(),
            diagnostics: vec![],
        }
    }

    #[test]
    fn great_circle_known_distances() {
        assert_relative_eq!(great_circle_rad(0.0, 0.0, 90.0, 0.0), std::f64::consts::FRAC_PI_2);
        assert_relative_eq!(great_circle_rad(0.0, -90.0, 0.0, 90.0), std::f64::consts::PI);
        assert_relative_eq!(great_circle_rad(10.0, 20.0, 10.0, 20.0), 0.0);
        // antimeridian wrap: -179 and 179 are 2 degrees apart, not 358
        assert_relative_eq!(
            great_circle_rad(-179.0, 0.0, 179.0, 0.0),
            2.0f64.to_radians(),
            max_relative = 1e-9
        );
    }

    #[test]
    fn uniform_prior_values() {
        assert_eq!(uniform_prior(4).unwrap(), vec![0.25; 4]);
        assert_eq!(uniform_prior(1).unwrap(), vec![1.0]);
        assert!(uniform_prior(0).is_err());
    }

    #[test]
    fn k1_prior_peaks_at_nearest_category() {
        let data = toy_dataset(&[(0.0, 0.0, 0), (100.0, 40.0, 1)], 2);
        let idx = NeighborIndex::build(&data);
        let prior = idx.nn_num_prior(&point(1.0, 1.0), 1, 0.0).unwrap();
        assert_eq!(prior, vec![1.0, 0.0]);
    }

    #[test]
    fn large_alpha_washes_out_the_counts() {
        let data = toy_dataset(&[(0.0, 0.0, 0), (1.0, 1.0, 0)], 2);
        let idx = NeighborIndex::build(&data);
        let prior = idx.nn_num_prior(&point(120.0, -40.0), 2, 1000.0).unwrap();
        let ratio = prior[0] / prior[1];
        assert!((ratio - 1.0).abs() < 2e-3, "ratio {ratio}");
    }

    #[test]
    fn nn_num_matches_exhaustive_oracle_on_ten_points() {
        let pts: Vec<(f64, f64, usize)> = vec![
            (0.0, 0.0, 0),
            (5.0, 5.0, 1),
            (10.0, -10.0, 2),
            (-20.0, 30.0, 0),
            (40.0, 40.0, 1),
            (-60.0, -10.0, 2),
            (90.0, 10.0, 0),
            (-120.0, 50.0, 1),
            (160.0, -40.0, 2),
            (30.0, -70.0, 0),
        ];
        let data = toy_dataset(&pts, 3);
        let idx = NeighborIndex::build(&data);
        let q = point(12.0, 8.0);
        let k = 4;
        let prior = idx.nn_num_prior(&q, k, 0.5).unwrap();

        // oracle: sort every distance and recount
        let mut order: Vec<(f64, usize)> = pts
            .iter()
            .enumerate()
            .map(|(i, &(lon, lat, _))| (great_circle_rad(q.lon(), q.lat(), lon, lat), i))
            .collect();
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut counts = [0usize; 3];
        for &(_, i) in order.iter().take(k) {
            counts[pts[i].2] += 1;
        }
        for c in 0..3 {
            assert_relative_eq!(prior[c], counts[c] as f64 / k as f64 + 0.5);
        }
    }

    #[test]
    fn whole_sphere_radius_recovers_global_frequencies() {
        let data = toy_dataset(&[(0.0, 0.0, 0), (10.0, 0.0, 0), (20.0, 0.0, 1)], 2);
        let idx = NeighborIndex::build(&data);
        let prior = idx
            .nn_spatial_prior(&point(-100.0, 60.0), std::f64::consts::PI, 0.25)
            .unwrap();
        assert_relative_eq!(prior[0], 2.0 / 3.0 + 0.25);
        assert_relative_eq!(prior[1], 1.0 / 3.0 + 0.25);
    }

    #[test]
    fn empty_ball_falls_back_to_uniform() {
        let data = toy_dataset(&[(0.0, 0.0, 0), (1.0, 1.0, 1)], 2);
        let idx = NeighborIndex::build(&data);
        let prior = idx.nn_spatial_prior(&point(-179.0, -80.0), 0.01, 0.7).unwrap();
        assert_eq!(prior, vec![0.5, 0.5]);
    }

    #[test]
    fn spatial_oracle_on_ten_points() {
        let pts: Vec<(f64, f64, usize)> = (0..10)
            .map(|i| (i as f64 * 30.0 - 150.0, (i % 5) as f64 * 10.0, i % 3))
            .collect();
        let data = toy_dataset(&pts, 3);
        let idx = NeighborIndex::build(&data);
        let q = point(-30.0, 20.0);
        let radius = 0.9;
        let prior = idx.nn_spatial_prior(&q, radius, 0.1).unwrap();
        let mut counts = [0usize; 3];
        let mut total = 0;
        for &(lon, lat, c) in &pts {
            if great_circle_rad(q.lon(), q.lat(), lon, lat) <= radius {
                counts[c] += 1;
                total += 1;
            }
        }
        assert!(total > 0);
        for c in 0..3 {
            assert_relative_eq!(prior[c], counts[c] as f64 / total as f64 + 0.1);
        }
    }

    #[test]
    fn single_bin_grid_gives_global_frequencies() {
        let data = toy_dataset(&[(0.0, 0.0, 0), (100.0, 50.0, 0), (-50.0, -50.0, 1)], 2);
        let grid = GridIndex::build(&data, 1, 1).unwrap();
        let prior = grid.grid_prior(&point(13.0, 37.0), 0.5).unwrap();
        assert_relative_eq!(prior[0], 2.0 / 3.0 + 0.5);
        assert_relative_eq!(prior[1], 1.0 / 3.0 + 0.5);
    }

    #[test]
    fn bin_edges_use_half_open_intervals() {
        let data = toy_dataset(&[(0.0, 0.0, 0)], 1);
        let grid = GridIndex::build(&data, 2, 2).unwrap();
        // lon 0 sits exactly on the 2-bin edge and belongs to the upper bin
        assert_eq!(grid.bin_of(&point(0.0, 0.0)), 3);
        assert_eq!(grid.bin_of(&point(-0.0001, -0.0001)), 0);
        // top edges fold into the last bin
        assert_eq!(grid.bin_of(&point(180.0, 90.0)), 3);
    }

    #[test]
    fn grid_prior_matches_recount_oracle() {
        let pts: Vec<(f64, f64, usize)> = (0..20)
            .map(|i| {
                (
                    (i as f64 * 37.0) % 360.0 - 180.0,
                    (i as f64 * 17.0) % 180.0 - 90.0,
                    i % 4,
                )
            })
            .collect();
        let data = toy_dataset(&pts, 4);
        let grid = GridIndex::build(&data, 4, 8).unwrap();
        let q = point(10.0, 10.0);
        let prior = grid.grid_prior(&q, 0.25).unwrap();

        // recount in the query's bin
        let lat_idx = (((10.0 + 90.0) / 180.0) * 4.0) as usize;
        let lon_idx = (((10.0 + 180.0) / 360.0) * 8.0) as usize;
        let mut counts = [0usize; 4];
        let mut total = 0;
        for &(lon, lat, c) in &pts {
            let li = ((((lat + 90.0) / 180.0) * 4.0) as usize).min(3);
            let lj = ((((lon + 180.0) / 360.0) * 8.0) as usize).min(7);
            if li == lat_idx && lj == lon_idx {
                counts[c] += 1;
                total += 1;
            }
        }
        if total == 0 {
            assert_eq!(prior, vec![0.25; 4]);
        } else {
            for c in 0..4 {
                assert_relative_eq!(prior[c], counts[c] as f64 / total as f64 + 0.25);
            }
        }
    }

    #[test]
    fn wide_radius_and_single_bin_grid_agree() {
        let pts: Vec<(f64, f64, usize)> = (0..12)
            .map(|i| ((i as f64 * 31.0) % 340.0 - 170.0, (i as f64 * 13.0) % 160.0 - 80.0, i % 2))
            .collect();
        let data = toy_dataset(&pts, 2);
        let idx = NeighborIndex::build(&data);
        let grid = GridIndex::build(&data, 1, 1).unwrap();
        let q = point(45.0, 45.0);
        let a = idx.nn_spatial_prior(&q, std::f64::consts::PI, 0.1).unwrap();
        let b = grid.grid_prior(&q, 0.1).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(x, y, max_relative = 1e-12);
        }
    }

    #[test]
    fn baselines_ignore_the_time_field() {
        let data = toy_dataset(&[(0.0, 0.0, 0), (50.0, 20.0, 1)], 2);
        let idx = NeighborIndex::build(&data);
        let grid = GridIndex::build(&data, 4, 4).unwrap();
        let spring = SpatioTemporalPoint::new(10.0, 10.0, 0.1).unwrap();
        let autumn = SpatioTemporalPoint::new(10.0, 10.0, 0.9).unwrap();
        assert_eq!(
            idx.nn_num_prior(&spring, 2, 0.1).unwrap(),
            idx.nn_num_prior(&autumn, 2, 0.1).unwrap()
        );
        assert_eq!(
            idx.nn_spatial_prior(&spring, 0.5, 0.1).unwrap(),
            idx.nn_spatial_prior(&autumn, 0.5, 0.1).unwrap()
        );
        assert_eq!(
            grid.grid_prior(&spring, 0.1).unwrap(),
            grid.grid_prior(&autumn, 0.1).unwrap()
        );
    }

    #[test]
    fn smoothed_priors_are_strictly_positive() {
        let data = toy_dataset(&[(0.0, 0.0, 0), (10.0, 10.0, 1), (20.0, 0.0, 2)], 3);
        let idx = NeighborIndex::build(&data);
        let grid = GridIndex::build(&data, 3, 3).unwrap();
        let q = point(-170.0, -80.0);
        for prior in [
            idx.nn_num_prior(&q, 2, 0.25).unwrap(),
            idx.nn_spatial_prior(&q, 0.2, 0.25).unwrap(),
            grid.grid_prior(&q, 0.25).unwrap(),
        ] {
            assert!(prior.iter().all(|&v| v > 0.0), "{prior:?}");
        }
    }
}
