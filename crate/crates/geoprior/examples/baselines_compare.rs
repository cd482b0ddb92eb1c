//! Compare the learned prior against the reference baselines.
//!
//! Builds nearest-neighbor and grid indices over the training observations,
//! sweeps the neighbor count on a validation split, and prints the top-k
//! accuracy table for every prior combined with the same ambiguous
//! classifier scores.
//!
//! ```bash
//! cargo run --release --example baselines_compare
//! ```

use std::io;

use geoprior::baselines::{
    GridIndex, GridSource, NearestCountSource, NearestRadiusSource, NeighborIndex,
};
use geoprior::data::{confusable_pair_scores, CategoryRegion, Dataset, SyntheticWorld};
use geoprior::eval::{compare_priors, sweep, EvalExample};
use geoprior::inference::{LearnedSource, PriorSource};
use geoprior::trainer::{train, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn examples_from(dataset: &Dataset, scores: &[Vec<f64>]) -> Vec<EvalExample> {
    dataset
        .observations
        .iter()
        .zip(scores)
        .map(|(obs, row)| EvalExample {
            point: obs.point,
            label: obs.category,
            scores: row.clone(),
        })
        .collect()
}

fn main() -> geoprior::Result<()> {
    let world = SyntheticWorld {
        seed: 11,
        categories: vec![
            cap("a", -120.0, 30.0),
            cap("b", -40.0, -20.0),
            cap("c", 50.0, 40.0),
            cap("d", 140.0, -35.0),
        ],
        photographers: vec![],
    };
    let train_data = world.generate(200)?;
    let checkpoint = train(
        &train_data,
        &TrainConfig {
            embed_dim: 64,
            blocks: 2,
            batch_size: 64,
            seed: 7,
            ..TrainConfig::default()
        },
        &mut io::sink(),
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(70);
    let val_data = world.generate_with(50, &mut rng)?;
    let test_data = world.generate_with(250, &mut rng)?;
    let c = train_data.categories.len();
    let val_labels: Vec<usize> = val_data.observations.iter().map(|o| o.category).collect();
    let test_labels: Vec<usize> = test_data.observations.iter().map(|o| o.category).collect();
    let val_scores = confusable_pair_scores(&val_labels, c, 0.55, 0.55, &mut rng);
    let test_scores = confusable_pair_scores(&test_labels, c, 0.55, 0.55, &mut rng);
    let validation = examples_from(&val_data, &val_scores);
    let test = examples_from(&test_data, &test_scores);

    let index = NeighborIndex::build(&train_data);
    let alpha = 1.0 / c as f64;

    // pick k on the validation split
    let k_grid = [1usize, 5, 15, 45];
    let candidates: Vec<NearestCountSource> = k_grid
        .iter()
        .map(|&k| NearestCountSource::new(&index, k, alpha))
        .collect::<geoprior::Result<_>>()?;
    let refs: Vec<&dyn PriorSource> = candidates.iter().map(|c| c as &dyn PriorSource).collect();
    let best = sweep(&refs, &validation)?;
    println!("nearest-neighbor sweep over k={k_grid:?} picked k={}\n", k_grid[best]);

    let grid = GridIndex::build(&train_data, 36, 72)?;
    let nn_num = NearestCountSource::new(&index, k_grid[best], alpha)?;
    let nn_spatial = NearestRadiusSource::new(&index, 0.5, alpha)?;
    let grid_source = GridSource::new(&grid, alpha);
    let learned = LearnedSource::new(&checkpoint.model, 0.0);
    let sources: Vec<&dyn PriorSource> = vec![&nn_num, &nn_spatial, &grid_source, &learned];
    let report = compare_priors(&test, &sources, "synthetic four-cap world")?;
    print!("{}", report.to_text_table());
    Ok(())
}

fn cap(name: &str, lon: f64, lat: f64) -> CategoryRegion {
    CategoryRegion {
        name: name.into(),
        center_lon: lon,
        center_lat: lat,
        radius: 0.4,
        season: None,
    }
}
