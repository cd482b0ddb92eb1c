//! Combine a trained prior with ambiguous classifier scores.
//!
//! Two visually confusable categories live on opposite sides of the globe.
//! A synthetic classifier gets only 55% of them right; multiplying its
//! scores by the spatio-temporal prior and renormalizing recovers most
//! of the mistakes, while a uniform prior changes nothing.
//!
//! ```bash
//! cargo run --release --example combine_scores
//! ```

use std::io;

use geoprior::data::{confusable_pair_scores, CategoryRegion, SyntheticWorld};
use geoprior::inference::{combine, prior};
use geoprior::trainer::{train, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> geoprior::Result<()> {
    let world = SyntheticWorld {
        seed: 21,
        categories: vec![
            CategoryRegion {
                name: "european_toad".into(),
                center_lon: 10.0,
                center_lat: 50.0,
                radius: 0.3,
                season: None,
            },
            CategoryRegion {
                name: "spiny_toad".into(),
                center_lon: -5.0,
                center_lat: 40.0,
                radius: 0.12,
                season: None,
            },
        ],
        photographers: vec![],
    };
    let train_data = world.generate(200)?;
    let config = TrainConfig {
        embed_dim: 64,
        blocks: 2,
        batch_size: 64,
        seed: 5,
        ..TrainConfig::default()
    };
    let checkpoint = train(&train_data, &config, &mut io::sink())?;

    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let test_data = world.generate_with(500, &mut rng)?;
    let labels: Vec<usize> = test_data.observations.iter().map(|o| o.category).collect();
    let scores = confusable_pair_scores(&labels, 2, 0.55, 0.55, &mut rng);

    let mut classifier_hits = 0;
    let mut uniform_hits = 0;
    let mut combined_hits = 0;
    let mut shown = false;
    for ((obs, row), &label) in test_data.observations.iter().zip(&scores).zip(&labels) {
        let point = obs.point.unwrap();
        let (_, raw) = combine(row, None)?;
        let (_, unif) = combine(row, Some(&[0.5, 0.5]))?;
        let p = prior(&checkpoint.model, &point);
        let (posterior, fused) = combine(row, Some(&p))?;
        classifier_hits += (raw == label) as usize;
        uniform_hits += (unif == label) as usize;
        combined_hits += (fused == label) as usize;

        if !shown && raw != label && fused == label {
            println!("one rescued example:");
            println!("  location        ({:.1}, {:.1})", point.lon(), point.lat());
            println!("  true category   {}", test_data.categories.name(label));
            println!("  classifier says [{:.2}, {:.2}]", row[0], row[1]);
            println!("  prior says      [{:.3}, {:.3}]", p[0], p[1]);
            println!("  posterior       [{:.3}, {:.3}]\n", posterior[0], posterior[1]);
            shown = true;
        }
    }
    let n = labels.len() as f64;
    println!("top-1 over {} test points:", labels.len());
    println!("  classifier alone   {:.3}", classifier_hits as f64 / n);
    println!("  with uniform prior {:.3}", uniform_hits as f64 / n);
    println!("  with learned prior {:.3}", combined_hits as f64 / n);
    Ok(())
}
