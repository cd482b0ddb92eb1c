//! Train a prior on a synthetic world and verify it against the world's
//! ground-truth membership oracle.
//!
//! Builds four disjoint spherical-cap categories, trains with the default
//! presence-only objective, then scores the learned prior by AUC on uniform
//! probe points and saves a checkpoint.
//!
//! ```bash
//! cargo run --release --example train_synthetic
//! ```

use std::path::Path;

use geoprior::data::{CategoryRegion, SyntheticWorld};
use geoprior::eval::roc_auc;
use geoprior::inference::prior;
use geoprior::loss::uniform_sphere_point;
use geoprior::trainer::{train, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> geoprior::Result<()> {
    let world = SyntheticWorld {
        seed: 11,
        categories: vec![
            cap("cascade_newt", -120.0, 30.0),
            cap("pampas_fox", -40.0, -20.0),
            cap("steppe_eagle", 50.0, 40.0),
            cap("reef_heron", 140.0, -35.0),
        ],
        photographers: vec![],
    };
    let dataset = world.generate(200)?;
    println!(
        "generated {} observations over {} categories",
        dataset.len(),
        dataset.categories.len()
    );

    // smaller than the default D=256/B=4 so the example runs in seconds
    let config = TrainConfig {
        embed_dim: 64,
        blocks: 2,
        batch_size: 64,
        seed: 7,
        ..TrainConfig::default()
    };
    let mut log = Vec::new();
    let checkpoint = train(&dataset, &config, &mut log)?;
    let log = String::from_utf8_lossy(&log);
    let lines: Vec<&str> = log.lines().collect();
    for (i, line) in lines.iter().enumerate() {
        if i % 5 == 0 || i == lines.len() - 1 {
            println!("{line}");
        }
    }

    // probe the prior against the ground truth
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let probes: Vec<_> = (0..5000).map(|_| uniform_sphere_point(&mut rng)).collect();
    let priors: Vec<Vec<f64>> = probes
        .iter()
        .map(|p| prior(&checkpoint.model, p))
        .collect();
    println!("\nper-category AUC against the world oracle (5000 probes):");
    for c in 0..dataset.categories.len() {
        let scores: Vec<f64> = priors.iter().map(|p| p[c]).collect();
        let truth: Vec<bool> = probes.iter().map(|p| world.contains(c, p)).collect();
        println!(
            "  {:<14} {:.4}",
            dataset.categories.name(c),
            roc_auc(&scores, &truth)?
        );
    }

    let path = Path::new("synthetic_model.ckpt");
    checkpoint.save(path)?;
    println!("\ncheckpoint saved to {}", path.display());
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
