//! Inspect the photographer embeddings after training.
//!
//! Two photographers with disjoint home regions each report only the
//! categories found there. Training ties photographers to their locations
//! and to the categories they report, so the learned affinities recover the
//! bias even though it was never labeled explicitly. The photographer matrix
//! is a training-time device only; none of this is needed at prediction
//! time.
//!
//! ```bash
//! cargo run --release --example photographer_affinity
//! ```

use std::io;

use geoprior::data::{CategoryRegion, PhotographerHome, SyntheticWorld};
use geoprior::embeddings::{photographer_location_affinity, photographer_object_affinity};
use geoprior::encoder::SpatioTemporalPoint;
use geoprior::trainer::{train, TrainConfig};

fn main() -> geoprior::Result<()> {
    let world = SyntheticWorld {
        seed: 41,
        categories: vec![
            CategoryRegion {
                name: "andes_gull".into(),
                center_lon: -70.0,
                center_lat: -20.0,
                radius: 0.4,
                season: None,
            },
            CategoryRegion {
                name: "alps_finch".into(),
                center_lon: 10.0,
                center_lat: 46.0,
                radius: 0.4,
                season: None,
            },
        ],
        photographers: vec![
            PhotographerHome {
                name: "ana".into(),
                center_lon: -70.0,
                center_lat: -20.0,
                radius: 0.6,
                away_weight: 0.0,
            },
            PhotographerHome {
                name: "elsa".into(),
                center_lon: 10.0,
                center_lat: 46.0,
                radius: 0.6,
                away_weight: 0.0,
            },
        ],
    };
    let dataset = world.generate(200)?;
    let checkpoint = train(
        &dataset,
        &TrainConfig {
            embed_dim: 64,
            blocks: 2,
            batch_size: 64,
            seed: 13,
            ..TrainConfig::default()
        },
        &mut io::sink(),
    )?;
    let model = &checkpoint.model;
    let photographers = model
        .photographer_matrix()
        .expect("trained with photographers");

    println!("photographer-location affinity (rows: photographers, cols: region centers):\n");
    let andes = SpatioTemporalPoint::new(-70.0, -20.0, 0.5)?;
    let alps = SpatioTemporalPoint::new(10.0, 46.0, 0.5)?;
    println!("            andes    alps");
    for p in 0..checkpoint.photographers.len() {
        let at_andes =
            photographer_location_affinity(&model.embed(&andes), photographers, p)?;
        let at_alps = photographer_location_affinity(&model.embed(&alps), photographers, p)?;
        println!(
            "  {:<8} {at_andes:>7.3}  {at_alps:>6.3}",
            checkpoint.photographers.name(p)
        );
    }

    println!("\nphotographer-object affinity (who reports what):\n");
    println!("            andes_gull  alps_finch");
    for p in 0..checkpoint.photographers.len() {
        let gull = photographer_object_affinity(model.objects(), photographers, 0, p)?;
        let finch = photographer_object_affinity(model.objects(), photographers, 1, p)?;
        println!(
            "  {:<8} {gull:>10.3}  {finch:>10.3}",
            checkpoint.photographers.name(p)
        );
    }
    println!("\n(each photographer should prefer their home region and its category)");
    Ok(())
}
