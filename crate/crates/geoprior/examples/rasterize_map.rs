//! Render per-category prior maps as PGM images.
//!
//! Trains a quick model with one migratory (seasonal) category, then writes
//! equirectangular rasters at three times of year. The embedding field is
//! computed once per time point and shared across categories, which is what
//! keeps many-category rasterization cheap.
//!
//! ```bash
//! cargo run --release --example rasterize_map
//! # writes maps/<category>_t<time>.pgm
//! ```

use std::fs;
use std::io;
use std::time::Instant;

use geoprior::data::{CategoryRegion, SyntheticWorld};
use geoprior::inference::{rasterize_from_field, EmbeddingField};
use geoprior::trainer::{train, TrainConfig};

fn main() -> geoprior::Result<()> {
    let world = SyntheticWorld {
        seed: 31,
        categories: vec![
            CategoryRegion {
                name: "spring_migrant".into(),
                center_lon: 10.0,
                center_lat: 45.0,
                radius: 0.35,
                season: Some((0.25, 0.5)),
            },
            CategoryRegion {
                name: "resident".into(),
                center_lon: -100.0,
                center_lat: -30.0,
                radius: 0.35,
                season: None,
            },
        ],
        photographers: vec![],
    };
    let dataset = world.generate(300)?;
    let config = TrainConfig {
        embed_dim: 64,
        blocks: 2,
        batch_size: 64,
        seed: 9,
        ..TrainConfig::default()
    };
    let checkpoint = train(&dataset, &config, &mut io::sink())?;

    fs::create_dir_all("maps").map_err(|e| geoprior::Error::io("maps", e))?;
    let (height, width) = (200, 400);
    for time in [0.1, 0.35, 0.8] {
        let start = Instant::now();
        let field = EmbeddingField::compute(&checkpoint.model, time, height, width)?;
        let field_ms = start.elapsed().as_millis();
        let start = Instant::now();
        for category in 0..dataset.categories.len() {
            let raster = rasterize_from_field(&checkpoint.model, &field, category)?;
            let name = format!(
                "maps/{}_t{:02}.pgm",
                dataset.categories.name(category),
                (time * 100.0) as u32
            );
            raster.write_pgm(name.as_ref())?;
        }
        println!(
            "t={time}: embedding field {field_ms} ms, then {} category maps in {} ms",
            dataset.categories.len(),
            start.elapsed().as_millis()
        );
    }
    println!("wrote {}x{} PGM maps under maps/", height, width);
    println!("(the spring_migrant map should light up only at t=0.35)");
    Ok(())
}
