//! Show that the prior learns time-of-year structure, and that the no-date
//! variant ignores it.
//!
//! One category only exists between late March and the end of June. After
//! training with dates the prior inside its range rises and falls with the
//! season; the --no-date ablation stays flat.
//!
//! ```bash
//! cargo run --release --example seasonal_prior
//! ```

use std::io;

use geoprior::data::{CategoryRegion, SyntheticWorld};
use geoprior::encoder::{SpatioTemporalPoint, VariantFlags};
use geoprior::inference::prior;
use geoprior::trainer::{train, TrainConfig};

fn main() -> geoprior::Result<()> {
    let world = SyntheticWorld {
        seed: 31,
        categories: vec![
            CategoryRegion {
                name: "spring_frog".into(),
                center_lon: 10.0,
                center_lat: 45.0,
                radius: 0.35,
                season: Some((0.25, 0.5)),
            },
            CategoryRegion {
                name: "year_round_gull".into(),
                center_lon: -100.0,
                center_lat: -30.0,
                radius: 0.35,
                season: None,
            },
        ],
        photographers: vec![],
    };
    let dataset = world.generate(300)?;
    let base = TrainConfig {
        embed_dim: 64,
        blocks: 2,
        batch_size: 64,
        seed: 9,
        ..TrainConfig::default()
    };
    let dated = train(&dataset, &base, &mut io::sink())?;
    let undated = train(
        &dataset,
        &TrainConfig {
            variants: VariantFlags {
                use_date: false,
                ..VariantFlags::default()
            },
            ..base
        },
        &mut io::sink(),
    )?;

    // query the center of the seasonal range through the year
    println!("prior for spring_frog at its range center, by month:\n");
    println!("  month   with dates   no dates");
    for month in 0..12 {
        let time = (month as f64 + 0.5) / 12.0;
        let point = SpatioTemporalPoint::new(10.0, 45.0, time)?;
        let with = prior(&dated.model, &point)[0];
        let without = prior(&undated.model, &point)[0];
        let bar = "#".repeat((with * 40.0) as usize);
        println!("  {:>5}   {with:>9.3}   {without:>8.3}  {bar}", month + 1);
    }
    println!("\n(true season window is months ~4-6; the no-date column is flat)");
    Ok(())
}
