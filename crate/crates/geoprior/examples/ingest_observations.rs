//! Load observation files and convert calendar dates to the time-of-year
//! fraction the model consumes.
//!
//! Writes a small CSV with ISO dates, converts it to the observation schema,
//! loads it back (collecting per-line diagnostics for the bad row), and
//! prints the resulting records and vocabularies.
//!
//! ```bash
//! cargo run --example ingest_observations
//! ```

use std::fs;

use geoprior::data::{
    convert_dates_csv, date_to_fraction, load_observations, LoadOptions, ObsFormat,
};

fn main() -> geoprior::Result<()> {
    let dir = std::env::temp_dir().join("geoprior_ingest_example");
    fs::create_dir_all(&dir).map_err(|e| geoprior::Error::io(&dir, e))?;
    let dated = dir.join("dated.csv");
    let converted = dir.join("observations.csv");

    fs::write(
        &dated,
        "lon,lat,date,category,photographer\n\
         10.5,47.2,2015-04-12,alps_finch,elsa\n\
         -70.1,-19.8,2015-11-03,andes_gull,ana\n\
         3.3,50.9,2015-02-30,alps_finch,\n\
         -69.5,-21.0,2016-02-29,andes_gull,ana\n",
    )
    .map_err(|e| geoprior::Error::io(&dated, e))?;

    let diagnostics = convert_dates_csv(&dated, &converted, &LoadOptions::default())?;
    println!("converted {} -> {}", dated.display(), converted.display());
    for d in &diagnostics {
        println!("  rejected {d}");
    }
    println!(
        "\nleap day maps to the same fraction as March 1st: {:.5} == {:.5}",
        date_to_fraction("2016-02-29")?,
        date_to_fraction("2015-03-01")?
    );

    let dataset = load_observations(&converted, ObsFormat::Csv, &LoadOptions::default())?;
    println!("\nloaded {} observations:", dataset.len());
    for obs in &dataset.observations {
        let p = obs.point.unwrap();
        println!(
            "  {:<11} at ({:>6.1}, {:>5.1}) t={:.3} by {}",
            dataset.categories.name(obs.category),
            p.lon(),
            p.lat(),
            p.time_of_year(),
            obs.photographer
                .map(|i| dataset.photographers.name(i))
                .unwrap_or("<unknown>"),
        );
    }
    println!(
        "\nvocabularies: categories {:?}, photographers {:?}",
        dataset.categories.names(),
        dataset.photographers.names()
    );
    Ok(())
}
