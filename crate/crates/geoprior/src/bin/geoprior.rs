//! Command-line front end for the `geoprior` library: synthetic data,
//! training, prediction, score combination, evaluation, rasterization, and
//! date conversion as subcommands. All logic lives in the library; this
//! binary parses flags, wires files together, and maps error categories to
//! exit codes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use geoprior::baselines::{
    GridIndex, GridSource, NearestCountSource, NearestRadiusSource, NeighborIndex,
};
use geoprior::data::{
    confusable_pair_scores, convert_dates_csv, load_observations, write_observations_csv, Dataset,
    LoadOptions, ObsFormat, SyntheticWorld, Vocabulary,
};
use geoprior::encoder::VariantFlags;
use geoprior::error::Error;
use geoprior::eval::{compare_priors, EvalExample};
use geoprior::inference::{
    combine, prior, rasterize, smooth_prior, write_scores_csv, LearnedSource, Mask, PriorSource,
    ScoreTable,
};
use geoprior::loss::NegativeSampler;
use geoprior::numcore::AdamConfig;
use geoprior::trainer::{train, Checkpoint, TrainConfig};

#[derive(Parser)]
#[command(
    name = "geoprior",
    version,
    about = "Train and apply presence-only spatio-temporal priors over object categories"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic observations and classifier scores from a world config
    Synth(SynthArgs),
    /// Train a prior on an observation file and write a checkpoint
    Train(TrainArgs),
    /// Evaluate the prior at observation locations and write the vectors
    Predict(PredictArgs),
    /// Multiply classifier scores by the prior and write posteriors
    Combine(CombineArgs),
    /// Compare priors (learned and baselines) by top-k accuracy
    Eval(EvalArgs),
    /// Render one category's prior onto an equirectangular PGM raster
    Rasterize(RasterizeArgs),
    /// Convert a CSV with ISO dates into the time-of-year schema
    ConvertDates(ConvertDatesArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// World config (TOML: categories, optional photographers, seed)
    #[arg(long)]
    world: PathBuf,
    /// Training observations to generate per category
    #[arg(long, default_value_t = 200)]
    count: usize,
    /// Test observations to generate per category
    #[arg(long, default_value_t = 100)]
    test_count: usize,
    /// Synthetic classifier top-1 accuracy on confusable pairs
    #[arg(long, default_value_t = 0.55)]
    accuracy: f64,
    /// Score mass given to the synthetic classifier's top choice
    #[arg(long, default_value_t = 0.55)]
    top_share: f64,
    /// Override the world seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (train.csv, test.csv, scores.csv)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Observation file (CSV or JSONL)
    #[arg(long)]
    obs: PathBuf,
    /// Optional TOML file with the same knobs; explicit flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training epochs [default: 30]
    #[arg(long)]
    epochs: Option<usize>,
    /// Mini-batch size [default: 1024]
    #[arg(long)]
    batch: Option<usize>,
    /// Embedding dimensionality D [default: 256]
    #[arg(long)]
    dim: Option<usize>,
    /// Residual blocks in the location encoder [default: 4]
    #[arg(long)]
    blocks: Option<usize>,
    /// Per-epoch example cap per category, 0 = uncapped [default: 100]
    #[arg(long)]
    cap: Option<usize>,
    /// Positive-term weight [default: the number of categories]
    #[arg(long)]
    lambda: Option<f64>,
    /// Adam learning rate [default: 0.001]
    #[arg(long)]
    lr: Option<f64>,
    /// Dropout rate at each block's dropout site [default: 0.5]
    #[arg(long)]
    dropout: Option<f64>,
    /// Pseudo-negative sampler [default: sphere]
    #[arg(long, value_parser = ["sphere", "pool"])]
    sampler: Option<String>,
    /// Ignore the time-of-year input
    #[arg(long)]
    no_date: bool,
    /// Drop the photographer embeddings and their loss terms
    #[arg(long)]
    no_photographer: bool,
    /// Feed raw normalized coordinates instead of the sin/cos wrap encoding
    #[arg(long)]
    no_wrap: bool,
    /// RNG seed for init, capping, negatives, and dropout [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Also append the training log to this file
    #[arg(long)]
    log: Option<PathBuf>,
    /// Checkpoint output path
    #[arg(long)]
    out: PathBuf,
}

/// Knobs accepted in a `train --config` TOML file. Anything absent falls
/// back to the built-in default.
#[derive(Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainFileConfig {
    epochs: Option<usize>,
    batch: Option<usize>,
    dim: Option<usize>,
    blocks: Option<usize>,
    cap: Option<usize>,
    lambda: Option<f64>,
    lr: Option<f64>,
    dropout: Option<f64>,
    sampler: Option<String>,
    no_date: Option<bool>,
    no_photographer: Option<bool>,
    no_wrap: Option<bool>,
    seed: Option<u64>,
}

#[derive(Args)]
struct PredictArgs {
    /// Trained checkpoint
    #[arg(long)]
    model: PathBuf,
    /// Observation file with query locations
    #[arg(long)]
    obs: PathBuf,
    /// Output CSV (id plus one prior column per category)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CombineArgs {
    /// Trained checkpoint
    #[arg(long)]
    model: PathBuf,
    /// Observation file supplying per-example locations
    #[arg(long)]
    obs: PathBuf,
    /// Classifier score CSV (id plus one column per category)
    #[arg(long)]
    scores: PathBuf,
    /// Uniform smoothing added to the prior before the product
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Output CSV (id, predicted label, posterior per category)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Test observation file (labels and locations)
    #[arg(long)]
    obs: PathBuf,
    /// Classifier score CSV for the test observations
    #[arg(long)]
    scores: PathBuf,
    /// Trained checkpoint for the learned-prior row
    #[arg(long)]
    model: Option<PathBuf>,
    /// Training observations for building the baseline indices
    #[arg(long)]
    train_obs: Option<PathBuf>,
    /// Neighbor counts for nearest-neighbor rows (comma separated)
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,
    /// Radii in radians for spatial-neighbor rows (comma separated)
    #[arg(long, value_delimiter = ',')]
    radius: Vec<f64>,
    /// Grid resolutions LATxLON for grid rows (comma separated)
    #[arg(long, value_delimiter = ',')]
    grid: Vec<String>,
    /// Uniform smoothing added to baseline priors (default: 1/C)
    #[arg(long)]
    alpha: Option<f64>,
    /// Write the report as CSV here (text table always prints)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RasterizeArgs {
    /// Trained checkpoint
    #[arg(long)]
    model: PathBuf,
    /// Category label to rasterize
    #[arg(long)]
    category: String,
    /// Time of year in [0, 1]
    #[arg(long, default_value_t = 0.5)]
    time: f64,
    /// Raster width in cells
    #[arg(long, default_value_t = 2000)]
    width: usize,
    /// Raster height in cells
    #[arg(long, default_value_t = 1000)]
    height: usize,
    /// Optional PGM mask; zero-valued cells are blanked
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Output PGM path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ConvertDatesArgs {
    /// Input CSV with header lon,lat,date,category,photographer
    #[arg(long)]
    obs: PathBuf,
    /// Output CSV in the observation schema
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.category() {
        "io" => 3,
        "data" => 4,
        "checkpoint" => 5,
        "vocab" => 6,
        "config" => 7,
        "shape" => 8,
        _ => 9,
    }
}

fn run(cli: Cli) -> geoprior::Result<()> {
    match cli.command {
        Command::Synth(args) => run_synth(args),
        Command::Train(args) => run_train(args),
        Command::Predict(args) => run_predict(args),
        Command::Combine(args) => run_combine(args),
        Command::Eval(args) => run_eval(args),
        Command::Rasterize(args) => run_rasterize(args),
        Command::ConvertDates(args) => run_convert_dates(args),
    }
}

fn load_obs(path: &Path) -> geoprior::Result<Dataset> {
    let dataset = load_observations(path, ObsFormat::from_path(path), &LoadOptions::default())?;
    for d in &dataset.diagnostics {
        eprintln!("warning: {}: {d}", path.display());
    }
    Ok(dataset)
}

fn run_synth(args: SynthArgs) -> geoprior::Result<()> {
    let mut world = SyntheticWorld::load(&args.world)?;
    if let Some(seed) = args.seed {
        world.seed = seed;
    }
    let train_data = world.generate(args.count)?;
    let mut rng = ChaCha8Rng::seed_from_u64(world.seed ^ 0x9e37_79b9_7f4a_7c15);
    let test_data = world.generate_with(args.test_count, &mut rng)?;
    let labels: Vec<usize> = test_data.observations.iter().map(|o| o.category).collect();
    let scores = confusable_pair_scores(
        &labels,
        test_data.categories.len(),
        args.accuracy,
        args.top_share,
        &mut rng,
    );

    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    write_observations_csv(&args.out.join("train.csv"), &train_data)?;
    write_observations_csv(&args.out.join("test.csv"), &test_data)?;
    write_scores_csv(
        &args.out.join("scores.csv"),
        test_data.categories.names(),
        &scores,
    )?;
    println!(
        "wrote {} train, {} test observations and scores for {} categories to {}",
        train_data.len(),
        test_data.len(),
        test_data.categories.len(),
        args.out.display()
    );
    Ok(())
}

/// Writes to stdout and, optionally, a file at once (training log tee).
struct Tee {
    file: Option<fs::File>,
}

impl Write for Tee {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        std::io::stdout().write_all(buf)?;
        if let Some(f) = &mut self.file {
            f.write_all(buf)?;
        }
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        std::io::stdout().flush()
    }
}

fn run_train(args: TrainArgs) -> geoprior::Result<()> {
    let dataset = load_obs(&args.obs)?;
    let file: TrainFileConfig = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            toml::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => TrainFileConfig::default(),
    };
    let defaults = TrainConfig::default();
    let sampler = match args.sampler.or(file.sampler) {
        Some(s) => NegativeSampler::parse(&s)?,
        None => defaults.sampler,
    };
    let config = TrainConfig {
        epochs: args.epochs.or(file.epochs).unwrap_or(defaults.epochs),
        batch_size: args.batch.or(file.batch).unwrap_or(defaults.batch_size),
        embed_dim: args.dim.or(file.dim).unwrap_or(defaults.embed_dim),
        blocks: args.blocks.or(file.blocks).unwrap_or(defaults.blocks),
        per_category_cap: args.cap.or(file.cap).unwrap_or(defaults.per_category_cap),
        lambda: args.lambda.or(file.lambda),
        dropout: args.dropout.or(file.dropout).unwrap_or(defaults.dropout),
        seed: args.seed.or(file.seed).unwrap_or(defaults.seed),
        sampler,
        variants: VariantFlags {
            use_date: !(args.no_date || file.no_date.unwrap_or(false)),
            use_photographer: !(args.no_photographer || file.no_photographer.unwrap_or(false)),
            use_wrap: !(args.no_wrap || file.no_wrap.unwrap_or(false)),
        },
        adam: AdamConfig {
            learning_rate: args.lr.or(file.lr).unwrap_or(defaults.adam.learning_rate),
            ..AdamConfig::default()
        },
    };
    let mut log = Tee {
        file: args
            .log
            .as_ref()
            .map(|p| fs::File::create(p).map_err(|e| Error::io(p, e)))
            .transpose()?,
    };
    let checkpoint = train(&dataset, &config, &mut log)?;
    checkpoint.save(&args.out)?;
    println!("checkpoint written to {}", args.out.display());
    Ok(())
}

fn run_predict(args: PredictArgs) -> geoprior::Result<()> {
    let checkpoint = Checkpoint::load(&args.model)?;
    let dataset = load_obs(&args.obs)?;
    let c = checkpoint.categories.len();
    let mut out = String::from("id");
    for name in checkpoint.categories.names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, obs) in dataset.observations.iter().enumerate() {
        let vector = match &obs.point {
            Some(p) => prior(&checkpoint.model, p),
            None => vec![1.0 / c as f64; c],
        };
        out.push_str(&i.to_string());
        for v in vector {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    fs::write(&args.out, out).map_err(|e| Error::io(&args.out, e))?;
    println!("priors for {} observations written to {}", dataset.len(), args.out.display());
    Ok(())
}

fn run_combine(args: CombineArgs) -> geoprior::Result<()> {
    let checkpoint = Checkpoint::load(&args.model)?;
    let dataset = load_obs(&args.obs)?;
    let table = ScoreTable::load(&args.scores)?;
    let aligned = table.align_to(checkpoint.categories.names())?;

    let mut out = String::from("id,predicted");
    for name in checkpoint.categories.names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (row, &id) in aligned.iter().zip(&table.ids) {
        let obs = dataset.observations.get(id).ok_or_else(|| {
            Error::Data(format!(
                "score id {id} has no matching observation (file has {})",
                dataset.len()
            ))
        })?;
        let prior_vec = obs.point.as_ref().map(|p| {
            let raw = prior(&checkpoint.model, p);
            if args.alpha > 0.0 {
                smooth_prior(&raw, args.alpha)
            } else {
                raw
            }
        });
        let (posterior, argmax) = combine(row, prior_vec.as_deref())?;
        out.push_str(&format!("{id},{}", checkpoint.categories.name(argmax)));
        for v in posterior {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    fs::write(&args.out, out).map_err(|e| Error::io(&args.out, e))?;
    println!(
        "posteriors for {} examples written to {}",
        table.ids.len(),
        args.out.display()
    );
    Ok(())
}

/// Re-key a dataset's category ids onto a canonical vocabulary.
fn remap_categories(dataset: &Dataset, canonical: &Vocabulary) -> geoprior::Result<Dataset> {
    let mut out = dataset.clone();
    out.categories = canonical.clone();
    for obs in &mut out.observations {
        let name = dataset.categories.name(obs.category);
        obs.category = canonical.get(name).ok_or_else(|| {
            Error::Vocabulary(format!("category '{name}' not in the evaluation vocabulary"))
        })?;
    }
    Ok(out)
}

fn parse_grid_spec(spec: &str) -> geoprior::Result<(usize, usize)> {
    let parts: Vec<&str> = spec.split('x').collect();
    let err = || Error::Config(format!("grid spec '{spec}' must look like 36x72 (LATxLON)"));
    if parts.len() != 2 {
        return Err(err());
    }
    let lat: usize = parts[0].trim().parse().map_err(|_| err())?;
    let lon: usize = parts[1].trim().parse().map_err(|_| err())?;
    Ok((lat, lon))
}

fn run_eval(args: EvalArgs) -> geoprior::Result<()> {
    let test = load_obs(&args.obs)?;
    let table = ScoreTable::load(&args.scores)?;
    let checkpoint = args.model.as_ref().map(|p| Checkpoint::load(p)).transpose()?;
    let train_data = args.train_obs.as_ref().map(|p| load_obs(p)).transpose()?;

    let canonical: Vocabulary = match (&checkpoint, &train_data) {
        (Some(c), _) => c.categories.clone(),
        (None, Some(t)) => t.categories.clone(),
        (None, None) => test.categories.clone(),
    };
    let aligned = table.align_to(canonical.names())?;
    let test = remap_categories(&test, &canonical)?;
    let train_data = train_data
        .map(|t| remap_categories(&t, &canonical))
        .transpose()?;

    let mut examples = Vec::with_capacity(table.ids.len());
    for (row, &id) in aligned.iter().zip(&table.ids) {
        let obs = test.observations.get(id).ok_or_else(|| {
            Error::Data(format!(
                "score id {id} has no matching observation (file has {})",
                test.len()
            ))
        })?;
        examples.push(EvalExample {
            point: obs.point,
            label: obs.category,
            scores: row.clone(),
        });
    }

    let alpha = args
        .alpha
        .unwrap_or(1.0 / canonical.len().max(1) as f64);
    let index = train_data.as_ref().map(NeighborIndex::build);
    let mut grids = Vec::new();
    if let Some(t) = &train_data {
        for spec in &args.grid {
            let (lat, lon) = parse_grid_spec(spec)?;
            grids.push(GridIndex::build(t, lat, lon)?);
        }
    } else if !args.grid.is_empty() || !args.k.is_empty() || !args.radius.is_empty() {
        return Err(Error::Config(
            "baseline rows need --train-obs to build their indices".into(),
        ));
    }

    let mut sources: Vec<Box<dyn PriorSource>> = Vec::new();
    if let Some(idx) = &index {
        for &k in &args.k {
            sources.push(Box::new(NearestCountSource::new(idx, k, alpha)?));
        }
        for &radius in &args.radius {
            sources.push(Box::new(NearestRadiusSource::new(idx, radius, alpha)?));
        }
    }
    for grid in &grids {
        sources.push(Box::new(GridSource::new(grid, alpha)));
    }
    if let Some(c) = &checkpoint {
        sources.push(Box::new(LearnedSource::new(&c.model, 0.0)));
    }

    let refs: Vec<&dyn PriorSource> = sources.iter().map(|b| b.as_ref()).collect();
    let echo = format!(
        "obs={} scores={} alpha={alpha}",
        args.obs.display(),
        args.scores.display()
    );
    let report = compare_priors(&examples, &refs, &echo)?;
    print!("{}", report.to_text_table());
    if let Some(path) = &args.out {
        fs::write(path, report.to_csv()).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn run_rasterize(args: RasterizeArgs) -> geoprior::Result<()> {
    let checkpoint = Checkpoint::load(&args.model)?;
    let category = checkpoint.categories.get(&args.category).ok_or_else(|| {
        Error::Vocabulary(format!(
            "category '{}' not in checkpoint (known: {})",
            args.category,
            checkpoint.categories.names().join(", ")
        ))
    })?;
    let mask = args.mask.as_ref().map(|p| Mask::load(p)).transpose()?;
    let raster = rasterize(
        &checkpoint.model,
        category,
        args.time,
        args.height,
        args.width,
        mask.as_ref(),
    )?;
    raster.write_pgm(&args.out)?;
    println!(
        "{}x{} raster for '{}' at t={} written to {}",
        args.height,
        args.width,
        args.category,
        args.time,
        args.out.display()
    );
    Ok(())
}

fn run_convert_dates(args: ConvertDatesArgs) -> geoprior::Result<()> {
    let diagnostics = convert_dates_csv(&args.obs, &args.out, &LoadOptions::default())?;
    for d in &diagnostics {
        eprintln!("warning: {}: {d}", args.obs.display());
    }
    println!("converted dates written to {}", args.out.display());
    Ok(())
}
