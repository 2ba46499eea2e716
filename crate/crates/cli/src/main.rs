use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fls_place::descriptor::{read_weights, write_weights, DescriptorModel, EncoderParams};
use fls_place::geometry::{fov_overlap, is_positive_pair, SimilarityParams, DEFAULT_N_ARC};
use fls_place::io::{load_manifest, manifest_dir, read_descriptor_db, write_descriptor_db};
use fls_place::pipeline::{
    self, EnhanceSection, RunConfig, SimgenSection, SimilaritySection, SonarSection, TrainSection,
};
use fls_place::simgen::generate_dataset;
use fls_place::training::train_log_csv;
use fls_place::{Error, Pose2D};

#[derive(Parser)]
#[command(name = "fls-place", version, about = "Place recognition for forward-looking sonar")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a grid-sampled synthetic dataset around one or more assets.
    Simgen(SimgenArgs),
    /// Insonification normalization, DWT denoising and CFAR on a dataset.
    Enhance(EnhanceArgs),
    /// FOV overlap and same-place decision for two poses.
    Overlap(OverlapArgs),
    /// Train the encoder with the triplet loss.
    Train(TrainArgs),
    /// Compute descriptors for every record of a manifest.
    Index(IndexArgs),
    /// PR curve, AUC, R@95P, F1 point and precision over FOV overlap.
    Eval(EvalArgs),
    /// Run simgen, enhance, train, index and eval from one config.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct SonarArgs {
    /// Maximum range in meters.
    #[arg(long, default_value_t = 30.0)]
    max_range: f64,
    /// Horizontal aperture in degrees.
    #[arg(long, default_value_t = 120.0)]
    aperture_deg: f64,
    #[arg(long, default_value_t = 128)]
    beams: usize,
    #[arg(long, default_value_t = 256)]
    bins: usize,
}

impl SonarArgs {
    fn section(&self) -> SonarSection {
        SonarSection {
            max_range_m: self.max_range,
            aperture_rad: self.aperture_deg.to_radians(),
            n_beams: self.beams,
            n_bins: self.bins,
        }
    }
}

#[derive(Args)]
struct SimgenArgs {
    /// Scene JSON: `{"asset_id", "segments"}` or a bare list of segments
    /// `{"a": [x, y], "b": [x, y], "reflectivity"}`. Repeatable.
    #[arg(long)]
    scene_file: Vec<PathBuf>,
    /// Builtin scene 1 (L-shaped wall), 2 (segment cluster) or 3 (star).
    /// Repeatable; all three when no scene is given.
    #[arg(long)]
    builtin: Vec<u32>,
    /// Grid side in meters.
    #[arg(long, default_value_t = 50.0)]
    grid_size: f64,
    /// Grid cell side in meters.
    #[arg(long, default_value_t = 2.0)]
    cell_size: f64,
    /// Maximum position perturbation of samples in meters.
    #[arg(long, default_value_t = 0.75)]
    noise_max: f64,
    #[arg(long, default_value_t = 5)]
    samples_per_anchor: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    sonar: SonarArgs,
}

#[derive(Args)]
struct CfarArgs {
    /// CFAR statistic, GOCA or SOCA.
    #[arg(long, default_value = "GOCA")]
    mode: String,
    /// Reference cells per window.
    #[arg(long, default_value_t = 40)]
    nw: usize,
    /// Target false alarm probability.
    #[arg(long, default_value_t = 0.1)]
    pfa: f64,
    /// Guard cells on each side of the cell under test.
    #[arg(long, default_value_t = 2)]
    guard: usize,
    #[arg(long, default_value_t = 2)]
    dwt_levels: usize,
    /// Multiplier on the universal wavelet threshold.
    #[arg(long, default_value_t = 1.0)]
    dwt_scale: f64,
    /// Floor on the insonification pattern.
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
}

impl CfarArgs {
    fn section(&self) -> EnhanceSection {
        EnhanceSection {
            enabled: true,
            mode: self.mode.clone(),
            n_w: self.nw,
            p_fa: self.pfa,
            guard: self.guard,
            dwt_levels: self.dwt_levels,
            dwt_threshold_scale: self.dwt_scale,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Args)]
struct EnhanceArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    cfar: CfarArgs,
}

#[derive(Args)]
struct SimilarityArgs {
    /// Minimum FOV overlap for a same-place pair.
    #[arg(long, default_value_t = 0.7)]
    tau: f64,
    /// Maximum heading difference for a same-place pair, radians.
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
    max_heading_diff: f64,
}

impl SimilarityArgs {
    fn section(&self) -> SimilaritySection {
        SimilaritySection {
            tau: self.tau,
            max_heading_diff_rad: self.max_heading_diff,
            n_arc: DEFAULT_N_ARC,
        }
    }
}

#[derive(Args)]
struct OverlapArgs {
    /// First pose as `x,y,heading` (meters, radians).
    #[arg(long, allow_hyphen_values = true)]
    pose1: String,
    #[arg(long, allow_hyphen_values = true)]
    pose2: String,
    #[command(flatten)]
    similarity: SimilarityArgs,
    #[command(flatten)]
    sonar: SonarArgs,
}

#[derive(Args)]
struct EncoderArgs {
    /// Channels per convolution stage.
    #[arg(long, value_delimiter = ',', default_value = "8,16,32")]
    widths: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    encoder_seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "2,3")]
    train_assets: Vec<u32>,
    #[arg(long, default_value_t = 1)]
    val_asset: u32,
    /// Triplet margin m.
    #[arg(long, default_value_t = 0.5)]
    margin: f64,
    /// Candidate negatives per anchor.
    #[arg(long, default_value_t = 10)]
    nneg: usize,
    /// Candidate positives per anchor.
    #[arg(long, default_value_t = 5)]
    npos: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    /// Mining and ordering seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    rgp_seed: u64,
    /// Exclusion window for the per-epoch validation AUC, seconds.
    #[arg(long, default_value_t = 3.0)]
    val_s: f64,
    #[arg(long)]
    allow_single_asset: bool,
    #[command(flatten)]
    encoder: EncoderArgs,
    #[command(flatten)]
    similarity: SimilarityArgs,
    #[arg(long, default_value = "weights.bin")]
    out: PathBuf,
    #[arg(long, default_value = "train_log.csv")]
    log: PathBuf,
}

#[derive(Args)]
struct IndexArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Trained weights; without it the encoder is randomly initialized.
    #[arg(long)]
    weights_file: Option<PathBuf>,
    /// Projection seed; defaults to the one stored with the weights, else 0.
    #[arg(long)]
    rgp_seed: Option<u64>,
    /// Restrict to these assets.
    #[arg(long, value_delimiter = ',')]
    assets: Vec<u32>,
    #[command(flatten)]
    encoder: EncoderArgs,
    #[arg(long, default_value = "descriptors.bin")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    descriptors: PathBuf,
    /// Exclusion window in seconds around each query; 0 disables it.
    #[arg(long, default_value_t = 3.0)]
    s: f64,
    #[command(flatten)]
    similarity: SimilarityArgs,
    /// Number of distance thresholds in [0, 2].
    #[arg(long, default_value_t = 512)]
    sweep: usize,
    /// Output file prefix, e.g. `out/` or `out/run1_`.
    #[arg(long, default_value = "")]
    out_prefix: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    /// TOML run config; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Small preset on the three builtin scenes, with a random-init baseline.
    #[arg(long)]
    builtin_experiment: bool,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Skip the enhancement stage.
    #[arg(long)]
    no_enhance: bool,
    /// Rerun stages whose outputs already exist.
    #[arg(long)]
    force: bool,
    /// Print the effective config as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

fn parse_pose(s: &str) -> fls_place::Result<Pose2D> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Error::InvalidParam(format!("pose {s:?}: {e}")))?;
    match v[..] {
        [x, y, h] => {
            let p = Pose2D::new(x, y, h, 0.0);
            p.validate()?;
            Ok(p)
        }
        _ => Err(Error::InvalidParam(format!("pose {s:?}: expected x,y,heading"))),
    }
}

fn simgen(a: SimgenArgs) -> fls_place::Result<()> {
    let builtin = if a.builtin.is_empty() && a.scene_file.is_empty() {
        vec![1, 2, 3]
    } else {
        a.builtin
    };
    let section = SimgenSection {
        builtin,
        scene_files: a.scene_file,
        grid_size_m: a.grid_size,
        cell_size_m: a.cell_size,
        noise_max_m: a.noise_max,
        n_samples_per_anchor: a.samples_per_anchor,
        ..Default::default()
    };
    let m = generate_dataset(
        &section.scenes()?,
        &section.grid(),
        &a.sonar.section().config()?,
        &section.noise(),
        a.seed,
        &a.out_dir,
    )?;
    println!("{} records over assets {:?} in {}", m.records.len(), m.asset_ids(), a.out_dir.display());
    Ok(())
}

fn enhance(a: EnhanceArgs) -> fls_place::Result<()> {
    let m = pipeline::enhance_dataset(&a.manifest, &a.cfar.section(), &a.out_dir)?;
    println!("enhanced {} images into {}", m.records.len(), a.out_dir.display());
    Ok(())
}

fn overlap(a: OverlapArgs) -> fls_place::Result<()> {
    let (p1, p2) = (parse_pose(&a.pose1)?, parse_pose(&a.pose2)?);
    let config = a.sonar.section().config()?;
    let params: SimilarityParams = a.similarity.section().params();
    params.validate()?;
    let o = fov_overlap(&p1, &p2, &config, params.n_arc)?;
    let positive = is_positive_pair(&p1, &p2, &config, &params)?;
    println!("overlap={o} positive={positive}");
    Ok(())
}

fn train(a: TrainArgs) -> fls_place::Result<()> {
    let section = TrainSection {
        train_assets: a.train_assets,
        val_asset: a.val_asset,
        margin: a.margin,
        n_neg: a.nneg,
        n_pos: a.npos,
        learning_rate: a.lr,
        epochs: a.epochs,
        seed: a.seed,
        allow_single_asset: a.allow_single_asset,
        channel_widths: a.encoder.widths,
        encoder_seed: a.encoder.encoder_seed,
        rgp_seed: a.rgp_seed,
        val_s_seconds: a.val_s,
    };
    let out = pipeline::train_from_manifest(&a.manifest, &section, &a.similarity.section())?;
    write_weights(&out.model.weights, section.rgp_seed, &a.out)?;
    std::fs::write(&a.log, train_log_csv(&out.log)).map_err(|e| io_error(&a.log, e))?;
    if let Some(last) = out.log.last() {
        println!(
            "trained {} epochs, final mean loss {}, active fraction {}",
            out.log.len(),
            last.mean_loss,
            last.active_fraction
        );
    }
    Ok(())
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn index(a: IndexArgs) -> fls_place::Result<()> {
    let model = match &a.weights_file {
        Some(path) => {
            let (weights, stored) = read_weights(path)?;
            DescriptorModel::new(weights, a.rgp_seed.unwrap_or(stored))?
        }
        None => {
            let params = EncoderParams {
                channel_widths: a.encoder.widths,
                seed: a.encoder.encoder_seed,
                ..Default::default()
            };
            DescriptorModel::random(&params, a.rgp_seed.unwrap_or(0))?
        }
    };
    let manifest = load_manifest(&a.manifest)?;
    let images = pipeline::load_images(&manifest, &manifest_dir(&a.manifest), &a.assets)?;
    let db = pipeline::index_records(&manifest, &images, &model)?;
    write_descriptor_db(&db, &a.out)?;
    println!("{} descriptors written to {}", db.entries.len(), a.out.display());
    Ok(())
}

fn eval(a: EvalArgs) -> fls_place::Result<()> {
    let manifest = load_manifest(&a.manifest)?;
    let db = read_descriptor_db(&a.descriptors)?;
    let s = pipeline::evaluate_db(&manifest, &db, &a.similarity.section().params(), a.s, a.sweep, &a.out_prefix)?;
    println!(
        "auc={} r_at_95p={} f1_threshold={} f1_precision={} f1_recall={}",
        s.auc, s.r_at_95p, s.f1.threshold, s.f1.precision, s.f1.recall
    );
    Ok(())
}

fn run_pipeline(a: PipelineArgs) -> ExitCode {
    let mut config = match (&a.config, a.builtin_experiment) {
        (Some(path), _) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: stage config failed: {e}");
                return ExitCode::from(2);
            }
        },
        (None, true) => RunConfig::builtin_experiment(),
        (None, false) => RunConfig::default(),
    };
    if let Some(dir) = a.out_dir {
        config.out_dir = dir;
    }
    if a.no_enhance {
        config.enhance.enabled = false;
    }
    if a.print_config {
        print!("{}", config.to_toml());
        return ExitCode::SUCCESS;
    }
    match pipeline::run_pipeline(&config, a.force) {
        Ok(summary) => {
            for (k, m) in &summary.metrics {
                println!("{k}: auc={} r_at_95p={} f1={}", m.auc, m.r_at_95p, {
                    let (p, r) = (m.f1_precision, m.f1_recall);
                    if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 }
                });
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (name, result) = match cli.command {
        Command::Pipeline(a) => return run_pipeline(a),
        Command::Simgen(a) => ("simgen", simgen(a)),
        Command::Enhance(a) => ("enhance", enhance(a)),
        Command::Overlap(a) => ("overlap", overlap(a)),
        Command::Train(a) => ("train", train(a)),
        Command::Index(a) => ("index", index(a)),
        Command::Eval(a) => ("eval", eval(a)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {name} failed: {e}");
            ExitCode::from(2)
        }
    }
}
