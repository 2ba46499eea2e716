//! End-to-end run: simgen, enhance, train, index, eval, driven by one TOML
//! config. Every stage writes into its own directory under `out_dir` and is
//! skipped when its outputs already exist, unless forced.
//!
//! ```text
//! out_dir/
//!   data/manifest.json, data/images/*.pgm          simgen
//!   enhanced/manifest.json, enhanced/pattern.pgm    enhance
//!   train/weights.bin, train/train_log.csv          train
//!   index/descriptors.bin                           index
//!   eval/s<S>/{pr_curve,summary,overlap_precision,descriptors_2d}.csv
//!   index_random/, eval_random/                     random-init baseline
//!   run_summary.json
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::descriptor::{read_weights, write_weights, DescriptorModel, EncoderParams, ImageStore};
use crate::enhance::{CfarParams, CfarStage, DwtParams, DwtStage, EnhanceChain, NormalizeStage, PatternAccumulator, ThresholdRule};
use crate::error::{Error, Result};
use crate::eval::{self, Summary};
use crate::geometry::{SimilarityParams, DEFAULT_N_ARC};
use crate::io::{
    load_manifest, manifest_dir, read_descriptor_db, read_image, save_manifest, write_descriptor_db, write_image,
    DescriptorDb,
};
use crate::simgen::{builtin_scene, generate_dataset, load_scene, GridSpec, RenderNoise, Scene, MANIFEST_FILE};
use crate::training::{self, train_log_csv, TripletConfig, Validation};
use crate::types::{DatasetManifest, SonarConfig};

pub const RUN_SUMMARY_FILE: &str = "run_summary.json";
pub const STAGES: [&str; 5] = ["simgen", "enhance", "train", "index", "eval"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SonarSection {
    pub max_range_m: f64,
    pub aperture_rad: f64,
    pub n_beams: usize,
    pub n_bins: usize,
}

impl Default for SonarSection {
    fn default() -> Self {
        let c = SonarConfig::default();
        Self {
            max_range_m: c.max_range_m,
            aperture_rad: c.aperture_rad,
            n_beams: c.n_beams,
            n_bins: c.n_bins,
        }
    }
}

impl SonarSection {
    pub fn config(&self) -> Result<SonarConfig> {
        SonarConfig::new(self.max_range_m, self.aperture_rad, self.n_beams, self.n_bins)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimgenSection {
    /// Builtin scene indices; builtin `k` becomes asset `k`.
    pub builtin: Vec<u32>,
    /// Extra scene files; assets without an id are numbered after the builtins.
    pub scene_files: Vec<PathBuf>,
    pub grid_size_m: f64,
    pub cell_size_m: f64,
    pub noise_max_m: f64,
    pub n_samples_per_anchor: usize,
    pub speckle_min: f64,
    pub speckle_max: f64,
    pub additive_max: f64,
}

impl Default for SimgenSection {
    fn default() -> Self {
        let g = GridSpec::default();
        let n = RenderNoise::default();
        Self {
            builtin: vec![1, 2, 3],
            scene_files: Vec::new(),
            grid_size_m: g.grid_size_m,
            cell_size_m: g.cell_size_m,
            noise_max_m: g.noise_max_m,
            n_samples_per_anchor: g.n_samples_per_anchor,
            speckle_min: n.speckle_min,
            speckle_max: n.speckle_max,
            additive_max: n.additive_max,
        }
    }
}

impl SimgenSection {
    pub fn grid(&self) -> GridSpec {
        GridSpec {
            grid_size_m: self.grid_size_m,
            cell_size_m: self.cell_size_m,
            noise_max_m: self.noise_max_m,
            n_samples_per_anchor: self.n_samples_per_anchor,
        }
    }

    pub fn noise(&self) -> RenderNoise {
        RenderNoise {
            speckle_min: self.speckle_min,
            speckle_max: self.speckle_max,
            additive_max: self.additive_max,
        }
    }

    pub fn scenes(&self) -> Result<Vec<Scene>> {
        let mut scenes = Vec::new();
        for &b in &self.builtin {
            scenes.push(builtin_scene(&b.to_string(), b)?);
        }
        let mut next = self.builtin.iter().max().copied().unwrap_or(0) + 1;
        for path in &self.scene_files {
            let s = load_scene(path, next)?;
            next = next.max(s.asset_id + 1);
            scenes.push(s);
        }
        Ok(scenes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnhanceSection {
    pub enabled: bool,
    /// CFAR statistic: `GOCA` or `SOCA`.
    pub mode: String,
    pub n_w: usize,
    pub p_fa: f64,
    pub guard: usize,
    pub dwt_levels: usize,
    pub dwt_threshold_scale: f64,
    pub epsilon: f64,
}

impl Default for EnhanceSection {
    fn default() -> Self {
        Self {
            enabled: true,
            mode: "GOCA".into(),
            n_w: CfarParams::DEFAULT_NW,
            p_fa: CfarParams::DEFAULT_PFA,
            guard: CfarParams::DEFAULT_GUARD,
            dwt_levels: DwtParams::default().levels,
            dwt_threshold_scale: DwtParams::default().threshold_scale,
            epsilon: crate::enhance::DEFAULT_EPSILON,
        }
    }
}

impl EnhanceSection {
    pub fn cfar(&self) -> Result<CfarParams> {
        CfarParams::new(&self.mode, self.n_w, self.p_fa, self.guard)
    }

    pub fn dwt(&self) -> DwtParams {
        DwtParams {
            levels: self.dwt_levels,
            threshold_rule: ThresholdRule::Soft,
            threshold_scale: self.dwt_threshold_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimilaritySection {
    pub tau: f64,
    pub max_heading_diff_rad: f64,
    pub n_arc: usize,
}

impl Default for SimilaritySection {
    fn default() -> Self {
        Self {
            tau: 0.7,
            max_heading_diff_rad: PI / 2.0,
            n_arc: DEFAULT_N_ARC,
        }
    }
}

impl SimilaritySection {
    pub fn params(&self) -> SimilarityParams {
        SimilarityParams {
            tau: self.tau,
            max_heading_diff_rad: self.max_heading_diff_rad,
            n_arc: self.n_arc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub train_assets: Vec<u32>,
    pub val_asset: u32,
    pub margin: f64,
    pub n_neg: usize,
    pub n_pos: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub allow_single_asset: bool,
    pub channel_widths: Vec<usize>,
    pub encoder_seed: u64,
    pub rgp_seed: u64,
    /// Exclusion window for the per-epoch validation AUC.
    pub val_s_seconds: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TripletConfig::default();
        Self {
            train_assets: vec![2, 3],
            val_asset: 1,
            margin: t.margin_m,
            n_neg: t.n_neg,
            n_pos: t.n_pos,
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            seed: t.seed,
            allow_single_asset: false,
            channel_widths: EncoderParams::default().channel_widths,
            encoder_seed: 0,
            rgp_seed: 0,
            val_s_seconds: 3.0,
        }
    }
}

impl TrainSection {
    pub fn triplet(&self, similarity: &SimilaritySection) -> TripletConfig {
        TripletConfig {
            margin_m: self.margin,
            n_neg: self.n_neg,
            n_pos: self.n_pos,
            tau: similarity.tau,
            max_heading_diff_rad: similarity.max_heading_diff_rad,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            seed: self.seed,
            allow_single_asset: self.allow_single_asset,
        }
    }

    pub fn encoder(&self) -> EncoderParams {
        EncoderParams {
            channel_widths: self.channel_widths.clone(),
            seed: self.encoder_seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Exclusion windows in seconds; `0` disables exclusion.
    pub s_seconds: Vec<f64>,
    pub sweep_points: usize,
    /// Assets to index and evaluate; empty means the validation asset.
    pub assets: Vec<u32>,
    /// Also index and evaluate the untrained encoder.
    pub random_baseline: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            s_seconds: vec![0.0, 3.0],
            sweep_points: eval::DEFAULT_SWEEP_POINTS,
            assets: Vec::new(),
            random_baseline: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    /// Dataset generator seed.
    pub seed: u64,
    pub sonar: SonarSection,
    pub simgen: SimgenSection,
    pub enhance: EnhanceSection,
    pub similarity: SimilaritySection,
    pub train: TrainSection,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("run"),
            seed: 0,
            sonar: SonarSection::default(),
            simgen: SimgenSection::default(),
            enhance: EnhanceSection::default(),
            similarity: SimilaritySection::default(),
            train: TrainSection::default(),
            eval: EvalSection::default(),
        }
    }
}

impl RunConfig {
    /// Desk-scale experiment on the three builtin scenes: train on assets 2
    /// and 3, validate on asset 1, compare against the untrained encoder.
    pub fn builtin_experiment() -> Self {
        let mut c = Self {
            out_dir: PathBuf::from("builtin-experiment"),
            ..Self::default()
        };
        c.simgen.grid_size_m = 16.0;
        c.train.channel_widths = vec![8, 16, 16, 16, 16];
        c.train.epochs = 12;
        c.train.learning_rate = 0.005;
        c.eval.random_baseline = true;
        c
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Validation(format!("run config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn eval_assets(&self) -> Vec<u32> {
        if self.eval.assets.is_empty() {
            vec![self.train.val_asset]
        } else {
            self.eval.assets.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sonar.config()?;
        self.simgen.grid().validate()?;
        self.enhance.cfar()?.validate_for(self.sonar.n_bins)?;
        self.similarity.params().validate()?;
        self.train.triplet(&self.similarity).validate()?;
        self.train.encoder().validate()?;
        if self.eval.s_seconds.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::InvalidParam("exclusion windows must be finite and >= 0".into()));
        }
        if self.eval.sweep_points < 2 {
            return Err(Error::InvalidParam("need at least two sweep points".into()));
        }
        Ok(())
    }
}

/// Layout of a run directory.
#[derive(Debug, Clone)]
pub struct RunPaths {
    pub root: PathBuf,
}

impl RunPaths {
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf() }
    }
    pub fn data_manifest(&self) -> PathBuf {
        self.root.join("data").join(MANIFEST_FILE)
    }
    pub fn enhanced_dir(&self) -> PathBuf {
        self.root.join("enhanced")
    }
    pub fn enhanced_manifest(&self) -> PathBuf {
        self.enhanced_dir().join(MANIFEST_FILE)
    }
    pub fn weights(&self) -> PathBuf {
        self.root.join("train").join("weights.bin")
    }
    pub fn train_log(&self) -> PathBuf {
        self.root.join("train").join("train_log.csv")
    }
    pub fn descriptors(&self, random: bool) -> PathBuf {
        self.root
            .join(if random { "index_random" } else { "index" })
            .join("descriptors.bin")
    }
    pub fn eval_dir(&self, random: bool, s: f64) -> PathBuf {
        self.root.join(if random { "eval_random" } else { "eval" }).join(format!("s{s}"))
    }
    pub fn run_summary(&self) -> PathBuf {
        self.root.join(RUN_SUMMARY_FILE)
    }
}

/// Run every enhancement stage over a dataset: the insonification pattern
/// is the mean of all its images. Writes images, `pattern.pgm` and a
/// manifest with the same records into `out_dir`.
pub fn enhance_dataset(manifest_path: &Path, section: &EnhanceSection, out_dir: &Path) -> Result<DatasetManifest> {
    let manifest = load_manifest(manifest_path)?;
    let dir = manifest_dir(manifest_path);
    let mut acc = PatternAccumulator::new();
    for r in &manifest.records {
        acc.add(&read_image(&dir.join(&r.image_path), &manifest.config)?)?;
    }
    let pattern = acc.finish()?;
    write_image(&pattern, &out_dir.join("pattern.pgm"))?;
    let chain = EnhanceChain::new()
        .push(NormalizeStage {
            pattern,
            epsilon: section.epsilon,
        })
        .push(DwtStage(section.dwt()))
        .push(CfarStage(section.cfar()?));
    log::info!("enhancing {} images with {:?}", manifest.records.len(), chain.stage_names());
    for r in &manifest.records {
        let img = read_image(&dir.join(&r.image_path), &manifest.config)?;
        write_image(&chain.apply(&img)?, &out_dir.join(&r.image_path))?;
    }
    save_manifest(&manifest, &out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Images of the records of `manifest` that belong to `assets` (all when
/// `assets` is empty).
pub fn load_images(manifest: &DatasetManifest, dir: &Path, assets: &[u32]) -> Result<ImageStore> {
    let mut store = ImageStore::new();
    for r in &manifest.records {
        if assets.is_empty() || assets.contains(&r.asset_id) {
            store.insert(r.id, &read_image(&dir.join(&r.image_path), &manifest.config)?);
        }
    }
    Ok(store)
}

/// Describe every record of `manifest` present in `images`.
pub fn index_records(manifest: &DatasetManifest, images: &ImageStore, model: &DescriptorModel) -> Result<DescriptorDb> {
    let ids: Vec<u32> = manifest.records.iter().map(|r| r.id).filter(|id| images.contains(*id)).collect();
    Ok(DescriptorDb {
        rgp_seed: model.rgp.seed(),
        encoder_seed: model.weights.params.seed,
        entries: training::describe_all(model, images, &ids)?,
    })
}

/// Evaluate `db` on the records of `manifest` it covers and write the CSV
/// reports as `<prefix>pr_curve.csv` and so on.
pub fn evaluate_db(
    manifest: &DatasetManifest,
    db: &DescriptorDb,
    params: &SimilarityParams,
    s: f64,
    sweep_points: usize,
    prefix: &Path,
) -> Result<Summary> {
    let covered = DatasetManifest {
        config: manifest.config,
        generator_seed: manifest.generator_seed,
        records: manifest
            .records
            .iter()
            .filter(|r| db.get(r.id).is_some())
            .cloned()
            .collect(),
    };
    let e = eval::evaluate(&covered, &db.entries, params, s, &eval::default_thresholds(sweep_points))?;
    eval::write_reports(prefix, &e, &db.entries)?;
    Ok(e.summary)
}

/// `dir` as a prefix for files inside it.
pub fn dir_prefix(dir: &Path) -> PathBuf {
    let mut p = dir.as_os_str().to_owned();
    p.push(std::path::MAIN_SEPARATOR_STR);
    PathBuf::from(p)
}

/// Train on `train.train_assets` of the manifest at `manifest_path`,
/// scoring `train.val_asset` after every epoch when it has records.
pub fn train_from_manifest(
    manifest_path: &Path,
    train: &TrainSection,
    similarity: &SimilaritySection,
) -> Result<training::TrainOutcome> {
    let manifest = load_manifest(manifest_path)?;
    let dir = manifest_dir(manifest_path);
    let train_set = manifest.filter_assets(&train.train_assets);
    if train_set.records.is_empty() {
        return Err(Error::EmptyDataset(format!("no records for train assets {:?}", train.train_assets)));
    }
    let images = load_images(&manifest, &dir, &train.train_assets)?;
    let val_manifest = manifest.filter_assets(&[train.val_asset]);
    let validation = if val_manifest.records.is_empty() {
        log::warn!("validation asset {} has no records", train.val_asset);
        None
    } else {
        let v = Validation::new(&val_manifest, &similarity.params(), train.val_s_seconds)?;
        Some((v, load_images(&manifest, &dir, &[train.val_asset])?))
    };
    training::train(
        &train_set,
        &images,
        &train.triplet(similarity),
        &train.encoder(),
        train.rgp_seed,
        validation.as_ref().map(|(v, s)| (v, s)),
    )
}

#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub source: Error,
}

impl std::fmt::Display for StageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "stage {} failed: {}", self.stage, self.source)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub config: RunConfig,
    pub stages: BTreeMap<String, String>,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    /// `"<trained|random>/s<S>"` to metrics.
    pub metrics: BTreeMap<String, SummaryRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryRecord {
    pub auc: f64,
    pub r_at_95p: f64,
    pub f1_threshold: f64,
    pub f1_precision: f64,
    pub f1_recall: f64,
}

impl From<Summary> for SummaryRecord {
    fn from(s: Summary) -> Self {
        Self {
            auc: s.auc,
            r_at_95p: s.r_at_95p,
            f1_threshold: s.f1.threshold,
            f1_precision: s.f1.precision,
            f1_recall: s.f1.recall,
        }
    }
}

struct Runner<'a> {
    config: &'a RunConfig,
    paths: RunPaths,
    force: bool,
    summary: RunSummary,
}

impl Runner<'_> {
    fn stage<T>(&mut self, name: &'static str, f: impl FnOnce(&Self) -> Result<T>) -> std::result::Result<T, StageError> {
        match f(self) {
            Ok(v) => {
                self.summary.stages.insert(name.to_string(), "ok".into());
                Ok(v)
            }
            Err(source) => {
                self.summary.stages.insert(name.to_string(), "failed".into());
                self.summary.failed_stage = Some(name.to_string());
                self.summary.error = Some(source.to_string());
                Err(StageError { stage: name, source })
            }
        }
    }

    fn reuse(&self, outputs: &[PathBuf], name: &str) -> bool {
        let done = !self.force && outputs.iter().all(|p| p.exists());
        if done {
            log::info!("{name}: outputs exist, skipping");
        }
        done
    }

    fn simgen(&self) -> Result<()> {
        let out = self.paths.data_manifest();
        if self.reuse(std::slice::from_ref(&out), "simgen") {
            return Ok(());
        }
        let c = self.config;
        let scenes = c.simgen.scenes()?;
        let m = generate_dataset(
            &scenes,
            &c.simgen.grid(),
            &c.sonar.config()?,
            &c.simgen.noise(),
            c.seed,
            out.parent().expect("manifest has a parent"),
        )?;
        log::info!("simgen: {} records over assets {:?}", m.records.len(), m.asset_ids());
        Ok(())
    }

    /// Manifest path the later stages read images from.
    fn image_manifest(&self) -> PathBuf {
        if self.config.enhance.enabled {
            self.paths.enhanced_manifest()
        } else {
            self.paths.data_manifest()
        }
    }

    fn enhance(&self) -> Result<()> {
        if !self.config.enhance.enabled {
            log::info!("enhance: disabled");
            return Ok(());
        }
        if self.reuse(&[self.paths.enhanced_manifest()], "enhance") {
            return Ok(());
        }
        enhance_dataset(&self.paths.data_manifest(), &self.config.enhance, &self.paths.enhanced_dir())?;
        Ok(())
    }

    fn train(&self) -> Result<()> {
        if self.reuse(&[self.paths.weights(), self.paths.train_log()], "train") {
            return Ok(());
        }
        let c = self.config;
        let out = train_from_manifest(&self.image_manifest(), &c.train, &c.similarity)?;
        write_weights(&out.model.weights, c.train.rgp_seed, &self.paths.weights())?;
        crate::io::write_bytes(&self.paths.train_log(), train_log_csv(&out.log).as_bytes())
    }

    fn models(&self) -> Result<Vec<(bool, DescriptorModel)>> {
        let (weights, rgp_seed) = read_weights(&self.paths.weights())?;
        let mut models = vec![(false, DescriptorModel::new(weights, rgp_seed)?)];
        if self.config.eval.random_baseline {
            models.push((true, DescriptorModel::random(&self.config.train.encoder(), self.config.train.rgp_seed)?));
        }
        Ok(models)
    }

    fn index(&self) -> Result<()> {
        let models = self.models()?;
        let outputs: Vec<PathBuf> = models.iter().map(|(r, _)| self.paths.descriptors(*r)).collect();
        if self.reuse(&outputs, "index") {
            return Ok(());
        }
        let mpath = self.image_manifest();
        let manifest = load_manifest(&mpath)?;
        let images = load_images(&manifest, &manifest_dir(&mpath), &self.config.eval_assets())?;
        if images.is_empty() {
            return Err(Error::EmptyDataset(format!("no records for eval assets {:?}", self.config.eval_assets())));
        }
        for ((_, model), out) in models.iter().zip(&outputs) {
            write_descriptor_db(&index_records(&manifest, &images, model)?, out)?;
        }
        Ok(())
    }

    fn eval(&mut self) -> Result<()> {
        let c = self.config;
        let mut variants = vec![false];
        if c.eval.random_baseline {
            variants.push(true);
        }
        let manifest = load_manifest(&self.image_manifest())?;
        for random in variants {
            let db = read_descriptor_db(&self.paths.descriptors(random))?;
            for &s in &c.eval.s_seconds {
                let dir = self.paths.eval_dir(random, s);
                let summary_path = dir.join("summary.csv");
                let summary = if self.reuse(std::slice::from_ref(&summary_path), "eval") {
                    eval::read_summary_csv(&summary_path)?
                } else {
                    evaluate_db(&manifest, &db, &c.similarity.params(), s, c.eval.sweep_points, &dir_prefix(&dir))?
                };
                let key = format!("{}/s{s}", if random { "random" } else { "trained" });
                self.summary.metrics.insert(key, summary.into());
            }
        }
        Ok(())
    }

    fn write_summary(&self) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.summary).expect("summary serializes") + "\n";
        crate::io::write_bytes(&self.paths.run_summary(), text.as_bytes())
    }
}

/// Run all stages in order. The run summary is written whether or not a
/// stage fails; on failure the error names the stage.
pub fn run_pipeline(config: &RunConfig, force: bool) -> std::result::Result<RunSummary, StageError> {
    let mut runner = Runner {
        config,
        paths: RunPaths::new(&config.out_dir),
        force,
        summary: RunSummary {
            config: config.clone(),
            stages: STAGES.iter().map(|s| (s.to_string(), "not-run".to_string())).collect(),
            failed_stage: None,
            error: None,
            metrics: BTreeMap::new(),
        },
    };
    let result = run_stages(&mut runner);
    if let Err(e) = runner.write_summary() {
        log::error!("could not write run summary: {e}");
    }
    result.map(|_| runner.summary)
}

fn run_stages(r: &mut Runner) -> std::result::Result<(), StageError> {
    r.stage("config", |r| r.config.validate())?;
    r.stage("simgen", |r| r.simgen())?;
    r.stage("enhance", |r| r.enhance())?;
    r.stage("train", |r| r.train())?;
    r.stage("index", |r| r.index())?;
    let res = r.eval();
    r.stage("eval", |_| res)
}
