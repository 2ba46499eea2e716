//! Triplet-loss training with overlap-based labels and online mining:
//! per anchor, sample candidate positives and negatives, pick the positive
//! and the negative whose current descriptors are closest to the anchor's,
//! and take one gradient step on the encoder (the projection stays frozen).

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::descriptor::{
    backward, cosine_distance, forward, DescriptorModel, EncoderParams, EncoderWeights, ForwardCache,
    ImageStore, Tensor3,
};
use crate::error::{Error, Result};
use crate::eval::{auc, default_thresholds, gt_table, pr_curve_windowed, MatchTable, DEFAULT_SWEEP_POINTS};
use crate::geometry::{FootprintSet, SimilarityParams, DEFAULT_N_ARC};
use crate::rng;
use crate::types::{DatasetManifest, Descriptor, Role, ScanRecord};

const TAG_ORDER: u64 = 0x6f72_6465;
const TAG_POOL: u64 = 0x706f_6f6c;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TripletConfig {
    pub margin_m: f64,
    pub n_neg: usize,
    pub n_pos: usize,
    pub tau: f64,
    pub max_heading_diff_rad: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Permit training on a single asset.
    pub allow_single_asset: bool,
}

impl Default for TripletConfig {
    fn default() -> Self {
        Self {
            margin_m: 0.5,
            n_neg: 10,
            n_pos: 5,
            tau: 0.7,
            max_heading_diff_rad: PI / 2.0,
            learning_rate: 1e-3,
            epochs: 10,
            seed: 0,
            allow_single_asset: false,
        }
    }
}

impl TripletConfig {
    pub fn similarity(&self) -> SimilarityParams {
        SimilarityParams {
            tau: self.tau,
            max_heading_diff_rad: self.max_heading_diff_rad,
            n_arc: DEFAULT_N_ARC,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.margin_m >= 0.0 && self.margin_m.is_finite()) {
            return Err(Error::InvalidParam(format!("margin must be >= 0, got {}", self.margin_m)));
        }
        if self.n_neg == 0 || self.n_pos == 0 {
            return Err(Error::InvalidParam("pool sizes must be positive".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "learning rate must be >= 0, got {}",
                self.learning_rate
            )));
        }
        self.similarity().validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triplet {
    pub anchor_id: u32,
    pub positive_id: u32,
    pub negative_id: u32,
}

/// Candidate record ids for one anchor, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Pools {
    pub positives: Vec<u32>,
    pub negatives: Vec<u32>,
}

/// Every other record of the manifest split by the same-place predicate.
#[derive(Debug, Clone)]
struct Candidates {
    positives: Vec<u32>,
    negatives: Vec<u32>,
}

fn classify(set: &FootprintSet, records: &[ScanRecord], a: usize, params: &SimilarityParams) -> Candidates {
    let mut c = Candidates {
        positives: Vec::new(),
        negatives: Vec::new(),
    };
    for (k, r) in records.iter().enumerate() {
        if k == a || r.id == records[a].id {
            continue;
        }
        if set.is_positive(a, k, params) {
            c.positives.push(r.id);
        } else {
            c.negatives.push(r.id);
        }
    }
    c
}

fn sample_pools(c: &Candidates, n_pos: usize, n_neg: usize, seed: u64) -> Pools {
    let mut r = rng::rng_from(seed);
    let mut pick = |from: &[u32], n: usize| -> Vec<u32> {
        let mut v: Vec<u32> = if from.len() <= n {
            from.to_vec()
        } else {
            index::sample(&mut r, from.len(), n).into_iter().map(|k| from[k]).collect()
        };
        v.sort_unstable();
        v
    };
    let positives = pick(&c.positives, n_pos);
    let negatives = pick(&c.negatives, n_neg);
    Pools { positives, negatives }
}

/// Seeded uniform sample of up to `n_pos` positives and `n_neg` negatives
/// for `anchor` among the other records of `manifest`.
pub fn candidate_pools(
    anchor: &ScanRecord,
    manifest: &DatasetManifest,
    params: &SimilarityParams,
    n_pos: usize,
    n_neg: usize,
    seed: u64,
) -> Result<Pools> {
    let mut poses = vec![anchor.pose];
    poses.extend(manifest.records.iter().map(|r| r.pose));
    let set = FootprintSet::new(poses, &manifest.config, params.n_arc)?;
    let mut records = vec![anchor.clone()];
    records.extend(manifest.records.iter().cloned());
    let c = classify(&set, &records, 0, params);
    Ok(sample_pools(&c, n_pos, n_neg, seed))
}

fn closest(anchor: &Descriptor, pool: &[u32], lookup: &dyn Fn(u32) -> Option<Descriptor>, what: &str) -> Result<u32> {
    let mut best: Option<(f64, u32)> = None;
    for &id in pool {
        let d = lookup(id).ok_or_else(|| Error::Mining(format!("no current descriptor for {what} {id}")))?;
        let dist = cosine_distance(anchor, &d);
        match best {
            Some((bd, bid)) if dist > bd || (dist == bd && id > bid) => {}
            _ => best = Some((dist, id)),
        }
    }
    best.map(|b| b.1)
        .ok_or_else(|| Error::Mining(format!("empty {what} pool")))
}

/// Hardest negative and easiest positive: both the closest to the anchor in
/// descriptor space, ties to the lowest id.
pub fn mine_triplet(
    anchor_id: u32,
    anchor: &Descriptor,
    pools: &Pools,
    lookup: &dyn Fn(u32) -> Option<Descriptor>,
) -> Result<Triplet> {
    Ok(Triplet {
        anchor_id,
        positive_id: closest(anchor, &pools.positives, lookup, "positive")?,
        negative_id: closest(anchor, &pools.negatives, lookup, "negative")?,
    })
}

/// `max(0, d(A, P) - d(A, N) + m)` with the cosine distance.
pub fn triplet_loss(a: &Descriptor, p: &Descriptor, n: &Descriptor, margin: f64) -> f64 {
    (cosine_distance(a, p) - cosine_distance(a, n) + margin).max(0.0)
}

/// One input pushed through the network, with what backpropagation needs.
struct Embedded {
    cache: ForwardCache,
    norm: f64,
    descriptor: Descriptor,
}

fn embed(model: &DescriptorModel, input: &Tensor3) -> Result<Embedded> {
    let cache = forward(input, &model.weights)?;
    let z = crate::descriptor::rgp_project(cache.features(), &model.rgp)?;
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (descriptor, _) = Descriptor::normalize(&z)?;
    Ok(Embedded { cache, norm, descriptor })
}

/// Accumulate the encoder gradient for d(loss)/d(descriptor) = `g`.
fn backprop(model: &DescriptorModel, e: &Embedded, g: &[f64], grads: &mut EncoderWeights) -> Result<()> {
    if !(e.norm > 0.0 && e.norm.is_finite()) {
        // fallback descriptor is constant
        return Ok(());
    }
    let x = e.descriptor.values();
    let xg: f64 = x.iter().zip(g).map(|(a, b)| a * b).sum();
    let gz: Vec<f64> = x.iter().zip(g).map(|(xi, gi)| (gi - xi * xg) / e.norm).collect();
    let gf = model.rgp.transpose_mul(&gz)?;
    backward(&e.cache, &model.weights, &gf, grads);
    Ok(())
}

fn loss_and_gradient_embedded(
    model: &DescriptorModel,
    a: &Embedded,
    p: &Embedded,
    n: &Embedded,
    margin: f64,
) -> Result<(f64, Option<EncoderWeights>)> {
    let loss = triplet_loss(&a.descriptor, &p.descriptor, &n.descriptor, margin);
    if !(loss > 0.0) {
        return Ok((loss, None));
    }
    // L = a.n - a.p + m while active
    let (av, pv, nv) = (a.descriptor.values(), p.descriptor.values(), n.descriptor.values());
    let ga: Vec<f64> = nv.iter().zip(pv).map(|(x, y)| x - y).collect();
    let gp: Vec<f64> = av.iter().map(|v| -v).collect();
    let mut grads = EncoderWeights::zeros(&model.weights.params)?;
    backprop(model, a, &ga, &mut grads)?;
    backprop(model, p, &gp, &mut grads)?;
    backprop(model, n, av, &mut grads)?;
    Ok((loss, Some(grads)))
}

/// Triplet loss on three network inputs and its gradient with respect to
/// every encoder parameter (zero when the hinge is inactive).
pub fn triplet_loss_and_gradient(
    model: &DescriptorModel,
    anchor: &Tensor3,
    positive: &Tensor3,
    negative: &Tensor3,
    margin: f64,
) -> Result<(f64, EncoderWeights)> {
    let (a, p, n) = (embed(model, anchor)?, embed(model, positive)?, embed(model, negative)?);
    let (loss, grads) = loss_and_gradient_embedded(model, &a, &p, &n, margin)?;
    Ok((loss, grads.map_or_else(|| EncoderWeights::zeros(&model.weights.params), Ok)?))
}

/// Held-out records scored after every epoch.
#[derive(Debug, Clone)]
pub struct Validation {
    ids: Vec<u32>,
    times: Vec<f64>,
    gt: MatchTable,
    s: f64,
}

impl Validation {
    pub fn new(manifest: &DatasetManifest, params: &SimilarityParams, s: f64) -> Result<Self> {
        Ok(Self {
            ids: manifest.records.iter().map(|r| r.id).collect(),
            times: manifest.records.iter().map(|r| r.pose.t).collect(),
            gt: gt_table(manifest, params)?,
            s,
        })
    }

    pub fn auc(&self, model: &DescriptorModel, images: &ImageStore) -> Result<f64> {
        let descs = describe_all(model, images, &self.ids)?;
        let curve = pr_curve_windowed(
            &descs,
            &self.gt,
            Some((&self.times, self.s)),
            &default_thresholds(DEFAULT_SWEEP_POINTS),
        )?;
        auc(&curve)
    }
}

/// Descriptors for `ids`, in that order.
pub fn describe_all(model: &DescriptorModel, images: &ImageStore, ids: &[u32]) -> Result<Vec<(u32, Descriptor)>> {
    let (h, w) = (model.weights.params.input_h, model.weights.params.input_w);
    let mut degenerate = 0;
    let out = ids
        .iter()
        .map(|&id| {
            let (d, flag) = model.describe_input(&images.input(id, h, w)?)?;
            degenerate += flag as usize;
            Ok((id, d))
        })
        .collect::<Result<Vec<_>>>()?;
    if degenerate > 0 {
        log::warn!("{degenerate} degenerate descriptors replaced by the fallback direction");
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub active_fraction: f64,
    pub val_auc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: DescriptorModel,
    pub log: Vec<EpochLog>,
    /// Anchors without a positive or a negative candidate.
    pub skipped_anchors: usize,
}

pub fn train_log_csv(log: &[EpochLog]) -> String {
    let mut s = String::from("epoch,mean_loss,active_fraction,val_auc\n");
    for e in log {
        let auc = e.val_auc.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{}", e.epoch, e.mean_loss, e.active_fraction, auc);
    }
    s
}

/// Train a fresh encoder initialized from `encoder`.
pub fn train(
    manifest: &DatasetManifest,
    images: &ImageStore,
    config: &TripletConfig,
    encoder: &EncoderParams,
    rgp_seed: u64,
    validation: Option<(&Validation, &ImageStore)>,
) -> Result<TrainOutcome> {
    let model = DescriptorModel::random(encoder, rgp_seed)?;
    train_model(model, manifest, images, config, validation)
}

/// Continue training `model` in place of a fresh initialization.
pub fn train_model(
    mut model: DescriptorModel,
    manifest: &DatasetManifest,
    images: &ImageStore,
    config: &TripletConfig,
    validation: Option<(&Validation, &ImageStore)>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if manifest.asset_ids().len() < 2 && !config.allow_single_asset {
        return Err(Error::Validation(
            "training needs at least two assets unless single-asset training is allowed".into(),
        ));
    }
    let records = &manifest.records;
    if let Some(r) = records.iter().find(|r| !images.contains(r.id)) {
        return Err(Error::Validation(format!("no image loaded for record {}", r.id)));
    }
    let params = config.similarity();
    let set = FootprintSet::new(records.iter().map(|r| r.pose).collect(), &manifest.config, params.n_arc)?;
    let mut anchors = Vec::new();
    let mut skipped = 0;
    for (a, r) in records.iter().enumerate() {
        if r.role != Role::Anchor {
            continue;
        }
        let c = classify(&set, records, a, &params);
        if c.positives.is_empty() || c.negatives.is_empty() {
            skipped += 1;
        } else {
            anchors.push((r.id, c));
        }
    }
    if skipped > 0 {
        log::warn!("{skipped} anchors skipped: no positive or no negative candidates");
    }
    if anchors.is_empty() {
        return Err(Error::EmptyDataset("no anchor has both positive and negative candidates".into()));
    }
    anchors.sort_by_key(|(id, _)| *id);

    let (h, w) = (model.weights.params.input_h, model.weights.params.input_w);
    let mut log_rows = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..anchors.len()).collect();
        order.shuffle(&mut rng::stream(config.seed, &[TAG_ORDER, epoch as u64]));
        let (mut total, mut active) = (0.0, 0usize);
        for &k in &order {
            let (anchor_id, cands) = &anchors[k];
            let pools = sample_pools(
                cands,
                config.n_pos,
                config.n_neg,
                rng::derive_seed(config.seed, &[TAG_POOL, epoch as u64, *anchor_id as u64]),
            );
            let a = embed(&model, &images.input(*anchor_id, h, w)?)?;
            let mut pool = Vec::with_capacity(pools.positives.len() + pools.negatives.len());
            for &id in pools.positives.iter().chain(&pools.negatives) {
                pool.push((id, embed(&model, &images.input(id, h, w)?)?));
            }
            let lookup = |id: u32| pool.iter().find(|(i, _)| *i == id).map(|(_, e)| e.descriptor.clone());
            let t = mine_triplet(*anchor_id, &a.descriptor, &pools, &lookup)?;
            let find = |id: u32| &pool.iter().find(|(i, _)| *i == id).expect("mined from pool").1;
            let (loss, grads) = loss_and_gradient_embedded(&model, &a, find(t.positive_id), find(t.negative_id), config.margin_m)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    loss,
                    anchor: t.anchor_id,
                    positive: t.positive_id,
                    negative: t.negative_id,
                });
            }
            total += loss;
            if let Some(g) = grads {
                active += 1;
                model.weights.apply_gradient(&g, config.learning_rate);
                if !model.weights.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        loss: f64::NAN,
                        anchor: t.anchor_id,
                        positive: t.positive_id,
                        negative: t.negative_id,
                    });
                }
            }
        }
        let n = anchors.len() as f64;
        let val_auc = match validation {
            Some((v, store)) => Some(v.auc(&model, store)?),
            None => None,
        };
        let row = EpochLog {
            epoch,
            mean_loss: total / n,
            active_fraction: active as f64 / n,
            val_auc,
        };
        log::info!(
            "epoch {epoch}: mean loss {:.4}, active {:.3}, val auc {}",
            row.mean_loss,
            row.active_fraction,
            val_auc.map_or("-".to_string(), |v| format!("{v:.4}"))
        );
        log_rows.push(row);
    }
    Ok(TrainOutcome {
        model,
        log: log_rows,
        skipped_anchors: skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::init_encoder;
    use crate::types::{Pose2D, SonarConfig, SonarImage, DESCRIPTOR_DIM};
    use proptest::prelude::*;
    use rand::Rng;

    fn unit_angle(deg: f64) -> Descriptor {
        let mut v = vec![0.0; DESCRIPTOR_DIM];
        v[0] = deg.to_radians().cos();
        v[1] = deg.to_radians().sin();
        Descriptor::normalize(&v).unwrap().0
    }

    /// Descriptor at cosine distance `d` from `unit_angle(0)`.
    fn at_distance(d: f64) -> Descriptor {
        unit_angle((1.0 - d).acos().to_degrees())
    }

    fn rec(id: u32, x: f64, y: f64, heading: f64, role: Role, asset_id: u32) -> ScanRecord {
        ScanRecord {
            id,
            pose: Pose2D::new(x, y, heading, id as f64),
            image_path: format!("images/{id:06}.pgm"),
            role,
            asset_id,
        }
    }

    #[test]
    fn loss_arithmetic() {
        let a = unit_angle(0.0);
        let close = |x: f64, y: f64| (x - y).abs() < 1e-9;
        assert_eq!(triplet_loss(&a, &at_distance(0.1), &at_distance(0.9), 0.5), 0.0);
        assert!(close(triplet_loss(&a, &at_distance(0.4), &at_distance(0.5), 0.5), 0.4));
        let p = at_distance(0.3);
        assert_eq!(triplet_loss(&a, &p, &p, 0.5), 0.5);
    }

    #[test]
    fn mining_picks_closest() {
        let a = unit_angle(0.0);
        let table = [(4, 0.9), (7, 0.3), (9, 0.7), (11, 0.05), (12, 0.2)];
        let lookup = |id: u32| table.iter().find(|(i, _)| *i == id).map(|(_, d)| at_distance(*d));
        let pools = Pools {
            positives: vec![11, 12],
            negatives: vec![4, 7, 9],
        };
        let t = mine_triplet(1, &a, &pools, &lookup).unwrap();
        assert_eq!((t.positive_id, t.negative_id), (11, 7));
        let same = |_: u32| Some(at_distance(0.5));
        let t = mine_triplet(1, &a, &Pools { positives: vec![8, 3], negatives: vec![6, 2, 5] }, &same).unwrap();
        assert_eq!((t.positive_id, t.negative_id), (3, 2));
        assert!(matches!(
            mine_triplet(1, &a, &Pools { positives: vec![], negatives: vec![2] }, &same),
            Err(Error::Mining(_))
        ));
    }

    fn two_asset_manifest() -> DatasetManifest {
        let mut records = vec![rec(0, 0.0, 0.0, 0.0, Role::Anchor, 1)];
        for k in 0..5 {
            records.push(rec(1 + k, 0.1 * k as f64, 0.05, 0.02 * k as f64, Role::Sample, 1));
        }
        records.push(rec(6, 12.0, 20.0, 2.0, Role::Anchor, 1));
        for k in 0..4 {
            records.push(rec(10 + k, 1000.0 + k as f64, 0.0, 0.0, Role::Anchor, 2));
        }
        DatasetManifest {
            config: SonarConfig::default(),
            records,
            generator_seed: 0,
        }
    }

    #[test]
    fn pools_examples() {
        let m = two_asset_manifest();
        let params = SimilarityParams::default();
        let p = candidate_pools(&m.records[0], &m, &params, 5, 10, 3).unwrap();
        assert_eq!(p.positives, vec![1, 2, 3, 4, 5]);
        assert!(p.negatives.contains(&10) && p.negatives.contains(&13) && p.negatives.contains(&6));
        let small = candidate_pools(&m.records[0], &m, &params, 2, 3, 3).unwrap();
        assert_eq!((small.positives.len(), small.negatives.len()), (2, 3));
        assert_eq!(small, candidate_pools(&m.records[0], &m, &params, 2, 3, 3).unwrap());
    }

    fn tiny_model(seed: u64) -> DescriptorModel {
        let p = EncoderParams {
            input_h: 6,
            input_w: 6,
            channel_widths: vec![3],
            seed,
            ..Default::default()
        };
        DescriptorModel::random(&p, seed + 100).unwrap()
    }

    fn random_input(r: &mut rng::Rng) -> Tensor3 {
        Tensor3::from_plane(6, 6, (0..36).map(|_| r.random::<f64>()).collect()).unwrap()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut r = rng::rng_from(42);
        let mut checked = 0;
        for seed in 0..6 {
            let model = tiny_model(seed);
            let (a, p, n) = (random_input(&mut r), random_input(&mut r), random_input(&mut r));
            let (loss, g) = triplet_loss_and_gradient(&model, &a, &p, &n, 2.0).unwrap();
            assert!(loss > 0.0);
            let base = model.weights.flatten();
            let analytic = g.flatten();
            let h = 1e-4;
            for i in 0..base.len() {
                let eval = |delta: f64| {
                    let mut m = model.clone();
                    let mut v = base.clone();
                    v[i] += delta;
                    m.weights.set_flat(&v).unwrap();
                    triplet_loss_and_gradient(&m, &a, &p, &n, 2.0).unwrap().0
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                let scale = fd.abs().max(analytic[i].abs()).max(1e-4);
                assert!((fd - analytic[i]).abs() / scale < 1e-3, "seed {seed} param {i}: {fd} vs {}", analytic[i]);
                checked += 1;
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn trainable_parameters_are_the_encoder() {
        let model = tiny_model(1);
        let mut r = rng::rng_from(0);
        let (_, g) =
            triplet_loss_and_gradient(&model, &random_input(&mut r), &random_input(&mut r), &random_input(&mut r), 2.0)
                .unwrap();
        assert_eq!(g.param_count(), model.weights.param_count());
        assert_eq!(model.weights.param_count(), 3 * 9 + 3);
    }

    fn toy_training_set() -> (DatasetManifest, ImageStore) {
        // 3x3 grid on two assets; images are pose-dependent stripes
        let config = SonarConfig::new(30.0, 2.0, 16, 16).unwrap();
        let mut records = Vec::new();
        let mut store = ImageStore::new();
        let mut id = 0;
        for asset in 1..=2u32 {
            for cell in 0..9 {
                let (cx, cy) = ((cell % 3) as f64 * 4.0 + asset as f64 * 1000.0, (cell / 3) as f64 * 4.0);
                for k in 0..3 {
                    let role = if k == 0 { Role::Anchor } else { Role::Sample };
                    let pose = Pose2D::new(cx + 0.2 * k as f64, cy, 0.0, id as f64);
                    records.push(ScanRecord {
                        id,
                        pose,
                        image_path: String::new(),
                        role,
                        asset_id: asset,
                    });
                    let phase = (cell as f64 * 1.3 + asset as f64 * 0.7) + 0.05 * k as f64;
                    let data = (0..256).map(|i| 0.5 + 0.5 * ((i % 16) as f64 * 0.4 + phase).sin()).collect();
                    store.insert(id, &SonarImage::from_clamped(config, data).unwrap());
                    id += 1;
                }
            }
        }
        (
            DatasetManifest {
                config,
                records,
                generator_seed: 0,
            },
            store,
        )
    }

    fn toy_encoder() -> EncoderParams {
        EncoderParams {
            input_h: 16,
            input_w: 16,
            channel_widths: vec![4, 4],
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn zero_learning_rate_keeps_weights() {
        let (m, store) = toy_training_set();
        let config = TripletConfig {
            learning_rate: 0.0,
            epochs: 2,
            ..Default::default()
        };
        let out = train(&m, &store, &config, &toy_encoder(), 5, None).unwrap();
        assert_eq!(out.model.weights, init_encoder(&toy_encoder()).unwrap());
        assert_eq!(out.log.len(), 2);
    }

    #[test]
    fn training_is_deterministic_and_lowers_loss() {
        let (m, store) = toy_training_set();
        let config = TripletConfig {
            learning_rate: 0.05,
            epochs: 8,
            seed: 9,
            ..Default::default()
        };
        let a = train(&m, &store, &config, &toy_encoder(), 5, None).unwrap();
        let b = train(&m, &store, &config, &toy_encoder(), 5, None).unwrap();
        assert_eq!(a.model.weights, b.model.weights);
        assert_eq!(a.log, b.log);
        let rgp_before = DescriptorModel::random(&toy_encoder(), 5).unwrap().rgp;
        assert_eq!(a.model.rgp, rgp_before);
        assert!(a.log.last().unwrap().mean_loss < a.log[0].mean_loss, "{:?}", a.log);
    }

    #[test]
    fn single_asset_needs_override() {
        let (m, store) = toy_training_set();
        let one = m.filter_assets(&[1]);
        let config = TripletConfig {
            epochs: 1,
            ..Default::default()
        };
        assert!(train(&one, &store, &config, &toy_encoder(), 5, None).is_err());
        let config = TripletConfig {
            allow_single_asset: true,
            ..config
        };
        assert!(train(&one, &store, &config, &toy_encoder(), 5, None).is_ok());
    }

    #[test]
    fn log_csv_format() {
        let rows = [
            EpochLog { epoch: 0, mean_loss: 0.5, active_fraction: 1.0, val_auc: Some(0.25) },
            EpochLog { epoch: 1, mean_loss: 0.125, active_fraction: 0.5, val_auc: None },
        ];
        assert_eq!(
            train_log_csv(&rows),
            "epoch,mean_loss,active_fraction,val_auc\n0,0.5,1,0.25\n1,0.125,0.5,\n"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn loss_non_negative_and_zero_iff_margin_met(
            da in 0.0f64..180.0, dp in 0.0f64..180.0, dn in 0.0f64..180.0, m in 0.0f64..1.0,
        ) {
            let (a, p, n) = (unit_angle(da), unit_angle(dp), unit_angle(dn));
            let l = triplet_loss(&a, &p, &n, m);
            prop_assert!(l >= 0.0);
            prop_assume!((cosine_distance(&a, &n) - cosine_distance(&a, &p) - m).abs() > 1e-12);
            let met = cosine_distance(&a, &n) >= cosine_distance(&a, &p) + m;
            prop_assert_eq!(l == 0.0, met);
        }

        #[test]
        fn mining_ignores_pool_order(seed in any::<u64>()) {
            let mut r = rng::rng_from(seed);
            // coarse distances so ties are common
            let dist: Vec<f64> = (0..12).map(|_| r.random_range(0..4) as f64 * 0.25).collect();
            let lookup = |id: u32| Some(at_distance(dist[id as usize]));
            let mut pools = Pools { positives: (0..5).collect(), negatives: (5..12).collect() };
            let a = unit_angle(0.0);
            let t1 = mine_triplet(99, &a, &pools, &lookup).unwrap();
            pools.positives.shuffle(&mut r);
            pools.negatives.shuffle(&mut r);
            let t2 = mine_triplet(99, &a, &pools, &lookup).unwrap();
            prop_assert_eq!(t1, t2);
        }
    }
}
