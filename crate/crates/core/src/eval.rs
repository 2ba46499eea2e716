//! Retrieval metrics: ground-truth and predicted match tables, PR curve,
//! AUC, recall at fixed precision, F1-optimal point, nearest-neighbour
//! retrieval with a temporal exclusion window, precision over FOV overlap
//! and a 2-D classical MDS export of the descriptor space.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::descriptor::cosine_distance;
use crate::error::{Error, Result};
use crate::geometry::{FootprintSet, SimilarityParams};
use crate::types::{DatasetManifest, Descriptor};

pub const DEFAULT_SWEEP_POINTS: usize = 512;
pub const DEFAULT_R_PRECISION: f64 = 0.95;

/// Symmetric pairwise boolean table over a list of record ids. The
/// diagonal is never consulted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchTable {
    ids: Vec<u32>,
    bits: Vec<bool>,
}

impl MatchTable {
    /// Evaluates `f(i, j)` on the upper triangle and mirrors it.
    pub fn from_fn(ids: Vec<u32>, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let n = ids.len();
        let mut bits = vec![false; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                bits[i * n + j] = v;
                bits[j * n + i] = v;
            }
        }
        Self { ids, bits }
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// `false` on the diagonal.
    pub fn get(&self, i: usize, j: usize) -> bool {
        i != j && self.bits[i * self.ids.len() + j]
    }

    /// Number of true pairs, each unordered pair counted once.
    pub fn count_true(&self) -> usize {
        let n = self.ids.len();
        (0..n).map(|i| (i + 1..n).filter(|&j| self.get(i, j)).count()).sum()
    }
}

/// Ground truth: entry `(i, j)` is the same-place predicate on the two poses.
pub fn gt_table(manifest: &DatasetManifest, params: &SimilarityParams) -> Result<MatchTable> {
    params.validate()?;
    let set = FootprintSet::new(
        manifest.records.iter().map(|r| r.pose).collect(),
        &manifest.config,
        params.n_arc,
    )?;
    let ids = manifest.records.iter().map(|r| r.id).collect();
    Ok(MatchTable::from_fn(ids, |i, j| set.is_positive(i, j, params)))
}

/// Predicted matches: descriptor distance strictly below `threshold`.
pub fn pred_table(descriptors: &[(u32, Descriptor)], threshold: f64) -> MatchTable {
    let ids = descriptors.iter().map(|(id, _)| *id).collect();
    MatchTable::from_fn(ids, |i, j| cosine_distance(&descriptors[i].1, &descriptors[j].1) < threshold)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

impl PrPoint {
    pub fn f1(&self) -> f64 {
        let s = self.precision + self.recall;
        if s > 0.0 {
            2.0 * self.precision * self.recall / s
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
}

/// `n` uniformly spaced thresholds covering `[0, 2]`.
pub fn default_thresholds(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![2.0],
        _ => (0..n).map(|k| 2.0 * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Reorder `descriptors` to follow `ids`.
fn align<'a>(ids: &[u32], descriptors: &'a [(u32, Descriptor)]) -> Result<Vec<&'a Descriptor>> {
    let by_id: HashMap<u32, &Descriptor> = descriptors.iter().map(|(id, d)| (*id, d)).collect();
    ids.iter()
        .map(|id| {
            by_id
                .get(id)
                .copied()
                .ok_or_else(|| Error::Validation(format!("no descriptor for record {id}")))
        })
        .collect()
}

/// Whether the pair with timestamps `ta`, `tb` is kept under window `s`.
/// `s == 0` disables temporal exclusion.
fn outside_window(ta: f64, tb: f64, s: f64) -> bool {
    s <= 0.0 || (ta - tb).abs() > s
}

pub fn pr_curve(descriptors: &[(u32, Descriptor)], gt: &MatchTable, thresholds: &[f64]) -> Result<PrCurve> {
    pr_curve_windowed(descriptors, gt, None, thresholds)
}

/// PR curve over the upper triangle. With `window = Some((times, s))`,
/// pairs closer than `s` seconds in time (times aligned with `gt.ids()`)
/// are left out of every count.
pub fn pr_curve_windowed(
    descriptors: &[(u32, Descriptor)],
    gt: &MatchTable,
    window: Option<(&[f64], f64)>,
    thresholds: &[f64],
) -> Result<PrCurve> {
    if thresholds.is_empty() {
        return Err(Error::InvalidParam("empty threshold sweep".into()));
    }
    if thresholds.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParam("thresholds must be strictly increasing".into()));
    }
    let d = align(gt.ids(), descriptors)?;
    if let Some((times, _)) = window {
        if times.len() != gt.len() {
            return Err(Error::Shape(format!("{} timestamps for {} records", times.len(), gt.len())));
        }
    }
    let n = gt.len();
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if let Some((times, s)) = window {
                if !outside_window(times[i], times[j], s) {
                    continue;
                }
            }
            let dist = cosine_distance(d[i], d[j]);
            if gt.get(i, j) {
                pos.push(dist);
            } else {
                neg.push(dist);
            }
        }
    }
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::MetricUndefined(format!(
            "ground truth has {} positive and {} negative pairs",
            pos.len(),
            neg.len()
        )));
    }
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    let points = thresholds
        .iter()
        .map(|&t| {
            let tp = pos.partition_point(|&v| v < t);
            let fp = neg.partition_point(|&v| v < t);
            PrPoint {
                threshold: t,
                precision: if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 },
                recall: tp as f64 / pos.len() as f64,
            }
        })
        .collect();
    Ok(PrCurve { points })
}

/// Trapezoidal area under precision over recall. Duplicate recalls keep
/// their best precision and the curve is extended flat to recall 0.
pub fn auc(curve: &PrCurve) -> Result<f64> {
    if curve.points.is_empty() {
        return Err(Error::MetricUndefined("empty PR curve".into()));
    }
    let mut pts: Vec<(f64, f64)> = curve.points.iter().map(|p| (p.recall, p.precision)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut collapsed: Vec<(f64, f64)> = Vec::with_capacity(pts.len() + 1);
    for (r, p) in pts {
        match collapsed.last_mut() {
            Some(last) if last.0 == r => last.1 = last.1.max(p),
            _ => collapsed.push((r, p)),
        }
    }
    if collapsed[0].0 > 0.0 {
        collapsed.insert(0, (0.0, collapsed[0].1));
    }
    Ok(collapsed
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum())
}

/// Highest recall among sweep points with precision at least `target`.
pub fn recall_at_precision(curve: &PrCurve, target: f64) -> f64 {
    curve
        .points
        .iter()
        .filter(|p| p.precision >= target)
        .map(|p| p.recall)
        .fold(0.0, f64::max)
}

/// Sweep point with maximal F1; ties go to the lowest threshold.
pub fn f1_optimal(curve: &PrCurve) -> Result<PrPoint> {
    let mut best: Option<PrPoint> = None;
    for p in &curve.points {
        match best {
            Some(b) if p.f1() < b.f1() || (p.f1() == b.f1() && p.threshold >= b.threshold) => {}
            _ => best = Some(*p),
        }
    }
    best.ok_or_else(|| Error::MetricUndefined("empty PR curve".into()))
}

/// Exhaustive nearest neighbour of record `query_id` among records outside
/// the exclusion window. Ties go to the lowest id.
pub fn nearest_neighbor(query_id: u32, descriptors: &[(u32, Descriptor)], timestamps: &[f64], s: f64) -> Result<u32> {
    if timestamps.len() != descriptors.len() {
        return Err(Error::Shape(format!(
            "{} timestamps for {} descriptors",
            timestamps.len(),
            descriptors.len()
        )));
    }
    let q = descriptors
        .iter()
        .position(|(id, _)| *id == query_id)
        .ok_or_else(|| Error::Validation(format!("no descriptor for query {query_id}")))?;
    nn_index(q, descriptors, timestamps, s)
        .map(|k| descriptors[k].0)
        .ok_or_else(|| Error::EmptyDataset(format!("every record is inside the {s} s window of query {query_id}")))
}

fn nn_index(q: usize, descriptors: &[(u32, Descriptor)], timestamps: &[f64], s: f64) -> Option<usize> {
    let (qid, qd) = (&descriptors[q].0, &descriptors[q].1);
    let mut best: Option<(f64, u32, usize)> = None;
    for (k, (id, d)) in descriptors.iter().enumerate() {
        if id == qid || !outside_window(timestamps[q], timestamps[k], s) {
            continue;
        }
        let dist = cosine_distance(qd, d);
        match best {
            Some((bd, bid, _)) if dist > bd || (dist == bd && *id > bid) => {}
            _ => best = Some((dist, *id, k)),
        }
    }
    best.map(|b| b.2)
}

/// Overlap thresholds 0.1, 0.2, ..., 0.9.
pub fn default_overlap_thresholds() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

/// For each overlap threshold, the fraction of records whose nearest
/// neighbour (window `s`) overlaps their footprint at least that much.
pub fn precision_over_overlap(
    manifest: &DatasetManifest,
    descriptors: &[(u32, Descriptor)],
    n_arc: usize,
    s: f64,
    overlap_thresholds: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if manifest.records.is_empty() {
        return Err(Error::EmptyDataset("no records to evaluate".into()));
    }
    let ids: Vec<u32> = manifest.records.iter().map(|r| r.id).collect();
    let aligned: Vec<(u32, Descriptor)> = align(&ids, descriptors)?
        .into_iter()
        .zip(&ids)
        .map(|(d, id)| (*id, d.clone()))
        .collect();
    let times: Vec<f64> = manifest.records.iter().map(|r| r.pose.t).collect();
    let set = FootprintSet::new(
        manifest.records.iter().map(|r| r.pose).collect(),
        &manifest.config,
        n_arc,
    )?;
    let mut overlaps = Vec::with_capacity(ids.len());
    for q in 0..ids.len() {
        let k = nn_index(q, &aligned, &times, s).ok_or_else(|| {
            Error::EmptyDataset(format!("every record is inside the {s} s window of query {}", ids[q]))
        })?;
        overlaps.push(set.overlap(q, k));
    }
    let n = overlaps.len() as f64;
    Ok(overlap_thresholds
        .iter()
        .map(|&t| (t, overlaps.iter().filter(|&&o| o >= t).count() as f64 / n))
        .collect())
}

/// Above this size MDS switches from a dense eigensolver to Lanczos.
const DENSE_EIGEN_MAX: usize = 400;
const LANCZOS_STEPS: usize = 80;

/// The `k` algebraically largest eigenpairs of symmetric `b`, largest first.
fn top_eigenpairs(b: &DMatrix<f64>, k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = b.nrows();
    if n <= DENSE_EIGEN_MAX {
        let eig = SymmetricEigen::new(b.clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&c)));
        order.truncate(k);
        return (
            order.iter().map(|&c| eig.eigenvalues[c]).collect(),
            order.iter().map(|&c| eig.eigenvectors.column(c).iter().copied().collect()).collect(),
        );
    }
    lanczos_top(b, k, LANCZOS_STEPS)
}

/// Lanczos with full reorthogonalization from a fixed start vector.
fn lanczos_top(b: &DMatrix<f64>, k: usize, steps: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = b.nrows();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(steps);
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64 * 0.7).sin());
    v /= v.norm();
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    for _ in 0..steps.min(n) {
        let mut w = b * &v;
        let a = w.dot(&v);
        basis.push(v.clone());
        alpha.push(a);
        for q in &basis {
            let c = w.dot(q);
            w.axpy(-c, q, 1.0);
        }
        let norm = w.norm();
        if norm < 1e-10 {
            break;
        }
        beta.push(norm);
        v = w / norm;
    }
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j || j + 1 == i {
            beta[i.min(j)]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&c)));
    order.truncate(k);
    let vectors = order
        .iter()
        .map(|&c| {
            let y = eig.eigenvectors.column(c);
            let mut x = DVector::zeros(n);
            for (q, coef) in basis.iter().zip(y.iter()) {
                x.axpy(*coef, q, 1.0);
            }
            x.iter().copied().collect()
        })
        .collect();
    (order.iter().map(|&c| eig.eigenvalues[c]).collect(), vectors)
}

/// Classical MDS of the pairwise cosine distances into two coordinates.
pub fn mds_2d(descriptors: &[(u32, Descriptor)]) -> Vec<(u32, f64, f64)> {
    let n = descriptors.len();
    if n == 0 {
        return Vec::new();
    }
    let d2 = DMatrix::from_fn(n, n, |i, j| cosine_distance(&descriptors[i].1, &descriptors[j].1).powi(2));
    let row_mean: Vec<f64> = (0..n).map(|i| d2.row(i).sum() / n as f64).collect();
    let total = row_mean.iter().sum::<f64>() / n as f64;
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (d2[(i, j)] - row_mean[i] - row_mean[j] + total));
    let (values, vectors) = top_eigenpairs(&b, 2);
    let axis = |k: usize| -> Vec<f64> {
        let (Some(&lambda), Some(v)) = (values.get(k), vectors.get(k)) else {
            return vec![0.0; n];
        };
        // fix the sign so the largest-magnitude entry is positive
        let pivot = (0..n).fold(0, |m, i| if v[i].abs() > v[m].abs() { i } else { m });
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        (0..n).map(|i| sign * v[i] * lambda.max(0.0).sqrt()).collect()
    };
    let (x, y) = (axis(0), axis(1));
    descriptors
        .iter()
        .enumerate()
        .map(|(i, (id, _))| (*id, x[i], y[i]))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub auc: f64,
    pub r_at_95p: f64,
    pub f1: PrPoint,
}

pub fn summarize(curve: &PrCurve) -> Result<Summary> {
    Ok(Summary {
        auc: auc(curve)?,
        r_at_95p: recall_at_precision(curve, DEFAULT_R_PRECISION),
        f1: f1_optimal(curve)?,
    })
}

/// Everything the `eval` stage reports.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub curve: PrCurve,
    pub summary: Summary,
    pub overlap_precision: Vec<(f64, f64)>,
}

/// PR metrics and precision over overlap with window `s` on every record
/// of `manifest`.
pub fn evaluate(
    manifest: &DatasetManifest,
    descriptors: &[(u32, Descriptor)],
    params: &SimilarityParams,
    s: f64,
    thresholds: &[f64],
) -> Result<Evaluation> {
    let gt = gt_table(manifest, params)?;
    let times: Vec<f64> = manifest.records.iter().map(|r| r.pose.t).collect();
    let curve = pr_curve_windowed(descriptors, &gt, Some((&times, s)), thresholds)?;
    let summary = summarize(&curve)?;
    let overlap_precision =
        precision_over_overlap(manifest, descriptors, params.n_arc, s, &default_overlap_thresholds())?;
    Ok(Evaluation {
        curve,
        summary,
        overlap_precision,
    })
}

pub fn pr_curve_csv(curve: &PrCurve) -> String {
    let mut s = String::from("threshold,precision,recall\n");
    for p in &curve.points {
        let _ = writeln!(s, "{},{},{}", p.threshold, p.precision, p.recall);
    }
    s
}

pub fn summary_csv(summary: &Summary) -> String {
    format!(
        "auc,r_at_95p,f1_threshold,f1_precision,f1_recall\n{},{},{},{},{}\n",
        summary.auc, summary.r_at_95p, summary.f1.threshold, summary.f1.precision, summary.f1.recall
    )
}

/// Parse a file written by [`summary_csv`].
pub fn read_summary_csv(path: &Path) -> Result<Summary> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |message: &str| Error::Format {
        path: path.to_path_buf(),
        offset: 0,
        message: message.to_string(),
    };
    let mut lines = text.lines();
    if lines.next() != Some("auc,r_at_95p,f1_threshold,f1_precision,f1_recall") {
        return Err(bad("unexpected summary header"));
    }
    let v: Vec<f64> = lines
        .next()
        .ok_or_else(|| bad("missing summary row"))?
        .split(',')
        .map(|x| x.parse::<f64>().map_err(|_| bad("non-numeric summary field")))
        .collect::<Result<_>>()?;
    if v.len() != 5 {
        return Err(bad("summary row needs 5 fields"));
    }
    Ok(Summary {
        auc: v[0],
        r_at_95p: v[1],
        f1: PrPoint {
            threshold: v[2],
            precision: v[3],
            recall: v[4],
        },
    })
}

pub fn overlap_csv(rows: &[(f64, f64)]) -> String {
    let mut s = String::from("threshold,fraction\n");
    for (t, f) in rows {
        let _ = writeln!(s, "{t},{f}");
    }
    s
}

pub fn mds_csv(rows: &[(u32, f64, f64)]) -> String {
    let mut s = String::from("id,x,y\n");
    for (id, x, y) in rows {
        let _ = writeln!(s, "{id},{x},{y}");
    }
    s
}

/// Writes `<prefix>pr_curve.csv`, `summary.csv`, `overlap_precision.csv`
/// and `descriptors_2d.csv`.
pub fn write_reports(
    prefix: &Path,
    evaluation: &Evaluation,
    descriptors: &[(u32, Descriptor)],
) -> Result<()> {
    let file = |name: &str| {
        let mut p = prefix.as_os_str().to_owned();
        p.push(name);
        std::path::PathBuf::from(p)
    };
    crate::io::write_bytes(&file("pr_curve.csv"), pr_curve_csv(&evaluation.curve).as_bytes())?;
    crate::io::write_bytes(&file("summary.csv"), summary_csv(&evaluation.summary).as_bytes())?;
    crate::io::write_bytes(
        &file("overlap_precision.csv"),
        overlap_csv(&evaluation.overlap_precision).as_bytes(),
    )?;
    crate::io::write_bytes(&file("descriptors_2d.csv"), mds_csv(&mds_2d(descriptors)).as_bytes())
}
