//! Acceptance checks, one line per criterion. Runs as a plain binary so the
//! PASS/FAIL lines are always printed; exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};

use fls_place::descriptor::{
    cosine_distance, describe, rgp_project, DescriptorModel, EncoderParams, RgpMatrix, Tensor3,
};
use fls_place::enhance::{cfar_threshold_raw, CfarParams};
use fls_place::eval::{default_thresholds, pr_curve, pred_table, read_summary_csv, MatchTable};
use fls_place::geometry::{fov_overlap, DEFAULT_N_ARC};
use fls_place::io::{encode_pgm, manifest_to_json, parse_manifest, parse_pgm, QUANTIZATION_ERROR};
use fls_place::training::{triplet_loss, triplet_loss_and_gradient};
use fls_place::{DatasetManifest, Descriptor, Pose2D, Role, ScanRecord, SonarConfig, SonarImage};

type Outcome = Result<String, String>;

fn rng(seed: u64) -> rand::rngs::StdRng {
    rand::rngs::StdRng::seed_from_u64(seed)
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- 1. CFAR

/// Per-cell recomputation of both window means.
fn cfar_naive(data: &[f64], n_bins: usize, mode: &str, n_w: usize, p_fa: f64, guard: usize) -> Vec<f64> {
    let alpha = n_w as f64 * (p_fa.powf(-1.0 / n_w as f64) - 1.0);
    let mean = |beam: &[f64], lo: usize, hi: usize| (lo..hi).map(|i| beam[i]).sum::<f64>() / n_w as f64;
    let mut out = Vec::with_capacity(data.len());
    for beam in data.chunks(n_bins) {
        for c in 0..n_bins {
            let lead = (c >= guard + n_w).then(|| mean(beam, c - guard - n_w, c - guard));
            let trail = (c + guard + n_w < n_bins).then(|| mean(beam, c + guard + 1, c + guard + n_w + 1));
            let stat = match (lead, trail) {
                (Some(l), Some(t)) if mode == "soca" => l.min(t),
                (Some(l), Some(t)) => l.max(t),
                (Some(l), None) => l,
                (None, Some(t)) => t,
                (None, None) => unreachable!(),
            };
            out.push(if beam[c] > alpha * stat { 1.0 } else { 0.0 });
        }
    }
    out
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1);
    let (beams, bins) = (64, 512);
    let mut cells = 0;
    for _ in 0..50 {
        let data: Vec<f64> = (0..beams * bins).map(|_| r.random::<f64>().powi(2)).collect();
        for mode in ["soca", "goca"] {
            let p = CfarParams::new(mode, 40, 0.1, 2).map_err(|e| e.to_string())?;
            let fast = cfar_threshold_raw(&data, bins, &p).map_err(|e| e.to_string())?;
            if fast != cfar_naive(&data, bins, mode, 40, 0.1, 2) {
                return Err(format!("{mode} output differs from naive recomputation"));
            }
            cells += fast.len();
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 10.0, format!("{cells} cells identical, {secs:.2} s"))
}

// ---------------------------------------------------------------- 2. overlap

/// The x-interval of row `y` inside the exact circular sector of `pose`.
fn sector_row(pose: &Pose2D, range: f64, aperture: f64, y: f64) -> Option<(f64, f64)> {
    let vy = y - pose.y;
    if vy.abs() > range {
        return None;
    }
    let half = (range * range - vy * vy).sqrt();
    let (mut lo, mut hi) = (-half, half);
    // a * vx + b >= 0 for each wedge edge
    let (e1, e2) = (pose.heading - 0.5 * aperture, pose.heading + 0.5 * aperture);
    for (a, b) in [(-e1.sin(), e1.cos() * vy), (e2.sin(), -vy * e2.cos())] {
        if a > 0.0 {
            lo = lo.max(-b / a);
        } else if a < 0.0 {
            hi = hi.min(-b / a);
        } else if b < 0.0 {
            return None;
        }
    }
    (lo <= hi).then_some((lo + pose.x, hi + pose.x))
}

fn cells_in(lo: f64, hi: f64, cell: f64) -> u64 {
    let first = (lo / cell - 0.5).ceil() as i64;
    let last = (hi / cell - 0.5).floor() as i64;
    (last - first + 1).max(0) as u64
}

/// Rasterized overlap on a `cell` grid: cell centres inside both sectors
/// over cell centres inside the first.
fn raster_overlap(p1: &Pose2D, p2: &Pose2D, range: f64, aperture: f64, cell: f64) -> f64 {
    let rows = |y0: f64, y1: f64| ((y0 / cell - 0.5).ceil() as i64)..=((y1 / cell - 0.5).floor() as i64);
    let mut own = 0u64;
    for k in rows(p1.y - range, p1.y + range) {
        if let Some((lo, hi)) = sector_row(p1, range, aperture, (k as f64 + 0.5) * cell) {
            own += cells_in(lo, hi, cell);
        }
    }
    let mut both = 0u64;
    for k in rows(p1.y.max(p2.y) - range, p1.y.min(p2.y) + range) {
        let y = (k as f64 + 0.5) * cell;
        if let (Some(a), Some(b)) = (sector_row(p1, range, aperture, y), sector_row(p2, range, aperture, y)) {
            let (lo, hi) = (a.0.max(b.0), a.1.min(b.1));
            if lo <= hi {
                both += cells_in(lo, hi, cell);
            }
        }
    }
    both as f64 / own as f64
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let config = SonarConfig::new(30.0, 120f64.to_radians(), 128, 256).map_err(|e| e.to_string())?;
    let mut r = rng(2);
    let (mut worst, mut nonzero) = (0.0f64, 0);
    for _ in 0..100 {
        let p1 = Pose2D::new(r.random_range(-5.0..5.0), r.random_range(-5.0..5.0), r.random_range(-PI..PI), 0.0);
        let d = r.random_range(0.0..40.0);
        let b = r.random_range(-PI..PI);
        let p2 = Pose2D::new(
            p1.x + d * b.cos(),
            p1.y + d * b.sin(),
            p1.heading + r.random_range(-2.0..2.0),
            0.0,
        );
        let poly = fov_overlap(&p1, &p2, &config, DEFAULT_N_ARC).map_err(|e| e.to_string())?;
        let oracle = raster_overlap(&p1, &p2, 30.0, config.aperture_rad, 0.005);
        worst = worst.max((poly - oracle).abs());
        if oracle > 0.05 {
            nonzero += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst <= 0.01 && secs < 60.0 && nonzero >= 20,
        format!("max |polygon - raster| = {worst:.5} over 100 pairs ({nonzero} with overlap > 0.05), {secs:.1} s"),
    )
}

// ---------------------------------------------------------------- 3. gradient

fn criterion_3() -> Outcome {
    let mut r = rng(3);
    let input = |r: &mut rand::rngs::StdRng| Tensor3::from_plane(6, 6, (0..36).map(|_| r.random::<f64>()).collect());
    let margin = 2.0;
    let h = 1e-4;
    let (mut worst, mut checked) = (0.0f64, 0);
    for t in 0..20u64 {
        let params = EncoderParams {
            input_h: 6,
            input_w: 6,
            channel_widths: vec![3],
            seed: t,
            ..Default::default()
        };
        let model = DescriptorModel::random(&params, 1000 + t).map_err(|e| e.to_string())?;
        let (a, p, n) = (
            input(&mut r).map_err(|e| e.to_string())?,
            input(&mut r).map_err(|e| e.to_string())?,
            input(&mut r).map_err(|e| e.to_string())?,
        );
        let (loss, grad) = triplet_loss_and_gradient(&model, &a, &p, &n, margin).map_err(|e| e.to_string())?;
        if loss <= 0.0 {
            return Err(format!("triplet {t} inactive"));
        }
        let base = model.weights.flatten();
        let analytic = grad.flatten();
        for i in 0..base.len() {
            let at = |delta: f64| {
                let mut m = model.clone();
                let mut v = base.clone();
                v[i] += delta;
                m.weights.set_flat(&v).unwrap();
                triplet_loss_and_gradient(&m, &a, &p, &n, margin).unwrap().0
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            let scale = fd.abs().max(analytic[i].abs()).max(1e-4);
            worst = worst.max((fd - analytic[i]).abs() / scale);
            checked += 1;
        }
    }
    check(worst < 1e-3, format!("{checked} weights over 20 triplets, max relative error {worst:.2e}"))
}

// ---------------------------------------------------------------- 4. loss arithmetic

/// Unit descriptors with a fixed anchor `e0` at the given cosine distances.
fn at_distance(d: f64) -> Descriptor {
    let mut v = vec![0.0; fls_place::DESCRIPTOR_DIM];
    v[0] = 1.0 - d;
    v[1] = (1.0 - (1.0 - d) * (1.0 - d)).max(0.0).sqrt();
    Descriptor::normalize(&v).unwrap().0
}

fn criterion_4() -> Outcome {
    let a = at_distance(0.0);
    let close = |x: f64, y: f64| (x - y).abs() < 1e-12;
    let mut failures = Vec::new();
    for (dp, dn, want) in [(0.1, 0.9, 0.0), (0.4, 0.5, 0.4)] {
        let got = triplet_loss(&a, &at_distance(dp), &at_distance(dn), 0.5);
        if !close(got, want) {
            failures.push(format!("loss({dp}, {dn}) = {got}, want {want}"));
        }
    }
    let p = at_distance(0.3);
    if triplet_loss(&a, &p, &p, 0.5) != 0.5 {
        failures.push("P = N does not give m".into());
    }
    let e1 = {
        let mut v = vec![0.0; fls_place::DESCRIPTOR_DIM];
        v[1] = 1.0;
        Descriptor::from_unit(v).unwrap()
    };
    let neg = Descriptor::from_unit(a.values().iter().map(|v| -v).collect()).unwrap();
    for (name, got, want) in [
        ("d(x, x)", cosine_distance(&a, &a), 0.0),
        ("d(x, orthogonal)", cosine_distance(&a, &e1), 1.0),
        ("d(x, -x)", cosine_distance(&a, &neg), 2.0),
    ] {
        if got != want {
            failures.push(format!("{name} = {got}, want {want}"));
        }
    }
    check(failures.is_empty(), if failures.is_empty() { "3 loss cases, 3 distance identities".into() } else { failures.join("; ") })
}

// ---------------------------------------------------------------- 5. invariants

fn runner(seed: u8) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases: 200,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::from_seed(RngAlgorithm::ChaCha, &[seed; 32]),
    )
}

fn unit_descriptor() -> impl Strategy<Value = Descriptor> {
    prop::collection::vec(-1.0f64..1.0, fls_place::DESCRIPTOR_DIM)
        .prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3))
        .prop_map(|v| Descriptor::normalize(&v).unwrap().0)
}

fn pose() -> impl Strategy<Value = Pose2D> {
    (-40.0f64..40.0, -40.0f64..40.0, -PI..PI).prop_map(|(x, y, h)| Pose2D::new(x, y, h, 0.0))
}

fn suites() -> Vec<(&'static str, Box<dyn Fn() -> Result<(), String>>)> {
    let small = SonarConfig::new(30.0, 120f64.to_radians(), 16, 32).unwrap();
    let encoder = EncoderParams {
        channel_widths: vec![4, 8],
        ..Default::default()
    };
    let model = DescriptorModel::random(&encoder, 5).unwrap();
    let fov = SonarConfig::new(30.0, 120f64.to_radians(), 128, 256).unwrap();
    vec![
        (
            "descriptor unit norm",
            Box::new(move || {
                runner(1)
                    .run(&prop::collection::vec(0.0f64..1.0, 16 * 32), |v| {
                        let img = SonarImage::new(small, v).unwrap();
                        let d = describe(&img, &model.weights, &model.rgp).unwrap();
                        let norm = d.values().iter().map(|x| x * x).sum::<f64>().sqrt();
                        prop_assert!((norm - 1.0).abs() < 1e-6);
                        Ok(())
                    })
                    .map_err(|e| e.to_string())
            }),
        ),
        (
            "cfar scale covariance",
            Box::new(|| {
                runner(2)
                    .run(&(any::<u64>(), 0.01f64..100.0, any::<bool>()), |(seed, k, goca)| {
                        let (n_w, guard, n) = (6, 1, 64);
                        let mut r = rng(seed);
                        let data: Vec<f64> = (0..4 * n).map(|_| r.random::<f64>()).collect();
                        let scaled: Vec<f64> = data.iter().map(|v| v * k).collect();
                        let p = CfarParams::new(if goca { "goca" } else { "soca" }, n_w, 0.1, guard).unwrap();
                        let a = cfar_threshold_raw(&data, n, &p).unwrap();
                        let b = cfar_threshold_raw(&scaled, n, &p).unwrap();
                        for beam in 0..4 {
                            for c in guard + n_w..n - guard - n_w {
                                prop_assert_eq!(a[beam * n + c], b[beam * n + c]);
                            }
                        }
                        Ok(())
                    })
                    .map_err(|e| e.to_string())
            }),
        ),
        (
            "overlap symmetry and rigid motion",
            Box::new(move || {
                runner(3)
                    .run(&(pose(), pose(), -50.0f64..50.0, -50.0f64..50.0, -PI..PI), |(p, q, tx, ty, rot)| {
                        let o = fov_overlap(&p, &q, &fov, DEFAULT_N_ARC).unwrap();
                        let back = fov_overlap(&q, &p, &fov, DEFAULT_N_ARC).unwrap();
                        prop_assert!((o - back).abs() < 1e-9, "asymmetric {} vs {}", o, back);
                        let moved = |p: &Pose2D| {
                            let (c, s) = (rot.cos(), rot.sin());
                            Pose2D::new(c * p.x - s * p.y + tx, s * p.x + c * p.y + ty, p.heading + rot, 0.0)
                        };
                        let m = fov_overlap(&moved(&p), &moved(&q), &fov, DEFAULT_N_ARC).unwrap();
                        prop_assert!((o - m).abs() < 1e-9, "moved {} vs {}", o, m);
                        Ok(())
                    })
                    .map_err(|e| e.to_string())
            }),
        ),
        (
            "pred_table monotone in threshold",
            Box::new(|| {
                runner(4)
                    .run(&(prop::collection::vec(unit_descriptor(), 2..12), 0.0f64..2.0, 0.0f64..2.0), |(ds, t1, t2)| {
                        let (lo, hi) = (t1.min(t2), t1.max(t2));
                        let ds: Vec<(u32, Descriptor)> = ds.into_iter().enumerate().map(|(i, d)| (i as u32, d)).collect();
                        let (a, b) = (pred_table(&ds, lo), pred_table(&ds, hi));
                        for i in 0..ds.len() {
                            for j in 0..ds.len() {
                                prop_assert!(!a.get(i, j) || b.get(i, j));
                            }
                        }
                        Ok(())
                    })
                    .map_err(|e| e.to_string())
            }),
        ),
        (
            "PR recall monotone in threshold",
            Box::new(|| {
                runner(5)
                    .run(&(prop::collection::vec(unit_descriptor(), 3..12), any::<u64>()), |(ds, seed)| {
                        let ds: Vec<(u32, Descriptor)> = ds.into_iter().enumerate().map(|(i, d)| (i as u32, d)).collect();
                        let mut r = rng(seed);
                        let bits: Vec<bool> = (0..ds.len() * ds.len()).map(|_| r.random_bool(0.4)).collect();
                        let n = ds.len();
                        let gt = MatchTable::from_fn(ds.iter().map(|(i, _)| *i).collect(), |i, j| {
                            bits[i.min(j) * n + i.max(j)]
                        });
                        prop_assume!(gt.count_true() > 0 && gt.count_true() < n * (n - 1) / 2);
                        let curve = pr_curve(&ds, &gt, &default_thresholds(64)).unwrap();
                        for w in curve.points.windows(2) {
                            prop_assert!(w[0].recall <= w[1].recall);
                        }
                        Ok(())
                    })
                    .map_err(|e| e.to_string())
            }),
        ),
        (
            "manifest and image round-trips",
            Box::new(|| {
                runner(6)
                    .run(
                        &(
                            prop::collection::vec((pose(), 0.0f64..1e4, any::<bool>(), 1u32..4), 1..20),
                            prop::collection::vec(0.0f64..=1.0, 6 * 9),
                        ),
                        |(recs, pixels)| {
                            let records = recs
                                .into_iter()
                                .enumerate()
                                .map(|(i, (p, t, anchor, asset))| ScanRecord {
                                    id: i as u32,
                                    pose: Pose2D::new(p.x, p.y, p.heading, t),
                                    image_path: format!("images/{i:06}.pgm"),
                                    role: if anchor { Role::Anchor } else { Role::Sample },
                                    asset_id: asset,
                                })
                                .collect();
                            let m = DatasetManifest {
                                config: SonarConfig::default(),
                                generator_seed: 9,
                                records,
                            };
                            let text = manifest_to_json(&m).unwrap();
                            prop_assert_eq!(parse_manifest(&text, Path::new("m.json")).unwrap(), m);
                            let bytes = encode_pgm(9, 6, &pixels).unwrap();
                            let back = parse_pgm(&bytes, Path::new("x.pgm")).unwrap();
                            prop_assert_eq!((back.width, back.height), (9, 6));
                            for (a, b) in pixels.iter().zip(&back.values) {
                                prop_assert!((a - b).abs() <= QUANTIZATION_ERROR);
                            }
                            Ok(())
                        },
                    )
                    .map_err(|e| e.to_string())
            }),
        ),
    ]
}

fn criterion_5() -> Outcome {
    let mut failures = Vec::new();
    let all = suites();
    for (name, suite) in &all {
        if let Err(e) = suite() {
            failures.push(format!("{name}: {e}"));
        }
    }
    check(
        failures.is_empty(),
        if failures.is_empty() { format!("{} suites x 200 cases", all.len()) } else { failures.join("; ") },
    )
}

// ---------------------------------------------------------------- 8. JL

fn criterion_8() -> Outcome {
    let dim = 4096;
    let matrix = RgpMatrix::new(dim, 8).map_err(|e| e.to_string())?;
    let mut r = rng(8);
    let mut kept = 0;
    for _ in 0..200 {
        let x: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
        let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let before = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
        let (px, py) = (rgp_project(&x, &matrix).unwrap(), rgp_project(&y, &matrix).unwrap());
        let after = px.iter().zip(&py).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let ratio = after / before;
        if (0.65..=1.35).contains(&ratio) {
            kept += 1;
        }
    }
    check(kept >= 190, format!("{kept}/200 distances within 1 +/- 0.35"))
}

// ---------------------------------------------------------------- 6, 7, 9: pipeline

struct Runs {
    first: PathBuf,
    second: PathBuf,
    minutes: f64,
    _dir: tempfile::TempDir,
}

fn run_builtin(out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_fls-place"))
        .args(["pipeline", "--builtin-experiment", "--out-dir"])
        .arg(out)
        .env("RUST_LOG", "warn")
        .status()
        .map_err(|e| e.to_string())?;
    if status.success() {
        Ok(())
    } else {
        Err(format!("pipeline exited with {status}"))
    }
}

fn pipeline_runs() -> Result<Runs, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (first, second) = (dir.path().join("run1"), dir.path().join("run2"));
    let start = Instant::now();
    run_builtin(&first)?;
    let minutes = start.elapsed().as_secs_f64() / 60.0;
    run_builtin(&second)?;
    Ok(Runs {
        first,
        second,
        minutes,
        _dir: dir,
    })
}

fn criterion_6(runs: &Runs) -> Outcome {
    let trained = read_summary_csv(&runs.first.join("eval/s3/summary.csv")).map_err(|e| e.to_string())?;
    let random = read_summary_csv(&runs.first.join("eval_random/s3/summary.csv")).map_err(|e| e.to_string())?;
    let gap = trained.auc - random.auc;
    check(
        gap >= 0.05 && runs.minutes <= 30.0,
        format!(
            "s = 3 AUC trained {:.4} vs random {:.4} (gap {gap:+.4}), run {:.1} min",
            trained.auc, random.auc, runs.minutes
        ),
    )
}

fn criterion_7(runs: &Runs) -> Outcome {
    let path = runs.first.join("eval_random/s0/overlap_precision.csv");
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let at = text
        .lines()
        .skip(1)
        .filter_map(|l| l.split_once(','))
        .find(|(t, _)| t.parse::<f64>().ok() == Some(0.7))
        .and_then(|(_, f)| f.parse::<f64>().ok())
        .ok_or("no 0.7 row")?;
    check(at >= 0.9, format!("random-init precision at overlap 0.7, s = 0: {at:.4}"))
}

fn criterion_9(runs: &Runs) -> Outcome {
    let mut compared = 0;
    for eval_dir in ["eval", "eval_random"] {
        for s in ["s0", "s3"] {
            for file in ["summary.csv", "pr_curve.csv"] {
                let rel = format!("{eval_dir}/{s}/{file}");
                let a = std::fs::read(runs.first.join(&rel)).map_err(|e| format!("{rel}: {e}"))?;
                let b = std::fs::read(runs.second.join(&rel)).map_err(|e| format!("{rel}: {e}"))?;
                if a != b {
                    return Err(format!("{rel} differs between runs"));
                }
                compared += 1;
            }
        }
    }
    Ok(format!("{compared} CSV files byte-identical across two runs"))
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome, f64)> = Vec::new();
    let mut timed = |n: u32, name: &'static str, f: &dyn Fn() -> Outcome| {
        let start = Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        report(n, name, &out, secs);
        results.push((n, name, out, secs));
    };
    timed(1, "CFAR sliding window vs naive", &criterion_1);
    timed(2, "FOV overlap vs raster oracle", &criterion_2);
    timed(3, "gradient vs finite differences", &criterion_3);
    timed(4, "triplet loss and cosine distance", &criterion_4);
    timed(5, "invariant suites", &criterion_5);
    let runs = pipeline_runs();
    let with_runs = |f: fn(&Runs) -> Outcome| -> Outcome {
        match &runs {
            Ok(r) => f(r),
            Err(e) => Err(format!("builtin experiment failed: {e}")),
        }
    };
    timed(6, "trained vs random AUC gap", &|| with_runs(criterion_6));
    timed(7, "s = 0 near-duplicate precision", &|| with_runs(criterion_7));
    timed(8, "random projection distance preservation", &criterion_8);
    timed(9, "end-to-end determinism", &|| with_runs(criterion_9));
    let failed = results.iter().filter(|r| r.2.is_err()).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn report(n: u32, name: &str, out: &Outcome, secs: f64) {
    match out {
        Ok(d) => println!("criterion {n} ({name}): PASS  {d}  [{secs:.1} s]"),
        Err(d) => println!("criterion {n} ({name}): FAIL  {d}  [{secs:.1} s]"),
    }
}
