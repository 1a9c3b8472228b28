//! Built-in property checks, run by `cpalign check`.

use rand::Rng as _;

use super::codec::{int8_scale, roundtrip, CodecMode};
use super::complexity::{count_similarity_ops, SimilarityMode};
use super::config::SimConfig;
use super::pipeline::Pipeline;
use super::scenario::generate_scenario;
use super::sweep::run_sweep;
use crate::domain::{grl_backward, observability_weighting, ObservabilityMap, GRL_GAMMA};
use crate::error::Result;
use crate::fusion::{channel_shuffle, channel_unshuffle, split_foreground, struct_conv, struct_conv_separate, StructKernels};
use crate::numerics::init::he_conv;
use crate::numerics::Tensor3;
use crate::pointcloud::{fps, phd_apply_detailed, sample_count, OrientedBox, PhdConfig, Point, PointCloud};
use crate::rng;
use crate::temporal::{temporal_loss, temporal_loss_tallied, warp_features, window_partition, CosineGranularity, OpCounts};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random(c: usize, h: usize, w: usize, seed: u64) -> Tensor3 {
    let mut r = rng::stream(seed, 0x6368);
    Tensor3::from_fn(c, h, w, |_, _, _| r.random_range(-1.0..1.0))
}

fn windows() -> Result<(bool, String)> {
    let (w1, w2) = window_partition(256, 128, 16)?;
    Ok((w1.len() == 128 && w2.len() == 105, format!("|W1| = {}, |W2| = {}", w1.len(), w2.len())))
}

fn complexity() -> Result<(bool, String)> {
    let g = count_similarity_ops(64, 256, 128, 16, SimilarityMode::Global)?;
    let b = count_similarity_ops(64, 256, 128, 16, SimilarityMode::Blockwise)?;
    let mut tally = OpCounts::default();
    let (p, q) = (random(64, 256, 128, 1), random(64, 256, 128, 2));
    temporal_loss_tallied(&[p], &[q], 16, CosineGranularity::Cell, &mut tally)?;
    let ratio = b.mul as f64 / g.mul as f64;
    Ok((
        g.mul == 6_356_992 && b.mul == 11_571_712 && (1.80..=1.83).contains(&ratio) && tally == b,
        format!("global {} blockwise {} ratio {ratio:.4} instrumented {}", g.mul, b.mul, tally.mul),
    ))
}

fn warp() -> Result<(bool, String)> {
    let f = random(3, 9, 11, 3);
    let ones = Tensor3::filled(1, 9, 11, 1.0);
    let identity = warp_features(&f, &Tensor3::zeros(2, 9, 11), 1.0, &ones)? == f;
    let mut hot = Tensor3::zeros(1, 9, 11);
    hot.set(0, 4, 5, 1.0);
    let shift = Tensor3::from_fn(2, 9, 11, |c, _, _| if c == 0 { 2.0 } else { -1.0 });
    let moved = warp_features(&hot, &shift, 1.0, &ones)?;
    let transport = moved.get(0, 3, 7) == 1.0 && moved.sum() == 1.0;
    let half = Tensor3::from_fn(2, 9, 11, |c, _, _| if c == 0 { 0.5 } else { 0.0 });
    let split = warp_features(&hot, &half, 1.0, &ones)?;
    let halves = (split.get(0, 4, 5) - 0.5).abs() < 1e-9 && (split.get(0, 4, 6) - 0.5).abs() < 1e-9;
    Ok((identity && transport && halves, format!("identity {identity}, transport {transport}, half split {halves}")))
}

fn gradients() -> Result<(bool, String)> {
    let (p, g) = (random(3, 12, 12, 4), random(3, 12, 12, 5));
    let base = temporal_loss(std::slice::from_ref(&p), std::slice::from_ref(&g), 4, CosineGranularity::Window)?;
    let mut worst = 0.0f64;
    for i in (0..p.len()).step_by(37) {
        let h = 1e-6;
        let mut a = p.clone();
        a.data_mut()[i] += h;
        let mut b = p.clone();
        b.data_mut()[i] -= h;
        let la = temporal_loss(&[a], std::slice::from_ref(&g), 4, CosineGranularity::Window)?.total;
        let lb = temporal_loss(&[b], std::slice::from_ref(&g), 4, CosineGranularity::Window)?.total;
        let fd = (la - lb) / (2.0 * h);
        let an = base.grads[0].data()[i];
        worst = worst.max((fd - an).abs() / fd.abs().max(an.abs()).max(1e-8));
    }
    Ok((worst <= 1e-4, format!("worst relative error {worst:.2e}")))
}

fn grl() -> Result<(bool, String)> {
    let g = random(2, 5, 5, 6);
    let exact = grl_backward(&g).data().iter().zip(g.data()).all(|(a, b)| *a == GRL_GAMMA * b);
    Ok((exact, format!("gamma {GRL_GAMMA}")))
}

fn brute_fps(points: &[[f64; 3]], beta: f64) -> Vec<usize> {
    let n = points.len();
    let k = sample_count(n, beta);
    let d2 = |a: &[f64; 3], b: &[f64; 3]| (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>();
    let mut c = [0.0; 3];
    for p in points {
        for i in 0..3 {
            c[i] += p[i] / n as f64;
        }
    }
    let mut chosen = vec![(0..n).fold(0, |best, i| if d2(&points[i], &c) > d2(&points[best], &c) { i } else { best })];
    while chosen.len() < k {
        let next = (0..n)
            .filter(|i| !chosen.contains(i))
            .map(|i| (i, chosen.iter().map(|&j| d2(&points[i], &points[j])).fold(f64::INFINITY, f64::min)))
            .fold(None, |acc: Option<(usize, f64)>, (i, d)| match acc {
                Some((_, bd)) if bd >= d => acc,
                _ => Some((i, d)),
            })
            .map(|(i, _)| i)
            .expect("points remain");
        chosen.push(next);
    }
    chosen.sort_unstable();
    chosen
}

fn fps_oracle() -> Result<(bool, String)> {
    let mut r = rng::stream(7, 0x6670);
    let mut mismatches = 0;
    for trial in 0..30 {
        let n = r.random_range(1..=48);
        let pts: Vec<[f64; 3]> = (0..n).map(|_| [r.random(), r.random(), r.random()]).collect();
        let beta = [0.25, 0.5, 0.75][trial % 3];
        if fps(&pts, beta)? != brute_fps(&pts, beta) {
            mismatches += 1;
        }
    }
    Ok((mismatches == 0, format!("{mismatches} of 30 trials differ")))
}

fn phd() -> Result<(bool, String)> {
    let b = OrientedBox::new([5.0, 0.0, 0.8], 4.0, 2.0, 1.6, 0.0)?;
    let mut r = rng::stream(8, 0x7068);
    let mut pts: Vec<Point> = (0..400)
        .map(|_| Point::new(r.random_range(3.0..7.0), r.random_range(-1.0..1.0), r.random_range(0.0..1.6), 0.5))
        .collect();
    pts.extend((0..50).map(|i| Point::new(-10.0 - i as f64, 3.0, 0.0, 0.1)));
    let cloud = PointCloud::new(pts);
    let cfg = PhdConfig::default();
    let out = phd_apply_detailed(&cloud, &[b], [0.0, 0.0], &cfg)?;
    let st = &out.regions[0];
    let counts = st.inner_kept == sample_count(st.inner_in, 0.6) && st.outer_kept == sample_count(st.outer_in, 0.8);
    let untouched = (400..450).all(|i| out.kept.contains(&i));
    let again = phd_apply_detailed(&cloud, &[b], [0.0, 0.0], &cfg)?;
    let ok = counts && untouched && again == out && out.kept.windows(2).all(|w| w[0] < w[1]);
    Ok((ok, format!("inner {}/{} outer {}/{}", st.inner_kept, st.inner_in, st.outer_kept, st.outer_in)))
}

fn observability() -> Result<(bool, String)> {
    let mut r = rng::stream(9, 0x6f62);
    let mut a = Tensor3::from_fn(1, 16, 16, |_, _, _| r.random());
    let b = Tensor3::from_fn(1, 16, 16, |_, _, _| r.random());
    a.set(0, 0, 0, b.get(0, 0, 0));
    let w = observability_weighting(&ObservabilityMap::new(a)?, &ObservabilityMap::new(b)?)?;
    let bounded = w.data().iter().all(|&v| v > 0.0 && v <= 0.5);
    let equal = (w.get(0, 0, 0) - 0.5).abs() <= 1e-9;
    Ok((bounded && equal, format!("range [{:.4}, {:.4}]", w.data().iter().cloned().fold(1.0, f64::min), w.max_abs())))
}

fn structural() -> Result<(bool, String)> {
    let mut k = StructKernels::zeros(4, 2)?;
    he_conv(&mut k.base, 10, 1);
    let k = StructKernels::from_base(k.base)?;
    let x = random(4, 10, 10, 11);
    let diff = struct_conv(&x, &k)?.max_abs_diff(&struct_conv_separate(&x, &k)?);
    Ok((diff <= 1e-6, format!("fused vs separate {diff:.2e}")))
}

fn ifam() -> Result<(bool, String)> {
    let h = random(8, 6, 6, 12);
    let mut r = rng::stream(13, 0x6966);
    let m = ObservabilityMap::new(Tensor3::from_fn(1, 6, 6, |_, _, _| r.random()))?;
    let (f, b) = split_foreground(&h, &m)?;
    let exact = f.add(&b)? == h;
    let inverse = channel_unshuffle(&channel_shuffle(&h, 4)?, 4)? == h;
    Ok((exact && inverse, format!("split exact {exact}, shuffle invertible {inverse}")))
}

fn codec() -> Result<(bool, String)> {
    let mut r = rng::stream(14, 0x636f);
    let v: Vec<f64> = (0..4096).map(|_| r.random_range(-1.0..1.0)).collect();
    let exact = roundtrip(&v, CodecMode::Identity) == v;
    let q = roundtrip(&v, CodecMode::Int8);
    let bound = int8_scale(&v) / 2.0;
    let err = v.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok((exact && err <= bound * (1.0 + 1e-12), format!("int8 max error {err:.3e} (bound {bound:.3e})")))
}

fn sweep() -> Result<(bool, String)> {
    let cfg = SimConfig::default();
    let scenario = generate_scenario(&cfg.scenario)?;
    let report = run_sweep(&Pipeline::new(cfg, scenario)?)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for p in &report.points {
        if p.displacement_cells >= 1.0 {
            ok &= p.iou_ptam >= p.iou_no_ptam;
            if p.tau_ms >= 300.0 {
                ok &= p.iou_ptam > p.iou_no_ptam;
            }
        }
        parts.push(format!("{}ms {:.3}/{:.3}", p.tau_ms, p.iou_ptam, p.iou_no_ptam));
    }
    Ok((ok, parts.join(", ")))
}

/// Runs the suite; the end-to-end sweep only when asked.
pub fn run_checks(include_sweep: bool) -> Vec<CheckResult> {
    type Check = fn() -> Result<(bool, String)>;
    let mut list: Vec<(&'static str, Check)> = vec![
        ("window partition", windows),
        ("similarity op counts", complexity),
        ("warp exactness", warp),
        ("temporal loss gradient", gradients),
        ("gradient reversal", grl),
        ("farthest point sampling", fps_oracle),
        ("hierarchical downsampling", phd),
        ("observability weighting", observability),
        ("structural kernels", structural),
        ("instance aggregation algebra", ifam),
        ("codec", codec),
    ];
    if include_sweep {
        list.push(("delay sweep", sweep));
    }
    list.into_iter()
        .map(|(name, f)| match f() {
            Ok((passed, detail)) => CheckResult { name, passed, detail },
            Err(e) => CheckResult {
                name,
                passed: false,
                detail: format!("error: {e}"),
            },
        })
        .collect()
}
