//! End-to-end acceptance suite. Each criterion prints one PASS/FAIL line
//! with its wall time; the test fails if any criterion misses its tolerance
//! or its time budget.

use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;

use cpalign::domain::{domain_loss_and_grads, grl_backward, grl_forward, observability_weighting, ObservabilityMap, GRL_GAMMA};
use cpalign::featurizer::BevSpec;
use cpalign::fusion::{
    blend, channel_shuffle, channel_unshuffle, foreground_loss, split_foreground, struct_conv, struct_conv_separate,
    verification_weights, StructKernels, VerificationSpec,
};
use cpalign::numerics::init::he_conv;
use cpalign::numerics::{ConvSpec, Tensor3};
use cpalign::pointcloud::{fps, partition_regions, phd_apply_detailed, select_proximal, OrientedBox, PhdConfig, Point, PointCloud};
use cpalign::rng;
use cpalign::sim::codec::{roundtrip, CodecMode};
use cpalign::sim::flow::scale_spec;
use cpalign::sim::{count_similarity_ops, generate_scenario, ideal_fields, ScenarioConfig, SimilarityMode, Template, EGO_ID};
use cpalign::temporal::{
    ptam_align, temporal_loss, temporal_loss_tallied, warp_features, window_cosine_loss, window_partition,
    CosineGranularity, DelayContext, MotionField, MotionSource, NoTally, OpCounts, PtamWeights, Stage2Warp, XiMode,
};

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;

fn random(r: &mut impl Rng, c: usize, h: usize, w: usize) -> Tensor3 {
    Tensor3::from_fn(c, h, w, |_, _, _| r.random_range(-1.0..1.0))
}

fn rel_err(fd: f64, an: f64) -> f64 {
    (fd - an).abs() / fd.abs().max(an.abs()).max(1e-7)
}

/// Worst relative error of fourth-order central differences over every
/// coordinate.
fn fd_check(x: &Tensor3, grad: &Tensor3, f: impl Fn(&Tensor3) -> f64) -> f64 {
    let h = 1e-4;
    let at = |i: usize, step: f64| {
        let mut a = x.clone();
        a.data_mut()[i] += step;
        f(&a)
    };
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let fd = (8.0 * (at(i, h) - at(i, -h)) - (at(i, 2.0 * h) - at(i, -2.0 * h))) / (12.0 * h);
        worst = worst.max(rel_err(fd, grad.data()[i]));
    }
    worst
}

fn c1_windows() -> Outcome {
    let (w1, w2) = window_partition(256, 128, 16)?;
    Ok((w1.len() == 128 && w2.len() == 105, format!("|W1| = {}, |W2| = {}", w1.len(), w2.len())))
}

fn c2_complexity() -> Outcome {
    let g = count_similarity_ops(64, 256, 128, 16, SimilarityMode::Global)?;
    let b = count_similarity_ops(64, 256, 128, 16, SimilarityMode::Blockwise)?;
    let ratio = b.mul as f64 / g.mul as f64;
    let mut r = rng::stream(2, 0);
    let (p, q) = (random(&mut r, 64, 256, 128), random(&mut r, 64, 256, 128));
    let mut tally = OpCounts::default();
    temporal_loss_tallied(&[p], &[q], 16, CosineGranularity::Cell, &mut tally)?;
    let ok = g.mul == 6_356_992 && b.mul == 11_571_712 && (1.80..=1.83).contains(&ratio) && tally == b;
    Ok((ok, format!("global {} blockwise {} ratio {ratio:.4} instrumented {}", g.mul, b.mul, tally.mul)))
}

fn c3_warp() -> Outcome {
    let mut r = rng::stream(3, 0);
    let f = random(&mut r, 4, 13, 17);
    let ones = Tensor3::filled(1, 13, 17, 1.0);
    let identity = warp_features(&f, &Tensor3::zeros(2, 13, 17), 1.0, &ones)? == f;
    let mut transport = true;
    for (dx, dy) in [(3.0, 0.0), (-2.0, 4.0), (0.0, -5.0), (1.0, 1.0)] {
        let mut hot = Tensor3::zeros(1, 13, 17);
        hot.set(0, 6, 8, 1.0);
        let dp = Tensor3::from_fn(2, 13, 17, |c, _, _| if c == 0 { dx } else { dy });
        let moved = warp_features(&hot, &dp, 1.0, &ones)?;
        let (y, x) = ((6.0 + dy) as usize, (8.0 + dx) as usize);
        transport &= moved.get(0, y, x) == 1.0 && moved.sum() == 1.0;
    }
    let mut hot = Tensor3::zeros(1, 13, 17);
    hot.set(0, 6, 8, 1.0);
    let half = Tensor3::from_fn(2, 13, 17, |c, _, _| if c == 0 { 0.5 } else { 0.0 });
    let split = warp_features(&hot, &half, 1.0, &ones)?;
    let halves = (split.get(0, 6, 8) - 0.5).abs() <= 1e-9 && (split.get(0, 6, 9) - 0.5).abs() <= 1e-9;
    Ok((identity && transport && halves, format!("identity {identity}, transport {transport}, half split {halves}")))
}

/// Synthetic features: a textured footprint of each object box, zero
/// elsewhere, rasterised at every scale in the ego frame.
fn scene_features(boxes: &[OrientedBox], spec: &BevSpec, channels: usize) -> Vec<Tensor3> {
    (0..3)
        .map(|s| {
            let ss = scale_spec(spec, s);
            Tensor3::from_fn(channels, ss.height(), ss.width(), |c, r, col| {
                let [x, y] = ss.cell_center(r, col);
                boxes
                    .iter()
                    .find(|b| b.contains_planar(x, y))
                    .map_or(0.0, |b| {
                        let (lx, ly) = (x - b.center[0], y - b.center[1]);
                        1.5 + (0.7 * (c + 1) as f64 * lx + 1.3 * ly + c as f64).sin()
                    })
            })
        })
        .collect()
}

fn c4_oracle_xi() -> Outcome {
    // 16 m/s over 100 ms frames moves one small-scale cell (1.6 m) per
    // frame, so the motion is a whole number of cells at every scale. The
    // ego offset keeps box edges off every cell centre.
    let cfg = ScenarioConfig {
        template: Template::Straight,
        speed: 16.0,
        ego_pose: [0.1, 0.1, 0.0],
        ..Default::default()
    };
    let scenario = generate_scenario(&cfg)?;
    let spec = BevSpec::default();
    let channels = 4;
    let weights = PtamWeights::new(&[channels; 3], 8, 1);
    let t = 1.0;
    let gt = scene_features(&scenario.boxes_in_frame(EGO_ID, t)?, &spec, channels);
    let mut worst = 0.0f64;
    let mut monotone = true;
    let mut parts = Vec::new();
    for tau_ms in [100, 200, 300, 400, 500] {
        let tau = tau_ms as f64 / 1000.0;
        let latest = scene_features(&scenario.boxes_in_frame(EGO_ID, t - tau)?, &spec, channels);
        let prev = scene_features(&scenario.boxes_in_frame(EGO_ID, t - tau - 0.1)?, &spec, channels);
        let ctx = DelayContext::new(tau, 0.1, XiMode::Oracle)?;
        let identity: Vec<MotionField> = latest.iter().map(|f| MotionField::identity(f.height(), f.width())).collect();
        let fields = ideal_fields(&scenario, EGO_ID, t - tau, t, ctx.frames(), &spec, 3, 2)?;
        let out = ptam_align(
            &prev,
            &latest,
            &ctx,
            &weights,
            Stage2Warp::ScaledStage2,
            MotionSource::Given(&identity),
            MotionSource::Given(&fields),
        )?;
        let mut pre = 0.0;
        let mut post = 0.0;
        for s in 0..3 {
            let err = out.stage2.aligned[s].max_abs_diff(&gt[s]);
            if tau_ms == 500 {
                worst = worst.max(err);
            }
            pre += window_cosine_loss(&latest[s], &gt[s], 16 >> s, CosineGranularity::Window, s, &mut NoTally)?.mean_cosine;
            post += window_cosine_loss(&out.stage2.aligned[s], &gt[s], 16 >> s, CosineGranularity::Window, s, &mut NoTally)?
                .mean_cosine;
        }
        monotone &= post >= pre;
        parts.push(format!("{tau_ms}ms {:.3}->{:.3}", pre / 3.0, post / 3.0));
    }
    Ok((
        worst <= 1e-6 && monotone,
        format!("max error at 500 ms {worst:.2e}; cosine {}", parts.join(", ")),
    ))
}

fn c5_gradients() -> Outcome {
    let mut r = rng::stream(5, 0);
    let (mut t_worst, mut d_worst, mut f_worst) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let (c, h, w) = (r.random_range(1..=4), r.random_range(8..=32), r.random_range(8..=32));
        let l = [4, 8][r.random_range(0..2)];
        let (p, g) = (random(&mut r, c, h, w), random(&mut r, c, h, w));
        for gran in [CosineGranularity::Window, CosineGranularity::Cell] {
            let base = temporal_loss(std::slice::from_ref(&p), std::slice::from_ref(&g), l, gran)?;
            let f = |x: &Tensor3| temporal_loss(std::slice::from_ref(x), std::slice::from_ref(&g), l, gran).map(|v| v.total).unwrap();
            t_worst = t_worst.max(fd_check(&p, &base.grads[0], f));
        }

        let logits = Tensor3::from_fn(1, h, w, |_, _, _| r.random_range(-3.0..3.0));
        let wts = Tensor3::from_fn(1, h, w, |_, _, _| r.random_range(0.01..0.5));
        let label = r.random_range(0..2u8);
        let d = domain_loss_and_grads(&logits, label, &wts)?;
        d_worst = d_worst.max(fd_check(&logits, &d.grad_logits, |x| domain_loss_and_grads(x, label, &wts).unwrap().loss));

        let spec = BevSpec::centered(0.5, h.min(w));
        let half = spec.cell_size * h.min(w) as f64 / 2.0;
        let boxes: Vec<OrientedBox> = (0..r.random_range(1..=3))
            .map(|_| {
                let cx = r.random_range(-half * 0.6..half * 0.6);
                let cy = r.random_range(-half * 0.6..half * 0.6);
                OrientedBox::new([cx, cy, 0.8], r.random_range(1.0..4.0), r.random_range(1.0..2.5), 1.6, r.random_range(-3.0..3.0))
            })
            .collect::<Result<_, _>>()?;
        let n = spec.height();
        let pred = Tensor3::from_fn(1, n, spec.width(), |_, _, _| r.random_range(0.05..0.95));
        let fl = foreground_loss(&ObservabilityMap::new(pred.clone())?, &boxes, &spec)?;
        f_worst = f_worst.max(fd_check(&pred, &fl.grad, |x| {
            foreground_loss(&ObservabilityMap::new(x.clone()).unwrap(), &boxes, &spec).unwrap().loss
        }));
    }
    let ok = t_worst <= 1e-4 && d_worst <= 1e-4 && f_worst <= 1e-4;
    Ok((ok, format!("worst relative error: temporal {t_worst:.2e}, domain {d_worst:.2e}, foreground {f_worst:.2e}")))
}

fn c6_grl() -> Outcome {
    let mut r = rng::stream(6, 0);
    let mut exact = true;
    for _ in 0..10 {
        let logits = random(&mut r, 1, 9, 7);
        exact &= grl_forward(&logits) == logits;
        let w = Tensor3::from_fn(1, 9, 7, |_, _, _| r.random_range(0.0..0.5));
        let d = domain_loss_and_grads(&logits, r.random_range(0..2u8), &w)?;
        exact &= d.grad_features.data().iter().zip(d.grad_logits.data()).all(|(f, g)| *f == GRL_GAMMA * g);
        exact &= grl_backward(&d.grad_logits) == d.grad_features;
    }
    Ok((exact && GRL_GAMMA == -0.1, format!("gamma {GRL_GAMMA}, exact {exact}")))
}

/// Greedy farthest point sampling written out directly.
fn brute_fps(points: &[Vec<f64>], beta: f64) -> Vec<usize> {
    let n = points.len();
    let k = ((beta * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    let d2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let dim = points[0].len();
    let mut centroid = vec![0.0; dim];
    for p in points {
        for i in 0..dim {
            centroid[i] += p[i];
        }
    }
    centroid.iter_mut().for_each(|c| *c /= n as f64);
    let mut chosen = vec![0];
    for i in 1..n {
        if d2(&points[i], &centroid) > d2(&points[chosen[0]], &centroid) {
            chosen[0] = i;
        }
    }
    while chosen.len() < k {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..n).filter(|i| !chosen.contains(i)) {
            let d = chosen.iter().map(|&j| d2(&points[i], &points[j])).fold(f64::INFINITY, f64::min);
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        chosen.push(best.expect("points remain").0);
    }
    chosen.sort_unstable();
    chosen
}

fn c7_fps() -> Outcome {
    let mut r = rng::stream(7, 0);
    let mut mismatches = 0;
    let line: Vec<Vec<f64>> = [0.0, 1.0, 2.0, 10.0].iter().map(|&v| vec![v]).collect();
    let hand = fps(&line, 0.5)? == vec![0, 3];
    for trial in 0..100 {
        let n = r.random_range(1..=64);
        let dim = 2 + trial % 2;
        // every third trial snaps to a coarse lattice to force ties
        let coarse = trial % 3 == 0;
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..dim)
                    .map(|_| if coarse { r.random_range(0..4) as f64 } else { r.random_range(-5.0..5.0) })
                    .collect()
            })
            .collect();
        let beta = [0.25, 0.5, 0.75][trial % 3];
        if fps(&pts, beta)? != brute_fps(&pts, beta) {
            mismatches += 1;
        }
    }
    Ok((hand && mismatches == 0, format!("hand example {hand}, {mismatches} of 100 trials differ")))
}

fn c8_phd() -> Outcome {
    let mut r = rng::stream(8, 0);
    let cfg = PhdConfig::default();
    let mut ok = true;
    let mut checked = 0;
    for _ in 0..10 {
        let boxes: Vec<OrientedBox> = (0..r.random_range(1..=4))
            .map(|_| {
                let c = [r.random_range(-30.0..30.0), r.random_range(-30.0..30.0), 0.8];
                OrientedBox::new(c, 4.0, 2.0, 1.6, r.random_range(-3.0..3.0))
            })
            .collect::<Result<_, _>>()?;
        let mut pts = Vec::new();
        for b in &boxes {
            for _ in 0..r.random_range(20..120) {
                let (u, v, z) = (r.random_range(-2.0..2.0), r.random_range(-1.0..1.0), r.random_range(0.0..1.6));
                let (s, c) = b.yaw.sin_cos();
                pts.push(Point::new(b.center[0] + c * u - s * v, b.center[1] + s * u + c * v, z, 0.5));
            }
        }
        for _ in 0..200 {
            pts.push(Point::new(r.random_range(-60.0..60.0), r.random_range(-60.0..60.0), 0.0, 0.1));
        }
        let cloud = PointCloud::new(pts);
        let out = phd_apply_detailed(&cloud, &boxes, [0.0, 0.0], &cfg)?;
        ok &= out.kept.windows(2).all(|w| w[0] < w[1]);
        ok &= out.kept.iter().zip(&out.cloud.points).all(|(&i, p)| cloud.points[i] == *p);
        let mut claimed = vec![false; cloud.len()];
        let selected = select_proximal(&boxes, [0.0, 0.0], &cfg);
        ok &= selected.len() == out.regions.len();
        for (k, st) in selected.iter().zip(&out.regions) {
            let (inner, outer) = partition_regions(&cloud, &boxes[*k], cfg.alpha);
            let inner: Vec<usize> = inner.into_iter().filter(|&i| !claimed[i]).collect();
            let outer: Vec<usize> = outer.into_iter().filter(|&i| !claimed[i]).collect();
            let ceil = |n: usize, b: f64| if n == 0 { 0 } else { ((b * n as f64) - 1e-9).ceil() as usize };
            ok &= st.inner_in == inner.len() && st.outer_in == outer.len();
            ok &= st.inner_kept == ceil(inner.len(), 0.6) && st.outer_kept == ceil(outer.len(), 0.8);
            let kept_inner = inner.iter().filter(|i| out.kept.binary_search(i).is_ok()).count();
            let kept_outer = outer.iter().filter(|i| out.kept.binary_search(i).is_ok()).count();
            ok &= kept_inner == st.inner_kept && kept_outer == st.outer_kept;
            for &i in inner.iter().chain(&outer) {
                claimed[i] = true;
            }
            checked += 1;
        }
        ok &= (0..cloud.len()).filter(|&i| !claimed[i]).all(|i| out.kept.binary_search(&i).is_ok());
        ok &= phd_apply_detailed(&cloud, &boxes, [0.0, 0.0], &cfg)? == out;
    }
    Ok((ok, format!("{checked} regions checked")))
}

fn c9_observability() -> Outcome {
    let mut r = rng::stream(9, 0);
    let mut bounded = true;
    let mut equal = true;
    let mut invariant = 0.0f64;
    for _ in 0..20 {
        let a = Tensor3::from_fn(1, 16, 16, |_, _, _| r.random());
        let mut b = Tensor3::from_fn(1, 16, 16, |_, _, _| r.random());
        for i in (0..256).step_by(7) {
            b.data_mut()[i] = a.data()[i];
        }
        let w = observability_weighting(&ObservabilityMap::new(a.clone())?, &ObservabilityMap::new(b.clone())?)?;
        bounded &= w.data().iter().all(|&v| v > 0.0 && v <= 0.5);
        equal &= (0..256).step_by(7).all(|i| (w.data()[i] - 0.5).abs() <= 1e-9);
        let logits = random(&mut r, 1, 16, 16);
        let base = domain_loss_and_grads(&logits, 1, &w)?.loss;
        for k in [1e-3, 0.5, 7.0, 1e3] {
            invariant = invariant.max((domain_loss_and_grads(&logits, 1, &w.scale(k))?.loss - base).abs());
        }
    }
    let ok = bounded && equal && invariant <= 1e-9;
    Ok((ok, format!("bounded {bounded}, equal maps give 0.5 {equal}, rescaling drift {invariant:.2e}")))
}

fn c10_structural() -> Outcome {
    let mut worst = 0.0f64;
    let mut invariants = true;
    for (seed, (c, g)) in [(4, 4), (8, 2), (6, 6)].into_iter().enumerate() {
        let mut base = ConvSpec::new(c, c, 3, 3).with_padding(1).with_groups(g);
        he_conv(&mut base, seed as u64, 10);
        let k = StructKernels::from_base(base)?;
        let mut r = rng::stream(10, seed as u64);
        let x = random(&mut r, c, 12, 9);
        worst = worst.max(struct_conv(&x, &k)?.max_abs_diff(&struct_conv_separate(&x, &k)?));
        for oc in 0..c {
            for ic in 0..k.base.in_per_group() {
                let get = |s: &ConvSpec| {
                    let mut m = [[0.0; 3]; 3];
                    for (y, row) in m.iter_mut().enumerate() {
                        for (xx, v) in row.iter_mut().enumerate() {
                            *v = s.weight(oc, ic, y, xx);
                        }
                    }
                    m
                };
                let (b, cs, h, v, a) = (get(&k.base), get(&k.center_surround), get(&k.horizontal), get(&k.vertical), get(&k.angular));
                let surround: f64 = (0..9).filter(|&i| i != 4).map(|i| cs[i / 3][i % 3]).sum();
                invariants &= cs[1][1] == -surround;
                invariants &= (0..3).all(|y| h[y][2] == -h[y][0] && h[y][1] == 0.0);
                invariants &= (0..3).all(|xx| v[2][xx] == -v[0][xx] && v[1][xx] == 0.0);
                invariants &= (0..3).all(|y| (0..3).all(|xx| a[y][xx] == b[y][xx] - b[2 - xx][y]));
            }
        }
    }
    Ok((worst <= 1e-6 && invariants, format!("fused vs separate {worst:.2e}, invariants {invariants}")))
}

fn c11_ifam() -> Outcome {
    let mut r = rng::stream(11, 0);
    let h = random(&mut r, 8, 10, 10);
    let m = ObservabilityMap::new(Tensor3::from_fn(1, 10, 10, |_, _, _| r.random()))?;
    let (fore, back) = split_foreground(&h, &m)?;
    let split = fore.add(&back)? == h;
    let other = random(&mut r, 8, 10, 10);
    let ends = blend(&h, &other, &Tensor3::filled(8, 10, 10, 1.0))? == h && blend(&h, &other, &Tensor3::zeros(8, 10, 10))? == other;
    let shuffle = [1, 2, 4, 8].iter().all(|&g| {
        channel_unshuffle(&channel_shuffle(&h, g).unwrap(), g).unwrap() == h
    });
    let spec = VerificationSpec::zeros(8, 2, 2, 2)?;
    let wv = verification_weights(&fore, &other, &spec)?;
    let baseline = wv.data().iter().all(|&v| v == 0.5);
    Ok((
        split && ends && shuffle && baseline,
        format!("split {split}, blend endpoints {ends}, shuffle {shuffle}, zero-weight baseline {baseline}"),
    ))
}

fn c12_codec() -> Outcome {
    let mut r = rng::stream(12, 0);
    let mut exact = true;
    let mut worst = 0.0f64;
    for k in 0..20 {
        let a: f64 = 10f64.powi(k % 5 - 2);
        let v: Vec<f64> = (0..r.random_range(1..5000)).map(|_| r.random_range(-a..a)).collect();
        exact &= roundtrip(&v, CodecMode::Identity) == v;
        let bound = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) / 254.0;
        let q = roundtrip(&v, CodecMode::Int8);
        let err = v.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(err / bound);
    }
    Ok((exact && worst <= 1.0, format!("identity exact {exact}, worst int8 error / bound {worst:.6}")))
}

fn c13_sweep() -> Outcome {
    let dir = tempfile::tempdir()?;
    let csv_path = dir.path().join("sweep.csv");
    let status = Command::new(env!("CARGO_BIN_EXE_cpalign"))
        .args(["sweep", "--template", "crossing", "-o"])
        .arg(&csv_path)
        .status()?;
    if !status.success() {
        return Ok((false, format!("sweep exited with {status}")));
    }
    let mut reader = csv::Reader::from_path(&csv_path)?;
    let header: Vec<String> = reader.headers()?.iter().map(String::from).collect();
    let expected = ["metric", "value", "tau_ms", "sigma_local_m", "sigma_head_deg"];
    let mut by_tau: std::collections::BTreeMap<i64, [f64; 3]> = Default::default();
    for rec in reader.records() {
        let rec = rec?;
        let tau = rec[2].parse::<f64>()? as i64;
        let v: f64 = rec[1].parse()?;
        let e = by_tau.entry(tau).or_insert([f64::NAN; 3]);
        match &rec[0] {
            "iou_ptam" => e[0] = v,
            "iou_no_ptam" => e[1] = v,
            "displacement_cells" => e[2] = v,
            _ => {}
        }
    }
    let mut ok = header == expected && by_tau.keys().copied().eq([0, 100, 200, 300, 400, 500]);
    let mut parts = Vec::new();
    for (tau, [on, off, disp]) in &by_tau {
        if *disp >= 1.0 {
            ok &= on >= off;
            if *tau >= 300 {
                ok &= on > off;
            }
        }
        parts.push(format!("{tau}ms {on:.3}/{off:.3} ({disp:.0} cells)"));
    }
    Ok((ok, format!("IoU with/without alignment: {}", parts.join(", "))))
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome, Duration);
    let secs = Duration::from_secs;
    let criteria: [Criterion; 13] = [
        ("window-count parity", c1_windows, Duration::from_millis(1)),
        ("complexity parity", c2_complexity, secs(5)),
        ("warp exactness", c3_warp, secs(1)),
        ("oracle-xi compensation", c4_oracle_xi, secs(30)),
        ("gradient checks", c5_gradients, secs(60)),
        ("gradient reversal contract", c6_grl, secs(1)),
        ("fps oracle equivalence", c7_fps, secs(10)),
        ("downsampling contract", c8_phd, secs(5)),
        ("observability weighting bound", c9_observability, secs(1)),
        ("structural kernels", c10_structural, secs(1)),
        ("aggregation algebra", c11_ifam, secs(1)),
        ("codec", c12_codec, secs(1)),
        ("end-to-end delay sweep", c13_sweep, secs(120)),
    ];
    let mut failed = Vec::new();
    for (i, (name, f, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        let (passed, detail) = match outcome {
            Ok((p, d)) => (p && took <= *budget, d),
            Err(e) => (false, format!("error: {e}")),
        };
        println!(
            "{} {:>2} {name}: {detail} [{:.3}s of {:.3}s]",
            if passed { "PASS" } else { "FAIL" },
            i + 1,
            took.as_secs_f64(),
            budget.as_secs_f64()
        );
        if !passed {
            failed.push(i + 1);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
