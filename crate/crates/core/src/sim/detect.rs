//! Threshold detector on foreground maps, IoU matching and 11-point AP.
//!
//! This is a stand-in for a trained detection head: it labels connected
//! regions of a foreground map and boxes them axis-aligned.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::featurizer::BevSpec;
use crate::numerics::Tensor3;
use crate::pointcloud::OrientedBox;

/// `[x_min, y_min, x_max, y_max]` in metres.
pub type Aabb = [f64; 4];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Cells with foreground probability at or above this are labelled.
    pub threshold: f64,
    /// Components smaller than this many cells are dropped.
    pub min_cells: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            min_cells: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: Aabb,
    pub score: f64,
    pub cells: usize,
}

pub fn aabb_area(a: &Aabb) -> f64 {
    (a[2] - a[0]).max(0.0) * (a[3] - a[1]).max(0.0)
}

pub fn aabb_iou(a: &Aabb, b: &Aabb) -> f64 {
    let inter = aabb_area(&[a[0].max(b[0]), a[1].max(b[1]), a[2].min(b[2]), a[3].min(b[3])]);
    let union = aabb_area(a) + aabb_area(b) - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// 4-connected components of `map ≥ threshold`, boxed by cell extents and
/// scored by mean probability, best first.
pub fn detect(map: &Tensor3, spec: &BevSpec, cfg: &DetectorConfig) -> Result<Vec<Detection>> {
    let (h, w) = (spec.height(), spec.width());
    Tensor3::zeros(1, h, w).ensure_plane_of(map, "foreground map")?;
    let p = map.data();
    let mut seen = vec![false; h * w];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..h * w {
        if seen[start] || p[start] < cfg.threshold {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let (mut r0, mut r1, mut c0, mut c1) = (h, 0, w, 0);
        let (mut n, mut sum) = (0usize, 0.0);
        while let Some(i) = queue.pop_front() {
            let (r, c) = (i / w, i % w);
            r0 = r0.min(r);
            r1 = r1.max(r);
            c0 = c0.min(c);
            c1 = c1.max(c);
            n += 1;
            sum += p[i];
            let mut visit = |j: usize| {
                if !seen[j] && p[j] >= cfg.threshold {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if r > 0 {
                visit(i - w);
            }
            if r + 1 < h {
                visit(i + w);
            }
            if c > 0 {
                visit(i - 1);
            }
            if c + 1 < w {
                visit(i + 1);
            }
        }
        if n < cfg.min_cells {
            continue;
        }
        let s = spec.cell_size;
        out.push(Detection {
            bbox: [
                spec.origin[0] + c0 as f64 * s,
                spec.origin[1] + r0 as f64 * s,
                spec.origin[0] + (c1 + 1) as f64 * s,
                spec.origin[1] + (r1 + 1) as f64 * s,
            ],
            score: sum / n as f64,
            cells: n,
        });
    }
    out.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(out)
}

/// Axis-aligned ground truth clipped to the grid; boxes entirely outside
/// are dropped.
pub fn ground_truth_boxes(boxes: &[OrientedBox], spec: &BevSpec) -> Vec<Aabb> {
    let lim = [
        spec.origin[0],
        spec.origin[1],
        spec.origin[0] + spec.width() as f64 * spec.cell_size,
        spec.origin[1] + spec.height() as f64 * spec.cell_size,
    ];
    boxes
        .iter()
        .map(|b| {
            let e = b.planar_envelope();
            [e[0].max(lim[0]), e[1].max(lim[1]), e[2].min(lim[2]), e[3].min(lim[3])]
        })
        .filter(|a| aabb_area(a) > 0.0)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub detection: usize,
    pub gt: Option<usize>,
    pub iou: f64,
}

/// Greedy matching in score order: each detection takes the unmatched
/// ground-truth box of highest IoU if that IoU reaches `threshold`.
pub fn greedy_match(dets: &[Detection], gts: &[Aabb], threshold: f64) -> Vec<Match> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score));
    let mut taken = vec![false; gts.len()];
    let mut out = Vec::with_capacity(dets.len());
    for d in order {
        let best = gts
            .iter()
            .enumerate()
            .filter(|(g, _)| !taken[*g])
            .map(|(g, b)| (g, aabb_iou(&dets[d].bbox, b)))
            .fold(None, |acc: Option<(usize, f64)>, (g, iou)| match acc {
                Some((_, best)) if best >= iou => acc,
                _ => Some((g, iou)),
            });
        match best {
            Some((g, iou)) if iou >= threshold => {
                taken[g] = true;
                out.push(Match { detection: d, gt: Some(g), iou });
            }
            other => out.push(Match {
                detection: d,
                gt: None,
                iou: other.map_or(0.0, |(_, iou)| iou),
            }),
        }
    }
    out
}

/// 11-point interpolated average precision from `(score, true positive)`
/// pairs and the number of ground-truth boxes. Zero when there are none.
pub fn average_precision(scored: &[(f64, bool)], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[b].0.total_cmp(&scored[a].0));
    let mut pr = Vec::with_capacity(order.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for i in order {
        if scored[i].1 {
            tp += 1;
        } else {
            fp += 1;
        }
        pr.push((tp as f64 / n_gt as f64, tp as f64 / (tp + fp) as f64));
    }
    (0..=10)
        .map(|k| {
            let r = k as f64 / 10.0;
            pr.iter()
                .filter(|(rec, _)| *rec >= r - 1e-12)
                .map(|(_, p)| *p)
                .fold(0.0, f64::max)
        })
        .sum::<f64>()
        / 11.0
}

/// Detections and matches for one frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameEval {
    pub detections: Vec<Detection>,
    pub ground_truth: Vec<Aabb>,
    pub matches50: Vec<Match>,
    pub matches70: Vec<Match>,
    /// Best IoU reached by any detection, per ground-truth box.
    pub best_iou: Vec<f64>,
}

impl FrameEval {
    pub fn new(detections: Vec<Detection>, ground_truth: Vec<Aabb>) -> Self {
        let matches50 = greedy_match(&detections, &ground_truth, 0.5);
        let matches70 = greedy_match(&detections, &ground_truth, 0.7);
        let best_iou = ground_truth
            .iter()
            .map(|g| detections.iter().map(|d| aabb_iou(&d.bbox, g)).fold(0.0, f64::max))
            .collect();
        Self {
            detections,
            ground_truth,
            matches50,
            matches70,
            best_iou,
        }
    }

    fn scored(&self, matches: &[Match]) -> Vec<(f64, bool)> {
        matches
            .iter()
            .map(|m| (self.detections[m.detection].score, m.gt.is_some()))
            .collect()
    }
}

/// AP and IoU pooled over frames.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionSummary {
    pub ap50: f64,
    pub ap70: f64,
    pub mean_iou: f64,
    pub ground_truth: usize,
    pub detections: usize,
}

pub fn summarize(frames: &[FrameEval]) -> DetectionSummary {
    let n_gt: usize = frames.iter().map(|f| f.ground_truth.len()).sum();
    let pool = |pick: fn(&FrameEval) -> &Vec<Match>| -> Vec<(f64, bool)> {
        frames.iter().flat_map(|f| f.scored(pick(f))).collect()
    };
    let ious: Vec<f64> = frames.iter().flat_map(|f| f.best_iou.iter().copied()).collect();
    DetectionSummary {
        ap50: average_precision(&pool(|f| &f.matches50), n_gt),
        ap70: average_precision(&pool(|f| &f.matches70), n_gt),
        mean_iou: if ious.is_empty() { 0.0 } else { ious.iter().sum::<f64>() / ious.len() as f64 },
        ground_truth: n_gt,
        detections: frames.iter().map(|f| f.detections.len()).sum(),
    }
}

/// Detects on a map and scores against oriented ground-truth boxes given in
/// the grid's frame.
pub fn evaluate_detection(
    map: &Tensor3,
    boxes: &[OrientedBox],
    spec: &BevSpec,
    cfg: &DetectorConfig,
) -> Result<(DetectionSummary, FrameEval)> {
    let frame = FrameEval::new(detect(map, spec, cfg)?, ground_truth_boxes(boxes, spec));
    Ok((summarize(std::slice::from_ref(&frame)), frame))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::rasterize_boxes;

    fn spec() -> BevSpec {
        BevSpec::centered(0.4, 32)
    }

    fn boxes() -> Vec<OrientedBox> {
        vec![
            OrientedBox::new([-2.0, 2.2, 0.8], 4.0, 2.0, 1.6, 0.0).unwrap(),
            OrientedBox::new([3.0, -3.2, 0.8], 2.0, 4.0, 1.6, 0.0).unwrap(),
        ]
    }

    #[test]
    fn perfect_map() {
        let map = rasterize_boxes(&boxes(), &spec());
        let (s, f) = evaluate_detection(&map, &boxes(), &spec(), &DetectorConfig::default()).unwrap();
        assert_eq!(f.detections.len(), 2);
        assert_eq!((s.ap50, s.ap70), (1.0, 1.0));
        assert!(f.best_iou.iter().all(|&v| (v - 1.0).abs() < 1e-9), "{:?}", f.best_iou);
    }

    #[test]
    fn empty_map() {
        let map = Tensor3::zeros(1, 32, 32);
        let (s, _) = evaluate_detection(&map, &boxes(), &spec(), &DetectorConfig::default()).unwrap();
        assert_eq!((s.ap50, s.ap70, s.mean_iou), (0.0, 0.0, 0.0));
    }

    #[test]
    fn no_ground_truth_gives_zero() {
        assert_eq!(average_precision(&[(0.9, false)], 0), 0.0);
    }

    #[test]
    fn components_are_four_connected() {
        let mut map = Tensor3::zeros(1, 32, 32);
        map.set(0, 4, 4, 1.0);
        map.set(0, 5, 5, 0.8);
        let d = detect(&map, &spec(), &DetectorConfig::default()).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].score, 1.0);
    }
}
