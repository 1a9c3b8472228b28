//! Weighted focal loss on foreground occupancy maps.

use crate::domain::ObservabilityMap;
use crate::error::Result;
use crate::featurizer::BevSpec;
use crate::numerics::Tensor3;
use crate::pointcloud::OrientedBox;

pub const FOCAL_ALPHA: f64 = 0.25;
pub const POSITIVE_WEIGHT: f64 = 2.0;
const P_CLAMP: f64 = 1e-12;

/// 1 where the cell centre lies in any box footprint (closed), else 0.
/// Boxes are in the grid's own frame.
pub fn rasterize_boxes(boxes: &[OrientedBox], spec: &BevSpec) -> Tensor3 {
    let (h, w) = (spec.height(), spec.width());
    Tensor3::from_fn(1, h, w, |_, r, c| {
        let [x, y] = spec.cell_center(r, c);
        if boxes.iter().any(|b| b.contains_planar(x, y)) {
            1.0
        } else {
            0.0
        }
    })
}

/// Focal term and its derivative in `p` for a positive or negative cell.
pub fn focal_term(p: f64, positive: bool) -> (f64, f64) {
    let p = p.clamp(P_CLAMP, 1.0 - P_CLAMP);
    if positive {
        let q = 1.0 - p;
        let v = -FOCAL_ALPHA * q * q * p.ln();
        let d = FOCAL_ALPHA * (2.0 * q * p.ln() - q * q / p);
        (v, d)
    } else {
        let a = 1.0 - FOCAL_ALPHA;
        let lq = (1.0 - p).ln();
        let v = -a * p * p * lq;
        let d = a * (-2.0 * p * lq + p * p / (1.0 - p));
        (v, d)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FocalLoss {
    pub loss: f64,
    pub grad: Tensor3,
    pub positives: usize,
}

/// `Σ w·focal(p, y)` with `w = (2y + (1 − y)) / max(Σy, 1)` against a
/// binary target map.
pub fn focal_loss_on_targets(pred: &Tensor3, target: &Tensor3) -> Result<FocalLoss> {
    pred.ensure_same_shape(target, "focal loss target")?;
    let positives = target.data().iter().filter(|&&y| y > 0.5).count();
    let norm = positives.max(1) as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &y) in pred.data().iter().zip(target.data()) {
        let pos = y > 0.5;
        let w = if pos { POSITIVE_WEIGHT } else { 1.0 } / norm;
        let (v, d) = focal_term(p, pos);
        loss += w * v;
        grad.push(w * d);
    }
    Ok(FocalLoss {
        loss,
        grad: Tensor3::from_vec(pred.channels(), pred.height(), pred.width(), grad)?,
        positives,
    })
}

pub fn foreground_loss(pred: &ObservabilityMap, boxes: &[OrientedBox], spec: &BevSpec) -> Result<FocalLoss> {
    focal_loss_on_targets(pred.tensor(), &rasterize_boxes(boxes, spec))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_confidence_positive() {
        let (v, _) = focal_term(0.5, true);
        assert!((v - 0.25 * 0.25 * 2f64.ln()).abs() < 1e-15);
        assert!((v - 0.043322).abs() < 1e-6);
    }

    #[test]
    fn perfect_prediction_vanishes() {
        let spec = BevSpec::centered(0.5, 8);
        let b = OrientedBox::new([0.0, 0.0, 0.5], 1.0, 1.0, 1.0, 0.0).unwrap();
        let target = rasterize_boxes(&[b], &spec);
        assert_eq!(target.sum(), 4.0);
        let pred = target.map(|y| if y > 0.5 { 1.0 - 1e-9 } else { 1e-9 });
        let l = foreground_loss(&ObservabilityMap::new(pred).unwrap(), &[b], &spec).unwrap();
        assert!(l.loss < 1e-15);
        assert_eq!(l.positives, 4);
    }

    #[test]
    fn no_positives_normalises_by_one() {
        let pred = Tensor3::filled(1, 2, 2, 0.5);
        let l = focal_loss_on_targets(&pred, &Tensor3::zeros(1, 2, 2)).unwrap();
        let (v, _) = focal_term(0.5, false);
        assert!((l.loss - 4.0 * v).abs() < 1e-15);
    }
}
