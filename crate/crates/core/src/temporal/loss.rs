//! Multi-window cosine losses with analytic gradients.

use serde::{Deserialize, Serialize};

use super::windows::{window_partition, Window};
use crate::error::{Error, Result};
use crate::numerics::Tensor3;

/// Arithmetic counter threaded through the loss evaluation.
pub trait OpTally {
    fn mul(&mut self, n: u64);
    fn add(&mut self, n: u64);
    fn sqrt(&mut self, n: u64);
    fn div(&mut self, n: u64);
}

/// Counts nothing.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoTally;

impl OpTally for NoTally {
    #[inline]
    fn mul(&mut self, _: u64) {}
    #[inline]
    fn add(&mut self, _: u64) {}
    #[inline]
    fn sqrt(&mut self, _: u64) {}
    #[inline]
    fn div(&mut self, _: u64) {}
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    pub mul: u64,
    pub add: u64,
    pub sqrt: u64,
    pub div: u64,
}

impl OpTally for OpCounts {
    fn mul(&mut self, n: u64) {
        self.mul += n;
    }
    fn add(&mut self, n: u64) {
        self.add += n;
    }
    fn sqrt(&mut self, n: u64) {
        self.sqrt += n;
    }
    fn div(&mut self, n: u64) {
        self.div += n;
    }
}

impl std::ops::Add for OpCounts {
    type Output = OpCounts;
    fn add(self, o: OpCounts) -> OpCounts {
        OpCounts {
            mul: self.mul + o.mul,
            add: self.add + o.add,
            sqrt: self.sqrt + o.sqrt,
            div: self.div + o.div,
        }
    }
}

/// What a single cosine compares.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CosineGranularity {
    /// One cosine over the flattened `C·l·l` window; the window term is
    /// `(1 − cos)²`.
    #[default]
    Window,
    /// One cosine per cell over channels; the window term is the mean of
    /// `(1 − cos)²` over its `l·l` cells.
    Cell,
}

/// A window (or, in cell mode, the cells of a window) where prediction or
/// target had zero norm. Such cosines are taken as 0.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroNorm {
    pub scale: usize,
    pub window: Window,
    pub cells: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScaleLoss {
    pub loss: f64,
    pub grad: Tensor3,
    pub windows: usize,
    pub mean_cosine: f64,
    pub zero_norm: Vec<ZeroNorm>,
}

/// Accumulates one cosine between index sets of `p` and `g` and its loss
/// gradient scaled by `coef`. Returns the cosine, or `None` for zero norm.
fn cosine_term(
    p: &[f64],
    g: &[f64],
    idx: &[usize],
    coef: f64,
    grad: &mut [f64],
    tally: &mut impl OpTally,
) -> Option<f64> {
    let n = idx.len() as u64;
    let (mut dot, mut pp, mut gg) = (0.0, 0.0, 0.0);
    for &i in idx {
        dot += p[i] * g[i];
        pp += p[i] * p[i];
        gg += g[i] * g[i];
    }
    tally.mul(3 * n);
    tally.add(3 * n.saturating_sub(1));
    let (np, ng) = (pp.sqrt(), gg.sqrt());
    tally.sqrt(2);
    let denom = np * ng;
    tally.mul(1);
    tally.div(1);
    if denom == 0.0 {
        return None;
    }
    let cos = dot / denom;
    // d(1−cos)²/dp = −2(1−cos)·(g/(|p||g|) − cos·p/|p|²)
    let k = -2.0 * (1.0 - cos) * coef;
    let (a, b) = (k / denom, k * cos / pp);
    for &i in idx {
        grad[i] += a * g[i] - b * p[i];
    }
    Some(cos)
}

fn window_indices(t: &Tensor3, win: &Window) -> Vec<usize> {
    let mut idx = Vec::with_capacity(t.channels() * win.size * win.size);
    for c in 0..t.channels() {
        for y in win.row..win.row + win.size {
            for x in win.col..win.col + win.size {
                idx.push(t.index(c, y, x));
            }
        }
    }
    idx
}

/// Mean over `W1 ∪ W2` of the window terms at one scale, with its gradient
/// with respect to `pred`. The window size is clamped to the plane.
pub fn window_cosine_loss(
    pred: &Tensor3,
    gt: &Tensor3,
    l: usize,
    granularity: CosineGranularity,
    scale: usize,
    tally: &mut impl OpTally,
) -> Result<ScaleLoss> {
    pred.ensure_same_shape(gt, "temporal loss")?;
    let (c, h, w) = pred.shape();
    if c == 0 || h == 0 || w == 0 {
        return Err(Error::shape("temporal loss on an empty tensor"));
    }
    let l = l.min(h).min(w);
    let (w1, w2) = window_partition(h, w, l)?;
    let windows: Vec<Window> = w1.into_iter().chain(w2).collect();
    let n_win = windows.len() as f64;
    let (p, g) = (pred.data(), gt.data());
    let mut grad = vec![0.0; p.len()];
    let mut loss = 0.0;
    let mut cos_sum = 0.0;
    let mut zero_norm = Vec::new();
    for win in &windows {
        match granularity {
            CosineGranularity::Window => {
                let idx = window_indices(pred, win);
                let cos = cosine_term(p, g, &idx, 1.0 / n_win, &mut grad, tally);
                if cos.is_none() {
                    zero_norm.push(ZeroNorm {
                        scale,
                        window: *win,
                        cells: win.size * win.size,
                    });
                }
                let cos = cos.unwrap_or(0.0);
                loss += (1.0 - cos) * (1.0 - cos);
                cos_sum += cos;
                tally.add(1);
                tally.mul(1);
            }
            CosineGranularity::Cell => {
                let cells = (win.size * win.size) as f64;
                let mut term = 0.0;
                let mut wcos = 0.0;
                let mut zeros = 0;
                let plane = h * w;
                let mut idx = vec![0; c];
                for y in win.row..win.row + win.size {
                    for x in win.col..win.col + win.size {
                        for (ch, slot) in idx.iter_mut().enumerate() {
                            *slot = ch * plane + y * w + x;
                        }
                        let cos = cosine_term(p, g, &idx, 1.0 / (cells * n_win), &mut grad, tally);
                        if cos.is_none() {
                            zeros += 1;
                        }
                        let cos = cos.unwrap_or(0.0);
                        term += (1.0 - cos) * (1.0 - cos);
                        wcos += cos;
                    }
                }
                // one subtraction and one square per cell, plus the cell sum
                tally.add(2 * (win.size * win.size) as u64 - 1);
                tally.mul((win.size * win.size) as u64);
                if zeros > 0 {
                    zero_norm.push(ZeroNorm {
                        scale,
                        window: *win,
                        cells: zeros,
                    });
                }
                loss += term / cells;
                cos_sum += wcos / cells;
            }
        }
    }
    Ok(ScaleLoss {
        loss: loss / n_win,
        grad: Tensor3::from_vec(c, h, w, grad)?,
        windows: windows.len(),
        mean_cosine: cos_sum / n_win,
        zero_norm,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TemporalLoss {
    pub per_scale: Vec<f64>,
    pub total: f64,
    pub grads: Vec<Tensor3>,
    pub zero_norm: Vec<ZeroNorm>,
}

/// Window cosine loss summed over scales.
pub fn temporal_loss(
    preds: &[Tensor3],
    gts: &[Tensor3],
    l: usize,
    granularity: CosineGranularity,
) -> Result<TemporalLoss> {
    temporal_loss_tallied(preds, gts, l, granularity, &mut NoTally)
}

pub fn temporal_loss_tallied(
    preds: &[Tensor3],
    gts: &[Tensor3],
    l: usize,
    granularity: CosineGranularity,
    tally: &mut impl OpTally,
) -> Result<TemporalLoss> {
    if preds.len() != gts.len() {
        return Err(Error::shape(format!("{} predicted scales vs {} targets", preds.len(), gts.len())));
    }
    let mut out = TemporalLoss {
        per_scale: Vec::new(),
        total: 0.0,
        grads: Vec::new(),
        zero_norm: Vec::new(),
    };
    for (s, (p, g)) in preds.iter().zip(gts).enumerate() {
        let sl = window_cosine_loss(p, g, l, granularity, s, tally)?;
        out.total += sl.loss;
        out.per_scale.push(sl.loss);
        out.grads.push(sl.grad);
        out.zero_norm.extend(sl.zero_norm);
    }
    Ok(out)
}

/// Intermediate and final losses against the same targets, and their sum.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignmentLoss {
    pub inter: TemporalLoss,
    pub fin: TemporalLoss,
    pub total: f64,
}

pub fn alignment_loss(
    inter: &[Tensor3],
    fin: &[Tensor3],
    gts: &[Tensor3],
    l: usize,
    granularity: CosineGranularity,
) -> Result<AlignmentLoss> {
    let inter = temporal_loss(inter, gts, l, granularity)?;
    let fin = temporal_loss(fin, gts, l, granularity)?;
    let total = inter.total + fin.total;
    Ok(AlignmentLoss { inter, fin, total })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(seed: f64) -> Tensor3 {
        Tensor3::from_fn(2, 8, 8, |c, y, x| ((c as f64 + 1.0) * seed + y as f64 * 0.7 + x as f64 * 0.3).sin())
    }

    #[test]
    fn equal_inputs_give_zero() {
        for g in [CosineGranularity::Window, CosineGranularity::Cell] {
            let f = field(1.3);
            let l = window_cosine_loss(&f, &f, 4, g, 0, &mut NoTally).unwrap();
            assert!(l.loss.abs() < 1e-12);
            assert!(l.grad.max_abs() < 1e-12);
        }
    }

    #[test]
    fn opposite_inputs_give_four() {
        let f = field(0.4);
        let l = window_cosine_loss(&f.scale(-1.0), &f, 4, CosineGranularity::Window, 0, &mut NoTally).unwrap();
        assert!((l.loss - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_prediction_is_flagged() {
        let f = field(0.4);
        let z = Tensor3::zeros(2, 8, 8);
        let l = window_cosine_loss(&z, &f, 4, CosineGranularity::Window, 2, &mut NoTally).unwrap();
        assert_eq!(l.loss, 1.0);
        assert_eq!(l.zero_norm.len(), l.windows);
        assert_eq!(l.zero_norm[0].scale, 2);
        assert_eq!(l.grad.max_abs(), 0.0);
    }

    #[test]
    fn window_clamped_to_plane() {
        let f = field(0.9);
        let l = window_cosine_loss(&f, &f.scale(2.0), 16, CosineGranularity::Window, 0, &mut NoTally).unwrap();
        assert_eq!(l.windows, 1);
        assert!(l.loss.abs() < 1e-12);
    }

    #[test]
    fn tally_window_mode() {
        let f = field(0.2);
        let mut t = OpCounts::default();
        let l = window_cosine_loss(&f, &f, 4, CosineGranularity::Window, 0, &mut t).unwrap();
        // 4 + 1 windows of 2·4·4 values
        assert_eq!(l.windows, 5);
        assert_eq!(t.mul, 5 * (3 * 32 + 2));
    }
}
