//! Two-stage alignment across scales.
//!
//! Stage 1 runs at the collaborator on its two latest frames and predicts an
//! intermediate feature with ξ = 1. Stage 2 runs at the ego on what was
//! received, estimating a second motion field and scaling it by ξ.

use serde::{Deserialize, Serialize};

use super::motion::{MotionEstimator, MotionField};
use super::warp::warp_features;
use super::xi::{predict_xi, DelayContext, XiPredictor};
use crate::error::{Error, Result};
use crate::numerics::{NamedTensors, Tensor3};

pub const SCALE_NAMES: [&str; 3] = ["large", "middle", "small"];

/// Which displacement the final warp uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage2Warp {
    /// `w₂ ⊙ warp(F_inter, ξ·Δp₂)`.
    #[default]
    ScaledStage2,
    /// `w₂ ⊙ warp(F_inter, Δp₁)`, ξ unused.
    LiteralStage1,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScaleWeights {
    pub stage1: MotionEstimator,
    pub stage2: MotionEstimator,
    pub xi: XiPredictor,
}

/// Per-scale estimators and ξ predictors, ordered large → small.
#[derive(Clone, Debug, PartialEq)]
pub struct PtamWeights {
    pub scales: Vec<ScaleWeights>,
}

impl PtamWeights {
    pub fn new(channels: &[usize], hidden: usize, seed: u64) -> Self {
        let scales = channels
            .iter()
            .enumerate()
            .map(|(s, &c)| {
                let base = 0x7074_0000 + 16 * s as u64;
                ScaleWeights {
                    stage1: MotionEstimator::new(c, hidden, seed, base),
                    stage2: MotionEstimator::new(c, hidden, seed, base + 4),
                    xi: XiPredictor::new(hidden, seed, base + 8),
                }
            })
            .collect();
        Self { scales }
    }

    fn scale_name(s: usize) -> String {
        SCALE_NAMES.get(s).map_or_else(|| format!("s{s}"), |n| n.to_string())
    }

    pub fn from_weights(channels: &[usize], hidden: usize, named: &NamedTensors) -> Result<Self> {
        let mut missing = Vec::new();
        let mut scales = Vec::new();
        for (s, &c) in channels.iter().enumerate() {
            let n = Self::scale_name(s);
            scales.push(ScaleWeights {
                stage1: MotionEstimator::from_weights(&format!("ptam.motion.stage1.{n}"), c, hidden, named, &mut missing)?,
                stage2: MotionEstimator::from_weights(&format!("ptam.motion.stage2.{n}"), c, hidden, named, &mut missing)?,
                xi: XiPredictor::from_weights(&format!("ptam.xi.{n}"), hidden, named, &mut missing)?,
            });
        }
        if !missing.is_empty() {
            return Err(Error::MissingWeights(missing));
        }
        Ok(Self { scales })
    }

    pub fn export(&self, named: &mut NamedTensors) {
        for (s, w) in self.scales.iter().enumerate() {
            let n = Self::scale_name(s);
            w.stage1.export(&format!("ptam.motion.stage1.{n}"), named);
            w.stage2.export(&format!("ptam.motion.stage2.{n}"), named);
            w.xi.export(&format!("ptam.xi.{n}"), named);
        }
    }

    fn scale(&self, s: usize) -> Result<&ScaleWeights> {
        self.scales
            .get(s)
            .ok_or_else(|| Error::shape(format!("no alignment weights for scale {s}")))
    }
}

/// Motion fields either estimated by the network or supplied directly
/// (e.g. ground-truth flow from scene kinematics).
#[derive(Clone, Copy, Debug)]
pub enum MotionSource<'a> {
    Estimate,
    Given(&'a [MotionField]),
}

impl<'a> MotionSource<'a> {
    fn field(
        &self,
        s: usize,
        est: &MotionEstimator,
        latest: &Tensor3,
        prev: &Tensor3,
    ) -> Result<MotionField> {
        match self {
            MotionSource::Estimate => est.forward(latest, prev),
            MotionSource::Given(fields) => {
                let f = fields
                    .get(s)
                    .ok_or_else(|| Error::shape(format!("no supplied motion field for scale {s}")))?;
                if (f.height(), f.width()) != (latest.height(), latest.width()) {
                    return Err(Error::shape(format!(
                        "supplied motion {}x{} for features {}x{}",
                        f.height(),
                        f.width(),
                        latest.height(),
                        latest.width()
                    )));
                }
                Ok(f.clone())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stage1Output {
    pub inter: Vec<Tensor3>,
    pub fields: Vec<MotionField>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stage2Output {
    pub aligned: Vec<Tensor3>,
    pub fields: Vec<MotionField>,
    pub xi: Vec<f64>,
}

fn check_scales(a: &[Tensor3], b: &[Tensor3], what: &str) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::shape(format!("{what}: {} vs {} scales", a.len(), b.len())));
    }
    for (x, y) in a.iter().zip(b) {
        x.ensure_same_shape(y, what)?;
    }
    Ok(())
}

/// `F_inter = w₁ ⊙ warp(F(t−τ), Δp₁)` per scale, ξ = 1.
pub fn ptam_stage1(
    prev: &[Tensor3],
    latest: &[Tensor3],
    weights: &PtamWeights,
    motion: MotionSource,
) -> Result<Stage1Output> {
    check_scales(prev, latest, "stage-1 frames")?;
    let mut inter = Vec::with_capacity(latest.len());
    let mut fields = Vec::with_capacity(latest.len());
    for s in 0..latest.len() {
        let mf = motion.field(s, &weights.scale(s)?.stage1, &latest[s], &prev[s])?;
        inter.push(warp_features(&latest[s], &mf.dp, 1.0, &mf.w)?);
        fields.push(mf);
    }
    Ok(Stage1Output { inter, fields })
}

/// Final alignment from the received intermediate and latest features.
pub fn ptam_stage2(
    inter: &[Tensor3],
    latest: &[Tensor3],
    stage1_fields: &[MotionField],
    ctx: &DelayContext,
    weights: &PtamWeights,
    warp: Stage2Warp,
    motion: MotionSource,
) -> Result<Stage2Output> {
    check_scales(inter, latest, "stage-2 inputs")?;
    if stage1_fields.len() != inter.len() {
        return Err(Error::shape("stage-1 fields do not cover every scale"));
    }
    let mut aligned = Vec::with_capacity(inter.len());
    let mut fields = Vec::with_capacity(inter.len());
    let mut xis = Vec::with_capacity(inter.len());
    for s in 0..inter.len() {
        let w = weights.scale(s)?;
        let mf = motion.field(s, &w.stage2, &inter[s], &latest[s])?;
        let xi = predict_xi(&stage1_fields[s], &mf, ctx, &w.xi)?;
        let out = match warp {
            Stage2Warp::ScaledStage2 => warp_features(&inter[s], &mf.dp, xi, &mf.w)?,
            Stage2Warp::LiteralStage1 => warp_features(&inter[s], &stage1_fields[s].dp, 1.0, &mf.w)?,
        };
        aligned.push(out);
        fields.push(mf);
        xis.push(xi);
    }
    Ok(Stage2Output {
        aligned,
        fields,
        xi: xis,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PtamOutput {
    pub stage1: Stage1Output,
    pub stage2: Stage2Output,
}

/// Both stages back to back, without a transmission step in between.
pub fn ptam_align(
    prev: &[Tensor3],
    latest: &[Tensor3],
    ctx: &DelayContext,
    weights: &PtamWeights,
    warp: Stage2Warp,
    stage1_motion: MotionSource,
    stage2_motion: MotionSource,
) -> Result<PtamOutput> {
    let stage1 = ptam_stage1(prev, latest, weights, stage1_motion)?;
    let stage2 = ptam_stage2(&stage1.inter, latest, &stage1.fields, ctx, weights, warp, stage2_motion)?;
    Ok(PtamOutput { stage1, stage2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::temporal::xi::XiMode;

    fn scales() -> Vec<Tensor3> {
        vec![
            Tensor3::from_fn(2, 8, 8, |c, y, x| ((c + y * x) as f64).cos()),
            Tensor3::from_fn(3, 4, 4, |c, y, x| ((c * y + x) as f64).sin()),
        ]
    }

    #[test]
    fn zero_delay_oracle_gives_weighted_inter() {
        let w = PtamWeights::new(&[2, 3], 4, 1);
        let f = scales();
        let ctx = DelayContext::new(0.0, 0.1, XiMode::Oracle).unwrap();
        let out = ptam_align(&f, &f, &ctx, &w, Stage2Warp::ScaledStage2, MotionSource::Estimate, MotionSource::Estimate)
            .unwrap();
        for s in 0..2 {
            let want = out.stage1.inter[s].mul_plane(&out.stage2.fields[s].w).unwrap();
            assert_eq!(out.stage2.aligned[s], want);
        }
    }

    #[test]
    fn zero_features_stay_zero() {
        let w = PtamWeights::new(&[2, 3], 4, 1);
        let z = vec![Tensor3::zeros(2, 8, 8), Tensor3::zeros(3, 4, 4)];
        let ctx = DelayContext::new(0.3, 0.1, XiMode::Learned).unwrap();
        let out = ptam_align(&z, &z, &ctx, &w, Stage2Warp::ScaledStage2, MotionSource::Estimate, MotionSource::Estimate)
            .unwrap();
        assert!(out.stage2.aligned.iter().all(|t| t.max_abs() == 0.0));
    }

    #[test]
    fn archive_names() {
        let w = PtamWeights::new(&[2], 3, 1);
        let mut named = NamedTensors::new();
        w.export(&mut named);
        assert!(named.get("ptam.motion.stage1.large.flow.w").is_some());
        assert!(named.get("ptam.xi.large.mlp.1.b").is_some());
        assert_eq!(PtamWeights::from_weights(&[2], 3, &named).unwrap(), w);
    }
}
