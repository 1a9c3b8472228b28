//! Temporal scaling factor ξ.

use serde::{Deserialize, Serialize};

use super::motion::MotionField;
use crate::error::{Error, Result};
use crate::numerics::init::{he_conv, he_mlp};
use crate::numerics::{conv2d, Activation, ConvSpec, MlpSpec, NamedTensors, Tensor3};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum XiMode {
    #[default]
    Learned,
    /// `ξ = τ / ΔT`, bypassing the network.
    Oracle,
}

/// Transmission delay and sensor period, both in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayContext {
    pub tau: f64,
    pub dt: f64,
    pub mode: XiMode,
}

impl DelayContext {
    pub fn new(tau: f64, dt: f64, mode: XiMode) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::OutOfRange(format!("frame period {dt} must be positive")));
        }
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::OutOfRange(format!("delay {tau} must be non-negative")));
        }
        Ok(Self { tau, dt, mode })
    }

    /// Delay in frame periods.
    pub fn frames(&self) -> f64 {
        self.tau / self.dt
    }
}

/// `ΔM = Δp₂ ⊙ w₂ − Δp₁ ⊙ w₁`.
pub fn motion_difference(stage1: &MotionField, stage2: &MotionField) -> Result<Tensor3> {
    stage2.effective().sub(&stage1.effective())
}

/// Transformer-style embedding: `e[2i] = sin(p / b^{2i/d})`,
/// `e[2i+1] = cos(p / b^{2i/d})`.
pub fn sinusoidal_embedding(position: f64, dim: usize, base: f64) -> Vec<f64> {
    (0..dim)
        .map(|k| {
            let i = (k / 2) as f64;
            let angle = position / base.powf(2.0 * i / dim as f64);
            if k % 2 == 0 {
                angle.sin()
            } else {
                angle.cos()
            }
        })
        .collect()
}

pub const EMBED_BASE: f64 = 1e4;

/// Conv stem and one residual block over `ΔM`, global average pooling to
/// `f_M`, then `ξ = relu(MLP([f_M, f_M + embed(τ/ΔT)]))`.
#[derive(Clone, Debug, PartialEq)]
pub struct XiPredictor {
    pub stem: ConvSpec,
    pub res_a: ConvSpec,
    pub res_b: ConvSpec,
    pub head: MlpSpec,
    pub embed_base: f64,
}

impl XiPredictor {
    fn shapes(hidden: usize) -> (ConvSpec, ConvSpec, ConvSpec, MlpSpec) {
        (
            ConvSpec::new(hidden, 2, 3, 3).with_padding(1).with_activation(Activation::Relu),
            ConvSpec::new(hidden, hidden, 3, 3).with_padding(1).with_activation(Activation::Relu),
            ConvSpec::new(hidden, hidden, 3, 3).with_padding(1),
            MlpSpec::zeros(&[2 * hidden, hidden, 1]),
        )
    }

    /// Seeded hidden layers; the output layer has zero weights and bias 1,
    /// so an untrained predictor returns ξ = 1.
    pub fn new(hidden: usize, seed: u64, stream: u64) -> Self {
        let (mut stem, mut res_a, mut res_b, mut head) = Self::shapes(hidden);
        he_conv(&mut stem, seed, stream);
        he_conv(&mut res_a, seed, stream + 1);
        he_conv(&mut res_b, seed, stream + 2);
        he_mlp(&mut head, seed, stream + 3);
        let last = head.layers.last_mut().expect("two layers");
        last.weights.iter_mut().for_each(|w| *w = 0.0);
        last.bias[0] = 1.0;
        Self {
            stem,
            res_a,
            res_b,
            head,
            embed_base: EMBED_BASE,
        }
    }

    pub fn hidden(&self) -> usize {
        self.stem.out_channels
    }

    pub fn from_weights(prefix: &str, hidden: usize, named: &NamedTensors, missing: &mut Vec<String>) -> Result<Self> {
        let (mut stem, mut res_a, mut res_b, mut head) = Self::shapes(hidden);
        stem.import(&format!("{prefix}.stem"), named, missing)?;
        res_a.import(&format!("{prefix}.res_a"), named, missing)?;
        res_b.import(&format!("{prefix}.res_b"), named, missing)?;
        head.import(&format!("{prefix}.mlp"), named, missing)?;
        Ok(Self {
            stem,
            res_a,
            res_b,
            head,
            embed_base: EMBED_BASE,
        })
    }

    pub fn export(&self, prefix: &str, named: &mut NamedTensors) {
        self.stem.export(&format!("{prefix}.stem"), named);
        self.res_a.export(&format!("{prefix}.res_a"), named);
        self.res_b.export(&format!("{prefix}.res_b"), named);
        self.head.export(&format!("{prefix}.mlp"), named);
    }

    pub fn forward(&self, delta_m: &Tensor3, ctx: &DelayContext) -> Result<f64> {
        let stem = conv2d(delta_m, &self.stem)?;
        let res = conv2d(&conv2d(&stem, &self.res_a)?, &self.res_b)?;
        let block = stem.zip_map(&res, |a, b| (a + b).max(0.0))?;
        let f_m = block.global_average_pool().into_data();
        let embed = sinusoidal_embedding(ctx.frames(), f_m.len(), self.embed_base);
        let mut input = f_m.clone();
        input.extend(f_m.iter().zip(&embed).map(|(m, e)| m + e));
        let out = self.head.forward(&input)?;
        Ok(out[0].max(0.0))
    }
}

pub fn predict_xi(
    stage1: &MotionField,
    stage2: &MotionField,
    ctx: &DelayContext,
    predictor: &XiPredictor,
) -> Result<f64> {
    let delta_m = motion_difference(stage1, stage2)?;
    match ctx.mode {
        XiMode::Oracle => Ok(ctx.frames()),
        XiMode::Learned => predictor.forward(&delta_m, ctx),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_ratio() {
        let mf = MotionField::identity(4, 4);
        let p = XiPredictor::new(4, 0, 0);
        let ctx = DelayContext::new(0.3, 0.1, XiMode::Oracle).unwrap();
        assert!((predict_xi(&mf, &mf, &ctx, &p).unwrap() - 3.0).abs() < 1e-12);
        let ctx = DelayContext::new(0.0, 0.1, XiMode::Oracle).unwrap();
        assert_eq!(predict_xi(&mf, &mf, &ctx, &p).unwrap(), 0.0);
    }

    #[test]
    fn identical_motion_has_zero_difference() {
        let a = MotionField::constant(3, 3, 0.7, -0.2, 0.9).unwrap();
        assert!(motion_difference(&a, &a).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn untrained_predictor_returns_one() {
        let p = XiPredictor::new(6, 5, 0);
        let a = MotionField::constant(8, 8, 1.0, 0.0, 0.9).unwrap();
        let b = MotionField::identity(8, 8);
        let ctx = DelayContext::new(0.2, 0.1, XiMode::Learned).unwrap();
        assert_eq!(predict_xi(&a, &b, &ctx, &p).unwrap(), 1.0);
    }

    #[test]
    fn embedding_layout() {
        let e = sinusoidal_embedding(2.0, 4, 1e4);
        assert!((e[0] - 2f64.sin()).abs() < 1e-15);
        assert!((e[1] - 2f64.cos()).abs() < 1e-15);
        assert!((e[2] - (2.0 / 100.0f64).sin()).abs() < 1e-15);
    }

    #[test]
    fn invalid_context() {
        assert!(DelayContext::new(0.1, 0.0, XiMode::Oracle).is_err());
        assert!(DelayContext::new(-0.1, 0.1, XiMode::Oracle).is_err());
    }

    #[test]
    fn mismatched_fields_rejected() {
        let p = XiPredictor::new(2, 0, 0);
        let ctx = DelayContext::new(0.1, 0.1, XiMode::Oracle).unwrap();
        let r = predict_xi(&MotionField::identity(2, 2), &MotionField::identity(3, 2), &ctx, &p);
        assert!(r.is_err());
    }
}
