//! Motion fields and the convolutional motion estimator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::init::he_conv;
use crate::numerics::{conv2d, Activation, ConvSpec, NamedTensors, Tensor3};

/// Per-cell displacement in grid cells (`dp` channel 0 along columns,
/// channel 1 along rows) and a per-cell sampling weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionField {
    pub dp: Tensor3,
    pub w: Tensor3,
}

impl MotionField {
    /// Checks shapes and finiteness. Weights may touch 0 or 1 so that
    /// hand-built fields can express exact transport.
    pub fn new(dp: Tensor3, w: Tensor3) -> Result<Self> {
        if dp.channels() != 2 {
            return Err(Error::shape(format!("displacement needs 2 channels, got {}", dp.channels())));
        }
        dp.slice_channels(0, 1).ensure_plane_of(&w, "sampling weight")?;
        if !dp.is_finite() || !w.is_finite() {
            return Err(Error::OutOfRange("motion field has non-finite entries".into()));
        }
        if let Some(v) = w.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfRange(format!("sampling weight {v} outside [0, 1]")));
        }
        Ok(Self { dp, w })
    }

    /// Zero displacement, unit weight.
    pub fn identity(height: usize, width: usize) -> Self {
        Self {
            dp: Tensor3::zeros(2, height, width),
            w: Tensor3::filled(1, height, width, 1.0),
        }
    }

    pub fn constant(height: usize, width: usize, dx: f64, dy: f64, weight: f64) -> Result<Self> {
        let dp = Tensor3::from_fn(2, height, width, |c, _, _| if c == 0 { dx } else { dy });
        Self::new(dp, Tensor3::filled(1, height, width, weight))
    }

    pub fn height(&self) -> usize {
        self.dp.height()
    }

    pub fn width(&self) -> usize {
        self.dp.width()
    }

    /// `Δp ⊙ w` with the weight broadcast over both displacement channels.
    pub fn effective(&self) -> Tensor3 {
        self.dp.mul_plane(&self.w).expect("shapes checked at construction")
    }
}

/// Shared encoder over `[ΔF, F]` pairs, a fusion conv, and two heads: a
/// displacement head (zero-initialised) and a sigmoid weight head whose
/// bias starts at +4.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionEstimator {
    pub enc: ConvSpec,
    pub fuse: ConvSpec,
    pub flow: ConvSpec,
    pub weight: ConvSpec,
}

pub const WEIGHT_BIAS_INIT: f64 = 4.0;

const PARTS: [&str; 4] = ["enc", "fuse", "flow", "weight"];

impl MotionEstimator {
    fn shapes(channels: usize, hidden: usize) -> [ConvSpec; 4] {
        [
            ConvSpec::new(hidden, 2 * channels, 3, 3).with_padding(1).with_activation(Activation::Relu),
            ConvSpec::new(hidden, 2 * hidden, 3, 3).with_padding(1).with_activation(Activation::Relu),
            ConvSpec::new(2, hidden, 3, 3).with_padding(1),
            ConvSpec::new(1, hidden, 3, 3).with_padding(1).with_activation(Activation::Sigmoid),
        ]
    }

    pub fn new(channels: usize, hidden: usize, seed: u64, stream: u64) -> Self {
        let [mut enc, mut fuse, flow, mut weight] = Self::shapes(channels, hidden);
        he_conv(&mut enc, seed, stream);
        he_conv(&mut fuse, seed, stream + 1);
        weight.bias[0] = WEIGHT_BIAS_INIT;
        Self { enc, fuse, flow, weight }
    }

    pub fn from_weights(prefix: &str, channels: usize, hidden: usize, named: &NamedTensors, missing: &mut Vec<String>) -> Result<Self> {
        let mut layers = Self::shapes(channels, hidden);
        for (spec, part) in layers.iter_mut().zip(PARTS) {
            spec.import(&format!("{prefix}.{part}"), named, missing)?;
        }
        let [enc, fuse, flow, weight] = layers;
        Ok(Self { enc, fuse, flow, weight })
    }

    pub fn export(&self, prefix: &str, named: &mut NamedTensors) {
        for (spec, part) in [&self.enc, &self.fuse, &self.flow, &self.weight].into_iter().zip(PARTS) {
            spec.export(&format!("{prefix}.{part}"), named);
        }
    }

    pub fn channels(&self) -> usize {
        self.enc.in_channels / 2
    }

    pub fn forward(&self, latest: &Tensor3, prev: &Tensor3) -> Result<MotionField> {
        latest.ensure_same_shape(prev, "motion estimation inputs")?;
        let diff = latest.sub(prev)?;
        let a = conv2d(&Tensor3::concat_channels(&[&diff, latest])?, &self.enc)?;
        let b = conv2d(&Tensor3::concat_channels(&[&diff, prev])?, &self.enc)?;
        let fused = conv2d(&Tensor3::concat_channels(&[&a, &b])?, &self.fuse)?;
        let dp = conv2d(&fused, &self.flow)?;
        let w = conv2d(&fused, &self.weight)?;
        MotionField::new(dp, w)
    }
}

pub fn estimate_motion(latest: &Tensor3, prev: &Tensor3, est: &MotionEstimator) -> Result<MotionField> {
    est.forward(latest, prev)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn untrained_estimator_is_near_identity() {
        let est = MotionEstimator::new(3, 4, 11, 0);
        let f = Tensor3::from_fn(3, 5, 6, |c, y, x| (c + 2 * y + x) as f64 * 0.1);
        let mf = est.forward(&f, &f).unwrap();
        assert_eq!(mf.dp.shape(), (2, 5, 6));
        assert_eq!(mf.w.shape(), (1, 5, 6));
        assert!(mf.dp.data().iter().all(|&v| v == 0.0));
        let s4 = 1.0 / (1.0 + (-4.0f64).exp());
        assert!(mf.w.data().iter().all(|&v| v == s4));
        assert!((s4 - 0.9820).abs() < 1e-4);
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let est = MotionEstimator::new(3, 4, 11, 0);
        assert!(est.forward(&Tensor3::zeros(3, 4, 4), &Tensor3::zeros(3, 4, 5)).is_err());
    }

    #[test]
    fn effective_motion_weights_both_channels() {
        let mf = MotionField::constant(2, 2, 1.0, -2.0, 0.5).unwrap();
        let e = mf.effective();
        assert_eq!(e.get(0, 1, 1), 0.5);
        assert_eq!(e.get(1, 0, 0), -1.0);
    }
}
