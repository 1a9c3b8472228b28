//! Foreground / observability estimator.

use super::observability::ObservabilityMap;
use crate::error::{Error, Result};
use crate::numerics::{conv2d, sigmoid, Activation, ConvSpec, NamedTensors, Tensor3};

/// 3×3 conv halving channels, frozen per-channel affine, ReLU, then a 1×1
/// conv to a single sigmoid channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ForegroundEstimator {
    pub conv1: ConvSpec,
    pub scale: Vec<f64>,
    pub shift: Vec<f64>,
    pub conv2: ConvSpec,
}

impl ForegroundEstimator {
    /// All weights and biases zero, affine scale one.
    pub fn zeros(channels: usize) -> Self {
        let hidden = (channels / 2).max(1);
        Self {
            conv1: ConvSpec::new(hidden, channels, 3, 3).with_padding(1),
            scale: vec![1.0; hidden],
            shift: vec![0.0; hidden],
            conv2: ConvSpec::new(1, hidden, 1, 1).with_activation(Activation::Sigmoid),
        }
    }

    /// Hand-set estimator scoring `sigmoid(gain · (x_c − threshold))` on
    /// input channel `channel` (clamped below at zero by the ReLU).
    pub fn threshold_on(channels: usize, channel: usize, gain: f64, threshold: f64) -> Result<Self> {
        if channel >= channels {
            return Err(Error::OutOfRange(format!("channel {channel} of {channels}")));
        }
        let mut fg = Self::zeros(channels);
        fg.conv1.set_weight(0, channel, 1, 1, 1.0);
        fg.conv2.set_weight(0, 0, 0, 0, gain);
        fg.conv2.bias[0] = -gain * threshold;
        Ok(fg)
    }

    pub fn from_weights(channels: usize, named: &NamedTensors) -> Result<Self> {
        let mut fg = Self::zeros(channels);
        let mut missing = Vec::new();
        fg.conv1.import("fg.conv1", named, &mut missing)?;
        fg.conv2.import("fg.conv2", named, &mut missing)?;
        let hidden = fg.scale.len();
        for (name, slot) in [("fg.bn.scale", &mut fg.scale), ("fg.bn.shift", &mut fg.shift)] {
            match named.get_f64(name, hidden)? {
                Some(v) => *slot = v,
                None => missing.push(name.to_string()),
            }
        }
        if !missing.is_empty() {
            return Err(Error::MissingWeights(missing));
        }
        Ok(fg)
    }

    pub fn export(&self, named: &mut NamedTensors) {
        self.conv1.export("fg.conv1", named);
        named.insert_f64("fg.bn.scale", vec![self.scale.len()], &self.scale);
        named.insert_f64("fg.bn.shift", vec![self.shift.len()], &self.shift);
        self.conv2.export("fg.conv2", named);
    }

    pub fn forward(&self, features: &Tensor3) -> Result<ObservabilityMap> {
        let mut hidden = conv2d(features, &self.conv1)?;
        for (c, (&a, &b)) in self.scale.iter().zip(&self.shift).enumerate() {
            hidden.channel_mut(c).iter_mut().for_each(|v| *v = (a * *v + b).max(0.0));
        }
        let out = conv2d(&hidden, &self.conv2)?;
        // guard against rounding to exactly 0 or 1 at extreme logits
        ObservabilityMap::new(out.map(|v| v.clamp(0.0, 1.0)))
    }
}

pub fn foreground_estimate(features: &Tensor3, fg: &ForegroundEstimator) -> Result<ObservabilityMap> {
    fg.forward(features)
}

/// Score of the threshold estimator at a single cell.
pub fn threshold_score(value: f64, gain: f64, threshold: f64) -> f64 {
    sigmoid(gain * (value.max(0.0) - threshold))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_half() {
        let m = ForegroundEstimator::zeros(6).forward(&Tensor3::filled(6, 4, 5, 2.0)).unwrap();
        assert_eq!(m.tensor().shape(), (1, 4, 5));
        assert!(m.tensor().data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn saturating_bias() {
        let mut fg = ForegroundEstimator::zeros(4);
        fg.conv2.bias[0] = 10.0;
        let m = fg.forward(&Tensor3::zeros(4, 3, 3)).unwrap();
        assert!(m.tensor().data().iter().all(|&v| v > 0.9999));
    }

    #[test]
    fn threshold_estimator_reads_channel() {
        let fg = ForegroundEstimator::threshold_on(4, 3, 8.0, 0.5).unwrap();
        let mut x = Tensor3::zeros(4, 3, 3);
        x.set(3, 1, 1, 1.5);
        let m = fg.forward(&x).unwrap();
        assert!((m.tensor().get(0, 1, 1) - threshold_score(1.5, 8.0, 0.5)).abs() < 1e-15);
        assert!((m.tensor().get(0, 0, 0) - threshold_score(0.0, 8.0, 0.5)).abs() < 1e-15);
    }

    #[test]
    fn archive_roundtrip() {
        let fg = ForegroundEstimator::threshold_on(4, 1, 2.0, 0.25).unwrap();
        let mut named = NamedTensors::new();
        fg.export(&mut named);
        assert_eq!(ForegroundEstimator::from_weights(4, &named).unwrap(), fg);
        assert!(matches!(
            ForegroundEstimator::from_weights(4, &NamedTensors::new()),
            Err(Error::MissingWeights(v)) if v.len() == 6
        ));
    }
}
