//! Three-scale convolutional backbone with frozen seed-derived weights.

use serde::{Deserialize, Serialize};

use super::pillar::PILLAR_CHANNELS;
use crate::error::{Error, Result};
use crate::numerics::init::he_conv;
use crate::numerics::{conv2d, Activation, ConvSpec, NamedTensors, Tensor3};

pub const LARGE_CHANNELS: usize = 64;
pub const MIDDLE_CHANNELS: usize = 128;
pub const SMALL_CHANNELS: usize = 256;

/// Features at full, half and quarter resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiScaleFeatures {
    pub large: Tensor3,
    pub middle: Tensor3,
    pub small: Tensor3,
}

impl MultiScaleFeatures {
    pub fn validate(&self) -> Result<()> {
        let (cl, h, w) = self.large.shape();
        let want = [
            (LARGE_CHANNELS, h, w),
            (MIDDLE_CHANNELS, h / 2, w / 2),
            (SMALL_CHANNELS, h / 4, w / 4),
        ];
        let got = [self.large.shape(), self.middle.shape(), self.small.shape()];
        if cl != LARGE_CHANNELS || h % 4 != 0 || w % 4 != 0 || got != want {
            return Err(Error::shape(format!("multi-scale shapes {got:?}, expected {want:?}")));
        }
        Ok(())
    }

    pub fn scales(&self) -> [&Tensor3; 3] {
        [&self.large, &self.middle, &self.small]
    }

    pub fn from_scales([large, middle, small]: [Tensor3; 3]) -> Result<Self> {
        let ms = Self { large, middle, small };
        ms.validate()?;
        Ok(ms)
    }

    pub fn into_scales(self) -> [Tensor3; 3] {
        [self.large, self.middle, self.small]
    }

    pub fn zeros(h: usize, w: usize) -> Self {
        Self {
            large: Tensor3::zeros(LARGE_CHANNELS, h, w),
            middle: Tensor3::zeros(MIDDLE_CHANNELS, h / 2, w / 2),
            small: Tensor3::zeros(SMALL_CHANNELS, h / 4, w / 4),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Backbone {
    pub conv1: ConvSpec,
    pub conv2: ConvSpec,
    pub conv3: ConvSpec,
}

const NAMES: [&str; 3] = ["backbone.conv1", "backbone.conv2", "backbone.conv3"];

impl Backbone {
    fn shapes() -> [ConvSpec; 3] {
        [
            ConvSpec::new(LARGE_CHANNELS, PILLAR_CHANNELS, 3, 3).with_padding(1),
            ConvSpec::new(MIDDLE_CHANNELS, LARGE_CHANNELS, 3, 3).with_stride(2).with_padding(1),
            ConvSpec::new(SMALL_CHANNELS, MIDDLE_CHANNELS, 3, 3).with_stride(2).with_padding(1),
        ]
        .map(|s| s.with_activation(Activation::Relu))
    }

    /// He-normal weights from `seed`. The first eight channels of every
    /// scale are wired to carry the pillar statistics unchanged (identity at
    /// full resolution, 2×2 averages below), so downstream stages can read
    /// occupancy and height without training.
    pub fn analytic(seed: u64) -> Self {
        let [mut conv1, mut conv2, mut conv3] = Self::shapes();
        for (i, spec) in [&mut conv1, &mut conv2, &mut conv3].into_iter().enumerate() {
            he_conv(spec, seed, 0x6b62_0000 + i as u64);
            for oc in 0..PILLAR_CHANNELS {
                for ic in 0..spec.in_channels {
                    for ky in 0..3 {
                        for kx in 0..3 {
                            spec.set_weight(oc, ic, ky, kx, 0.0);
                        }
                    }
                }
                if i == 0 {
                    spec.set_weight(oc, oc, 1, 1, 1.0);
                } else {
                    for (ky, kx) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
                        spec.set_weight(oc, oc, ky, kx, 0.25);
                    }
                }
            }
        }
        Self { conv1, conv2, conv3 }
    }

    /// Loads every layer from an archive; all absent names are reported at once.
    pub fn from_weights(named: &NamedTensors) -> Result<Self> {
        let mut layers = Self::shapes();
        let mut missing = Vec::new();
        for (spec, name) in layers.iter_mut().zip(NAMES) {
            spec.import(name, named, &mut missing)?;
        }
        if !missing.is_empty() {
            return Err(Error::MissingWeights(missing));
        }
        let [conv1, conv2, conv3] = layers;
        Ok(Self { conv1, conv2, conv3 })
    }

    pub fn export(&self, named: &mut NamedTensors) {
        for (spec, name) in [&self.conv1, &self.conv2, &self.conv3].into_iter().zip(NAMES) {
            spec.export(name, named);
        }
    }

    pub fn forward(&self, pillars: &Tensor3) -> Result<MultiScaleFeatures> {
        let (_, h, w) = pillars.shape();
        if h % 4 != 0 || w % 4 != 0 || h == 0 || w == 0 {
            return Err(Error::shape(format!("grid {h}x{w} must be a positive multiple of 4")));
        }
        let large = conv2d(pillars, &self.conv1)?;
        let middle = conv2d(&large, &self.conv2)?;
        let small = conv2d(&middle, &self.conv3)?;
        Ok(MultiScaleFeatures { large, middle, small })
    }
}

pub fn backbone_forward(pillars: &Tensor3, backbone: &Backbone) -> Result<MultiScaleFeatures> {
    backbone.forward(pillars)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_contract_and_zero_input() {
        let b = Backbone::analytic(7);
        let ms = b.forward(&Tensor3::zeros(8, 16, 16)).unwrap();
        assert_eq!(ms.large.shape(), (64, 16, 16));
        assert_eq!(ms.middle.shape(), (128, 8, 8));
        assert_eq!(ms.small.shape(), (256, 4, 4));
        assert!(ms.scales().iter().all(|t| t.max_abs() == 0.0));
    }

    #[test]
    fn carries_pillar_channels() {
        let b = Backbone::analytic(7);
        let mut p = Tensor3::zeros(8, 8, 8);
        p.set(3, 2, 2, 1.0);
        let ms = b.forward(&p).unwrap();
        assert_eq!(ms.large.get(3, 2, 2), 1.0);
        assert_eq!(ms.middle.get(3, 1, 1), 0.25);
        assert_eq!(ms.small.get(3, 0, 0), 0.0625);
    }

    #[test]
    fn missing_weights_are_listed() {
        let mut named = NamedTensors::new();
        Backbone::analytic(1).conv1.export("backbone.conv1", &mut named);
        match Backbone::from_weights(&named) {
            Err(Error::MissingWeights(names)) => {
                assert_eq!(names.len(), 4);
                assert!(names.iter().any(|n| n == "backbone.conv3.w"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn odd_grid_rejected() {
        assert!(Backbone::analytic(0).forward(&Tensor3::zeros(8, 6, 8)).is_err());
    }
}
