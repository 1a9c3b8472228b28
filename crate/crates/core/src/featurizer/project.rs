//! Multi-scale to full-resolution BEV projection via transposed convolutions.

use super::backbone::{MultiScaleFeatures, LARGE_CHANNELS, MIDDLE_CHANNELS, SMALL_CHANNELS};
use super::pillar::PILLAR_CHANNELS;
use crate::error::{Error, Result};
use crate::numerics::init::he_conv;
use crate::numerics::{transposed_conv2d, Activation, ConvSpec, NamedTensors, Tensor3};

pub const BRANCH_CHANNELS: usize = 128;
pub const BEV_CHANNELS: usize = 3 * BRANCH_CHANNELS;

/// Three upsampling branches (stride 1, 2, 4) to 128 channels each. Any
/// batch-norm affine is assumed folded into the bias.
#[derive(Clone, Debug, PartialEq)]
pub struct BevProjection {
    pub large: ConvSpec,
    pub middle: ConvSpec,
    pub small: ConvSpec,
}

const NAMES: [&str; 3] = ["bevproj.large", "bevproj.middle", "bevproj.small"];

impl BevProjection {
    fn shapes(activation: Activation) -> [ConvSpec; 3] {
        [
            ConvSpec::new(BRANCH_CHANNELS, LARGE_CHANNELS, 3, 3).with_padding(1),
            ConvSpec::new(BRANCH_CHANNELS, MIDDLE_CHANNELS, 2, 2).with_stride(2),
            ConvSpec::new(BRANCH_CHANNELS, SMALL_CHANNELS, 4, 4).with_stride(4),
        ]
        .map(|s| s.with_activation(activation))
    }

    /// Seeded weights; channels 0..8 of each branch copy the carried pillar
    /// statistics (nearest-neighbour upsampled for the coarse scales).
    pub fn analytic(seed: u64) -> Self {
        let [mut large, mut middle, mut small] = Self::shapes(Activation::None);
        for (i, spec) in [&mut large, &mut middle, &mut small].into_iter().enumerate() {
            he_conv(spec, seed, 0x6270_0000 + i as u64);
            let (kh, kw) = (spec.kernel_h, spec.kernel_w);
            for oc in 0..PILLAR_CHANNELS {
                for ic in 0..spec.in_channels {
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let carry = ic == oc && (i > 0 || (ky == 1 && kx == 1));
                            spec.set_weight(oc, ic, ky, kx, if carry { 1.0 } else { 0.0 });
                        }
                    }
                }
            }
        }
        Self { large, middle, small }
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        for s in [&mut self.large, &mut self.middle, &mut self.small] {
            s.activation = activation;
        }
        self
    }

    pub fn from_weights(named: &NamedTensors) -> Result<Self> {
        let mut layers = Self::shapes(Activation::None);
        let mut missing = Vec::new();
        for (spec, name) in layers.iter_mut().zip(NAMES) {
            spec.import(name, named, &mut missing)?;
        }
        if !missing.is_empty() {
            return Err(Error::MissingWeights(missing));
        }
        let [large, middle, small] = layers;
        Ok(Self { large, middle, small })
    }

    pub fn export(&self, named: &mut NamedTensors) {
        for (spec, name) in [&self.large, &self.middle, &self.small].into_iter().zip(NAMES) {
            spec.export(name, named);
        }
    }

    /// Concatenates the three upsampled branches as `(large, middle, small)`.
    pub fn forward(&self, ms: &MultiScaleFeatures) -> Result<Tensor3> {
        ms.validate()?;
        let large = transposed_conv2d(&ms.large, &self.large)?;
        let middle = transposed_conv2d(&ms.middle, &self.middle)?;
        let small = transposed_conv2d(&ms.small, &self.small)?;
        Tensor3::concat_channels(&[&large, &middle, &small])
    }
}

pub fn bev_project(ms: &MultiScaleFeatures, proj: &BevProjection) -> Result<Tensor3> {
    proj.forward(ms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_shape_and_zero_response() {
        let p = BevProjection::analytic(3);
        let out = p.forward(&MultiScaleFeatures::zeros(16, 16)).unwrap();
        assert_eq!(out.shape(), (384, 16, 16));
        assert_eq!(out.max_abs(), 0.0);
    }

    #[test]
    fn coarse_carry_is_nearest_upsampling() {
        let p = BevProjection::analytic(3);
        let mut ms = MultiScaleFeatures::zeros(8, 8);
        ms.small.set(3, 1, 0, 2.0);
        let out = p.forward(&ms).unwrap();
        let ch = 2 * BRANCH_CHANNELS + 3;
        for y in 0..8 {
            for x in 0..8 {
                let want = if (4..8).contains(&y) && x < 4 { 2.0 } else { 0.0 };
                assert_eq!(out.get(ch, y, x), want);
            }
        }
    }

    #[test]
    fn mismatched_scales_rejected() {
        let mut ms = MultiScaleFeatures::zeros(8, 8);
        ms.middle = Tensor3::zeros(128, 3, 4);
        assert!(BevProjection::analytic(0).forward(&ms).is_err());
    }
}
