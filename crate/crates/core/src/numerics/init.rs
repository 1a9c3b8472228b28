//! Frozen, seed-derived initialisation.
//!
//! Values are drawn as `f32` and widened so they survive an archive
//! round-trip unchanged.

use rand_distr::{Distribution, Normal};

use super::conv::ConvSpec;
use super::mlp::MlpSpec;
use crate::rng;

/// He-normal weights (`std = sqrt(2 / fan_in)`) with zero bias.
pub fn he_conv(spec: &mut ConvSpec, seed: u64, stream: u64) {
    let fan_in = (spec.in_per_group() * spec.kernel_h * spec.kernel_w).max(1);
    let normal = Normal::new(0.0f32, (2.0 / fan_in as f32).sqrt()).expect("finite std");
    let mut r = rng::stream(seed, stream);
    for w in spec.weights.iter_mut() {
        *w = normal.sample(&mut r) as f64;
    }
    spec.bias.iter_mut().for_each(|b| *b = 0.0);
}

pub fn he_mlp(mlp: &mut MlpSpec, seed: u64, stream: u64) {
    let mut r = rng::stream(seed, stream);
    for layer in mlp.layers.iter_mut() {
        let normal = Normal::new(0.0f32, (2.0 / layer.inputs.max(1) as f32).sqrt()).expect("finite std");
        for w in layer.weights.iter_mut() {
            *w = normal.sample(&mut r) as f64;
        }
        layer.bias.iter_mut().for_each(|b| *b = 0.0);
    }
}
