use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::archive::NamedTensors;
use super::tensor::Tensor3;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    None,
    Relu,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::None => x,
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax.
pub fn softmax(values: &[f64]) -> Vec<f64> {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// A 2-D convolution layer. Weights are laid out
/// `[out_channels][in_channels / groups][kernel_h][kernel_w]`.
///
/// The same layout is used by [`transposed_conv2d`], where `in_channels`
/// is the channel count of the (coarse) input being scattered.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl ConvSpec {
    /// Zero-initialised layer with stride 1, no padding, one group.
    pub fn new(out_channels: usize, in_channels: usize, kernel_h: usize, kernel_w: usize) -> Self {
        Self {
            out_channels,
            in_channels,
            kernel_h,
            kernel_w,
            stride: 1,
            padding: 0,
            groups: 1,
            weights: vec![0.0; out_channels * in_channels * kernel_h * kernel_w],
            bias: vec![0.0; out_channels],
            activation: Activation::None,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn with_padding(mut self, padding: usize) -> Self {
        self.padding = padding;
        self
    }

    /// Resizes the weight buffer to the grouped layout (zero-filled).
    pub fn with_groups(mut self, groups: usize) -> Self {
        self.groups = groups;
        let per = if groups == 0 { 0 } else { self.in_channels / groups };
        self.weights = vec![0.0; self.out_channels * per * self.kernel_h * self.kernel_w];
        self
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = weights;
        self
    }

    pub fn with_bias(mut self, bias: Vec<f64>) -> Self {
        self.bias = bias;
        self
    }

    #[inline]
    pub fn in_per_group(&self) -> usize {
        self.in_channels / self.groups
    }

    #[inline]
    pub fn out_per_group(&self) -> usize {
        self.out_channels / self.groups
    }

    pub fn weight_len(&self) -> usize {
        self.out_channels * self.in_per_group() * self.kernel_h * self.kernel_w
    }

    #[inline]
    pub fn weight_index(&self, oc: usize, ic_in_group: usize, ky: usize, kx: usize) -> usize {
        ((oc * self.in_per_group() + ic_in_group) * self.kernel_h + ky) * self.kernel_w + kx
    }

    pub fn weight(&self, oc: usize, ic_in_group: usize, ky: usize, kx: usize) -> f64 {
        self.weights[self.weight_index(oc, ic_in_group, ky, kx)]
    }

    pub fn set_weight(&mut self, oc: usize, ic_in_group: usize, ky: usize, kx: usize, v: f64) {
        let i = self.weight_index(oc, ic_in_group, ky, kx);
        self.weights[i] = v;
    }

    pub fn validate(&self) -> Result<()> {
        if self.groups == 0 || self.stride == 0 || self.kernel_h == 0 || self.kernel_w == 0 {
            return Err(Error::shape("conv groups, stride and kernel must be positive"));
        }
        if self.in_channels % self.groups != 0 || self.out_channels % self.groups != 0 {
            return Err(Error::shape(format!(
                "channels {}->{} not divisible by {} groups",
                self.in_channels, self.out_channels, self.groups
            )));
        }
        if self.weights.len() != self.weight_len() {
            return Err(Error::shape(format!(
                "conv weights have length {}, expected {}",
                self.weights.len(),
                self.weight_len()
            )));
        }
        if self.bias.len() != self.out_channels {
            return Err(Error::shape(format!(
                "conv bias has length {}, expected {}",
                self.bias.len(),
                self.out_channels
            )));
        }
        Ok(())
    }

    pub fn output_size(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let ph = h + 2 * self.padding;
        let pw = w + 2 * self.padding;
        if ph < self.kernel_h || pw < self.kernel_w {
            return Err(Error::shape(format!(
                "input {h}x{w} with padding {} is smaller than kernel {}x{}",
                self.padding, self.kernel_h, self.kernel_w
            )));
        }
        Ok((
            (ph - self.kernel_h) / self.stride + 1,
            (pw - self.kernel_w) / self.stride + 1,
        ))
    }

    pub fn transposed_output_size(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let full_h = (h.max(1) - 1) * self.stride + self.kernel_h;
        let full_w = (w.max(1) - 1) * self.stride + self.kernel_w;
        if h == 0 || w == 0 || full_h <= 2 * self.padding || full_w <= 2 * self.padding {
            return Err(Error::shape(format!(
                "transposed conv output for {h}x{w} would be empty"
            )));
        }
        Ok((full_h - 2 * self.padding, full_w - 2 * self.padding))
    }

    /// The layer whose transposed convolution is the adjoint of this one.
    /// Only defined for `groups == 1`.
    pub fn adjoint(&self) -> ConvSpec {
        assert_eq!(self.groups, 1, "adjoint only defined for ungrouped convs");
        let mut adj = ConvSpec::new(self.in_channels, self.out_channels, self.kernel_h, self.kernel_w)
            .with_stride(self.stride)
            .with_padding(self.padding);
        for oc in 0..self.out_channels {
            for ic in 0..self.in_channels {
                for ky in 0..self.kernel_h {
                    for kx in 0..self.kernel_w {
                        adj.set_weight(ic, oc, ky, kx, self.weight(oc, ic, ky, kx));
                    }
                }
            }
        }
        adj
    }

    pub fn export(&self, prefix: &str, named: &mut NamedTensors) {
        named.insert_f64(
            format!("{prefix}.w"),
            vec![self.out_channels, self.in_per_group(), self.kernel_h, self.kernel_w],
            &self.weights,
        );
        named.insert_f64(format!("{prefix}.b"), vec![self.out_channels], &self.bias);
    }

    /// Overwrites weights and bias from `named`. Absent names are appended to
    /// `missing`; present tensors of the wrong length are an error.
    pub fn import(&mut self, prefix: &str, named: &NamedTensors, missing: &mut Vec<String>) -> Result<()> {
        let wname = format!("{prefix}.w");
        let bname = format!("{prefix}.b");
        match named.get_f64(&wname, self.weight_len()) {
            Ok(Some(w)) => self.weights = w,
            Ok(None) => missing.push(wname),
            Err(e) => return Err(e),
        }
        match named.get_f64(&bname, self.out_channels) {
            Ok(Some(b)) => self.bias = b,
            Ok(None) => missing.push(bname),
            Err(e) => return Err(e),
        }
        Ok(())
    }
}

/// Cross-correlation with zero padding. Taps whose weight is exactly zero are
/// skipped, so sparse hand-built layers stay cheap.
pub fn conv2d(input: &Tensor3, spec: &ConvSpec) -> Result<Tensor3> {
    spec.validate()?;
    if input.channels() != spec.in_channels {
        return Err(Error::shape(format!(
            "conv2d expects {} input channels, got {}",
            spec.in_channels,
            input.channels()
        )));
    }
    let (h, w) = (input.height(), input.width());
    let (oh, ow) = spec.output_size(h, w)?;
    let in_pg = spec.in_per_group();
    let out_pg = spec.out_per_group();
    let (stride, pad) = (spec.stride, spec.padding as isize);

    let mut out = vec![0.0; spec.out_channels * oh * ow];
    out.par_chunks_mut(oh * ow).enumerate().for_each(|(oc, plane)| {
        plane.fill(spec.bias[oc]);
        let g = oc / out_pg;
        for icg in 0..in_pg {
            let src = input.channel(g * in_pg + icg);
            for ky in 0..spec.kernel_h {
                for kx in 0..spec.kernel_w {
                    let wv = spec.weight(oc, icg, ky, kx);
                    if wv == 0.0 {
                        continue;
                    }
                    // ix = ox * stride + kx - pad must lie in [0, w)
                    let shift = kx as isize - pad;
                    let ox_lo = if shift >= 0 { 0 } else { ((-shift) as usize).div_ceil(stride) };
                    let ox_hi = if (w as isize) - shift <= 0 {
                        0
                    } else {
                        (((w as isize - shift) as usize).div_ceil(stride)).min(ow)
                    };
                    if ox_lo >= ox_hi {
                        continue;
                    }
                    for oy in 0..oh {
                        let iy = (oy * stride) as isize + ky as isize - pad;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let row = &src[iy as usize * w..(iy as usize + 1) * w];
                        let orow = &mut plane[oy * ow..(oy + 1) * ow];
                        if stride == 1 {
                            let base = (ox_lo as isize + shift) as usize;
                            for (o, &v) in orow[ox_lo..ox_hi].iter_mut().zip(&row[base..]) {
                                *o += wv * v;
                            }
                        } else {
                            for (ox, o) in orow.iter_mut().enumerate().take(ox_hi).skip(ox_lo) {
                                let ix = (ox * stride) as isize + shift;
                                *o += wv * row[ix as usize];
                            }
                        }
                    }
                }
            }
        }
        if spec.activation != Activation::None {
            for v in plane.iter_mut() {
                *v = spec.activation.apply(*v);
            }
        }
    });
    Tensor3::from_vec(spec.out_channels, oh, ow, out)
}

/// Transposed convolution: every input cell scatters `weight · value` to
/// `(iy·stride − padding + ky, ix·stride − padding + kx)`; targets outside
/// the output are cropped. This is the input-gradient of [`conv2d`] for
/// the [`ConvSpec::adjoint`] layer.
pub fn transposed_conv2d(input: &Tensor3, spec: &ConvSpec) -> Result<Tensor3> {
    spec.validate()?;
    if input.channels() != spec.in_channels {
        return Err(Error::shape(format!(
            "transposed_conv2d expects {} input channels, got {}",
            spec.in_channels,
            input.channels()
        )));
    }
    let (h, w) = (input.height(), input.width());
    let (oh, ow) = spec.transposed_output_size(h, w)?;
    let in_pg = spec.in_per_group();
    let out_pg = spec.out_per_group();
    let (stride, pad) = (spec.stride as isize, spec.padding as isize);

    let mut out = vec![0.0; spec.out_channels * oh * ow];
    out.par_chunks_mut(oh * ow).enumerate().for_each(|(oc, plane)| {
        plane.fill(spec.bias[oc]);
        let g = oc / out_pg;
        for icg in 0..in_pg {
            let src = input.channel(g * in_pg + icg);
            for ky in 0..spec.kernel_h {
                for kx in 0..spec.kernel_w {
                    let wv = spec.weight(oc, icg, ky, kx);
                    if wv == 0.0 {
                        continue;
                    }
                    for iy in 0..h {
                        let oy = iy as isize * stride - pad + ky as isize;
                        if oy < 0 || oy >= oh as isize {
                            continue;
                        }
                        let row = &src[iy * w..(iy + 1) * w];
                        let orow = &mut plane[oy as usize * ow..(oy as usize + 1) * ow];
                        for (ix, &v) in row.iter().enumerate() {
                            let ox = ix as isize * stride - pad + kx as isize;
                            if ox >= 0 && ox < ow as isize {
                                orow[ox as usize] += wv * v;
                            }
                        }
                    }
                }
            }
        }
        if spec.activation != Activation::None {
            for v in plane.iter_mut() {
                *v = spec.activation.apply(*v);
            }
        }
    });
    Tensor3::from_vec(spec.out_channels, oh, ow, out)
}
