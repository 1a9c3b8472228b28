//! Height-semantic verification weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::init::he_conv;
use crate::numerics::{conv2d, Activation, ConvSpec, NamedTensors, Tensor3};

/// Interleaves `groups` equal channel groups: output channel `i·g + j`
/// takes input channel `j·(C/g) + i`.
pub fn channel_shuffle(x: &Tensor3, groups: usize) -> Result<Tensor3> {
    let c = x.channels();
    if groups == 0 || c % groups != 0 {
        return Err(Error::config("ifam.shuffle_groups", format!("{groups} groups do not divide {c} channels")));
    }
    let per = c / groups;
    let mut out = Tensor3::zeros(c, x.height(), x.width());
    for i in 0..per {
        for j in 0..groups {
            out.channel_mut(i * groups + j).copy_from_slice(x.channel(j * per + i));
        }
    }
    Ok(out)
}

/// Inverse of [`channel_shuffle`] with the same group count.
pub fn channel_unshuffle(x: &Tensor3, groups: usize) -> Result<Tensor3> {
    let c = x.channels();
    if groups == 0 || c % groups != 0 {
        return Err(Error::config("ifam.shuffle_groups", format!("{groups} groups do not divide {c} channels")));
    }
    channel_shuffle(x, c / groups)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyOutput {
    /// One weight per channel and cell.
    #[default]
    PerChannel,
    /// One weight per cell (channel mean), broadcast over channels.
    Single,
}

/// Spatial attention on `[max_c, mean_c]`, channel attention on pooled
/// features, their broadcast sum, then shuffle, grouped 1×1 conv, sigmoid.
#[derive(Clone, Debug, PartialEq)]
pub struct VerificationSpec {
    pub channels: usize,
    pub spatial: ConvSpec,
    pub channel_a: ConvSpec,
    pub channel_b: ConvSpec,
    pub gconv: ConvSpec,
    pub shuffle_groups: usize,
    pub output: VerifyOutput,
}

const PARTS: [&str; 4] = ["spatial", "channel_a", "channel_b", "gconv"];

impl VerificationSpec {
    /// Zero weights for `channels`-channel features; `reduction` sizes the
    /// channel-attention bottleneck.
    pub fn zeros(channels: usize, reduction: usize, conv_groups: usize, shuffle_groups: usize) -> Result<Self> {
        let c2 = 2 * channels;
        let bottleneck = (c2 / reduction.max(1)).max(1);
        if conv_groups == 0 || (4 * channels) % conv_groups != 0 || channels % conv_groups != 0 {
            return Err(Error::config(
                "ifam.conv_groups",
                format!("{conv_groups} groups do not divide {} and {channels}", 4 * channels),
            ));
        }
        if shuffle_groups == 0 || (4 * channels) % shuffle_groups != 0 {
            return Err(Error::config(
                "ifam.shuffle_groups",
                format!("{shuffle_groups} groups do not divide {}", 4 * channels),
            ));
        }
        Ok(Self {
            channels,
            spatial: ConvSpec::new(1, 2, 3, 3).with_padding(1).with_activation(Activation::Sigmoid),
            channel_a: ConvSpec::new(bottleneck, c2, 1, 1).with_activation(Activation::Relu),
            channel_b: ConvSpec::new(c2, bottleneck, 1, 1).with_activation(Activation::Sigmoid),
            gconv: ConvSpec::new(channels, 4 * channels, 1, 1).with_groups(conv_groups),
            shuffle_groups,
            output: VerifyOutput::PerChannel,
        })
    }

    pub fn seeded(mut self, seed: u64) -> Self {
        for (i, s) in [&mut self.spatial, &mut self.channel_a, &mut self.channel_b, &mut self.gconv]
            .into_iter()
            .enumerate()
        {
            he_conv(s, seed, 0x7665_0000 + i as u64);
        }
        self
    }

    fn layers_mut(&mut self) -> [&mut ConvSpec; 4] {
        [&mut self.spatial, &mut self.channel_a, &mut self.channel_b, &mut self.gconv]
    }

    pub fn import(&mut self, prefix: &str, named: &NamedTensors, missing: &mut Vec<String>) -> Result<()> {
        for (s, part) in self.layers_mut().into_iter().zip(PARTS) {
            s.import(&format!("{prefix}.{part}"), named, missing)?;
        }
        Ok(())
    }

    pub fn export(&self, prefix: &str, named: &mut NamedTensors) {
        for (s, part) in [&self.spatial, &self.channel_a, &self.channel_b, &self.gconv].into_iter().zip(PARTS) {
            s.export(&format!("{prefix}.{part}"), named);
        }
    }
}

/// Per-cell channel max and mean of `x` as a `2×H×W` tensor.
pub fn max_mean_maps(x: &Tensor3) -> Tensor3 {
    let (c, h, w) = x.shape();
    let mut out = Tensor3::zeros(2, h, w);
    for i in 0..h * w {
        let mut m = f64::NEG_INFINITY;
        let mut s = 0.0;
        for ch in 0..c {
            let v = x.channel(ch)[i];
            m = m.max(v);
            s += v;
        }
        out.data_mut()[i] = if c == 0 { 0.0 } else { m };
        out.data_mut()[h * w + i] = s / c.max(1) as f64;
    }
    out
}

pub fn verification_weights(h_fore: &Tensor3, h_enh: &Tensor3, spec: &VerificationSpec) -> Result<Tensor3> {
    h_fore.ensure_same_shape(h_enh, "verification inputs")?;
    if h_fore.channels() != spec.channels {
        return Err(Error::shape(format!(
            "verification built for {} channels, got {}",
            spec.channels,
            h_fore.channels()
        )));
    }
    let cat = Tensor3::concat_channels(&[h_fore, h_enh])?;
    let spatial = conv2d(&max_mean_maps(&cat), &spec.spatial)?;
    let pooled = cat.global_average_pool();
    let chan = conv2d(&conv2d(&pooled, &spec.channel_a)?, &spec.channel_b)?;
    let (c2, h, w) = cat.shape();
    let init = Tensor3::from_fn(c2, h, w, |c, y, x| spatial.get(0, y, x) + chan.get(c, 0, 0));
    let mixed = channel_shuffle(&Tensor3::concat_channels(&[&cat, &init])?, spec.shuffle_groups)?;
    let logits = conv2d(&mixed, &spec.gconv)?;
    let weights = logits.map(crate::numerics::sigmoid);
    Ok(match spec.output {
        VerifyOutput::PerChannel => weights,
        VerifyOutput::Single => {
            let c = weights.channels();
            let mean = Tensor3::from_fn(1, h, w, |_, y, x| {
                (0..c).map(|ch| weights.get(ch, y, x)).sum::<f64>() / c as f64
            });
            Tensor3::from_fn(c, h, w, |_, y, x| mean.get(0, y, x))
        }
    })
}
