//! Structural 3×3 kernel banks derived from one base bank.

use crate::error::{Error, Result};
use crate::numerics::{conv2d, ConvSpec, Tensor3};

/// A base 3×3 bank and the four banks derived from it:
///
/// * centre-surround: base surround, centre = −(sum of surround);
/// * horizontal: base left column, zero middle, right = −left;
/// * vertical: base top row, zero middle, bottom = −top;
/// * angular: `base − rot90(base)` (clockwise).
///
/// Derived banks carry zero bias.
#[derive(Clone, Debug, PartialEq)]
pub struct StructKernels {
    pub base: ConvSpec,
    pub center_surround: ConvSpec,
    pub horizontal: ConvSpec,
    pub vertical: ConvSpec,
    pub angular: ConvSpec,
}

type K3 = [[f64; 3]; 3];

fn read(spec: &ConvSpec, oc: usize, ic: usize) -> K3 {
    let mut k = [[0.0; 3]; 3];
    for (y, row) in k.iter_mut().enumerate() {
        for (x, v) in row.iter_mut().enumerate() {
            *v = spec.weight(oc, ic, y, x);
        }
    }
    k
}

fn write(spec: &mut ConvSpec, oc: usize, ic: usize, k: &K3) {
    for (y, row) in k.iter().enumerate() {
        for (x, &v) in row.iter().enumerate() {
            spec.set_weight(oc, ic, y, x, v);
        }
    }
}

/// Clockwise quarter turn: `new[i][j] = old[2 − j][i]`.
pub fn rotate90(k: &K3) -> K3 {
    let mut r = [[0.0; 3]; 3];
    for (i, row) in r.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = k[2 - j][i];
        }
    }
    r
}

pub fn center_surround_kernel(k: &K3) -> K3 {
    let mut out = *k;
    let surround: f64 = (0..9).filter(|&i| i != 4).map(|i| k[i / 3][i % 3]).sum();
    out[1][1] = -surround;
    out
}

pub fn horizontal_kernel(k: &K3) -> K3 {
    let mut out = [[0.0; 3]; 3];
    for y in 0..3 {
        out[y][0] = k[y][0];
        out[y][2] = -k[y][0];
    }
    out
}

pub fn vertical_kernel(k: &K3) -> K3 {
    let mut out = [[0.0; 3]; 3];
    for x in 0..3 {
        out[0][x] = k[0][x];
        out[2][x] = -k[0][x];
    }
    out
}

pub fn angular_kernel(k: &K3) -> K3 {
    let r = rotate90(k);
    let mut out = [[0.0; 3]; 3];
    for y in 0..3 {
        for x in 0..3 {
            out[y][x] = k[y][x] - r[y][x];
        }
    }
    out
}

impl StructKernels {
    pub fn from_base(base: ConvSpec) -> Result<Self> {
        base.validate()?;
        if (base.kernel_h, base.kernel_w, base.stride, base.padding) != (3, 3, 1, 1) {
            return Err(Error::shape("structural base bank must be 3x3, stride 1, padding 1"));
        }
        let zeroed = || {
            let mut s = base.clone();
            s.weights.iter_mut().for_each(|w| *w = 0.0);
            s.bias.iter_mut().for_each(|b| *b = 0.0);
            s
        };
        let (mut cs, mut hz, mut vt, mut an) = (zeroed(), zeroed(), zeroed(), zeroed());
        for oc in 0..base.out_channels {
            for ic in 0..base.in_per_group() {
                let k = read(&base, oc, ic);
                write(&mut cs, oc, ic, &center_surround_kernel(&k));
                write(&mut hz, oc, ic, &horizontal_kernel(&k));
                write(&mut vt, oc, ic, &vertical_kernel(&k));
                write(&mut an, oc, ic, &angular_kernel(&k));
            }
        }
        Ok(Self {
            base,
            center_surround: cs,
            horizontal: hz,
            vertical: vt,
            angular: an,
        })
    }

    /// `channels → channels` bank with the given grouping.
    pub fn zeros(channels: usize, groups: usize) -> Result<Self> {
        Self::from_base(ConvSpec::new(channels, channels, 3, 3).with_padding(1).with_groups(groups))
    }

    pub fn banks(&self) -> [&ConvSpec; 5] {
        [&self.base, &self.center_surround, &self.horizontal, &self.vertical, &self.angular]
    }

    /// One bank whose weights and biases are the sums of the five.
    pub fn fused(&self) -> ConvSpec {
        let mut f = self.base.clone();
        for b in &self.banks()[1..] {
            for (a, v) in f.weights.iter_mut().zip(&b.weights) {
                *a += v;
            }
            for (a, v) in f.bias.iter_mut().zip(&b.bias) {
                *a += v;
            }
        }
        f
    }
}

/// Sum of the five bank responses, via the fused bank.
pub fn struct_conv(h_fore: &Tensor3, kernels: &StructKernels) -> Result<Tensor3> {
    conv2d(h_fore, &kernels.fused())
}

/// Sum of the five bank responses, one convolution per bank.
pub fn struct_conv_separate(h_fore: &Tensor3, kernels: &StructKernels) -> Result<Tensor3> {
    let mut acc = conv2d(h_fore, kernels.banks()[0])?;
    for b in &kernels.banks()[1..] {
        acc.add_assign(&conv2d(h_fore, b)?)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: K3 = [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]];

    #[test]
    fn constructions() {
        assert_eq!(center_surround_kernel(&[[1.0; 3]; 3])[1][1], -8.0);
        assert_eq!(horizontal_kernel(&BASE), [[1.0, 0.0, -1.0], [4.0, 0.0, -4.0], [7.0, 0.0, -7.0]]);
        assert_eq!(vertical_kernel(&BASE), [[1.0, 2.0, 3.0], [0.0; 3], [-1.0, -2.0, -3.0]]);
        assert_eq!(rotate90(&BASE), [[7.0, 4.0, 1.0], [8.0, 5.0, 2.0], [9.0, 6.0, 3.0]]);
    }

    #[test]
    fn constant_input_interior_response() {
        let mut base = ConvSpec::new(1, 1, 3, 3).with_padding(1);
        base.weights = BASE.iter().flatten().copied().collect();
        let k = StructKernels::from_base(base).unwrap();
        let x = Tensor3::filled(1, 5, 5, 2.0);
        for bank in [&k.center_surround, &k.horizontal, &k.vertical, &k.angular] {
            assert_eq!(conv2d(&x, bank).unwrap().get(0, 2, 2), 0.0);
        }
        let full = struct_conv(&x, &k).unwrap();
        assert_eq!(full.get(0, 2, 2), 2.0 * 45.0);
    }

    #[test]
    fn identity_base_gives_identity() {
        let mut base = ConvSpec::new(2, 2, 3, 3).with_padding(1).with_groups(2);
        base.set_weight(0, 0, 1, 1, 1.0);
        base.set_weight(1, 0, 1, 1, 1.0);
        let k = StructKernels::from_base(base).unwrap();
        let x = Tensor3::from_fn(2, 4, 4, |c, y, xx| (c * 16 + y * 4 + xx) as f64);
        assert_eq!(struct_conv(&x, &k).unwrap(), x);
    }
}
