use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A `channels × height × width` grid of reals, stored channel-major then
/// row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor3 {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self::filled(channels, height, width, 0.0)
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f64) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![value; channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::shape(format!(
                "data length {} does not match {channels}x{height}x{width}",
                data.len()
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    #[inline]
    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, c: usize, y: usize, x: usize) -> usize {
        debug_assert!(c < self.channels && y < self.height && x < self.width);
        (c * self.height + y) * self.width + x
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.index(c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, value: f64) {
        let i = self.index(c, y, x);
        self.data[i] = value;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn same_shape(&self, other: &Tensor3) -> bool {
        self.shape() == other.shape()
    }

    pub fn ensure_same_shape(&self, other: &Tensor3, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "{what}: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )))
        }
    }

    /// Checks that `other` is a single-channel plane matching this grid.
    pub fn ensure_plane_of(&self, plane: &Tensor3, what: &str) -> Result<()> {
        if plane.channels == 1 && plane.height == self.height && plane.width == self.width {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "{what}: expected 1x{}x{}, got {:?}",
                self.height,
                self.width,
                plane.shape()
            )))
        }
    }

    pub fn concat_channels(parts: &[&Tensor3]) -> Result<Tensor3> {
        let first = parts
            .first()
            .ok_or_else(|| Error::shape("concatenation of zero tensors"))?;
        let (h, w) = (first.height, first.width);
        let mut data = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
        let mut channels = 0;
        for p in parts {
            if p.height != h || p.width != w {
                return Err(Error::shape(format!(
                    "concat: spatial {}x{} vs {}x{}",
                    p.height, p.width, h, w
                )));
            }
            channels += p.channels;
            data.extend_from_slice(&p.data);
        }
        Tensor3::from_vec(channels, h, w, data)
    }

    pub fn slice_channels(&self, start: usize, end: usize) -> Tensor3 {
        assert!(start <= end && end <= self.channels, "channel slice out of range");
        let n = self.plane_len();
        Tensor3 {
            channels: end - start,
            height: self.height,
            width: self.width,
            data: self.data[start * n..end * n].to_vec(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor3 {
        Tensor3 {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor3, f: impl Fn(f64, f64) -> f64) -> Result<Tensor3> {
        self.ensure_same_shape(other, "elementwise")?;
        Ok(Tensor3 {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Tensor3) -> Result<Tensor3> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor3) -> Result<Tensor3> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn hadamard(&self, other: &Tensor3) -> Result<Tensor3> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Tensor3 {
        self.map(|v| v * s)
    }

    pub fn add_assign(&mut self, other: &Tensor3) -> Result<()> {
        self.ensure_same_shape(other, "add_assign")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// Multiplies every channel by a `1×H×W` plane.
    pub fn mul_plane(&self, plane: &Tensor3) -> Result<Tensor3> {
        self.zip_plane(plane, |a, m| a * m)
    }

    /// Applies `f(value, plane_value)` with the plane broadcast over channels.
    pub fn zip_plane(&self, plane: &Tensor3, f: impl Fn(f64, f64) -> f64) -> Result<Tensor3> {
        self.ensure_plane_of(plane, "plane broadcast")?;
        let n = self.plane_len();
        let mut out = self.clone();
        for c in 0..self.channels {
            for (v, &m) in out.data[c * n..(c + 1) * n].iter_mut().zip(&plane.data) {
                *v = f(*v, m);
            }
        }
        Ok(out)
    }

    pub fn dot(&self, other: &Tensor3) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Tensor3) -> f64 {
        assert!(self.same_shape(other), "max_abs_diff shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Per-channel spatial mean, as a `C×1×1` tensor.
    pub fn global_average_pool(&self) -> Tensor3 {
        let n = self.plane_len().max(1) as f64;
        Tensor3 {
            channels: self.channels,
            height: 1,
            width: 1,
            data: (0..self.channels)
                .map(|c| self.channel(c).iter().sum::<f64>() / n)
                .collect(),
        }
    }
}
