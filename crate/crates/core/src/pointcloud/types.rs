use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub intensity: f64,
}

impl Point {
    pub fn new(x: f64, y: f64, z: f64, intensity: f64) -> Self {
        Self { x, y, z, intensity }
    }

    pub fn xyz(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Point>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        match self
            .points
            .iter()
            .position(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
        {
            Some(i) => Err(Error::OutOfRange(format!("point {i} has non-finite coordinates"))),
            None => Ok(()),
        }
    }
}

/// Wraps an angle into `(−π, π]`.
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Boundary slack for the closed box test.
const CONTAIN_EPS: f64 = 1e-9;

/// A yaw-oriented 3-D box. `length` runs along the heading, `width` across
/// it, `height` along z; `center` is the geometric centre.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub center: [f64; 3],
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub yaw: f64,
}

impl OrientedBox {
    pub fn new(center: [f64; 3], length: f64, width: f64, height: f64, yaw: f64) -> Result<Self> {
        if !(length > 0.0 && width > 0.0 && height > 0.0) {
            return Err(Error::OutOfRange(format!(
                "box dims must be positive, got {length}x{width}x{height}"
            )));
        }
        Ok(Self {
            center,
            length,
            width,
            height,
            yaw: normalize_angle(yaw),
        })
    }

    /// Concentric box with every dimension multiplied by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            length: self.length * alpha,
            width: self.width * alpha,
            height: self.height * alpha,
            ..*self
        }
    }

    pub fn planar_distance_to(&self, x: f64, y: f64) -> f64 {
        (self.center[0] - x).hypot(self.center[1] - y)
    }

    /// Coordinates of `(x, y, z)` in the box frame.
    pub fn to_local(&self, x: f64, y: f64, z: f64) -> [f64; 3] {
        let (s, c) = self.yaw.sin_cos();
        let dx = x - self.center[0];
        let dy = y - self.center[1];
        [c * dx + s * dy, -s * dx + c * dy, z - self.center[2]]
    }

    /// Closed containment test (boundary inclusive).
    pub fn contains(&self, p: &Point) -> bool {
        let [u, v, w] = self.to_local(p.x, p.y, p.z);
        u.abs() <= self.length / 2.0 + CONTAIN_EPS
            && v.abs() <= self.width / 2.0 + CONTAIN_EPS
            && w.abs() <= self.height / 2.0 + CONTAIN_EPS
    }

    /// Closed containment of the ground-plane footprint.
    pub fn contains_planar(&self, x: f64, y: f64) -> bool {
        let [u, v, _] = self.to_local(x, y, self.center[2]);
        u.abs() <= self.length / 2.0 + CONTAIN_EPS && v.abs() <= self.width / 2.0 + CONTAIN_EPS
    }

    /// Footprint corners, counter-clockwise starting front-left.
    pub fn footprint(&self) -> [[f64; 2]; 4] {
        let (s, c) = self.yaw.sin_cos();
        let (hl, hw) = (self.length / 2.0, self.width / 2.0);
        [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)].map(|(u, v)| {
            [self.center[0] + c * u - s * v, self.center[1] + s * u + c * v]
        })
    }

    /// Axis-aligned envelope `[x_min, y_min, x_max, y_max]` of the footprint.
    pub fn planar_envelope(&self) -> [f64; 4] {
        let fp = self.footprint();
        let mut env = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for [x, y] in fp {
            env[0] = env[0].min(x);
            env[1] = env[1].min(y);
            env[2] = env[2].max(x);
            env[3] = env[3].max(y);
        }
        env
    }

    pub fn corners(&self) -> [[f64; 3]; 8] {
        let fp = self.footprint();
        let lo = self.center[2] - self.height / 2.0;
        let hi = self.center[2] + self.height / 2.0;
        let mut out = [[0.0; 3]; 8];
        for (i, [x, y]) in fp.iter().enumerate() {
            out[i] = [*x, *y, lo];
            out[i + 4] = [*x, *y, hi];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn yaw_normalized_to_half_open_interval() {
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(-PI) - PI).abs() < 1e-12);
        assert_eq!(normalize_angle(0.5), 0.5);
    }

    #[test]
    fn rejects_non_positive_dims() {
        assert!(OrientedBox::new([0.0; 3], 0.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn rotated_containment() {
        let b = OrientedBox::new([1.0, 1.0, 0.0], 4.0, 2.0, 2.0, PI / 2.0).unwrap();
        // length now runs along y
        assert!(b.contains(&Point::new(1.0, 2.9, 0.0, 0.0)));
        assert!(!b.contains(&Point::new(2.9, 1.0, 0.0, 0.0)));
        for c in b.corners() {
            assert!(b.contains(&Point::new(c[0], c[1], c[2], 0.0)));
        }
    }
}
