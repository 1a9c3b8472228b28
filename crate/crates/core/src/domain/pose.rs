use serde::{Deserialize, Serialize};

use crate::pointcloud::normalize_angle;

/// Planar rigid pose of an agent in the world frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self {
            x,
            y,
            yaw: normalize_angle(yaw),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.yaw.is_finite()
    }

    /// Local (agent-frame) point to world coordinates.
    pub fn to_world(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.yaw.sin_cos();
        [self.x + c * p[0] - s * p[1], self.y + s * p[0] + c * p[1]]
    }

    /// World point to this agent's frame.
    pub fn to_local(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.yaw.sin_cos();
        let (dx, dy) = (p[0] - self.x, p[1] - self.y);
        [c * dx + s * dy, -s * dx + c * dy]
    }

    /// World-frame direction expressed in this agent's frame.
    pub fn rotate_to_local(&self, v: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.yaw.sin_cos();
        [c * v[0] + s * v[1], -s * v[0] + c * v[1]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn world_local_roundtrip() {
        let p = Pose2::new(3.0, -1.0, 0.7);
        let w = p.to_world([1.5, 2.0]);
        let l = p.to_local(w);
        assert!((l[0] - 1.5).abs() < 1e-12 && (l[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn quarter_turn() {
        let p = Pose2::new(0.0, 0.0, FRAC_PI_2);
        let w = p.to_world([1.0, 0.0]);
        assert!(w[0].abs() < 1e-12 && (w[1] - 1.0).abs() < 1e-12);
    }
}
