//! Per-agent LiDAR-like point clouds.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::scenario::Scenario;
use crate::domain::Pose2;
use crate::error::{Error, Result};
use crate::pointcloud::{OrientedBox, Point, PointCloud};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    /// Points per patch are `density · area / d²` (at least one).
    pub density: f64,
    /// Nominal surface patch edge, metres.
    pub patch: f64,
    /// Ground lattice spacing, metres.
    pub ground_spacing: f64,
    /// Half extent of the square ground lattice around the world origin.
    pub ground_extent: f64,
    pub range: f64,
    pub object_intensity: f64,
    pub ground_intensity: f64,
    /// Distance floor in the density law.
    pub min_distance: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            density: 1.0e4,
            patch: 0.2,
            ground_spacing: 0.4,
            ground_extent: 20.0,
            range: 40.0,
            object_intensity: 0.8,
            ground_intensity: 0.2,
            min_distance: 1.0,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("render.density", self.density),
            ("render.patch", self.patch),
            ("render.ground_spacing", self.ground_spacing),
            ("render.range", self.range),
            ("render.min_distance", self.min_distance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, "must be positive"));
            }
        }
        if !(self.ground_extent >= 0.0) {
            return Err(Error::config("render.ground_extent", "must be non-negative"));
        }
        Ok(())
    }
}

// surface points sit this far inside the box so they never land on a cell edge
const INSET: f64 = 1e-3;

struct Face {
    /// Body-frame origin corner and the two spanning edge vectors.
    origin: [f64; 3],
    u: [f64; 3],
    v: [f64; 3],
}

fn faces(b: &OrientedBox) -> [Face; 5] {
    let (l, w, h) = (b.length / 2.0 - INSET, b.width / 2.0 - INSET, b.height / 2.0 - INSET);
    [
        // top
        Face { origin: [-l, -w, h], u: [2.0 * l, 0.0, 0.0], v: [0.0, 2.0 * w, 0.0] },
        // front / back
        Face { origin: [l, -w, -h], u: [0.0, 2.0 * w, 0.0], v: [0.0, 0.0, 2.0 * h] },
        Face { origin: [-l, -w, -h], u: [0.0, 2.0 * w, 0.0], v: [0.0, 0.0, 2.0 * h] },
        // sides
        Face { origin: [-l, w, -h], u: [2.0 * l, 0.0, 0.0], v: [0.0, 0.0, 2.0 * h] },
        Face { origin: [-l, -w, -h], u: [2.0 * l, 0.0, 0.0], v: [0.0, 0.0, 2.0 * h] },
    ]
}

fn norm3(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn body_to_world(b: &OrientedBox, p: [f64; 3]) -> [f64; 3] {
    let (s, c) = b.yaw.sin_cos();
    [
        b.center[0] + c * p[0] - s * p[1],
        b.center[1] + s * p[0] + c * p[1],
        b.center[2] + p[2],
    ]
}

/// Samples one object's surfaces as seen from `pose`. Each patch replays a
/// fixed candidate sequence and keeps a distance-dependent prefix, so nearer
/// views are supersets of farther ones.
fn render_object(
    b: &OrientedBox,
    object: u32,
    pose: &Pose2,
    seed: u64,
    cfg: &RenderConfig,
    out: &mut Vec<Point>,
) {
    for (fi, f) in faces(b).iter().enumerate() {
        let (lu, lv) = (norm3(f.u), norm3(f.v));
        let nu = ((lu / cfg.patch).round() as usize).max(1);
        let nv = ((lv / cfg.patch).round() as usize).max(1);
        let area = (lu / nu as f64) * (lv / nv as f64);
        for iu in 0..nu {
            for iv in 0..nv {
                let at = |a: f64, bb: f64| {
                    let (a, bb) = (a / nu as f64, bb / nv as f64);
                    [
                        f.origin[0] + a * f.u[0] + bb * f.v[0],
                        f.origin[1] + a * f.u[1] + bb * f.v[1],
                        f.origin[2] + a * f.u[2] + bb * f.v[2],
                    ]
                };
                let centre = body_to_world(b, at(iu as f64 + 0.5, iv as f64 + 0.5));
                let d = (centre[0] - pose.x)
                    .hypot(centre[1] - pose.y)
                    .max(cfg.min_distance);
                let count = ((cfg.density * area / (d * d)).round() as usize).max(1);
                let mut r = rng::stream(seed, rng::stream_id(&[0x7265, object as u64, fi as u64, (iu * nv + iv) as u64]));
                for _ in 0..count {
                    let (a, bb): (f64, f64) = (r.random(), r.random());
                    let wp = body_to_world(b, at(iu as f64 + a, iv as f64 + bb));
                    let lp = pose.to_local([wp[0], wp[1]]);
                    if lp[0].hypot(lp[1]) <= cfg.range {
                        out.push(Point::new(lp[0], lp[1], wp[2], cfg.object_intensity));
                    }
                }
            }
        }
    }
}

fn render_ground(pose: &Pose2, cfg: &RenderConfig, out: &mut Vec<Point>) {
    let s = cfg.ground_spacing;
    let n = (2.0 * cfg.ground_extent / s).floor() as usize;
    for i in 0..n {
        for j in 0..n {
            let world = [
                -cfg.ground_extent + s * (j as f64 + 0.5),
                -cfg.ground_extent + s * (i as f64 + 0.5),
            ];
            let lp = pose.to_local(world);
            if lp[0].hypot(lp[1]) <= cfg.range {
                out.push(Point::new(lp[0], lp[1], 0.0, cfg.ground_intensity));
            }
        }
    }
}

/// Point cloud of agent `agent` at time `t`, in that agent's frame.
pub fn render_pointcloud(scenario: &Scenario, agent: u32, t: f64, cfg: &RenderConfig) -> Result<PointCloud> {
    cfg.validate()?;
    let pose = scenario.pose_at(agent, t)?;
    let mut points = Vec::new();
    render_ground(&pose, cfg, &mut points);
    for o in &scenario.objects {
        render_object(&o.box_at(t), o.id, &pose, scenario.seed, cfg, &mut points);
    }
    Ok(PointCloud::new(points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::{generate_scenario, ScenarioConfig};

    fn object_points(c: &PointCloud) -> usize {
        c.points.iter().filter(|p| p.z > 0.0).count()
    }

    fn static_object_at(x: f64) -> Scenario {
        let mut s = generate_scenario(&ScenarioConfig {
            template: crate::sim::Template::Straight,
            speed: 0.0,
            ..Default::default()
        })
        .unwrap();
        s.objects[0].initial.center[0] = x;
        s.objects[0].initial.center[1] = 0.0;
        s
    }

    #[test]
    fn inverse_square_density() {
        let cfg = RenderConfig::default();
        let near = object_points(&render_pointcloud(&static_object_at(10.0), 0, 0.0, &cfg).unwrap());
        let far = object_points(&render_pointcloud(&static_object_at(20.0), 0, 0.0, &cfg).unwrap());
        assert!(near >= 3 * far, "{near} vs {far}");
    }

    #[test]
    fn ground_only_without_objects() {
        let mut s = static_object_at(0.0);
        s.objects.clear();
        let c = render_pointcloud(&s, 0, 0.0, &RenderConfig::default()).unwrap();
        assert!(!c.is_empty());
        assert!(c.points.iter().all(|p| p.z == 0.0));
    }

    #[test]
    fn agents_see_different_counts() {
        let s = generate_scenario(&ScenarioConfig::default()).unwrap();
        let cfg = RenderConfig::default();
        let a = object_points(&render_pointcloud(&s, 0, 1.0, &cfg).unwrap());
        let b = object_points(&render_pointcloud(&s, 1, 1.0, &cfg).unwrap());
        assert_ne!(a, b);
        assert_eq!(render_pointcloud(&s, 1, 1.0, &cfg).unwrap().len(), render_pointcloud(&s, 1, 1.0, &cfg).unwrap().len());
        assert!(matches!(render_pointcloud(&s, 4, 1.0, &cfg), Err(Error::UnknownAgent(4))));
    }
}
