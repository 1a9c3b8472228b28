//! Multi-agent scenarios with analytic object kinematics.

use std::f64::consts::FRAC_PI_2;
use std::io::{Read, Write};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::domain::Pose2;
use crate::error::{Error, Result};
use crate::pointcloud::{normalize_angle, OrientedBox};
use crate::rng;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Template {
    /// Objects in one lane moving along +x.
    Straight,
    /// One object along +x and one along +y.
    #[default]
    Crossing,
    /// One object on a constant-rate arc.
    Turning,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub template: Template,
    pub seed: u64,
    pub duration: f64,
    pub dt: f64,
    /// Object speed in m/s.
    pub speed: f64,
    /// Number of objects for the straight template.
    pub objects: usize,
    /// Relative speed jitter drawn per object (0 disables).
    pub speed_jitter: f64,
    /// Yaw rate of the turning template, rad/s.
    pub yaw_rate: f64,
    /// `[length, width, height]` in metres.
    pub object_size: [f64; 3],
    pub ego_pose: [f64; 3],
    pub collaborator_pose: [f64; 3],
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            template: Template::Crossing,
            seed: 7,
            duration: 2.0,
            dt: 0.1,
            speed: 4.0,
            objects: 1,
            speed_jitter: 0.0,
            yaw_rate: 0.5,
            object_size: [4.0, 2.0, 1.6],
            ego_pose: [0.0, 0.0, 0.0],
            collaborator_pose: [-2.0, -4.8, FRAC_PI_2],
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("scenario.dt", "must be positive"));
        }
        if !(self.duration >= self.dt && self.duration.is_finite()) {
            return Err(Error::config("scenario.duration", "must cover at least one frame period"));
        }
        if !(self.speed >= 0.0 && self.speed.is_finite()) {
            return Err(Error::config("scenario.speed", "must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.speed_jitter) {
            return Err(Error::config("scenario.speed_jitter", "must lie in [0, 1)"));
        }
        if self.object_size.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::config("scenario.object_size", "dimensions must be positive"));
        }
        if self.template == Template::Straight && self.objects == 0 {
            return Err(Error::config("scenario.objects", "straight template needs at least one object"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Vehicle,
    Infrastructure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentTrace {
    pub id: u32,
    pub kind: AgentKind,
    /// Pose at every frame `k·dt`.
    pub poses: Vec<Pose2>,
}

/// A rigid object: box at `t = 0`, planar velocity and yaw rate. With a
/// non-zero yaw rate the velocity vector turns with the box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectTrack {
    pub id: u32,
    pub initial: OrientedBox,
    pub velocity: [f64; 2],
    pub yaw_rate: f64,
    /// Box at every frame, for inspection.
    pub trajectory: Vec<OrientedBox>,
}

impl ObjectTrack {
    fn new(id: u32, initial: OrientedBox, velocity: [f64; 2], yaw_rate: f64, frames: usize, dt: f64) -> Self {
        let mut track = Self {
            id,
            initial,
            velocity,
            yaw_rate,
            trajectory: Vec::new(),
        };
        track.trajectory = (0..frames).map(|k| track.box_at(k as f64 * dt)).collect();
        track
    }

    /// World-frame box at time `t`.
    pub fn box_at(&self, t: f64) -> OrientedBox {
        let [x0, y0, z0] = self.initial.center;
        let (vx, vy) = (self.velocity[0], self.velocity[1]);
        let w = self.yaw_rate;
        let (x, y) = if w.abs() < 1e-12 {
            (x0 + vx * t, y0 + vy * t)
        } else {
            // velocity rotates at rate w: integrate R(wt)·v
            let (s, c) = (w * t).sin_cos();
            (
                x0 + (vx * s - vy * (1.0 - c)) / w,
                y0 + (vx * (1.0 - c) + vy * s) / w,
            )
        };
        OrientedBox {
            center: [x, y, z0],
            yaw: normalize_angle(self.initial.yaw + w * t),
            ..self.initial
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub template: Template,
    pub seed: u64,
    pub duration: f64,
    pub dt: f64,
    pub agents: Vec<AgentTrace>,
    pub objects: Vec<ObjectTrack>,
}

pub const EGO_ID: u32 = 0;

impl Scenario {
    pub fn frames(&self) -> usize {
        (self.duration / self.dt).round() as usize + 1
    }

    pub fn agent(&self, id: u32) -> Result<&AgentTrace> {
        self.agents.iter().find(|a| a.id == id).ok_or(Error::UnknownAgent(id))
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= -1e-9 && t <= self.duration + 1e-9) {
            return Err(Error::OutOfRange(format!("time {t} outside [0, {}]", self.duration)));
        }
        Ok(())
    }

    /// Pose of an agent at `t`, linearly interpolated between frames.
    pub fn pose_at(&self, id: u32, t: f64) -> Result<Pose2> {
        self.check_time(t)?;
        let a = self.agent(id)?;
        let last = a.poses.len().saturating_sub(1);
        let k = (t / self.dt).clamp(0.0, last as f64);
        let (i, f) = (k.floor() as usize, k - k.floor());
        let p = a.poses[i];
        if f < 1e-12 || i == last {
            return Ok(p);
        }
        let q = a.poses[i + 1];
        let dyaw = normalize_angle(q.yaw - p.yaw);
        Ok(Pose2::new(p.x + f * (q.x - p.x), p.y + f * (q.y - p.y), p.yaw + f * dyaw))
    }

    /// World-frame boxes of every object at `t`.
    pub fn boxes_at(&self, t: f64) -> Result<Vec<OrientedBox>> {
        self.check_time(t)?;
        Ok(self.objects.iter().map(|o| o.box_at(t)).collect())
    }

    /// Boxes at `t` expressed in an agent's frame.
    pub fn boxes_in_frame(&self, id: u32, t: f64) -> Result<Vec<OrientedBox>> {
        let pose = self.pose_at(id, t)?;
        Ok(self
            .boxes_at(t)?
            .into_iter()
            .map(|b| box_to_local(&b, &pose))
            .collect())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self).map_err(|e| Error::Io(e.into()))
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_reader(input);
        let s: Scenario = serde_path_to_error::deserialize(&mut de)
            .map_err(|e| Error::config(e.path().to_string(), e.inner().to_string()))?;
        if !(s.dt > 0.0) || s.agents.is_empty() {
            return Err(Error::config("dt", "scenario needs dt > 0 and at least one agent"));
        }
        Ok(s)
    }
}

pub fn box_to_local(b: &OrientedBox, pose: &Pose2) -> OrientedBox {
    let [x, y] = pose.to_local([b.center[0], b.center[1]]);
    OrientedBox {
        center: [x, y, b.center[2]],
        yaw: normalize_angle(b.yaw - pose.yaw),
        ..*b
    }
}

pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let frames = (cfg.duration / cfg.dt).round() as usize + 1;
    let mut r = rng::stream(cfg.seed, rng::stream_id(&[0x7363]));
    let mut speed = || {
        if cfg.speed_jitter > 0.0 {
            cfg.speed * (1.0 + r.random_range(-cfg.speed_jitter..cfg.speed_jitter))
        } else {
            cfg.speed
        }
    };
    let [l, w, h] = cfg.object_size;
    let mk = |x: f64, y: f64, yaw: f64| OrientedBox::new([x, y, h / 2.0], l, w, h, yaw);
    let mut objects = Vec::new();
    match cfg.template {
        Template::Straight => {
            for k in 0..cfg.objects {
                let b = mk(-8.0 - 6.0 * k as f64, -3.0, 0.0)?;
                objects.push(ObjectTrack::new(k as u32, b, [speed(), 0.0], 0.0, frames, cfg.dt));
            }
        }
        Template::Crossing => {
            let a = mk(-8.0, -3.0, 0.0)?;
            objects.push(ObjectTrack::new(0, a, [speed(), 0.0], 0.0, frames, cfg.dt));
            let b = mk(5.0, -9.2, FRAC_PI_2)?;
            objects.push(ObjectTrack::new(1, b, [0.0, speed()], 0.0, frames, cfg.dt));
        }
        Template::Turning => {
            let a = mk(-6.0, -3.0, 0.0)?;
            objects.push(ObjectTrack::new(0, a, [speed(), 0.0], cfg.yaw_rate, frames, cfg.dt));
        }
    }
    let fixed = |id: u32, kind: AgentKind, p: [f64; 3]| AgentTrace {
        id,
        kind,
        poses: vec![Pose2::new(p[0], p[1], p[2]); frames],
    };
    Ok(Scenario {
        template: cfg.template,
        seed: cfg.seed,
        duration: cfg.duration,
        dt: cfg.dt,
        agents: vec![
            fixed(EGO_ID, AgentKind::Vehicle, cfg.ego_pose),
            fixed(1, AgentKind::Infrastructure, cfg.collaborator_pose),
        ],
        objects,
    })
}
