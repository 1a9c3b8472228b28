//! End-to-end run: render, featurise, align, transmit, fuse, detect.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::codec::{transmit, CodecConfig, CodecReport, Payload};
use super::complexity::{count_similarity_ops, SimilarityMode};
use super::config::{ModelSource, MotionMode, SimConfig};
use super::detect::{detect, ground_truth_boxes, summarize, DetectionSummary, FrameEval};
use super::flow::{ideal_fields, max_displacement_cells};
use super::render::render_pointcloud;
use super::scenario::{Scenario, EGO_ID};
use crate::domain::{
    complete_voids, discriminator_forward, domain_loss_and_grads, observability_weighting, transform_to_ego,
    DiscriminatorSpec, ForegroundEstimator, ObservabilityMap, Pose2,
};
use crate::error::{Error, Result};
use crate::featurizer::backbone::{LARGE_CHANNELS, MIDDLE_CHANNELS, SMALL_CHANNELS};
use crate::featurizer::{pillar_encode, Backbone, BevProjection, MultiScaleFeatures, BEV_CHANNELS};
use crate::fusion::{foreground_loss, Ifam};
use crate::numerics::{NamedTensors, Tensor3};
use crate::pointcloud::phd_apply;
use crate::rng;
use crate::temporal::{
    alignment_loss, ptam_stage1, ptam_stage2, window_cosine_loss, CosineGranularity, DelayContext, MotionField,
    MotionSource, NoTally, OpCounts, PtamWeights, XiMode,
};

pub const SCALE_CHANNELS: [usize; 3] = [LARGE_CHANNELS, MIDDLE_CHANNELS, SMALL_CHANNELS];

/// Every network the pipeline evaluates.
#[derive(Clone, Debug, PartialEq)]
pub struct Models {
    pub backbone: Backbone,
    pub projection: BevProjection,
    pub foreground: ForegroundEstimator,
    pub ifam: Ifam,
    pub ptam: PtamWeights,
    pub discriminator: DiscriminatorSpec,
}

impl Models {
    pub fn analytic(cfg: &SimConfig) -> Result<Self> {
        let seed = cfg.model.seed;
        let fg = &cfg.foreground;
        Ok(Self {
            backbone: Backbone::analytic(seed),
            projection: BevProjection::analytic(seed),
            foreground: ForegroundEstimator::threshold_on(BEV_CHANNELS, fg.channel, fg.gain, fg.threshold)?,
            ifam: Ifam::analytic(BEV_CHANNELS, &cfg.ifam)?,
            ptam: PtamWeights::new(&SCALE_CHANNELS, cfg.ptam.hidden, seed),
            discriminator: DiscriminatorSpec::seeded(BEV_CHANNELS, seed),
        })
    }

    /// Loads every network; reports all missing names together.
    pub fn from_weights(cfg: &SimConfig, named: &NamedTensors) -> Result<Self> {
        let mut missing = Vec::new();
        let mut grab = |r: Result<()>| match r {
            Err(Error::MissingWeights(m)) => {
                missing.extend(m);
                Ok(())
            }
            other => other,
        };
        let mut out = Self::analytic(cfg)?;
        grab(Backbone::from_weights(named).map(|v| out.backbone = v))?;
        grab(BevProjection::from_weights(named).map(|v| out.projection = v))?;
        grab(ForegroundEstimator::from_weights(BEV_CHANNELS, named).map(|v| out.foreground = v))?;
        grab(Ifam::from_weights(BEV_CHANNELS, &cfg.ifam, named).map(|v| out.ifam = v))?;
        grab(PtamWeights::from_weights(&SCALE_CHANNELS, cfg.ptam.hidden, named).map(|v| out.ptam = v))?;
        grab(DiscriminatorSpec::from_weights(BEV_CHANNELS, named).map(|v| out.discriminator = v))?;
        if !missing.is_empty() {
            return Err(Error::MissingWeights(missing));
        }
        Ok(out)
    }

    pub fn load(cfg: &SimConfig) -> Result<Self> {
        match (&cfg.model.source, &cfg.model.archive) {
            (ModelSource::Analytic, _) => Self::analytic(cfg),
            (ModelSource::Archive, Some(path)) => {
                let named = NamedTensors::read_from(std::io::BufReader::new(std::fs::File::open(path)?))?;
                Self::from_weights(cfg, &named)
            }
            (ModelSource::Archive, None) => Err(Error::config("model.archive", "no archive path given")),
        }
    }

    pub fn export(&self) -> NamedTensors {
        let mut named = NamedTensors::new();
        self.backbone.export(&mut named);
        self.projection.export(&mut named);
        self.foreground.export(&mut named);
        self.ifam.export(&mut named);
        self.ptam.export(&mut named);
        self.discriminator.export(&mut named);
        named
    }
}

/// Per-run switches; defaults come from the `run`, `ptam` and `codec`
/// sections of the configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub tau_ms: f64,
    pub phd: bool,
    pub ptam: bool,
    pub xi: XiMode,
    pub motion: MotionMode,
    pub codec: CodecConfig,
    pub sigma_local_m: f64,
    pub sigma_head_deg: f64,
    /// Salt for the pose-noise stream, so grid points draw independently.
    pub noise_stream: u64,
    pub diagnostics: bool,
}

impl RunOptions {
    pub fn from_config(cfg: &SimConfig) -> Self {
        Self {
            tau_ms: cfg.run.tau_ms,
            phd: cfg.run.phd,
            ptam: cfg.ptam.enabled,
            xi: cfg.ptam.xi,
            motion: cfg.ptam.motion,
            codec: cfg.codec,
            sigma_local_m: cfg.run.sigma_local_m,
            sigma_head_deg: cfg.run.sigma_head_deg,
            noise_stream: 0,
            diagnostics: cfg.run.diagnostics,
        }
    }

    pub fn noiseless(&self) -> bool {
        self.sigma_local_m == 0.0 && self.sigma_head_deg == 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollaboratorReport {
    pub agent: u32,
    pub points: usize,
    /// Pose used for the transform into the ego frame.
    pub pose: Pose2,
    pub xi: Vec<f64>,
    /// Largest object displacement over the delay, full-resolution cells.
    pub displacement_cells: f64,
    pub cos_pre: f64,
    pub cos_post: f64,
    pub codec: CodecReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Intermediate plus final window-cosine loss, when alignment ran.
    pub temporal_loss: Option<f64>,
    pub domain_loss_ego: f64,
    pub domain_loss_collaborators: Vec<f64>,
    pub mean_observability_weight: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub time: f64,
    pub options: RunOptions,
    pub noiseless: bool,
    pub detector: String,
    pub detection: DetectionSummary,
    pub frame: FrameEval,
    pub ego_points: usize,
    pub ego_points_after_phd: usize,
    pub collaborators: Vec<CollaboratorReport>,
    /// Means over collaborators.
    pub cos_pre: f64,
    pub cos_post: f64,
    pub codec_mse: f64,
    /// Multiplications etc. of the blockwise cosine over all scales.
    pub similarity_ops: OpCounts,
    pub foreground_loss: f64,
    pub diagnostics: Option<Diagnostics>,
}

/// Large tensors from a run, for inspection.
#[derive(Clone, Debug, PartialEq)]
pub struct RunArtifacts {
    pub fused: Tensor3,
    pub final_map: Tensor3,
    pub ego_map: Tensor3,
    pub collaborator_maps: Vec<Tensor3>,
    pub aligned: Vec<Vec<Tensor3>>,
}

pub const DETECTOR_NOTE: &str = "threshold detector on the fused foreground map (not a trained head)";

#[derive(Clone, Debug)]
pub struct AgentFrame {
    pub points: usize,
    pub kept: usize,
    pub features: MultiScaleFeatures,
}

type FrameKey = (u32, i64, bool);

fn time_key(t: f64) -> i64 {
    (t * 1e6).round() as i64
}

/// Scenario, networks and a cache of per-frame features shared by runs.
pub struct Pipeline {
    pub config: SimConfig,
    pub scenario: Scenario,
    pub models: Models,
    frames: Mutex<HashMap<FrameKey, Arc<AgentFrame>>>,
    bev: Mutex<HashMap<FrameKey, Arc<Tensor3>>>,
}

fn mean_window_cosine(a: &[Tensor3], b: &[Tensor3], l: usize) -> Result<f64> {
    let mut sum = 0.0;
    for (s, (x, y)) in a.iter().zip(b).enumerate() {
        sum += window_cosine_loss(x, y, l, CosineGranularity::Window, s, &mut NoTally)?.mean_cosine;
    }
    Ok(sum / a.len().max(1) as f64)
}

fn perturb(pose: Pose2, sigma_local: f64, sigma_head_deg: f64, r: &mut rng::Rng) -> Result<Pose2> {
    if sigma_local == 0.0 && sigma_head_deg == 0.0 {
        return Ok(pose);
    }
    let mut draw = |sigma: f64| -> Result<f64> {
        if sigma == 0.0 {
            return Ok(0.0);
        }
        let n = Normal::new(0.0, sigma).map_err(|e| Error::OutOfRange(e.to_string()))?;
        Ok(n.sample(r))
    };
    let (dx, dy) = (draw(sigma_local)?, draw(sigma_local)?);
    let dh = draw(sigma_head_deg.to_radians())?;
    Ok(Pose2::new(pose.x + dx, pose.y + dy, pose.yaw + dh))
}

impl Pipeline {
    pub fn new(config: SimConfig, scenario: Scenario) -> Result<Self> {
        config.validate()?;
        let models = Models::load(&config)?;
        Ok(Self::with_models(config, scenario, models))
    }

    pub fn with_models(config: SimConfig, scenario: Scenario, models: Models) -> Self {
        Self {
            config,
            scenario,
            models,
            frames: Mutex::new(HashMap::new()),
            bev: Mutex::new(HashMap::new()),
        }
    }

    /// Rendered, optionally thinned and featurised frame of one agent.
    pub fn frame(&self, agent: u32, t: f64, phd: bool) -> Result<Arc<AgentFrame>> {
        let key = (agent, time_key(t), phd);
        if let Some(f) = self.frames.lock().expect("frame cache").get(&key) {
            return Ok(f.clone());
        }
        let cloud = render_pointcloud(&self.scenario, agent, t, &self.config.render)?;
        let points = cloud.len();
        let cloud = if phd {
            let boxes = self.scenario.boxes_in_frame(agent, t)?;
            phd_apply(&cloud, &boxes, [0.0, 0.0], &self.config.phd)?
        } else {
            cloud
        };
        let pillars = pillar_encode(&cloud, &self.config.bev);
        let frame = Arc::new(AgentFrame {
            points,
            kept: cloud.len(),
            features: self.models.backbone.forward(&pillars)?,
        });
        self.frames.lock().expect("frame cache").insert(key, frame.clone());
        Ok(frame)
    }

    fn frame_bev(&self, agent: u32, t: f64, phd: bool) -> Result<Arc<Tensor3>> {
        let key = (agent, time_key(t), phd);
        if let Some(b) = self.bev.lock().expect("bev cache").get(&key) {
            return Ok(b.clone());
        }
        let bev = Arc::new(self.models.projection.forward(&self.frame(agent, t, phd)?.features)?);
        self.bev.lock().expect("bev cache").insert(key, bev.clone());
        Ok(bev)
    }

    fn uses_phd(&self, agent: u32, opts: &RunOptions) -> bool {
        opts.phd && (agent == EGO_ID || self.config.phd.collaborators)
    }

    fn similarity_ops(&self) -> Result<OpCounts> {
        let (h, w) = (self.config.bev.height(), self.config.bev.width());
        let mut total = OpCounts::default();
        for (s, &c) in SCALE_CHANNELS.iter().enumerate() {
            let (hs, ws) = (h >> s, w >> s);
            let l = self.config.ptam.window.min(hs).min(ws);
            total = total + count_similarity_ops(c, hs, ws, l, SimilarityMode::Blockwise)?;
        }
        Ok(total)
    }

    pub fn run(&self, t: f64, opts: &RunOptions) -> Result<RunReport> {
        Ok(self.run_detailed(t, opts)?.0)
    }

    pub fn run_detailed(&self, t: f64, opts: &RunOptions) -> Result<(RunReport, RunArtifacts)> {
        let cfg = &self.config;
        let dt = self.scenario.dt;
        let tau = opts.tau_ms / 1000.0;
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::OutOfRange(format!("delay {} ms", opts.tau_ms)));
        }
        let t_latest = t - tau;
        let t_prev = t_latest - dt;
        if t_prev < -1e-9 {
            return Err(Error::OutOfRange(format!("time {t} is earlier than τ + ΔT = {}", tau + dt)));
        }
        let t_prev = t_prev.max(0.0);
        self.scenario.check_time(t)?;
        let spec = &cfg.bev;
        let l = cfg.ptam.window;
        let ego_pose = self.scenario.pose_at(EGO_ID, t)?;

        let ego_frame = self.frame(EGO_ID, t, self.uses_phd(EGO_ID, opts))?;
        let ego_bev = self.frame_bev(EGO_ID, t, self.uses_phd(EGO_ID, opts))?;
        let fg = &self.models.foreground;
        let ego_map = fg.forward(&ego_bev)?;
        let mut refined = vec![self.models.ifam.refine(&ego_bev, &ego_map)?.refined];

        let mut collabs = Vec::new();
        let mut collab_maps = Vec::new();
        let mut aligned_all = Vec::new();
        let mut temporal = None;
        let mut domain_collab = Vec::new();
        let mut mean_w = Vec::new();
        let ids: Vec<u32> = self.scenario.agents.iter().map(|a| a.id).filter(|&id| id != EGO_ID).collect();
        for &j in &ids {
            let phd = self.uses_phd(j, opts);
            let prev = self.frame(j, t_prev, phd)?;
            let latest = self.frame(j, t_latest, phd)?;
            let gt = self.frame(j, t, phd)?;
            let latest_s: Vec<Tensor3> = latest.features.scales().map(|x| x.clone()).to_vec();
            let prev_s: Vec<Tensor3> = prev.features.scales().map(|x| x.clone()).to_vec();
            let gt_s: Vec<Tensor3> = gt.features.scales().map(|x| x.clone()).to_vec();
            let delay = DelayContext::new(tau, dt, opts.xi)?;
            let n = latest_s.len();

            let (aligned, xi, codec, bev_j) = if opts.ptam {
                let identity: Vec<MotionField> =
                    latest_s.iter().map(|x| MotionField::identity(x.height(), x.width())).collect();
                let s1_source = match opts.motion {
                    MotionMode::Ideal => MotionSource::Given(&identity),
                    MotionMode::Estimated => MotionSource::Estimate,
                };
                let s1 = ptam_stage1(&prev_s, &latest_s, &self.models.ptam, s1_source)?;
                let payload = Payload {
                    inter: s1.inter,
                    latest: latest_s.clone(),
                    fields: s1.fields,
                    delay,
                };
                let rx = transmit(&payload, &opts.codec)?;
                let ideal;
                let s2_source = match opts.motion {
                    MotionMode::Ideal => {
                        ideal = ideal_fields(
                            &self.scenario,
                            j,
                            t_latest,
                            t,
                            rx.payload.delay.frames(),
                            spec,
                            n,
                            cfg.ptam.ideal_dilation,
                        )?;
                        MotionSource::Given(&ideal)
                    }
                    MotionMode::Estimated => MotionSource::Estimate,
                };
                let s2 = ptam_stage2(
                    &rx.payload.inter,
                    &rx.payload.latest,
                    &rx.payload.fields,
                    &rx.payload.delay,
                    &self.models.ptam,
                    cfg.ptam.stage2_warp,
                    s2_source,
                )?;
                if opts.diagnostics {
                    let a = alignment_loss(&rx.payload.inter, &s2.aligned, &gt_s, l, cfg.ptam.granularity)?;
                    *temporal.get_or_insert(0.0) += a.total;
                }
                let ms = MultiScaleFeatures::from_scales(s2.aligned.clone().try_into().map_err(|_| {
                    Error::shape("alignment must produce three scales")
                })?)?;
                let bev = Arc::new(self.models.projection.forward(&ms)?);
                (s2.aligned, s2.xi, rx.report, bev)
            } else {
                let payload = Payload {
                    inter: Vec::new(),
                    latest: latest_s.clone(),
                    fields: Vec::new(),
                    delay,
                };
                let rx = transmit(&payload, &opts.codec)?;
                let bev = if rx.payload.latest == latest_s {
                    self.frame_bev(j, t_latest, phd)?
                } else {
                    let ms = MultiScaleFeatures::from_scales(rx.payload.latest.clone().try_into().map_err(|_| {
                        Error::shape("payload must carry three scales")
                    })?)?;
                    Arc::new(self.models.projection.forward(&ms)?)
                };
                (rx.payload.latest, Vec::new(), rx.report, bev)
            };

            let cos_pre = mean_window_cosine(&latest_s, &gt_s, l)?;
            let cos_post = mean_window_cosine(&aligned, &gt_s, l)?;

            let mut r = rng::stream(
                self.scenario.seed,
                rng::stream_id(&[0x706f_7365, j as u64, time_key(t) as u64, opts.noise_stream]),
            );
            let pose = perturb(
                self.scenario.pose_at(j, t_latest)?,
                opts.sigma_local_m,
                opts.sigma_head_deg,
                &mut r,
            )?;
            let (trans, valid) = transform_to_ego(&bev_j, &pose, &ego_pose, spec)?;
            let map_j = fg.forward(&trans)?;
            refined.push(self.models.ifam.refine(&trans, &map_j)?.refined);

            if opts.diagnostics {
                let completed_map = ObservabilityMap::new(complete_voids(map_j.tensor(), &valid, ego_map.tensor())?)?;
                let w = observability_weighting(&ego_map, &completed_map)?;
                let completed = complete_voids(&trans, &valid, &ego_bev)?;
                let logits = discriminator_forward(&completed, &self.models.discriminator)?;
                domain_collab.push(domain_loss_and_grads(&logits, 0, &w)?.loss);
                mean_w.push(w.sum() / w.len() as f64);
            }

            collabs.push(CollaboratorReport {
                agent: j,
                points: latest.points,
                pose,
                xi,
                displacement_cells: max_displacement_cells(&self.scenario, j, t_latest, t, spec)?,
                cos_pre,
                cos_post,
                codec,
            });
            collab_maps.push(map_j.into_tensor());
            aligned_all.push(aligned);
        }

        let fused = self.models.ifam.fuse(&refined)?;
        let final_map = fg.forward(&fused)?;
        let boxes = self.scenario.boxes_in_frame(EGO_ID, t)?;
        let frame = FrameEval::new(
            detect(final_map.tensor(), spec, &cfg.detector)?,
            ground_truth_boxes(&boxes, spec),
        );
        let detection = summarize(std::slice::from_ref(&frame));
        let focal = foreground_loss(&final_map, &boxes, spec)?;

        let diagnostics = if opts.diagnostics {
            let logits = discriminator_forward(&ego_bev, &self.models.discriminator)?;
            let ones = Tensor3::filled(1, spec.height(), spec.width(), 0.5);
            Some(Diagnostics {
                temporal_loss: temporal,
                domain_loss_ego: domain_loss_and_grads(&logits, 1, &ones)?.loss,
                domain_loss_collaborators: domain_collab,
                mean_observability_weight: mean_w,
            })
        } else {
            None
        };

        let k = collabs.len().max(1) as f64;
        let report = RunReport {
            time: t,
            options: opts.clone(),
            noiseless: opts.noiseless(),
            detector: DETECTOR_NOTE.to_string(),
            detection,
            frame,
            ego_points: ego_frame.points,
            ego_points_after_phd: ego_frame.kept,
            cos_pre: collabs.iter().map(|c| c.cos_pre).sum::<f64>() / k,
            cos_post: collabs.iter().map(|c| c.cos_post).sum::<f64>() / k,
            codec_mse: collabs.iter().map(|c| c.codec.mse).sum::<f64>() / k,
            collaborators: collabs,
            similarity_ops: self.similarity_ops()?,
            foreground_loss: focal.loss,
            diagnostics,
        };
        let artifacts = RunArtifacts {
            fused,
            final_map: final_map.into_tensor(),
            ego_map: ego_map.into_tensor(),
            collaborator_maps: collab_maps,
            aligned: aligned_all,
        };
        Ok((report, artifacts))
    }
}
