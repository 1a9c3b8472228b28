//! Delay and pose-noise grids.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::detect::{summarize, FrameEval};
use super::pipeline::{Pipeline, RunOptions};
use crate::error::{Error, Result};

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub metric: String,
    pub value: f64,
    pub tau_ms: f64,
    pub sigma_local_m: f64,
    pub sigma_head_deg: f64,
}

/// Aggregates for one `(τ, σ_local, σ_head)` grid point over the
/// evaluation times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub tau_ms: f64,
    pub sigma_local_m: f64,
    pub sigma_head_deg: f64,
    pub times: Vec<f64>,
    pub iou_ptam: f64,
    pub iou_no_ptam: f64,
    pub ap50_ptam: f64,
    pub ap70_ptam: f64,
    pub ap50_no_ptam: f64,
    pub ap70_no_ptam: f64,
    pub cos_pre: f64,
    pub cos_post: f64,
    pub codec_mse: f64,
    /// Largest object displacement over the delay, full-resolution cells.
    pub displacement_cells: f64,
}

impl SweepPoint {
    pub fn rows(&self) -> Vec<SweepRow> {
        let metrics = [
            ("iou_ptam", self.iou_ptam),
            ("iou_no_ptam", self.iou_no_ptam),
            ("ap50_ptam", self.ap50_ptam),
            ("ap70_ptam", self.ap70_ptam),
            ("ap50_no_ptam", self.ap50_no_ptam),
            ("ap70_no_ptam", self.ap70_no_ptam),
            ("cos_pre", self.cos_pre),
            ("cos_post", self.cos_post),
            ("codec_mse", self.codec_mse),
            ("displacement_cells", self.displacement_cells),
        ];
        metrics
            .into_iter()
            .map(|(m, v)| SweepRow {
                metric: m.to_string(),
                value: v,
                tau_ms: self.tau_ms,
                sigma_local_m: self.sigma_local_m,
                sigma_head_deg: self.sigma_head_deg,
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
}

impl SweepReport {
    pub fn rows(&self) -> Vec<SweepRow> {
        self.points.iter().flat_map(|p| p.rows()).collect()
    }

    /// CSV with header `metric,value,tau_ms,sigma_local_m,sigma_head_deg`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in self.rows() {
            w.serialize(row).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Runs every grid point of the `sweep` section with alignment on and off.
/// Grid points are independent; the report lists them in grid order
/// (noise outer, delay inner).
pub fn run_sweep(pipeline: &Pipeline) -> Result<SweepReport> {
    let cfg = &pipeline.config;
    let mut grid = Vec::new();
    for &sl in &cfg.sweep.sigma_local_m {
        for &sh in &cfg.sweep.sigma_head_deg {
            for &tau in &cfg.sweep.tau_ms {
                grid.push((sl, sh, tau));
            }
        }
    }
    let points = grid
        .par_iter()
        .enumerate()
        .map(|(i, &(sl, sh, tau))| sweep_point(pipeline, i as u64, tau, sl, sh))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport { points })
}

pub fn sweep_point(pipeline: &Pipeline, index: u64, tau_ms: f64, sigma_local_m: f64, sigma_head_deg: f64) -> Result<SweepPoint> {
    let cfg = &pipeline.config;
    let dt = pipeline.scenario.dt;
    let times: Vec<f64> = cfg
        .sweep
        .eval_times
        .iter()
        .copied()
        .filter(|&t| t - tau_ms / 1000.0 - dt >= -1e-9 && t <= pipeline.scenario.duration + 1e-9)
        .collect();
    if times.is_empty() {
        return Err(Error::OutOfRange(format!(
            "no evaluation time is at least τ + ΔT = {} s",
            tau_ms / 1000.0 + dt
        )));
    }
    let base = RunOptions {
        tau_ms,
        sigma_local_m,
        sigma_head_deg,
        noise_stream: index,
        diagnostics: false,
        ..RunOptions::from_config(cfg)
    };
    let on = RunOptions { ptam: true, ..base.clone() };
    let off = RunOptions { ptam: false, ..base };
    let (mut fon, mut foff): (Vec<FrameEval>, Vec<FrameEval>) = (Vec::new(), Vec::new());
    let (mut pre, mut post, mut mse, mut disp) = (Vec::new(), Vec::new(), Vec::new(), 0.0f64);
    for &t in &times {
        let a = pipeline.run(t, &on)?;
        let b = pipeline.run(t, &off)?;
        pre.push(a.cos_pre);
        post.push(a.cos_post);
        mse.push(a.codec_mse);
        disp = a.collaborators.iter().map(|c| c.displacement_cells).fold(disp, f64::max);
        fon.push(a.frame);
        foff.push(b.frame);
    }
    let (s_on, s_off) = (summarize(&fon), summarize(&foff));
    Ok(SweepPoint {
        tau_ms,
        sigma_local_m,
        sigma_head_deg,
        times,
        iou_ptam: s_on.mean_iou,
        iou_no_ptam: s_off.mean_iou,
        ap50_ptam: s_on.ap50,
        ap70_ptam: s_on.ap70,
        ap50_no_ptam: s_off.ap50,
        ap70_no_ptam: s_off.ap70,
        cos_pre: mean(&pre),
        cos_post: mean(&post),
        codec_mse: mean(&mse),
        displacement_cells: disp,
    })
}
