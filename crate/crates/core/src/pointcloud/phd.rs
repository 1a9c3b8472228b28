//! Proximal-region hierarchical downsampling.
//!
//! Near objects are sampled densely by a LiDAR; thinning their interior
//! harder than their contour brings their density closer to far objects.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::fps::fps;
use super::types::{OrientedBox, Point, PointCloud};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhdConfig {
    /// Planar range (m) within which an object counts as proximal.
    pub d_th: f64,
    /// Cap on the number of proximal objects processed per frame.
    pub n_max: usize,
    /// Scale of the inner box relative to the full box.
    pub alpha: f64,
    pub beta_in: f64,
    pub beta_out: f64,
    pub seed: u64,
    /// Also thin collaborator clouds, not only the ego's.
    pub collaborators: bool,
}

impl Default for PhdConfig {
    fn default() -> Self {
        Self {
            d_th: 50.0,
            n_max: 2,
            alpha: 0.5,
            beta_in: 0.6,
            beta_out: 0.8,
            seed: 0,
            collaborators: false,
        }
    }
}

impl PhdConfig {
    pub fn validate(&self) -> Result<()> {
        let ratio = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::config(format!("phd.{name}"), format!("{v} outside (0, 1]")))
            }
        };
        ratio("beta_in", self.beta_in)?;
        ratio("beta_out", self.beta_out)?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config("phd.alpha", format!("{} outside (0, 1)", self.alpha)));
        }
        if !(self.d_th >= 0.0) {
            return Err(Error::config("phd.d_th", "must be non-negative"));
        }
        Ok(())
    }
}

/// Indices (ascending) of boxes whose planar distance from `ego` is at most
/// `d_th`. When more than `n_max` qualify, `n_max` of them are drawn
/// uniformly with the configured seed.
pub fn select_proximal(boxes: &[OrientedBox], ego: [f64; 2], cfg: &PhdConfig) -> Vec<usize> {
    let near: Vec<usize> = boxes
        .iter()
        .enumerate()
        .filter(|(_, b)| b.planar_distance_to(ego[0], ego[1]) <= cfg.d_th)
        .map(|(i, _)| i)
        .collect();
    if near.len() <= cfg.n_max {
        return near;
    }
    let mut r = rng::stream(cfg.seed, rng::stream_id(&[0x7068_64]));
    let mut picked: Vec<usize> = index::sample(&mut r, near.len(), cfg.n_max)
        .into_iter()
        .map(|k| near[k])
        .collect();
    picked.sort_unstable();
    picked
}

/// Indices of points in the α-scaled inner box and in the remaining shell of
/// the full box. Points outside the full box are in neither list.
pub fn partition_regions(cloud: &PointCloud, b: &OrientedBox, alpha: f64) -> (Vec<usize>, Vec<usize>) {
    let inner_box = b.scaled(alpha);
    let mut inner = Vec::new();
    let mut outer = Vec::new();
    for (i, p) in cloud.points.iter().enumerate() {
        if inner_box.contains(p) {
            inner.push(i);
        } else if b.contains(p) {
            outer.push(i);
        }
    }
    (inner, outer)
}

/// Per-box bookkeeping from one downsampling pass.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegionStats {
    pub box_index: usize,
    pub inner_in: usize,
    pub inner_kept: usize,
    pub outer_in: usize,
    pub outer_kept: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PhdOutcome {
    pub cloud: PointCloud,
    /// Indices into the input cloud of every retained point, ascending.
    pub kept: Vec<usize>,
    pub regions: Vec<RegionStats>,
}

fn thin(cloud: &PointCloud, ids: &[usize], beta: f64) -> Result<Vec<usize>> {
    let coords: Vec<[f64; 3]> = ids.iter().map(|&i| cloud.points[i].xyz()).collect();
    Ok(fps(&coords, beta)?.into_iter().map(|k| ids[k]).collect())
}

/// Runs selection, partition and FPS, reporting which points survived.
///
/// A point inside several selected boxes is handled by the first of them.
pub fn phd_apply_detailed(
    cloud: &PointCloud,
    boxes: &[OrientedBox],
    ego: [f64; 2],
    cfg: &PhdConfig,
) -> Result<PhdOutcome> {
    cfg.validate()?;
    let n = cloud.len();
    let mut claimed = vec![false; n];
    let mut keep = vec![true; n];
    let mut regions = Vec::new();
    for k in select_proximal(boxes, ego, cfg) {
        let (inner, outer) = partition_regions(cloud, &boxes[k], cfg.alpha);
        let inner: Vec<usize> = inner.into_iter().filter(|&i| !claimed[i]).collect();
        let outer: Vec<usize> = outer.into_iter().filter(|&i| !claimed[i]).collect();
        let inner_kept = thin(cloud, &inner, cfg.beta_in)?;
        let outer_kept = thin(cloud, &outer, cfg.beta_out)?;
        for &i in inner.iter().chain(&outer) {
            claimed[i] = true;
            keep[i] = false;
        }
        for &i in inner_kept.iter().chain(&outer_kept) {
            keep[i] = true;
        }
        regions.push(RegionStats {
            box_index: k,
            inner_in: inner.len(),
            inner_kept: inner_kept.len(),
            outer_in: outer.len(),
            outer_kept: outer_kept.len(),
        });
    }
    let kept: Vec<usize> = (0..n).filter(|&i| keep[i]).collect();
    let points: Vec<Point> = kept.iter().map(|&i| cloud.points[i]).collect();
    Ok(PhdOutcome {
        cloud: PointCloud::new(points),
        kept,
        regions,
    })
}

pub fn phd_apply(
    cloud: &PointCloud,
    boxes: &[OrientedBox],
    ego: [f64; 2],
    cfg: &PhdConfig,
) -> Result<PointCloud> {
    Ok(phd_apply_detailed(cloud, boxes, ego, cfg)?.cloud)
}
