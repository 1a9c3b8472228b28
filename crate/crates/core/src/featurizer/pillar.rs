//! Fixed per-cell statistics standing in for a learned pillar encoder.

use super::bev::BevSpec;
use crate::numerics::Tensor3;
use crate::pointcloud::PointCloud;

pub const PILLAR_CHANNELS: usize = 8;

pub const CH_OCCUPANCY: usize = 0;
pub const CH_LOG_COUNT: usize = 1;
pub const CH_MEAN_Z: usize = 2;
pub const CH_MAX_Z: usize = 3;
pub const CH_MIN_Z: usize = 4;
pub const CH_Z_SPREAD: usize = 5;
pub const CH_INTENSITY: usize = 6;
pub const CH_PLANAR_OFFSET: usize = 7;

#[derive(Clone, Copy)]
struct Acc {
    n: usize,
    z_sum: f64,
    z_max: f64,
    z_min: f64,
    i_sum: f64,
    off_sum: f64,
}

/// Encodes a cloud into `8×H×W`: occupancy, `ln(1+count)`, mean/max/min z,
/// z spread, mean intensity and mean planar distance to the cell centre.
/// Empty cells are zero in every channel.
pub fn pillar_encode(cloud: &PointCloud, spec: &BevSpec) -> Tensor3 {
    let (h, w) = (spec.height(), spec.width());
    let mut acc = vec![
        Acc {
            n: 0,
            z_sum: 0.0,
            z_max: f64::NEG_INFINITY,
            z_min: f64::INFINITY,
            i_sum: 0.0,
            off_sum: 0.0,
        };
        h * w
    ];
    for p in &cloud.points {
        let Some((r, c)) = spec.cell_of(p.x, p.y) else { continue };
        let [cx, cy] = spec.cell_center(r, c);
        let a = &mut acc[r * w + c];
        a.n += 1;
        a.z_sum += p.z;
        a.z_max = a.z_max.max(p.z);
        a.z_min = a.z_min.min(p.z);
        a.i_sum += p.intensity;
        a.off_sum += (p.x - cx).hypot(p.y - cy);
    }
    let mut out = Tensor3::zeros(PILLAR_CHANNELS, h, w);
    for (i, a) in acc.iter().enumerate() {
        if a.n == 0 {
            continue;
        }
        let (r, c) = (i / w, i % w);
        let n = a.n as f64;
        let values = [
            1.0,
            n.ln_1p(),
            a.z_sum / n,
            a.z_max,
            a.z_min,
            a.z_max - a.z_min,
            a.i_sum / n,
            a.off_sum / n,
        ];
        for (ch, v) in values.into_iter().enumerate() {
            out.set(ch, r, c, v);
        }
    }
    out
}
