//! Resampling a collaborator's grid into the ego frame.

use rayon::prelude::*;

use super::pose::Pose2;
use crate::error::{Error, Result};
use crate::featurizer::BevSpec;
use crate::numerics::{bilinear_zero, Tensor3};

const SNAP: f64 = 1e-9;

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < SNAP {
        r
    } else {
        v
    }
}

/// Source coordinates `(col, row)` in the collaborator grid for every ego
/// cell, or `None` where the source falls outside it.
pub fn source_coordinates(collab_pose: &Pose2, ego_pose: &Pose2, spec: &BevSpec) -> Vec<Option<[f64; 2]>> {
    let (h, w) = (spec.height(), spec.width());
    let (hmax, wmax) = ((h - 1) as f64, (w - 1) as f64);
    let mut out = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let world = ego_pose.to_world(spec.cell_center(r, c));
            let local = collab_pose.to_local(world);
            let [gx, gy] = spec.to_grid(local[0], local[1]);
            let (gx, gy) = (snap(gx), snap(gy));
            let inside = (0.0..=wmax).contains(&gx) && (0.0..=hmax).contains(&gy);
            out.push(inside.then_some([gx, gy]));
        }
    }
    out
}

/// Inverse-maps each ego cell centre through ego → world → collaborator and
/// samples bilinearly. Returns the resampled grid and a `1×H×W` validity
/// mask; invalid cells are zero.
pub fn transform_to_ego(
    collab: &Tensor3,
    collab_pose: &Pose2,
    ego_pose: &Pose2,
    spec: &BevSpec,
) -> Result<(Tensor3, Tensor3)> {
    let (h, w) = (spec.height(), spec.width());
    if (collab.height(), collab.width()) != (h, w) {
        return Err(Error::shape(format!(
            "collaborator grid {}x{} does not match BEV {h}x{w}",
            collab.height(),
            collab.width()
        )));
    }
    let src = source_coordinates(collab_pose, ego_pose, spec);
    let valid = Tensor3::from_vec(
        1,
        h,
        w,
        src.iter().map(|s| if s.is_some() { 1.0 } else { 0.0 }).collect(),
    )?;
    let mut out = Tensor3::zeros(collab.channels(), h, w);
    out.data_mut()
        .par_chunks_mut(h * w)
        .enumerate()
        .for_each(|(ch, plane)| {
            let input = collab.channel(ch);
            for (o, s) in plane.iter_mut().zip(&src) {
                if let Some([x, y]) = s {
                    *o = bilinear_zero(input, h, w, *x, *y);
                }
            }
        });
    Ok((out, valid))
}

/// `V·transformed + (1 − V)·ego`, cell by cell, with `V` treated as a hard
/// indicator (`V > 0.5`).
pub fn complete_voids(transformed: &Tensor3, valid: &Tensor3, ego: &Tensor3) -> Result<Tensor3> {
    transformed.ensure_same_shape(ego, "void completion")?;
    transformed.ensure_plane_of(valid, "validity mask")?;
    let mut out = ego.clone();
    for c in 0..transformed.channels() {
        let src = transformed.channel(c);
        for (i, o) in out.channel_mut(c).iter_mut().enumerate() {
            if valid.data()[i] > 0.5 {
                *o = src[i];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ramp(spec: &BevSpec) -> Tensor3 {
        Tensor3::from_fn(2, spec.height(), spec.width(), |c, y, x| (c * 100 + y * 10 + x) as f64)
    }

    #[test]
    fn identical_poses_are_identity() {
        let spec = BevSpec::centered(0.5, 8);
        let p = Pose2::new(3.0, 4.0, 0.3);
        let (out, v) = transform_to_ego(&ramp(&spec), &p, &p, &spec).unwrap();
        assert!(out.max_abs_diff(&ramp(&spec)) < 1e-9);
        assert!(v.data().iter().all(|&m| m == 1.0));
    }

    #[test]
    fn translation_shifts_columns() {
        let spec = BevSpec::centered(0.5, 8);
        let k = 2;
        let ego = Pose2::default();
        let collab = Pose2::new(k as f64 * 0.5, 0.0, 0.0);
        let src = ramp(&spec);
        let (out, v) = transform_to_ego(&src, &collab, &ego, &spec).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                if x < k {
                    assert_eq!(v.get(0, y, x), 0.0);
                    assert_eq!(out.get(1, y, x), 0.0);
                } else {
                    assert_eq!(v.get(0, y, x), 1.0);
                    assert_eq!(out.get(1, y, x), src.get(1, y, x - k));
                }
            }
        }
    }

    #[test]
    fn half_turn_rotates_grid() {
        let spec = BevSpec::centered(0.5, 8);
        let mut one_hot = Tensor3::zeros(1, 8, 8);
        one_hot.set(0, 1, 6, 1.0);
        let (out, v) = transform_to_ego(&one_hot, &Pose2::new(0.0, 0.0, PI), &Pose2::default(), &spec).unwrap();
        assert!(v.data().iter().all(|&m| m == 1.0));
        assert!((out.get(0, 6, 1) - 1.0).abs() < 1e-9);
        assert!((out.sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn void_completion_selects() {
        let a = Tensor3::filled(2, 2, 2, 1.0);
        let b = Tensor3::filled(2, 2, 2, 5.0);
        let checker = Tensor3::from_fn(1, 2, 2, |_, y, x| ((x + y) % 2) as f64);
        let out = complete_voids(&a, &checker, &b).unwrap();
        for c in 0..2 {
            for y in 0..2 {
                for x in 0..2 {
                    let want = if (x + y) % 2 == 1 { 1.0 } else { 5.0 };
                    assert_eq!(out.get(c, y, x), want);
                }
            }
        }
        assert_eq!(complete_voids(&out, &checker, &b).unwrap(), out);
    }
}
