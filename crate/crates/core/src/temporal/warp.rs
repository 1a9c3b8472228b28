//! Destination-indexed bilinear feature warping.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{bilinear_zero, Tensor3};

/// `out(y) = w(y) · F(y − ξ·Δp(y))`, bilinear, zero outside the grid.
pub fn warp_features(f: &Tensor3, dp: &Tensor3, xi: f64, w: &Tensor3) -> Result<Tensor3> {
    if !(xi >= 0.0 && xi.is_finite()) {
        return Err(Error::OutOfRange(format!("temporal scale {xi} must be finite and >= 0")));
    }
    if dp.shape() != (2, f.height(), f.width()) {
        return Err(Error::shape(format!(
            "displacement {:?} for features {:?}",
            dp.shape(),
            f.shape()
        )));
    }
    f.ensure_plane_of(w, "sampling weight")?;
    let (h, wd) = (f.height(), f.width());
    let (dx, dy) = (dp.channel(0), dp.channel(1));
    let coords: Vec<(f64, f64)> = (0..h * wd)
        .map(|i| ((i % wd) as f64 - xi * dx[i], (i / wd) as f64 - xi * dy[i]))
        .collect();
    let weights = w.data();
    let mut out = Tensor3::zeros(f.channels(), h, wd);
    out.data_mut()
        .par_chunks_mut(h * wd)
        .enumerate()
        .for_each(|(c, plane)| {
            let src = f.channel(c);
            for (i, o) in plane.iter_mut().enumerate() {
                let (x, y) = coords[i];
                *o = weights[i] * bilinear_zero(src, h, wd, x, y);
            }
        });
    Ok(out)
}
