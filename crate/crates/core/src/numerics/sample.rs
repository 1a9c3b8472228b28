/// Bilinear sample of a row-major `height × width` plane at continuous
/// `(x, y)` (column, row). Neighbours outside the plane read as zero.
///
/// Integer coordinates return the stored value bit-for-bit.
#[inline]
pub fn bilinear_zero(plane: &[f64], height: usize, width: usize, x: f64, y: f64) -> f64 {
    if !x.is_finite() || !y.is_finite() {
        return 0.0;
    }
    let xf = x.floor();
    let yf = y.floor();
    if xf < -1.0 || yf < -1.0 || xf > width as f64 || yf > height as f64 {
        return 0.0;
    }
    let fx = x - xf;
    let fy = y - yf;
    let (x0, y0) = (xf as isize, yf as isize);
    let at = |yy: isize, xx: isize| -> f64 {
        if yy >= 0 && xx >= 0 && (yy as usize) < height && (xx as usize) < width {
            plane[yy as usize * width + xx as usize]
        } else {
            0.0
        }
    };
    let mut v = (1.0 - fx) * (1.0 - fy) * at(y0, x0);
    if fx != 0.0 {
        v += fx * (1.0 - fy) * at(y0, x0 + 1);
    }
    if fy != 0.0 {
        v += (1.0 - fx) * fy * at(y0 + 1, x0);
        if fx != 0.0 {
            v += fx * fy * at(y0 + 1, x0 + 1);
        }
    }
    v
}
