//! 8-bit binary PGM output for single-channel maps.

use std::io::Write;

use crate::error::{Error, Result};
use crate::numerics::Tensor3;

/// Writes a `1×H×W` map as P5, scaling `[lo, hi]` to `[0, 255]`. The image
/// is flipped so +y points up.
pub fn write_pgm<W: Write>(map: &Tensor3, lo: f64, hi: f64, mut out: W) -> Result<()> {
    if map.channels() != 1 {
        return Err(Error::shape(format!("PGM needs one channel, got {}", map.channels())));
    }
    if !(hi > lo) {
        return Err(Error::OutOfRange(format!("empty range [{lo}, {hi}]")));
    }
    let (h, w) = (map.height(), map.width());
    write!(out, "P5\n{w} {h}\n255\n")?;
    let mut buf = Vec::with_capacity(h * w);
    for r in (0..h).rev() {
        for c in 0..w {
            let v = ((map.get(0, r, c) - lo) / (hi - lo)).clamp(0.0, 1.0);
            buf.push((v * 255.0).round() as u8);
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_flip() {
        let mut m = Tensor3::zeros(1, 2, 3);
        m.set(0, 0, 0, 1.0);
        let mut buf = Vec::new();
        write_pgm(&m, 0.0, 1.0, &mut buf).unwrap();
        let header = b"P5\n3 2\n255\n";
        assert_eq!(&buf[..header.len()], header);
        assert_eq!(&buf[header.len()..], &[0, 0, 0, 255, 0, 0]);
    }
}
