//! Binary and CSV point-cloud files.
//!
//! Binary layout: `u32` point count, then `x, y, z, intensity` as
//! little-endian `f32` per point.

use std::io::{Read, Write};

use super::types::{Point, PointCloud};
use crate::error::{Error, Result};

pub fn write_binary<W: Write>(cloud: &PointCloud, mut out: W) -> Result<()> {
    let count = u32::try_from(cloud.len())
        .map_err(|_| Error::OutOfRange(format!("{} points exceed u32", cloud.len())))?;
    out.write_all(&count.to_le_bytes())?;
    for p in &cloud.points {
        for v in [p.x, p.y, p.z, p.intensity] {
            out.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut input: R) -> Result<PointCloud> {
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    let count = u32::from_le_bytes(word) as usize;
    let mut points = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let mut v = [0.0f64; 4];
        for slot in v.iter_mut() {
            input.read_exact(&mut word)?;
            *slot = f32::from_le_bytes(word) as f64;
        }
        points.push(Point::new(v[0], v[1], v[2], v[3]));
    }
    let cloud = PointCloud::new(points);
    cloud.validate()?;
    Ok(cloud)
}

pub fn write_csv<W: Write>(cloud: &PointCloud, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y", "z", "intensity"]).map_err(csv_err)?;
    for p in &cloud.points {
        w.serialize((p.x, p.y, p.z, p.intensity)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<PointCloud> {
    let mut r = csv::Reader::from_reader(input);
    let points = r
        .deserialize::<Point>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(csv_err)?;
    let cloud = PointCloud::new(points);
    cloud.validate()?;
    Ok(cloud)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PointCloud {
        PointCloud::new(vec![Point::new(1.5, -2.0, 0.25, 0.5), Point::new(0.0, 0.0, 3.0, 1.0)])
    }

    #[test]
    fn binary_roundtrip() {
        let mut buf = Vec::new();
        write_binary(&sample(), &mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 2 * 16);
        assert_eq!(read_binary(buf.as_slice()).unwrap(), sample());
    }

    #[test]
    fn truncated_binary_fails() {
        let mut buf = Vec::new();
        write_binary(&sample(), &mut buf).unwrap();
        buf.pop();
        assert!(read_binary(buf.as_slice()).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let mut buf = Vec::new();
        write_csv(&sample(), &mut buf).unwrap();
        assert!(buf.starts_with(b"x,y,z,intensity\n"));
        assert_eq!(read_csv(buf.as_slice()).unwrap(), sample());
    }
}
