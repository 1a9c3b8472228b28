//! The `CPAW` named-weight archive.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    b"CPAW"
//! version  u16            (currently 1)
//! count    u32
//! entries  count × {
//!     name_len u16, name (UTF-8),
//!     rank u8, dims u32 × rank,
//!     payload f32 × prod(dims)
//! }
//! ```
//!
//! Entries are written in name order, so equal collections produce equal bytes.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CPAW";
pub const VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct WeightTensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl WeightTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} holds {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NamedTensors {
    tensors: BTreeMap<String, WeightTensor>,
}

impl NamedTensors {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: WeightTensor) {
        self.tensors.insert(name.into(), tensor);
    }

    /// Stores `values` narrowed to `f32`.
    pub fn insert_f64(&mut self, name: impl Into<String>, shape: Vec<usize>, values: &[f64]) {
        let data = values.iter().map(|&v| v as f32).collect();
        self.insert(name, WeightTensor { shape, data });
    }

    pub fn get(&self, name: &str) -> Option<&WeightTensor> {
        self.tensors.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    /// Widened payload of `name`, checking its element count.
    pub fn get_f64(&self, name: &str, expected_len: usize) -> Result<Option<Vec<f64>>> {
        let Some(t) = self.tensors.get(name) else {
            return Ok(None);
        };
        if t.data.len() != expected_len {
            return Err(Error::Archive {
                tensor: Some(name.to_owned()),
                message: format!("holds {} values, layer expects {expected_len}", t.data.len()),
            });
        }
        Ok(Some(t.data.iter().map(|&v| v as f64).collect()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &WeightTensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn extend(&mut self, other: NamedTensors) {
        self.tensors.extend(other.tensors);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        let count = u32::try_from(self.tensors.len())
            .map_err(|_| archive_err(None, "too many tensors"))?;
        out.write_all(&count.to_le_bytes())?;
        for (name, t) in &self.tensors {
            let name_len = u16::try_from(name.len())
                .map_err(|_| archive_err(Some(name), "name longer than 65535 bytes"))?;
            out.write_all(&name_len.to_le_bytes())?;
            out.write_all(name.as_bytes())?;
            let rank = u8::try_from(t.shape.len())
                .map_err(|_| archive_err(Some(name), "rank above 255"))?;
            out.write_all(&[rank])?;
            for &d in &t.shape {
                let d = u32::try_from(d).map_err(|_| archive_err(Some(name), "dimension above u32"))?;
                out.write_all(&d.to_le_bytes())?;
            }
            let expected: usize = t.shape.iter().product();
            if expected != t.data.len() {
                return Err(archive_err(
                    Some(name),
                    format!("shape {:?} disagrees with {} values", t.shape, t.data.len()),
                ));
            }
            for v in &t.data {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic = cur.take(4, None, "magic")?;
        if magic != MAGIC {
            return Err(archive_err(None, format!("unknown magic {magic:?}")));
        }
        let version = u16::from_le_bytes(cur.array(None, "version")?);
        if version != VERSION {
            return Err(archive_err(None, format!("unsupported version {version}")));
        }
        let count = u32::from_le_bytes(cur.array(None, "entry count")?);
        let mut named = NamedTensors::new();
        for i in 0..count {
            let name_len = u16::from_le_bytes(cur.array(None, &format!("name length of entry {i}"))?);
            let name_bytes = cur.take(name_len as usize, None, &format!("name of entry {i}"))?;
            let name = std::str::from_utf8(name_bytes)
                .map_err(|_| archive_err(None, format!("entry {i} name is not UTF-8")))?
                .to_owned();
            let rank = cur.take(1, Some(&name), "rank")?[0] as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(u32::from_le_bytes(cur.array(Some(&name), "dims")?) as usize);
            }
            let n = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| archive_err(Some(&name), "dimension product overflows"))?;
            let payload = cur.take(
                n.checked_mul(4)
                    .ok_or_else(|| archive_err(Some(&name), "payload size overflows"))?,
                Some(&name),
                "payload",
            )?;
            let data = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            if named.tensors.contains_key(&name) {
                return Err(archive_err(Some(&name), "duplicate tensor name"));
            }
            named.tensors.insert(name, WeightTensor { shape, data });
        }
        if cur.pos != bytes.len() {
            return Err(archive_err(
                None,
                format!("{} trailing bytes after last entry", bytes.len() - cur.pos),
            ));
        }
        Ok(named)
    }
}

fn archive_err(tensor: Option<&str>, message: impl Into<String>) -> Error {
    Error::Archive {
        tensor: tensor.map(str::to_owned),
        message: message.into(),
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, tensor: Option<&str>, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(archive_err(
                tensor,
                format!(
                    "truncated {what}: need {n} bytes, {} remain",
                    self.bytes.len() - self.pos
                ),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self, tensor: Option<&str>, what: &str) -> Result<[u8; N]> {
        let s = self.take(N, tensor, what)?;
        let mut a = [0u8; N];
        a.copy_from_slice(s);
        Ok(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_value_roundtrip() {
        let mut n = NamedTensors::new();
        n.insert("k", WeightTensor::new(vec![1, 1, 1], vec![3.5]).unwrap());
        let back = NamedTensors::from_bytes(&n.to_bytes().unwrap()).unwrap();
        assert_eq!(back.get("k").unwrap().data, vec![3.5]);
        assert_eq!(back, n);
    }

    #[test]
    fn empty_collection_is_valid() {
        let bytes = NamedTensors::new().to_bytes().unwrap();
        assert_eq!(bytes, b"CPAW\x01\x00\x00\x00\x00\x00");
        assert!(NamedTensors::from_bytes(&bytes).unwrap().is_empty());
    }

    #[test]
    fn truncated_payload_names_tensor() {
        let mut n = NamedTensors::new();
        n.insert("k", WeightTensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let bytes = n.to_bytes().unwrap();
        let err = NamedTensors::from_bytes(&bytes[..bytes.len() - 3]).unwrap_err();
        match err {
            Error::Archive { tensor, .. } => assert_eq!(tensor.as_deref(), Some("k")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_magic_rejected() {
        let err = NamedTensors::from_bytes(b"NOPE\x01\x00\x00\x00\x00\x00").unwrap_err();
        assert!(err.to_string().contains("magic"));
    }

    #[test]
    fn layout_is_little_endian() {
        let mut n = NamedTensors::new();
        n.insert("ab", WeightTensor::new(vec![1], vec![1.0]).unwrap());
        let bytes = n.to_bytes().unwrap();
        let mut expected = b"CPAW\x01\x00\x01\x00\x00\x00\x02\x00ab\x01\x01\x00\x00\x00".to_vec();
        expected.extend_from_slice(&1.0f32.to_le_bytes());
        assert_eq!(bytes, expected);
    }

    #[test]
    fn layer_length_mismatch_names_tensor() {
        let mut n = NamedTensors::new();
        n.insert_f64("conv.w", vec![3], &[1.0, 2.0, 3.0]);
        let err = n.get_f64("conv.w", 4).unwrap_err();
        assert!(err.to_string().contains("conv.w"));
    }
}
