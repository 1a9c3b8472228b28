use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Tensor3;

/// A `1×H×W` map with entries in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityMap(Tensor3);

impl ObservabilityMap {
    pub fn new(grid: Tensor3) -> Result<Self> {
        if grid.channels() != 1 {
            return Err(Error::shape(format!("observability map needs 1 channel, got {}", grid.channels())));
        }
        if let Some(v) = grid.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfRange(format!("observability value {v} outside [0, 1]")));
        }
        Ok(Self(grid))
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(Tensor3::filled(1, height, width, value))
    }

    pub fn tensor(&self) -> &Tensor3 {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor3 {
        self.0
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }
}

/// Per cell, the smaller of the two probabilities of a softmax over
/// `(m_i, m_j)`, which is `1 / (1 + e^{|m_i − m_j|})` and lies in `(0, 0.5]`.
pub fn observability_weighting(m_i: &ObservabilityMap, m_j: &ObservabilityMap) -> Result<Tensor3> {
    m_i.tensor().zip_map(m_j.tensor(), pair_weight)
}

/// `min(softmax([a, b]))` for a single cell.
#[inline]
pub fn pair_weight(a: f64, b: f64) -> f64 {
    1.0 / (1.0 + (a - b).abs().exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::softmax;

    #[test]
    fn equal_maps_give_half() {
        let a = ObservabilityMap::filled(3, 3, 0.3).unwrap();
        let w = observability_weighting(&a, &a).unwrap();
        assert!(w.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn matches_softmax_minimum() {
        let a = ObservabilityMap::new(Tensor3::from_vec(1, 1, 3, vec![0.9, 0.0, 0.4]).unwrap()).unwrap();
        let b = ObservabilityMap::new(Tensor3::from_vec(1, 1, 3, vec![0.1, 1.0, 0.4]).unwrap()).unwrap();
        let w = observability_weighting(&a, &b).unwrap();
        for i in 0..3 {
            let s = softmax(&[a.tensor().data()[i], b.tensor().data()[i]]);
            assert!((w.data()[i] - s[0].min(s[1])).abs() < 1e-15);
        }
    }

    #[test]
    fn ln3_gap_gives_quarter() {
        assert!((pair_weight(3f64.ln(), 0.0) - 0.25).abs() < 1e-15);
        assert!((pair_weight(0.0, 3f64.ln()) - 0.25).abs() < 1e-15);
        assert!(pair_weight(50.0, 0.0) < 1e-20);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(ObservabilityMap::filled(2, 2, 1.5).is_err());
    }
}
