//! Closed-form operation counts for the similarity losses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::temporal::{window_partition, CosineGranularity, OpCounts};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityMode {
    /// One `H × W` window.
    Global,
    /// Both window tilings of size `l`.
    Blockwise,
}

/// Counts for one window of `cells` cells over `c` channels.
pub fn window_term_counts(c: u64, cells: u64, granularity: CosineGranularity) -> OpCounts {
    match granularity {
        CosineGranularity::Cell => OpCounts {
            mul: (3 * c + 2) * cells,
            add: (3 * c - 1) * cells - 1,
            sqrt: 2 * cells,
            div: cells,
        },
        CosineGranularity::Window => OpCounts {
            mul: 3 * c * cells + 2,
            add: 3 * (c * cells - 1) + 1,
            sqrt: 2,
            div: 1,
        },
    }
}

fn scaled(k: u64, o: OpCounts) -> OpCounts {
    OpCounts {
        mul: k * o.mul,
        add: k * o.add,
        sqrt: k * o.sqrt,
        div: k * o.div,
    }
}

/// Arithmetic of the per-cell cosine similarity over one `C × H × W`
/// plane, either globally or over the dual tilings.
pub fn count_similarity_ops(c: usize, h: usize, w: usize, l: usize, mode: SimilarityMode) -> Result<OpCounts> {
    count_similarity_ops_with(c, h, w, l, mode, CosineGranularity::Cell)
}

pub fn count_similarity_ops_with(
    c: usize,
    h: usize,
    w: usize,
    l: usize,
    mode: SimilarityMode,
    granularity: CosineGranularity,
) -> Result<OpCounts> {
    if c == 0 || h == 0 || w == 0 {
        return Err(Error::OutOfRange(format!("dimensions {c}x{h}x{w} must be positive")));
    }
    match mode {
        SimilarityMode::Global => Ok(window_term_counts(c as u64, (h * w) as u64, granularity)),
        SimilarityMode::Blockwise => {
            let (w1, w2) = window_partition(h, w, l)?;
            let n = (w1.len() + w2.len()) as u64;
            Ok(scaled(n, window_term_counts(c as u64, (l * l) as u64, granularity)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_dimensions() {
        let g = count_similarity_ops(64, 256, 128, 16, SimilarityMode::Global).unwrap();
        let b = count_similarity_ops(64, 256, 128, 16, SimilarityMode::Blockwise).unwrap();
        assert_eq!(g.mul, 6_356_992);
        assert_eq!(b.mul, 11_571_712);
        let ratio = b.mul as f64 / g.mul as f64;
        assert!((ratio - 1.8203).abs() < 1e-4);
    }

    #[test]
    fn single_window_equals_global() {
        let g = count_similarity_ops(8, 16, 16, 16, SimilarityMode::Global).unwrap();
        let b = count_similarity_ops(8, 16, 16, 16, SimilarityMode::Blockwise).unwrap();
        assert_eq!(g, b);
    }
}
