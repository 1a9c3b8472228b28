//! Dual window tilings of a feature plane.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `size × size` window with top-left cell `(row, col)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    pub row: usize,
    pub col: usize,
    pub size: usize,
}

impl Window {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.row..self.row + self.size).contains(&row) && (self.col..self.col + self.size).contains(&col)
    }

    /// Whether the `rows × cols` block at `(row, col)` lies wholly inside.
    pub fn covers(&self, row: usize, col: usize, rows: usize, cols: usize) -> bool {
        row >= self.row && col >= self.col && row + rows <= self.row + self.size && col + cols <= self.col + self.size
    }
}

/// `W1`: `⌊h/l⌋ × ⌊w/l⌋` windows anchored at the origin. `W2`:
/// `⌊(h−l)/l⌋ × ⌊(w−l)/l⌋` windows anchored at `(l/2, l/2)`.
///
/// Windows are listed row by row. An empty `W1` is an error; an empty
/// `W2` is not.
pub fn window_partition(h: usize, w: usize, l: usize) -> Result<(Vec<Window>, Vec<Window>)> {
    if l == 0 {
        return Err(Error::OutOfRange("window size must be at least 1".into()));
    }
    if l > h.min(w) {
        return Err(Error::OutOfRange(format!("window size {l} exceeds plane {h}x{w}")));
    }
    let tile = |rows: usize, cols: usize, offset: usize| -> Vec<Window> {
        let mut v = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                v.push(Window {
                    row: offset + i * l,
                    col: offset + j * l,
                    size: l,
                });
            }
        }
        v
    };
    let w1 = tile(h / l, w / l, 0);
    let w2 = tile((h - l) / l, (w - l) / l, l / 2);
    Ok((w1, w2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        for (h, w, l, n1, n2) in [(256, 128, 16, 128, 105), (32, 32, 16, 4, 1), (16, 16, 16, 1, 0)] {
            let (w1, w2) = window_partition(h, w, l).unwrap();
            assert_eq!((w1.len(), w2.len()), (n1, n2), "{h}x{w} l={l}");
            for win in w1.iter().chain(&w2) {
                assert!(win.row + l <= h && win.col + l <= w);
            }
        }
    }

    #[test]
    fn oversized_window_rejected() {
        assert!(window_partition(8, 16, 9).is_err());
        assert!(window_partition(8, 8, 0).is_err());
    }

    #[test]
    fn offset_anchor() {
        let (_, w2) = window_partition(32, 32, 16).unwrap();
        assert_eq!(w2[0], Window { row: 8, col: 8, size: 16 });
    }
}
