use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometry of the bird's-eye-view grid in an agent's own frame.
///
/// Rows follow +y and columns follow +x. Cell `(row, col)` covers
/// `[origin + col·cell, origin + (col+1)·cell)` in x, likewise in y.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BevSpec {
    pub cell_size: f64,
    pub x_extent: f64,
    pub y_extent: f64,
    /// Lower-left corner `(x, y)` of cell `(0, 0)`.
    pub origin: [f64; 2],
}

impl Default for BevSpec {
    fn default() -> Self {
        Self {
            cell_size: 0.4,
            x_extent: 25.6,
            y_extent: 25.6,
            origin: [-12.8, -12.8],
        }
    }
}

fn cells(extent: f64, cell: f64) -> Option<usize> {
    let n = extent / cell;
    let r = n.round();
    ((n - r).abs() < 1e-6 && r >= 1.0).then_some(r as usize)
}

impl BevSpec {
    /// Square grid of `cells × cells` centred on the agent.
    pub fn centered(cell_size: f64, cells: usize) -> Self {
        let extent = cell_size * cells as f64;
        Self {
            cell_size,
            x_extent: extent,
            y_extent: extent,
            origin: [-extent / 2.0, -extent / 2.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cell_size > 0.0) {
            return Err(Error::config("bev.cell_size", "must be positive"));
        }
        for (name, extent) in [("bev.x_extent", self.x_extent), ("bev.y_extent", self.y_extent)] {
            match cells(extent, self.cell_size) {
                Some(n) if n % 4 == 0 => {}
                Some(n) => {
                    return Err(Error::config(name, format!("{n} cells is not a multiple of 4")))
                }
                None => {
                    return Err(Error::config(
                        name,
                        format!("{extent} is not a whole number of {} m cells", self.cell_size),
                    ))
                }
            }
        }
        Ok(())
    }

    pub fn height(&self) -> usize {
        cells(self.y_extent, self.cell_size).unwrap_or(0)
    }

    pub fn width(&self) -> usize {
        cells(self.x_extent, self.cell_size).unwrap_or(0)
    }

    /// `(row, col)` of the cell containing `(x, y)`, if inside the grid.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let c = ((x - self.origin[0]) / self.cell_size).floor();
        let r = ((y - self.origin[1]) / self.cell_size).floor();
        if c >= 0.0 && r >= 0.0 && (c as usize) < self.width() && (r as usize) < self.height() {
            Some((r as usize, c as usize))
        } else {
            None
        }
    }

    pub fn cell_center(&self, row: usize, col: usize) -> [f64; 2] {
        [
            self.origin[0] + (col as f64 + 0.5) * self.cell_size,
            self.origin[1] + (row as f64 + 0.5) * self.cell_size,
        ]
    }

    /// Continuous `(col, row)` coordinates where integers are cell centres.
    pub fn to_grid(&self, x: f64, y: f64) -> [f64; 2] {
        [
            (x - self.origin[0]) / self.cell_size - 0.5,
            (y - self.origin[1]) / self.cell_size - 0.5,
        ]
    }
}
