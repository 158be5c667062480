use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, DociError, Result};

pub const DEFAULT_BLOCK_MM: f64 = 0.65;

/// Square evaluation blocks laid from the top-left pixel. Blocks that
/// overhang the right or bottom edge are kept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockGrid {
    pub block_size_mm: f64,
    pub pixel_pitch_mm: f64,
    pub height_px: usize,
    pub width_px: usize,
}

impl BlockGrid {
    pub fn new(block_size_mm: f64, pixel_pitch_mm: f64, shape: (usize, usize)) -> Result<Self> {
        if !(block_size_mm > 0.0) || !(pixel_pitch_mm > 0.0) {
            return Err(invalid("block size and pixel pitch must be positive"));
        }
        Ok(BlockGrid {
            block_size_mm,
            pixel_pitch_mm,
            height_px: shape.0,
            width_px: shape.1,
        })
    }

    pub fn block_px(&self) -> f64 {
        self.block_size_mm / self.pixel_pitch_mm
    }

    fn index(&self, px: usize) -> usize {
        // Nudge so that exact multiples of the block size land in the next block.
        ((px as f64 + 1e-9) / self.block_px()).floor() as usize
    }

    pub fn block_of(&self, row: usize, col: usize) -> (usize, usize) {
        (self.index(row), self.index(col))
    }

    pub fn dims(&self) -> (usize, usize) {
        (
            self.index(self.height_px - 1) + 1,
            self.index(self.width_px - 1) + 1,
        )
    }

    /// Pixel bounds `(row0, row1, col0, col1)` of block `(br, bc)`, half-open.
    pub fn pixel_bounds(&self, br: usize, bc: usize) -> (usize, usize, usize, usize) {
        let start = |b: usize, n: usize| (0..n).find(|&p| self.index(p) >= b).unwrap_or(n);
        let (r0, r1) = (start(br, self.height_px), start(br + 1, self.height_px));
        let (c0, c1) = (start(bc, self.width_px), start(bc + 1, self.width_px));
        (r0, r1, c0, c1)
    }
}

/// Block-level OR reduction of a pixel raster.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMap {
    /// Blocks containing at least one tissue pixel.
    pub included: Array2<bool>,
    /// Blocks with at least one positive tissue pixel.
    pub positive: Array2<bool>,
}

impl BlockMap {
    pub fn included_count(&self) -> usize {
        self.included.iter().filter(|b| **b).count()
    }
}

/// A block is positive if any tissue pixel in it is positive; blocks with
/// no tissue pixels are excluded.
pub fn blockify(
    pixels: &Array2<bool>,
    grid: &BlockGrid,
    tissue_mask: &Array2<bool>,
) -> Result<BlockMap> {
    let shape = (grid.height_px, grid.width_px);
    for found in [pixels.dim(), tissue_mask.dim()] {
        if found != shape {
            return Err(DociError::ShapeMismatch {
                expected: shape,
                found,
            });
        }
    }
    let dims = grid.dims();
    let mut included = Array2::from_elem(dims, false);
    let mut positive = Array2::from_elem(dims, false);
    for ((r, c), &tissue) in tissue_mask.indexed_iter() {
        if tissue {
            let b = grid.block_of(r, c);
            included[b] = true;
            if pixels[[r, c]] {
                positive[b] = true;
            }
        }
    }
    Ok(BlockMap { included, positive })
}
