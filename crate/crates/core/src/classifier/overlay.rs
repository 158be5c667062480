use image::{Rgb, RgbImage};

use super::blocks::{BlockGrid, BlockMap};
use crate::error::{DociError, Result};

pub const TN_RGB: [u8; 3] = [0, 255, 255];
pub const FN_RGB: [u8; 3] = [0, 0, 255];
pub const FP_RGB: [u8; 3] = [255, 0, 0];
pub const TP_RGB: [u8; 3] = [128, 0, 128];
pub const EXCLUDED_RGB: [u8; 3] = [0, 0, 0];

pub fn outcome_color(truth: bool, predicted: bool) -> [u8; 3] {
    match (truth, predicted) {
        (false, false) => TN_RGB,
        (true, false) => FN_RGB,
        (false, true) => FP_RGB,
        (true, true) => TP_RGB,
    }
}

/// Pixel-resolution image with each included block painted by outcome.
pub fn render_overlay(
    grid: &BlockGrid,
    truth: &BlockMap,
    predicted: &BlockMap,
) -> Result<RgbImage> {
    if truth.included != predicted.included || truth.included.dim() != grid.dims() {
        return Err(DociError::BlockSetMismatch);
    }
    let mut img = RgbImage::from_pixel(
        grid.width_px as u32,
        grid.height_px as u32,
        Rgb(EXCLUDED_RGB),
    );
    for ((br, bc), &inc) in truth.included.indexed_iter() {
        if !inc {
            continue;
        }
        let color = Rgb(outcome_color(
            truth.positive[[br, bc]],
            predicted.positive[[br, bc]],
        ));
        let (r0, r1, c0, c1) = grid.pixel_bounds(br, bc);
        for r in r0..r1 {
            for c in c0..c1 {
                img.put_pixel(c as u32, r as u32, color);
            }
        }
    }
    Ok(img)
}
