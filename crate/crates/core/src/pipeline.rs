//! Frame triplets to DOCI maps, ROI statistics and heatmaps.

use image::{Rgb, RgbImage};
use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use rayon::prelude::*;

use crate::camera::{ChannelStack, FrameTriplet};
use crate::error::{invalid, DociError, Result};
use crate::phantom::Raster;

/// Relative floor used when none is given: a fraction of the 99th
/// percentile of `reference - background`.
pub const DEFAULT_FLOOR_FRACTION: f64 = 1e-3;

/// Colour for pixels the algorithm treats as unreliable.
pub const UNRELIABLE_RGB: [u8; 3] = [0, 0, 255];

#[derive(Debug, Clone, PartialEq)]
pub struct DociMap {
    pub values: Raster,
    pub valid: Array2<bool>,
    pub channel: u8,
    pub denominator_floor: f64,
}

impl DociMap {
    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn valid_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .zip(self.valid.iter())
            .filter(|(_, ok)| **ok)
            .map(|(v, _)| *v)
    }

    /// Apply the linear lifetime calibration `tau = inv_slope * doci + offset`
    /// to valid pixels; invalid pixels stay at 0.
    pub fn to_lifetime(&self, inv_slope: f64, offset_ns: f64) -> Raster {
        Zip::from(&self.values)
            .and(&self.valid)
            .map_collect(|&v, &ok| if ok { inv_slope * v + offset_ns } else { 0.0 })
    }
}

fn check_shapes(t: &FrameTriplet) -> Result<()> {
    let dim = t.reference.dim();
    for r in [&t.decay, &t.background] {
        if r.dim() != dim {
            return Err(DociError::ShapeMismatch {
                expected: dim,
                found: r.dim(),
            });
        }
    }
    Ok(())
}

/// `DEFAULT_FLOOR_FRACTION` times the 99th percentile of
/// `reference - background`. Falls back to `f64::MIN_POSITIVE` for dark
/// frames so that every pixel is invalid.
pub fn default_floor(triplet: &FrameTriplet) -> Result<f64> {
    check_shapes(triplet)?;
    let mut diffs: Vec<f64> = Zip::from(&triplet.reference)
        .and(&triplet.background)
        .map_collect(|r, b| r - b)
        .into_iter()
        .filter(|d| d.is_finite())
        .collect();
    if diffs.is_empty() {
        return Ok(f64::MIN_POSITIVE);
    }
    let k = ((diffs.len() - 1) as f64 * 0.99).round() as usize;
    let (_, p99, _) = diffs.select_nth_unstable_by(k, |a, b| a.total_cmp(b));
    let floor = DEFAULT_FLOOR_FRACTION * *p99;
    Ok(if floor > 0.0 {
        floor
    } else {
        f64::MIN_POSITIVE
    })
}

/// Per-pixel `(decay - background) / (reference - background)` wherever the
/// denominator exceeds `floor`; other pixels are invalid and hold 0.
pub fn compute_doci(triplet: &FrameTriplet, floor: f64, channel: u8) -> Result<DociMap> {
    check_shapes(triplet)?;
    if !(floor > 0.0) {
        return Err(invalid(format!(
            "denominator floor must be positive, got {floor}"
        )));
    }
    let dim = triplet.reference.dim();
    let mut values = Array2::zeros(dim);
    let mut valid = Array2::from_elem(dim, false);
    Zip::from(&mut values)
        .and(&mut valid)
        .and(&triplet.reference)
        .and(&triplet.decay)
        .and(&triplet.background)
        .par_for_each(|v, ok, &r, &d, &b| {
            let denom = r - b;
            if denom > floor {
                let ratio = (d - b) / denom;
                if ratio.is_finite() {
                    *v = ratio;
                    *ok = true;
                }
            }
        });
    Ok(DociMap {
        values,
        valid,
        channel,
        denominator_floor: floor,
    })
}

pub fn compute_doci_default(triplet: &FrameTriplet, channel: u8) -> Result<DociMap> {
    compute_doci(triplet, default_floor(triplet)?, channel)
}

/// DOCI maps for several channels of one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct DociStack {
    pub maps: Vec<DociMap>,
}

impl DociStack {
    /// One map per acquired channel; `floor` of `None` uses [`default_floor`]
    /// per channel.
    pub fn from_channels(stack: &ChannelStack, floor: Option<f64>) -> Result<Self> {
        let maps = stack
            .channels
            .par_iter()
            .map(|c| match floor {
                Some(f) => compute_doci(&c.triplet, f, c.channel),
                None => compute_doci_default(&c.triplet, c.channel),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DociStack { maps })
    }

    pub fn get(&self, channel: u8) -> Result<&DociMap> {
        self.maps
            .iter()
            .find(|m| m.channel == channel)
            .ok_or(DociError::UnknownChannel(channel))
    }

    pub fn shape(&self) -> Option<(usize, usize)> {
        self.maps.first().map(|m| m.shape())
    }
}

/// Pixel selection for ROI statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Roi {
    Rect {
        row: usize,
        col: usize,
        height: usize,
        width: usize,
    },
    Pixels(Vec<(usize, usize)>),
}

impl Roi {
    pub fn rect(row: usize, col: usize, height: usize, width: usize) -> Self {
        Roi::Rect {
            row,
            col,
            height,
            width,
        }
    }

    pub fn pixels(&self, shape: (usize, usize)) -> Vec<(usize, usize)> {
        match self {
            Roi::Rect {
                row,
                col,
                height,
                width,
            } => {
                let rows = (*row).min(shape.0)..(row + height).min(shape.0);
                let cols = (*col).min(shape.1)..(col + width).min(shape.1);
                rows.flat_map(|r| cols.clone().map(move |c| (r, c)))
                    .collect()
            }
            Roi::Pixels(p) => p
                .iter()
                .copied()
                .filter(|&(r, c)| r < shape.0 && c < shape.1)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiStats {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 when n = 1.
    pub std: f64,
    pub n: usize,
    pub channel: u8,
}

pub fn roi_stats(map: &DociMap, roi: &Roi) -> Result<RoiStats> {
    let values: Vec<f64> = roi
        .pixels(map.shape())
        .into_iter()
        .filter(|&p| map.valid[p])
        .map(|p| map.values[p])
        .collect();
    let n = values.len();
    if n == 0 {
        return Err(DociError::EmptyRoi);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(RoiStats {
        mean,
        std,
        n,
        channel: map.channel,
    })
}

/// Welch two-sample t-test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub t: f64,
    /// Welch-Satterthwaite degrees of freedom.
    pub df: f64,
    /// Two-sided p-value from the Student t distribution with `df`.
    pub p_value: f64,
}

pub fn roi_compare(a: &RoiStats, b: &RoiStats) -> Result<Significance> {
    if a.n < 2 || b.n < 2 {
        return Err(invalid("each ROI needs at least two valid pixels"));
    }
    let va = a.std * a.std / a.n as f64;
    let vb = b.std * b.std / b.n as f64;
    let se2 = va + vb;
    if se2 == 0.0 {
        return Ok(if a.mean == b.mean {
            Significance {
                t: 0.0,
                df: (a.n + b.n - 2) as f64,
                p_value: 1.0,
            }
        } else {
            let t = if a.mean > b.mean {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            };
            Significance {
                t,
                df: (a.n + b.n - 2) as f64,
                p_value: 0.0,
            }
        });
    }
    let t = (a.mean - b.mean) / se2.sqrt();
    let df = se2 * se2 / (va * va / (a.n - 1) as f64 + vb * vb / (b.n - 1) as f64);
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| invalid(e.to_string()))?;
    let p_value = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(Significance { t, df, p_value })
}

/// Colour scale used for valid pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Palette {
    /// Black, red, yellow, white. Longer lifetimes render hotter.
    Hot,
    Gray,
}

impl Palette {
    /// Colour at `x` in [0, 1].
    pub fn color(self, x: f64) -> [u8; 3] {
        let x = x.clamp(0.0, 1.0);
        let q = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        match self {
            Palette::Hot => [q(3.0 * x), q(3.0 * x - 1.0), q(3.0 * x - 2.0)],
            Palette::Gray => [q(x), q(x), q(x)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Min and max over valid pixels of this map.
    MinMax,
    Fixed {
        low: f64,
        high: f64,
    },
}

pub fn render_heatmap(map: &DociMap, palette: Palette, normalization: Normalization) -> RgbImage {
    let (low, high) = match normalization {
        Normalization::Fixed { low, high } => (low, high),
        Normalization::MinMax => map
            .valid_values()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            }),
    };
    let span = high - low;
    let (h, w) = map.shape();
    RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let p = (y as usize, x as usize);
        if !map.valid[p] {
            return Rgb(UNRELIABLE_RGB);
        }
        let t = if span > 0.0 && span.is_finite() {
            (map.values[p] - low) / span
        } else {
            0.5
        };
        Rgb(palette.color(t))
    })
}

/// Grayscale 8-bit rendering of an intensity raster, scaled to its maximum.
pub fn render_intensity(raster: &Raster) -> RgbImage {
    let max = raster.iter().cloned().fold(0.0, f64::max);
    let (h, w) = raster.dim();
    RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let v = if max > 0.0 {
            raster[[y as usize, x as usize]] / max
        } else {
            0.0
        };
        Rgb(Palette::Gray.color(v))
    })
}

pub fn encode_png(image: &RgbImage) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    image.write_to(
        &mut std::io::Cursor::new(&mut bytes),
        image::ImageOutputFormat::Png,
    )?;
    Ok(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn triplet(reference: Raster, decay: Raster, background: Raster) -> FrameTriplet {
        FrameTriplet {
            reference,
            decay,
            background,
        }
    }

    #[test]
    fn dark_frames_are_invalid() {
        let t = triplet(
            Array2::from_elem((3, 3), 5.0),
            Array2::from_elem((3, 3), 5.0),
            Array2::from_elem((3, 3), 5.0),
        );
        let m = compute_doci_default(&t, 4).unwrap();
        assert_eq!(m.valid_count(), 0);
        assert!(m.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zero_numerator_is_valid_zero() {
        let t = triplet(
            Array2::from_elem((2, 2), 9.0),
            Array2::from_elem((2, 2), 1.0),
            Array2::from_elem((2, 2), 1.0),
        );
        let m = compute_doci(&t, 1e-6, 4).unwrap();
        assert_eq!(m.valid_count(), 4);
        assert!(m.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn shape_mismatch() {
        let t = triplet(
            Array2::zeros((2, 2)),
            Array2::zeros((2, 3)),
            Array2::zeros((2, 2)),
        );
        assert!(matches!(
            compute_doci(&t, 1.0, 2),
            Err(DociError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn roi_statistics() {
        let map = DociMap {
            values: array![[0.2, 0.4], [0.7, 0.9]],
            valid: array![[true, true], [false, false]],
            channel: 3,
            denominator_floor: 1e-3,
        };
        let s = roi_stats(&map, &Roi::rect(0, 0, 2, 2)).unwrap();
        assert_eq!(s.n, 2);
        assert!((s.mean - 0.3).abs() < 1e-12);
        assert!((s.std - 0.141421356).abs() < 1e-6);
        assert!(matches!(
            roi_stats(&map, &Roi::rect(1, 0, 1, 2)),
            Err(DociError::EmptyRoi)
        ));
        let constant = DociMap {
            values: Array2::from_elem((4, 4), 0.25),
            valid: Array2::from_elem((4, 4), true),
            ..map
        };
        let s = roi_stats(&constant, &Roi::rect(0, 0, 4, 4)).unwrap();
        assert_eq!((s.mean, s.std), (0.25, 0.0));
    }

    #[test]
    fn welch_examples() {
        let a = RoiStats {
            mean: 0.4,
            std: 0.02,
            n: 50,
            channel: 2,
        };
        let same = roi_compare(&a, &a).unwrap();
        assert_eq!(same.t, 0.0);
        assert!((same.p_value - 1.0).abs() < 1e-12);

        let a = RoiStats {
            mean: 0.3,
            std: 0.05,
            n: 2500,
            channel: 2,
        };
        let b = RoiStats {
            mean: 0.5,
            std: 0.05,
            n: 2500,
            channel: 2,
        };
        let s = roi_compare(&a, &b).unwrap();
        assert!((s.t + 141.421356).abs() < 1e-3);
        assert!(s.p_value < 1e-10);

        let one = RoiStats { n: 1, ..a };
        assert!(roi_compare(&one, &b).is_err());

        let flat = RoiStats {
            mean: 0.3,
            std: 0.0,
            n: 10,
            channel: 2,
        };
        assert_eq!(roi_compare(&flat, &flat).unwrap().p_value, 1.0);
    }

    #[test]
    fn heatmap_colors() {
        let map = DociMap {
            values: array![[0.1, 0.3], [0.1, 0.0]],
            valid: array![[true, true], [true, false]],
            channel: 8,
            denominator_floor: 1.0,
        };
        let img = render_heatmap(&map, Palette::Hot, Normalization::MinMax);
        let low = img.get_pixel(0, 0).0;
        let high = img.get_pixel(1, 0).0;
        assert_eq!(img.get_pixel(0, 1).0, low);
        assert_ne!(low, high);
        assert!(
            high.iter().map(|&v| v as u32).sum::<u32>()
                > low.iter().map(|&v| v as u32).sum::<u32>()
        );
        assert_eq!(img.get_pixel(1, 1).0, UNRELIABLE_RGB);

        let constant = DociMap {
            values: Array2::from_elem((2, 2), 0.2),
            valid: Array2::from_elem((2, 2), true),
            ..map.clone()
        };
        let img = render_heatmap(
            &constant,
            Palette::Hot,
            Normalization::Fixed {
                low: 0.1,
                high: 0.3,
            },
        );
        assert!(img.pixels().all(|p| p.0 == Palette::Hot.color(0.5)));

        let dead = DociMap {
            valid: Array2::from_elem((2, 2), false),
            ..map
        };
        assert!(render_heatmap(&dead, Palette::Hot, Normalization::MinMax)
            .pixels()
            .all(|p| p.0 == UNRELIABLE_RGB));
    }

    #[test]
    fn palette_never_uses_reserved_color() {
        for i in 0..=255 {
            assert_ne!(Palette::Hot.color(i as f64 / 255.0), UNRELIABLE_RGB);
        }
    }
}
