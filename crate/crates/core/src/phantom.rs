//! Synthetic scenes with per-pixel ground truth.

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::channels::{FilterChannel, CHANNEL_COUNT};
use crate::error::{invalid, DociError, Result};
use crate::lifetime::MAX_LIFETIME_NS;

pub type Raster = Array2<f64>;

/// Field of view of the calibration setup, in mm.
pub const DEFAULT_FOV_MM: f64 = 20.0;

/// Ground-truth class labels.
pub mod label {
    pub const CORKBOARD: u8 = 0;
    pub const CARTILAGE: u8 = 1;
    pub const FIBROUS: u8 = 2;
    pub const CANCER: u8 = 3;
}

/// A synthetic scene. Rasters are indexed `[row, col]`, row-major with the
/// origin at the top-left.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub id: String,
    pub pixel_pitch_mm: f64,
    /// One lifetime raster per filter channel, in channel order 2..=10.
    pub lifetime_ns: Vec<Raster>,
    pub amplitude: Raster,
    pub illumination: Raster,
    pub labels: Array2<u8>,
    /// Relative emission yield per class label, one entry per channel.
    pub class_yield: BTreeMap<u8, [f64; CHANNEL_COUNT]>,
}

impl Phantom {
    pub fn width(&self) -> usize {
        self.amplitude.ncols()
    }

    pub fn height(&self) -> usize {
        self.amplitude.nrows()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.amplitude.dim()
    }

    pub fn lifetime_for(&self, channel: &FilterChannel) -> &Raster {
        &self.lifetime_ns[channel.slot()]
    }

    pub fn yield_for(&self, label: u8, channel: &FilterChannel) -> f64 {
        self.class_yield
            .get(&label)
            .map_or(1.0, |y| y[channel.slot()])
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.shape();
        if dim.0 == 0 || dim.1 == 0 {
            return Err(invalid("phantom must have positive dimensions"));
        }
        if !(self.pixel_pitch_mm > 0.0) {
            return Err(invalid("pixel pitch must be positive"));
        }
        if self.lifetime_ns.len() != CHANNEL_COUNT {
            return Err(invalid(format!(
                "expected {CHANNEL_COUNT} lifetime rasters, found {}",
                self.lifetime_ns.len()
            )));
        }
        let check = |found: (usize, usize)| {
            if found != dim {
                Err(DociError::ShapeMismatch {
                    expected: dim,
                    found,
                })
            } else {
                Ok(())
            }
        };
        check(self.illumination.dim())?;
        check(self.labels.dim())?;
        for raster in &self.lifetime_ns {
            check(raster.dim())?;
            if raster.iter().any(|&t| !(t > 0.0 && t <= MAX_LIFETIME_NS)) {
                return Err(invalid(format!(
                    "lifetimes must lie in (0, {MAX_LIFETIME_NS}] ns"
                )));
            }
        }
        if self
            .amplitude
            .iter()
            .any(|&a| !(a >= 0.0) || !a.is_finite())
        {
            return Err(invalid("amplitudes must be finite and nonnegative"));
        }
        if self
            .illumination
            .iter()
            .any(|&a| !(a >= 0.0) || !a.is_finite())
        {
            return Err(invalid("illumination must be finite and nonnegative"));
        }
        Ok(())
    }

    /// Pixels that belong to the specimen, i.e. any non-corkboard label.
    pub fn tissue_mask(&self) -> Array2<bool> {
        self.labels.mapv(|l| l != label::CORKBOARD)
    }
}

/// Geometric primitives in pixel coordinates; a pixel is inside when its
/// center `(col + 0.5, row + 0.5)` is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Disk { cx: f64, cy: f64, r: f64 },
    Ellipse { cx: f64, cy: f64, rx: f64, ry: f64 },
    Rect { x: f64, y: f64, w: f64, h: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
}

impl Shape {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            Shape::Disk { cx, cy, r } => (x - cx).powi(2) + (y - cy).powi(2) <= r * r,
            Shape::Ellipse { cx, cy, rx, ry } => {
                ((x - cx) / rx).powi(2) + ((y - cy) / ry).powi(2) <= 1.0
            }
            Shape::Rect { x: rx, y: ry, w, h } => x >= *rx && x < rx + w && y >= *ry && y < ry + h,
            Shape::Polygon { vertices } => point_in_polygon(vertices, x, y),
        }
    }

    pub fn mask(&self, height: usize, width: usize) -> Array2<bool> {
        Array2::from_shape_fn((height, width), |(r, c)| {
            self.contains(c as f64 + 0.5, r as f64 + 0.5)
        })
    }

    /// Scale x by `sx` and y by `sy` about the origin. Disks scale by the
    /// mean factor.
    pub fn scaled(&self, sx: f64, sy: f64) -> Shape {
        match self {
            Shape::Disk { cx, cy, r } => Shape::Disk {
                cx: cx * sx,
                cy: cy * sy,
                r: r * 0.5 * (sx + sy),
            },
            Shape::Ellipse { cx, cy, rx, ry } => Shape::Ellipse {
                cx: cx * sx,
                cy: cy * sy,
                rx: rx * sx,
                ry: ry * sy,
            },
            Shape::Rect { x, y, w, h } => Shape::Rect {
                x: x * sx,
                y: y * sy,
                w: w * sx,
                h: h * sy,
            },
            Shape::Polygon { vertices } => Shape::Polygon {
                vertices: vertices.iter().map(|[x, y]| [x * sx, y * sy]).collect(),
            },
        }
    }
}

fn point_in_polygon(vertices: &[[f64; 2]], x: f64, y: f64) -> bool {
    let mut inside = false;
    let n = vertices.len();
    if n < 3 {
        return false;
    }
    let mut j = n - 1;
    for i in 0..n {
        let ([xi, yi], [xj, yj]) = (vertices[i], vertices[j]);
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Relative illumination across the field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Illumination {
    Uniform,
    /// `1 / (1 + (ratio - 1) (r / r_corner)^2)`: unity at the center,
    /// `1 / ratio` at the corners.
    Radial {
        ratio: f64,
    },
}

impl Illumination {
    pub fn render(&self, height: usize, width: usize) -> Raster {
        match *self {
            Illumination::Uniform => Array2::ones((height, width)),
            Illumination::Radial { ratio } => {
                let (cx, cy) = (width as f64 / 2.0, height as f64 / 2.0);
                let corner2 = cx * cx + cy * cy;
                Array2::from_shape_fn((height, width), |(r, c)| {
                    let (dx, dy) = (c as f64 + 0.5 - cx, r as f64 + 0.5 - cy);
                    1.0 / (1.0 + (ratio - 1.0) * (dx * dx + dy * dy) / corner2)
                })
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Illumination::Radial { ratio } if !(ratio >= 1.0) => {
                Err(invalid("radial illumination ratio must be >= 1"))
            }
            _ => Ok(()),
        }
    }
}

fn pitch_for(width_px: usize, fov_mm: f64) -> f64 {
    fov_mm / width_px as f64
}

fn uniform_yields(labels: impl IntoIterator<Item = u8>) -> BTreeMap<u8, [f64; CHANNEL_COUNT]> {
    labels
        .into_iter()
        .map(|l| (l, [1.0; CHANNEL_COUNT]))
        .collect()
}

// ---------------------------------------------------------------------------
// Bar target

/// Three-bar groups with halving spacings, all coated with one fluorophore.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BarTargetSpec {
    pub width_px: usize,
    pub height_px: usize,
    pub fov_mm: f64,
    /// Finest line spacing (bar width), in micrometres.
    pub finest_spacing_um: f64,
    pub groups: usize,
    pub lifetime_ns: f64,
    pub amplitude: f64,
    pub illumination: Illumination,
}

impl Default for BarTargetSpec {
    fn default() -> Self {
        BarTargetSpec {
            width_px: 512,
            height_px: 512,
            fov_mm: DEFAULT_FOV_MM,
            finest_spacing_um: 70.0,
            groups: 4,
            lifetime_ns: 3.0,
            amplitude: 1.0,
            illumination: Illumination::Radial { ratio: 3.0 },
        }
    }
}

/// Placement of one three-bar group; bars are vertical.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarGroup {
    pub spacing_um: f64,
    pub bar_width_px: usize,
    /// Column of the left edge of the first bar.
    pub col: usize,
    pub row: usize,
    /// Bar length in rows.
    pub length_px: usize,
}

impl BarGroup {
    /// Columns of bar `i` (0..3).
    pub fn bar_cols(&self, i: usize) -> std::ops::Range<usize> {
        let start = self.col + 2 * i * self.bar_width_px;
        start..start + self.bar_width_px
    }

    /// Columns of the gap after bar `i` (0..2).
    pub fn gap_cols(&self, i: usize) -> std::ops::Range<usize> {
        let start = self.col + (2 * i + 1) * self.bar_width_px;
        start..start + self.bar_width_px
    }

    pub fn rows(&self) -> std::ops::Range<usize> {
        self.row..self.row + self.length_px
    }

    pub fn extent_cols(&self) -> usize {
        5 * self.bar_width_px
    }
}

impl BarTargetSpec {
    pub fn pixel_pitch_mm(&self) -> f64 {
        pitch_for(self.width_px, self.fov_mm)
    }

    /// Group layout: spacings `finest * 2^k`, bar width `ceil(spacing / pitch)`.
    pub fn layout(&self) -> Result<Vec<BarGroup>> {
        let pitch_um = self.pixel_pitch_mm() * 1000.0;
        let finest_px = self.finest_spacing_um / pitch_um;
        // Two pixels per line spacing is the sampling floor; tolerate
        // rounding in the pitch arithmetic.
        if finest_px < 1.0 || finest_px.ceil() < 2.0 {
            return Err(DociError::BelowNyquist {
                spacing_px: finest_px,
            });
        }
        if self.groups == 0 {
            return Err(invalid("bar target needs at least one group"));
        }
        let margin = self.width_px / 16 + 2;
        let mut col = margin;
        let mut groups = Vec::with_capacity(self.groups);
        for k in 0..self.groups {
            let spacing_um = self.finest_spacing_um * 2f64.powi(k as i32);
            let bar_width_px = (spacing_um / pitch_um - 1e-9).ceil() as usize;
            let length_px = 5 * bar_width_px;
            let row = self.height_px / 2 - length_px.min(self.height_px / 2) / 2;
            if col + 5 * bar_width_px + margin > self.width_px || length_px > self.height_px {
                return Err(invalid(format!(
                    "bar group {k} ({spacing_um} um) does not fit in {}x{} px",
                    self.width_px, self.height_px
                )));
            }
            groups.push(BarGroup {
                spacing_um,
                bar_width_px,
                col,
                row,
                length_px,
            });
            col += 5 * bar_width_px + 3 * bar_width_px.max(4);
        }
        Ok(groups)
    }
}

pub fn make_usaf_phantom(spec: &BarTargetSpec) -> Result<(Phantom, Vec<BarGroup>)> {
    spec.illumination.validate()?;
    if !(spec.lifetime_ns > 0.0 && spec.lifetime_ns <= MAX_LIFETIME_NS) {
        return Err(invalid("bar lifetime out of range"));
    }
    let groups = spec.layout()?;
    let (h, w) = (spec.height_px, spec.width_px);
    let mut amplitude = Array2::zeros((h, w));
    let mut labels = Array2::zeros((h, w));
    for g in &groups {
        for bar in 0..3 {
            for r in g.rows() {
                for c in g.bar_cols(bar) {
                    amplitude[[r, c]] = spec.amplitude;
                    labels[[r, c]] = 1u8;
                }
            }
        }
    }
    let phantom = Phantom {
        id: format!("usaf-{}um", spec.finest_spacing_um),
        pixel_pitch_mm: spec.pixel_pitch_mm(),
        lifetime_ns: vec![Array2::from_elem((h, w), spec.lifetime_ns); CHANNEL_COUNT],
        amplitude,
        illumination: spec.illumination.render(h, w),
        labels,
        class_yield: uniform_yields([0, 1]),
    };
    phantom.validate()?;
    Ok((phantom, groups))
}

// ---------------------------------------------------------------------------
// Dye drops

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dye {
    pub name: String,
    pub lifetime_ns: f64,
}

/// Drops of several dyes, each at several concentrations, on a dark slide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DyeDropSpec {
    pub width_px: usize,
    pub height_px: usize,
    pub fov_mm: f64,
    pub dyes: Vec<Dye>,
    /// Relative concentrations; amplitude scales linearly with them.
    pub concentrations: Vec<f64>,
    pub drop_radius_px: f64,
    pub illumination: Illumination,
}

impl Default for DyeDropSpec {
    fn default() -> Self {
        DyeDropSpec {
            width_px: 512,
            height_px: 512,
            fov_mm: DEFAULT_FOV_MM,
            dyes: vec![
                Dye {
                    name: "laurdan".into(),
                    lifetime_ns: 4.0,
                },
                Dye {
                    name: "nadh".into(),
                    lifetime_ns: 0.5,
                },
                Dye {
                    name: "hydroxycoumarin".into(),
                    lifetime_ns: 2.5,
                },
            ],
            concentrations: vec![1.0, 10.0],
            drop_radius_px: 60.0,
            illumination: Illumination::Radial { ratio: 3.0 },
        }
    }
}

/// One drop; label `i + 1` in the phantom's label map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropRegion {
    pub dye: usize,
    pub concentration: f64,
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
}

impl DropRegion {
    /// Centered `size x size` ROI as `(row, col, height, width)`.
    pub fn centered_roi(&self, size: usize) -> (usize, usize, usize, usize) {
        let half = size as f64 / 2.0;
        (
            (self.cy - half).round() as usize,
            (self.cx - half).round() as usize,
            size,
            size,
        )
    }
}

pub fn make_dye_drop_phantom(spec: &DyeDropSpec) -> Result<(Phantom, Vec<DropRegion>)> {
    spec.illumination.validate()?;
    if spec.dyes.is_empty() || spec.concentrations.is_empty() {
        return Err(invalid("need at least one dye and one concentration"));
    }
    if spec.dyes.len() + spec.concentrations.len() > 250 {
        return Err(invalid("too many drops"));
    }
    let (h, w) = (spec.height_px, spec.width_px);
    let (cols, rows) = (spec.dyes.len(), spec.concentrations.len());
    let (cell_w, cell_h) = (w as f64 / cols as f64, h as f64 / rows as f64);
    if 2.0 * spec.drop_radius_px > cell_w.min(cell_h) {
        return Err(invalid("drops do not fit in their grid cells"));
    }
    let mut drops = Vec::new();
    for (ci, &conc) in spec.concentrations.iter().enumerate() {
        for (di, _) in spec.dyes.iter().enumerate() {
            drops.push(DropRegion {
                dye: di,
                concentration: conc,
                cx: (di as f64 + 0.5) * cell_w,
                cy: (ci as f64 + 0.5) * cell_h,
                radius: spec.drop_radius_px,
            });
        }
    }
    let mut amplitude = Array2::zeros((h, w));
    let mut labels = Array2::zeros((h, w));
    let mut lifetime = Array2::from_elem((h, w), 1.0);
    for (i, d) in drops.iter().enumerate() {
        let disk = Shape::Disk {
            cx: d.cx,
            cy: d.cy,
            r: d.radius,
        };
        let tau = spec.dyes[d.dye].lifetime_ns;
        for ((r, c), inside) in disk.mask(h, w).indexed_iter() {
            if *inside {
                amplitude[[r, c]] = d.concentration;
                labels[[r, c]] = (i + 1) as u8;
                lifetime[[r, c]] = tau;
            }
        }
    }
    let phantom = Phantom {
        id: "dye-drops".into(),
        pixel_pitch_mm: pitch_for(w, spec.fov_mm),
        lifetime_ns: vec![lifetime; CHANNEL_COUNT],
        amplitude,
        illumination: spec.illumination.render(h, w),
        labels,
        class_yield: uniform_yields(0..=drops.len() as u8),
    };
    phantom.validate()?;
    Ok((phantom, drops))
}

// ---------------------------------------------------------------------------
// Tissue

/// Optical properties of one class, per channel 2..=10.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassOptics {
    pub label: u8,
    pub name: String,
    pub lifetime_ns: [f64; CHANNEL_COUNT],
    pub relative_yield: [f64; CHANNEL_COUNT],
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub label: u8,
    pub shape: Shape,
}

/// Specimen on corkboard with benign and cancerous inclusions.
///
/// Cancer lifetimes are derived from the fibrous lifetimes plus
/// `cancer_delta_ns` on `separating_channels`; the `cancer` row of
/// `classes` only supplies yield and amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TissueSpec {
    pub width_px: usize,
    pub height_px: usize,
    pub fov_mm: f64,
    pub classes: Vec<ClassOptics>,
    pub separating_channels: Vec<u8>,
    pub cancer_delta_ns: f64,
    /// Outline of the specimen; filled with fibrous tissue.
    pub specimen: Shape,
    /// Painted in order over the specimen.
    pub inclusions: Vec<Region>,
    /// Peak-to-peak relative amplitude texture across the specimen.
    pub amplitude_texture: f64,
    pub illumination: Illumination,
}

const DEFAULT_YIELD: [f64; CHANNEL_COUNT] = [4.0, 0.8, 0.9, 1.0, 1.0, 1.0, 0.9, 0.8, 0.7];

impl Default for TissueSpec {
    fn default() -> Self {
        let uniform = |v: f64| [v; CHANNEL_COUNT];
        let separating = vec![3, 7, 8, 9, 10];
        let fibrous = uniform(2.0);
        let cancer_delta_ns = 2.0;
        // Cartilage mimics cancer on the separating channels and is short
        // lived elsewhere, so no single channel isolates cancer.
        let mut cartilage = uniform(0.5);
        for &ch in &separating {
            cartilage[FilterChannel::slot_of(ch).unwrap()] = 2.0 + cancer_delta_ns;
        }
        let class = |label, name: &str, lifetime_ns, amplitude| ClassOptics {
            label,
            name: name.into(),
            lifetime_ns,
            relative_yield: DEFAULT_YIELD,
            amplitude,
        };
        TissueSpec {
            width_px: 512,
            height_px: 512,
            fov_mm: DEFAULT_FOV_MM,
            classes: vec![
                class(label::CORKBOARD, "corkboard", uniform(0.8), 0.6),
                class(label::CARTILAGE, "cartilage", cartilage, 1.2),
                class(label::FIBROUS, "fibrous", fibrous, 1.0),
                class(label::CANCER, "cancer", fibrous, 0.9),
            ],
            separating_channels: separating,
            cancer_delta_ns,
            specimen: Shape::Ellipse {
                cx: 256.0,
                cy: 256.0,
                rx: 220.0,
                ry: 190.0,
            },
            inclusions: vec![
                Region {
                    label: label::CARTILAGE,
                    shape: Shape::Polygon {
                        vertices: vec![
                            [70.0, 230.0],
                            [200.0, 150.0],
                            [230.0, 200.0],
                            [110.0, 330.0],
                        ],
                    },
                },
                Region {
                    label: label::CANCER,
                    shape: Shape::Ellipse {
                        cx: 340.0,
                        cy: 250.0,
                        rx: 95.0,
                        ry: 80.0,
                    },
                },
                Region {
                    label: label::CANCER,
                    shape: Shape::Disk {
                        cx: 190.0,
                        cy: 370.0,
                        r: 40.0,
                    },
                },
            ],
            amplitude_texture: 0.4,
            illumination: Illumination::Radial { ratio: 2.0 },
        }
    }
}

impl TissueSpec {
    /// The same specimen sampled on a `width_px x height_px` grid over the
    /// same field of view.
    pub fn resized(&self, width_px: usize, height_px: usize) -> TissueSpec {
        let (sx, sy) = (
            width_px as f64 / self.width_px as f64,
            height_px as f64 / self.height_px as f64,
        );
        TissueSpec {
            width_px,
            height_px,
            specimen: self.specimen.scaled(sx, sy),
            inclusions: self
                .inclusions
                .iter()
                .map(|r| Region {
                    label: r.label,
                    shape: r.shape.scaled(sx, sy),
                })
                .collect(),
            ..self.clone()
        }
    }

    pub fn class(&self, label: u8) -> Option<&ClassOptics> {
        self.classes.iter().find(|c| c.label == label)
    }

    /// Per-channel lifetimes actually used for `label`.
    pub fn lifetimes_for(&self, label: u8) -> Result<[f64; CHANNEL_COUNT]> {
        if label == label::CANCER {
            let mut base = self
                .class(label::FIBROUS)
                .ok_or_else(|| invalid("tissue spec lacks a fibrous class"))?
                .lifetime_ns;
            for &ch in &self.separating_channels {
                base[FilterChannel::slot_of(ch)?] += self.cancer_delta_ns;
            }
            Ok(base)
        } else {
            self.class(label)
                .map(|c| c.lifetime_ns)
                .ok_or_else(|| invalid(format!("tissue spec lacks class {label}")))
        }
    }
}

pub fn make_tissue_phantom(spec: &TissueSpec) -> Result<Phantom> {
    spec.illumination.validate()?;
    let (h, w) = (spec.height_px, spec.width_px);
    for required in [label::CORKBOARD, label::FIBROUS, label::CANCER] {
        if spec.class(required).is_none() {
            return Err(invalid(format!("tissue spec lacks class {required}")));
        }
    }
    for ch in &spec.separating_channels {
        FilterChannel::slot_of(*ch)?;
    }

    let specimen = spec.specimen.mask(h, w);
    let mut labels = specimen.mapv(|inside| {
        if inside {
            label::FIBROUS
        } else {
            label::CORKBOARD
        }
    });
    let masks: Vec<Array2<bool>> = spec.inclusions.iter().map(|r| r.shape.mask(h, w)).collect();
    for (i, (ri, mi)) in spec.inclusions.iter().zip(&masks).enumerate() {
        if spec.class(ri.label).is_none() {
            return Err(invalid(format!(
                "inclusion {i} uses unknown class {}",
                ri.label
            )));
        }
        for (j, (rj, mj)) in spec.inclusions.iter().zip(&masks).enumerate().skip(i + 1) {
            let mixed = (ri.label == label::CANCER) != (rj.label == label::CANCER);
            if mixed && mi.iter().zip(mj.iter()).any(|(a, b)| *a && *b) {
                return Err(DociError::OverlappingRegions(format!(
                    "inclusion {i} (class {}) overlaps inclusion {j} (class {})",
                    ri.label, rj.label
                )));
            }
        }
        if mi.iter().zip(specimen.iter()).any(|(m, s)| *m && !*s) {
            return Err(invalid(format!(
                "inclusion {i} extends outside the specimen"
            )));
        }
    }
    for (r, m) in spec.inclusions.iter().zip(&masks) {
        for (dst, inside) in labels.iter_mut().zip(m.iter()) {
            if *inside {
                *dst = r.label;
            }
        }
    }

    let tables: BTreeMap<u8, [f64; CHANNEL_COUNT]> = spec
        .classes
        .iter()
        .map(|c| spec.lifetimes_for(c.label).map(|t| (c.label, t)))
        .collect::<Result<_>>()?;
    let lifetime_ns = (0..CHANNEL_COUNT)
        .map(|slot| labels.mapv(|l| tables[&l][slot]))
        .collect();

    // Smooth deterministic texture so raw intensity carries no class signal.
    let texture = spec.amplitude_texture;
    let amplitude = Array2::from_shape_fn((h, w), |(r, c)| {
        let l = labels[[r, c]];
        let base = spec.class(l).map_or(1.0, |k| k.amplitude);
        let (x, y) = (c as f64 / w as f64, r as f64 / h as f64);
        let wave = (x * 7.3 + y * 2.1).sin() * (y * 5.7 - x * 1.3).cos();
        base * (1.0 + 0.5 * texture * wave)
    });

    let phantom = Phantom {
        id: "tissue".into(),
        pixel_pitch_mm: pitch_for(w, spec.fov_mm),
        lifetime_ns,
        amplitude,
        illumination: spec.illumination.render(h, w),
        labels,
        class_yield: spec
            .classes
            .iter()
            .map(|c| (c.label, c.relative_yield))
            .collect(),
    };
    phantom.validate()?;
    Ok(phantom)
}

/// Declarative phantom document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhantomSpec {
    Tissue(TissueSpec),
    Usaf(BarTargetSpec),
    DyeDrops(DyeDropSpec),
}

impl PhantomSpec {
    pub fn build(&self) -> Result<Phantom> {
        match self {
            PhantomSpec::Tissue(s) => make_tissue_phantom(s),
            PhantomSpec::Usaf(s) => make_usaf_phantom(s).map(|(p, _)| p),
            PhantomSpec::DyeDrops(s) => make_dye_drop_phantom(s).map(|(p, _)| p),
        }
    }
}
