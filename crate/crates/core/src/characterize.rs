//! Calibration of DOCI against true lifetime, temporal resolution from ROI
//! noise, and spatial resolution on the bar target.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{acquire_channel, AcquisitionConfig};
use crate::channels::FIRST_CHANNEL;
use crate::error::{invalid, DociError, Result};
use crate::lifetime::{doci_value, Fluorophore, GateConfig, PumpPulse};
use crate::phantom::{make_usaf_phantom, BarGroup, BarTargetSpec, Phantom, Raster};
use crate::pipeline::{compute_doci_default, roi_stats, DociMap, Roi};

/// Contrast at or above which a bar group counts as resolved.
pub const DEFAULT_CONTRAST_CRITERION: f64 = 0.26;

/// Ordinary least squares of DOCI value on lifetime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFit {
    /// DOCI units per ns.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// ns per DOCI unit (`1/k`).
    pub inv_slope: f64,
}

impl CalibrationFit {
    /// Lifetime estimate for a DOCI value.
    pub fn lifetime_of(&self, doci: f64) -> f64 {
        (doci - self.intercept) * self.inv_slope
    }
}

/// OLS fit of `y` on `x`. With fewer than five points or a narrow span this
/// is still computed; callers that need the calibration contract use
/// [`linearity_fit`].
pub fn least_squares(x: &[f64], y: &[f64]) -> Result<CalibrationFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(invalid("need at least two paired points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(invalid("x values must not all be equal"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(CalibrationFit {
        slope,
        intercept,
        r_squared,
        inv_slope: if slope != 0.0 {
            1.0 / slope
        } else {
            f64::INFINITY
        },
    })
}

/// Lifetimes `0.1, 0.2, ..., 6.0` ns.
pub fn default_lifetime_grid() -> Vec<f64> {
    (1..=60).map(|i| i as f64 / 10.0).collect()
}

/// DOCI against lifetime for the default gate layout at `gate_width_ns`.
pub fn linearity_fit(
    pulse: &PumpPulse,
    gate_width_ns: f64,
    lifetimes_ns: &[f64],
) -> Result<CalibrationFit> {
    if lifetimes_ns.len() < 5 {
        return Err(invalid("linearity fit needs at least five lifetimes"));
    }
    let lo = lifetimes_ns.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = lifetimes_ns
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if lo > 0.1 + 1e-9 || hi < 6.0 - 1e-9 {
        return Err(invalid("lifetimes must span [0.1, 6] ns"));
    }
    let gate = GateConfig::for_pulse(pulse, gate_width_ns);
    let values = lifetimes_ns
        .par_iter()
        .map(|&tau| doci_value(pulse, &Fluorophore::new(1.0, tau)?, &gate).map(|v| v.0))
        .collect::<Result<Vec<_>>>()?;
    least_squares(lifetimes_ns, &values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FallTauCalibration {
    pub fall_tau_ns: f64,
    pub fit: CalibrationFit,
    pub iterations: usize,
}

/// Bisect the pump fall constant within `bracket` until the fitted `1/k`
/// matches `target_inv_slope` within `tolerance`. `1/k` increases with the
/// fall constant, and the bracket must straddle the target.
pub fn calibrate_fall_tau(
    pulse: &PumpPulse,
    gate_width_ns: f64,
    lifetimes_ns: &[f64],
    target_inv_slope: f64,
    bracket: (f64, f64),
    tolerance: f64,
) -> Result<FallTauCalibration> {
    let eval = |tau0: f64| linearity_fit(&pulse.with_fall_tau(tau0), gate_width_ns, lifetimes_ns);
    let (mut lo, mut hi) = bracket;
    let f_lo = eval(lo)?.inv_slope - target_inv_slope;
    let f_hi = eval(hi)?.inv_slope - target_inv_slope;
    if f_lo.signum() == f_hi.signum() {
        return Err(invalid(format!(
            "bracket [{lo}, {hi}] ns does not straddle 1/k = {target_inv_slope}"
        )));
    }
    let rising = f_hi > f_lo;
    for iterations in 1..=80 {
        let mid = 0.5 * (lo + hi);
        let fit = eval(mid)?;
        let err = fit.inv_slope - target_inv_slope;
        if err.abs() <= tolerance {
            return Ok(FallTauCalibration {
                fall_tau_ns: mid,
                fit,
                iterations,
            });
        }
        if (err > 0.0) == rising {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(invalid("fall constant bisection did not converge"))
}

/// Product of the average ROI standard deviation and the FLIM/DOCI ratio.
pub fn temporal_resolution(avg_std: f64, flim_doci_ratio: f64) -> Result<f64> {
    if !(avg_std > 0.0) || !(flim_doci_ratio > 0.0) {
        return Err(invalid(
            "standard deviation and ratio must both be positive",
        ));
    }
    Ok(avg_std * flim_doci_ratio)
}

/// Two-decimal display form, e.g. `0.14`.
pub fn format_ns(value: f64) -> String {
    format!("{value:.2}")
}

/// Mean of the per-ROI sample standard deviations of one DOCI map.
pub fn measure_stack_std(map: &DociMap, rois: &[Roi]) -> Result<f64> {
    if rois.is_empty() {
        return Err(DociError::EmptyRoi);
    }
    let mut total = 0.0;
    for roi in rois {
        total += roi_stats(map, roi)?.std;
    }
    Ok(total / rois.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseCalibration {
    pub photons_per_unit: f64,
    pub avg_std: f64,
    pub iterations: usize,
}

/// Bisect `photons_per_unit` (log scale) so that the average ROI std of the
/// DOCI map on `channel` reaches `target_std` within `rel_tolerance`. Noise
/// falls as the photon scale rises.
pub fn calibrate_noise(
    phantom: &Phantom,
    config: &AcquisitionConfig,
    channel: u8,
    rois: &[Roi],
    target_std: f64,
    bracket: (f64, f64),
    rel_tolerance: f64,
) -> Result<NoiseCalibration> {
    if !(target_std > 0.0) {
        return Err(invalid("target std must be positive"));
    }
    let eval = |scale: f64| -> Result<f64> {
        let mut cfg = config.clone();
        cfg.noise.photons_per_unit = scale;
        let triplet = acquire_channel(phantom, channel, &cfg)?;
        measure_stack_std(&compute_doci_default(&triplet, channel)?, rois)
    };
    let (mut lo, mut hi) = (bracket.0.ln(), bracket.1.ln());
    let (s_lo, s_hi) = (eval(lo.exp())?, eval(hi.exp())?);
    if !(s_lo > target_std && s_hi < target_std) {
        return Err(invalid(format!(
            "photon scale bracket gives std {s_lo:.5}..{s_hi:.5}, not straddling {target_std}"
        )));
    }
    for iterations in 1..=60 {
        let mid = 0.5 * (lo + hi);
        let avg_std = eval(mid.exp())?;
        if (avg_std - target_std).abs() <= rel_tolerance * target_std {
            return Ok(NoiseCalibration {
                photons_per_unit: mid.exp(),
                avg_std,
                iterations,
            });
        }
        if avg_std > target_std {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(invalid("noise bisection did not converge"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupContrast {
    pub spacing_um: f64,
    pub bar_width_px: usize,
    /// Michelson contrast of the reference-frame column profile.
    pub intensity_contrast: f64,
    /// Michelson contrast of the validity-weighted DOCI column profile.
    pub doci_contrast: f64,
    pub resolved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionReport {
    /// `None` when no group meets the criterion.
    pub finest_resolved_spacing_um: Option<f64>,
    pub criterion_contrast: f64,
    pub groups: Vec<GroupContrast>,
}

impl ResolutionReport {
    pub fn summary(&self) -> String {
        match self.finest_resolved_spacing_um {
            Some(s) => format!("finest resolved spacing {s:.0} um"),
            None => "unresolved at coarsest spacing".to_string(),
        }
    }
}

/// Column profile over the group's rows: mean of `value * weight`.
fn column_profile(
    raster: &Raster,
    weight: Option<&ndarray::Array2<bool>>,
    group: &BarGroup,
) -> Vec<f64> {
    let cols = group.col..group.col + group.extent_cols();
    let rows = group.rows();
    cols.map(|c| {
        let sum: f64 = rows
            .clone()
            .map(|r| match weight {
                Some(w) if !w[[r, c]] => 0.0,
                _ => raster[[r, c]],
            })
            .sum();
        sum / rows.len() as f64
    })
    .collect()
}

/// `(max over bar columns - min over gap columns) / (sum)`.
fn michelson(profile: &[f64], group: &BarGroup) -> f64 {
    let local = |c: usize| profile[c - group.col];
    let bar_max = (0..3)
        .flat_map(|i| group.bar_cols(i))
        .map(local)
        .fold(f64::NEG_INFINITY, f64::max);
    let gap_min = (0..2)
        .flat_map(|i| group.gap_cols(i))
        .map(local)
        .fold(f64::INFINITY, f64::min);
    let denom = bar_max + gap_min;
    if denom > 0.0 {
        ((bar_max - gap_min) / denom).max(0.0)
    } else {
        0.0
    }
}

/// A group is resolved when the background-subtracted reference intensity
/// across its bars reaches `criterion` Michelson contrast.
pub fn spatial_resolution(
    intensity: &Raster,
    map: &DociMap,
    groups: &[BarGroup],
    criterion: f64,
) -> Result<ResolutionReport> {
    if !(criterion > 0.0 && criterion < 1.0) {
        return Err(invalid("contrast criterion must lie in (0, 1)"));
    }
    if intensity.dim() != map.shape() {
        return Err(DociError::ShapeMismatch {
            expected: map.shape(),
            found: intensity.dim(),
        });
    }
    if groups.is_empty() {
        return Err(invalid("no bar groups"));
    }
    let (h, w) = intensity.dim();
    let mut contrasts = Vec::with_capacity(groups.len());
    for g in groups {
        if g.col + g.extent_cols() > w || g.row + g.length_px > h {
            return Err(invalid(format!(
                "bar group {:.0} um lies outside the raster",
                g.spacing_um
            )));
        }
        let intensity_contrast = michelson(&column_profile(intensity, None, g), g);
        let doci_contrast = michelson(&column_profile(&map.values, Some(&map.valid), g), g);
        contrasts.push(GroupContrast {
            spacing_um: g.spacing_um,
            bar_width_px: g.bar_width_px,
            intensity_contrast,
            doci_contrast,
            resolved: intensity_contrast >= criterion,
        });
    }
    let finest = contrasts
        .iter()
        .filter(|g| g.resolved)
        .map(|g| g.spacing_um)
        .fold(None, |acc: Option<f64>, s| {
            Some(acc.map_or(s, |a| a.min(s)))
        });
    Ok(ResolutionReport {
        finest_resolved_spacing_um: finest,
        criterion_contrast: criterion,
        groups: contrasts,
    })
}

/// Image the bar target on one channel and report resolution. The
/// intensity used for contrast is `reference - background`.
pub fn resolve_bar_target(
    spec: &BarTargetSpec,
    config: &AcquisitionConfig,
    criterion: f64,
) -> Result<(ResolutionReport, DociMap)> {
    let (phantom, groups) = make_usaf_phantom(spec)?;
    let channel = config.channels.first().copied().unwrap_or(FIRST_CHANNEL);
    let triplet = acquire_channel(&phantom, channel, config)?;
    let map = compute_doci_default(&triplet, channel)?;
    let intensity = &triplet.reference - &triplet.background;
    let report = spatial_resolution(&intensity, &map, &groups, criterion)?;
    Ok((report, map))
}
