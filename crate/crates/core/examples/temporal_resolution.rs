//! Temporal resolution from dye-drop noise: measure the average ROI standard
//! deviation of DOCI maps, tune the photon scale until it reaches the target,
//! and multiply by the calibrated ns-per-DOCI ratio.
//!
//! cargo run --release -p doci --example temporal_resolution

use doci::camera::{acquire_channel, AcquisitionConfig};
use doci::characterize::{
    calibrate_noise, default_lifetime_grid, format_ns, linearity_fit, measure_stack_std,
    temporal_resolution,
};
use doci::phantom::{make_dye_drop_phantom, DyeDropSpec};
use doci::pipeline::{compute_doci_default, Roi};

const CHANNEL: u8 = 2;
const TARGET_STD: f64 = 0.0068;

fn main() -> doci::Result<()> {
    let (phantom, drops) = make_dye_drop_phantom(&DyeDropSpec::default())?;
    let rois: Vec<Roi> = drops
        .iter()
        .map(|d| {
            let (r, c, h, w) = d.centered_roi(50);
            Roi::rect(r, c, h, w)
        })
        .collect();

    let config = AcquisitionConfig::default();
    let triplet = acquire_channel(&phantom, CHANNEL, &config)?;
    let std = measure_stack_std(&compute_doci_default(&triplet, CHANNEL)?, &rois)?;
    println!(
        "default noise (photons_per_unit {:e}): average ROI std {std:.5}",
        config.noise.photons_per_unit
    );

    let cal = calibrate_noise(
        &phantom,
        &config,
        CHANNEL,
        &rois,
        TARGET_STD,
        (1e-7, 1e-1),
        0.005,
    )?;
    println!(
        "calibrated photons_per_unit {:.4e} -> average ROI std {:.5} ({} bisection steps)",
        cal.photons_per_unit, cal.avg_std, cal.iterations
    );

    let fit = linearity_fit(
        &config.pulse,
        config.gate.width_ns,
        &default_lifetime_grid(),
    )?;
    let resolution = temporal_resolution(cal.avg_std, fit.inv_slope)?;
    println!("1/k = {:.2} ns, R^2 = {:.5}", fit.inv_slope, fit.r_squared);
    println!(
        "temporal resolution {} ns ({resolution:.4})",
        format_ns(resolution)
    );
    Ok(())
}
