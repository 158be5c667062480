//! Image the bar target through increasing optical blur and report the
//! finest bar spacing that keeps the contrast criterion.
//!
//! cargo run --release -p doci --example spatial_resolution

use doci::camera::AcquisitionConfig;
use doci::characterize::{resolve_bar_target, DEFAULT_CONTRAST_CRITERION};
use doci::phantom::BarTargetSpec;

fn main() -> doci::Result<()> {
    let spec = BarTargetSpec::default();
    for sigma in [0.5, 1.0, 2.0, 4.0] {
        let config = AcquisitionConfig {
            psf_sigma_px: sigma,
            ..AcquisitionConfig::noiseless()
        };
        let (report, _) = resolve_bar_target(&spec, &config, DEFAULT_CONTRAST_CRITERION)?;
        println!("psf sigma {sigma} px: {}", report.summary());
        for g in &report.groups {
            println!(
                "  {:>5.0} um ({} px bars): intensity contrast {:.3}, DOCI contrast {:.3}{}",
                g.spacing_um,
                g.bar_width_px,
                g.intensity_contrast,
                g.doci_contrast,
                if g.resolved { "  resolved" } else { "" }
            );
        }
    }
    Ok(())
}
