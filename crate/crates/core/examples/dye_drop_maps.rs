//! Image the dye-drop phantom on one channel, compute the DOCI map, compare
//! drops with Welch's t-test and write a heatmap next to the intensity frame.
//!
//! cargo run --release -p doci --example dye_drop_maps [-- OUT_DIR]

use std::path::PathBuf;

use doci::camera::{acquire_channel, AcquisitionConfig};
use doci::phantom::{make_dye_drop_phantom, DyeDropSpec};
use doci::pipeline::{
    compute_doci_default, encode_png, render_heatmap, render_intensity, roi_compare, roi_stats,
    Normalization, Palette, Roi,
};

fn main() -> doci::Result<()> {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "dye-drop-maps".into()),
    );
    std::fs::create_dir_all(&out)?;

    let spec = DyeDropSpec::default();
    let (phantom, drops) = make_dye_drop_phantom(&spec)?;
    let triplet = acquire_channel(&phantom, 2, &AcquisitionConfig::default())?;
    let map = compute_doci_default(&triplet, 2)?;
    println!("valid pixels {} of {}", map.valid_count(), map.values.len());

    let stats: Vec<_> = drops
        .iter()
        .map(|d| {
            let (r, c, h, w) = d.centered_roi(50);
            roi_stats(&map, &Roi::rect(r, c, h, w))
        })
        .collect::<doci::Result<_>>()?;
    for (d, s) in drops.iter().zip(&stats) {
        println!(
            "{:<16} conc {:>4}: DOCI {:.4} +/- {:.4} (n {})",
            spec.dyes[d.dye].name, d.concentration, s.mean, s.std, s.n
        );
    }
    let sig = roi_compare(&stats[0], &stats[1])?;
    println!("drop 0 vs 1: t = {:.1}, p = {:.2e}", sig.t, sig.p_value);

    let heat = render_heatmap(
        &map,
        Palette::Hot,
        Normalization::Fixed {
            low: 0.0,
            high: 0.3,
        },
    );
    std::fs::write(out.join("doci.png"), encode_png(&heat)?)?;
    std::fs::write(
        out.join("intensity.png"),
        encode_png(&render_intensity(&triplet.reference))?,
    )?;
    println!("wrote {}", out.display());
    Ok(())
}
