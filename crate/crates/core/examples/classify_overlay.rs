//! Train an LDA classifier on DOCI features from a tissue scene, score it on
//! 0.65 mm blocks and save the confusion overlay.
//!
//! cargo run --release -p doci --example classify_overlay [-- "[3 8 9]"]

use doci::camera::{acquire, AcquisitionConfig};
use doci::channels::ChannelSet;
use doci::classifier::{format_percent, render_overlay, ClassifierConfig, EvalMode, Evaluator};
use doci::phantom::{make_tissue_phantom, TissueSpec};
use doci::pipeline::{encode_png, DociStack};

fn main() -> doci::Result<()> {
    let channels = ChannelSet::parse(&std::env::args().nth(1).unwrap_or_else(|| "[3 8 9]".into()))?;
    let phantom = make_tissue_phantom(&TissueSpec::default())?;
    let maps = DociStack::from_channels(&acquire(&phantom, &AcquisitionConfig::default())?, None)?;

    for mode in [EvalMode::Resubstitution, EvalMode::HeldOut] {
        let config = ClassifierConfig {
            mode,
            ..Default::default()
        };
        let ev = Evaluator::new(&maps, &phantom.labels, phantom.pixel_pitch_mm, config)?;
        let result = ev.evaluate(&channels)?;
        let c = result.row.counts;
        println!(
            "{channels} {:<15} TN {} FN {} TP {} FP {}  sensitivity {} specificity {} accuracy {}",
            mode.label(),
            c.tn,
            c.fn_,
            c.tp,
            c.fp,
            format_percent(result.row.sensitivity),
            format_percent(result.row.specificity),
            format_percent(result.row.accuracy)
        );
        if mode == EvalMode::Resubstitution {
            let w: Vec<String> = result
                .model
                .weights
                .iter()
                .map(|w| format!("{w:+.2}"))
                .collect();
            println!(
                "  weights [{}], bias {:+.2}",
                w.join(", "),
                result.model.bias
            );
            let png = encode_png(&render_overlay(&ev.grid, &result.truth, &result.predicted)?)?;
            std::fs::write("overlay.png", png)?;
            println!("  overlay written to overlay.png");
        }
    }
    Ok(())
}
