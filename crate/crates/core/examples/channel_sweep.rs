//! Train and score LDA classifiers on every 1-, 2- and 3-channel subset of a
//! synthetic tissue scene, then print the best rows and the full-set row.
//!
//! cargo run --release -p doci --example channel_sweep [-- --noiseless]

use std::time::Instant;

use doci::camera::{acquire, AcquisitionConfig};
use doci::channels::ChannelSet;
use doci::classifier::{channel_sweep, format_percent, ClassifierConfig, Evaluator, MetricsRow};
use doci::phantom::{make_tissue_phantom, TissueSpec};
use doci::pipeline::DociStack;

fn print_row(r: &MetricsRow) {
    let c = r.counts;
    println!(
        "{:<10} TN {:>4} FN {:>4} TP {:>4} FP {:>4}  sens {:>8} spec {:>8} acc {:>8}",
        r.channels.to_string(),
        c.tn,
        c.fn_,
        c.tp,
        c.fp,
        format_percent(r.sensitivity),
        format_percent(r.specificity),
        format_percent(r.accuracy)
    );
}

fn main() -> doci::Result<()> {
    let noiseless = std::env::args().any(|a| a == "--noiseless");
    let phantom = make_tissue_phantom(&TissueSpec::default())?;
    let config = if noiseless {
        AcquisitionConfig::noiseless()
    } else {
        AcquisitionConfig::default()
    };

    let start = Instant::now();
    let stack = acquire(&phantom, &config)?;
    let maps = DociStack::from_channels(&stack, None)?;
    println!("acquired 9 channels in {:.2?}", start.elapsed());

    let evaluator = Evaluator::new(
        &maps,
        &phantom.labels,
        phantom.pixel_pitch_mm,
        ClassifierConfig::default(),
    )?;
    let start = Instant::now();
    for size in 1..=3 {
        let rows = channel_sweep(&evaluator, &[size])?;
        println!("\n{size}-channel subsets ({} rows), best five:", rows.len());
        rows.iter().take(5).for_each(print_row);
    }
    println!("\nall channels:");
    print_row(&evaluator.evaluate(&ChannelSet::all())?.row);
    println!("\nsweep time {:.2?}", start.elapsed());
    Ok(())
}
