//! Acquire a nine-channel stack, archive it as raster files plus a manifest,
//! read it back and show that a flipped byte is caught.
//!
//! cargo run --release -p doci --example stack_archive

use doci::archive::{read_stack, write_stack};
use doci::camera::{acquire, AcquisitionConfig};
use doci::phantom::{make_tissue_phantom, TissueSpec};

fn main() -> doci::Result<()> {
    let phantom = make_tissue_phantom(&TissueSpec::default().resized(128, 128))?;
    let stack = acquire(&phantom, &AcquisitionConfig::default())?;

    let dir = std::env::temp_dir().join(format!("doci-archive-{}", std::process::id()));
    let manifest = write_stack(&dir, &stack, None)?;
    println!("wrote {} files to {}", manifest.files.len(), dir.display());
    println!("manifest checksum {}", manifest.checksum);

    // Frames are stored as f32, so the first pass narrows the values and a
    // second pass is exact.
    let (back, _) = read_stack(&dir)?;
    let worst = back
        .channels
        .iter()
        .zip(&stack.channels)
        .flat_map(|(a, b)| {
            a.triplet
                .reference
                .iter()
                .zip(b.triplet.reference.iter())
                .map(|(x, y)| (x - y).abs() / y.abs().max(1e-12))
        })
        .fold(0.0, f64::max);
    println!("largest relative change from f32 storage: {worst:.1e}");
    let again = dir.with_extension("again");
    write_stack(&again, &back, None)?;
    let (twice, _) = read_stack(&again)?;
    let same = twice
        .channels
        .iter()
        .zip(&back.channels)
        .all(|(a, b)| a.triplet == b.triplet);
    println!("second round trip identical: {same}");
    std::fs::remove_dir_all(&again)?;

    let victim = dir.join(&manifest.files[0].name);
    let mut bytes = std::fs::read(&victim)?;
    let last = bytes.len() - 1;
    bytes[last] ^= 0x01;
    std::fs::write(&victim, bytes)?;
    match read_stack(&dir) {
        Ok(_) => println!("corruption went unnoticed"),
        Err(e) => println!("corrupted archive rejected: {} ({e})", e.code()),
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
