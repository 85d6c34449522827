//! From a 5 s window to a feature vector: periodogram PSD, five band powers
//! per channel, and the four band-ratio indexes.
//!
//! Run with `cargo run --example band_features`.

use passio::dsp::{sliding_windows, WindowSpec};
use passio::features::{assemble_features, band_powers, psd, ratio_indexes, RATIO_INDEX_NAMES};
use passio::io::synth::{synthesize_trial, SyntheticSpec};
use passio::montage::BANDS;
use passio::VadLevel;

fn main() -> passio::Result<()> {
    let spec = SyntheticSpec::demo();
    let trial = synthesize_trial(&spec, 1, 1, VadLevel::new(1, 1, -1)?, 7)?;
    let windows = sliding_windows(&trial.segment, &WindowSpec::new(5.0, 5.0)?)?;
    let window = &windows[0].segment;

    // Band powers per channel, in microvolts squared.
    println!("band powers for the first 5 s window:");
    print!("{:<8}", "channel");
    for band in BANDS {
        print!("{:>12}", band.name());
    }
    println!("{:>12}", "total");
    for spectrum in psd(window)? {
        let bp = band_powers(&spectrum)?;
        print!("{:<8}", spectrum.channel.name());
        for band in BANDS {
            print!("{:>12.4}", bp.by_band(band));
        }
        println!("{:>12.4}", bp.total());
    }

    // Ratio indexes condense the band profile into four interpretable values.
    println!("\nratio indexes (theta/delta, beta/alpha, alpha/theta, beta/(theta+alpha)):");
    for spectrum in psd(window)? {
        let idx = ratio_indexes(&band_powers(&spectrum)?);
        print!("{:<8}", spectrum.channel.name());
        for (name, v) in RATIO_INDEX_NAMES.iter().zip(idx.as_array()) {
            print!("  {name} {v:>7.3}");
        }
        println!();
    }

    // The full vector a classifier consumes: band-major, then index-major.
    let vectors = assemble_features(&windows)?;
    let first = &vectors[0];
    println!(
        "\nfeature vector: {} values over {} channels; first five by name:",
        first.values.len(),
        first.schema.channels().len()
    );
    for name in first.schema.names().iter().take(5) {
        println!("  {name} = {:.4}", first.get(name).expect("name from schema"));
    }
    Ok(())
}
