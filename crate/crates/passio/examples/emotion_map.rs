//! The affect-space map: continuous 1-9 ratings discretize into three
//! levels per dimension, and the 27 level triples name emotions, six of
//! which are the fundamental passions the classifier targets.
//!
//! Run with `cargo run --example emotion_map`.

use passio::emotion::{discretize_vad, map_emotion, write_emotion_map, VadRating};

fn main() -> passio::Result<()> {
    println!("level map (27 triples, passions marked):\n");
    write_emotion_map(std::io::stdout()).expect("stdout");

    println!("\nexample ratings through discretization:");
    let samples = [
        (8.2, 7.9, 5.1, "high arousal, pleasant, mid control"),
        (7.5, 2.0, 1.5, "high arousal, unpleasant, no control"),
        (2.4, 1.8, 4.9, "low arousal, unpleasant, mid control"),
        (5.0, 5.0, 5.0, "mid everything"),
    ];
    for (arousal, valence, dominance, note) in samples {
        let rating = VadRating::new(valence, arousal, dominance)?;
        let level = discretize_vad(&rating);
        let emotion = map_emotion(&level);
        let [v, a, d] = level.as_array();
        println!("  A{arousal:.1} V{valence:.1} D{dominance:.1} -> ({a:+}, {v:+}, {d:+}) -> {emotion:<12} ({note})");
    }
    Ok(())
}
