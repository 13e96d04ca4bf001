//! Score a perturbed copy of a reference annotation with the SELD metrics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srirforge::metrics::{compute_scores, MetricsConfig};
use srirforge::mixer::AnnotationRow;

fn main() -> srirforge::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut reference = Vec::new();
    for frame in 0..600 {
        for source in 0..rng.random_range(0..=3usize) {
            reference.push(AnnotationRow {
                frame,
                class_id: (source * 4 % 13) as u8,
                source,
                azimuth: ((frame as i32 * 2 + 120 * source as i32) % 360) - 180,
                elevation: 10 * source as i32 - 10,
            });
        }
    }

    let mut prediction = Vec::new();
    for r in &reference {
        if rng.random_bool(0.9) {
            prediction.push(AnnotationRow {
                azimuth: (r.azimuth + rng.random_range(-30..=30)).clamp(-180, 179),
                ..*r
            });
        }
    }

    for threshold in [10.0, 20.0, 40.0] {
        let scores = compute_scores(&reference, &prediction, MetricsConfig { threshold, ..MetricsConfig::default() })?;
        println!("threshold {threshold:>4}: {}", scores.summary_line());
    }
    let scores = compute_scores(&reference, &prediction, MetricsConfig::default())?;
    println!("\n{}", scores.text_report());
    Ok(())
}
