//! Fit RT60 from simulated RIRs, invert Sabine, and check the round trip.
//!
//! cargo run --example calibrate_room -- [target_rt60]

use srirforge::calibration::{calibrate_room, inverse_sabine, DEFAULT_REGION};
use srirforge::geometry::{CapsuleSpec, Direction, Pattern, Vec3};
use srirforge::ism::{render_rir, ShoeboxRoom};

fn main() -> srirforge::Result<()> {
    let target: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.6);
    let dims = Vec3::new(8.0, 6.0, 3.2);
    let acoustics = inverse_sabine(target, dims, 343.0)?;
    println!(
        "target {target} s -> absorption {:.4}, max_order {}",
        acoustics.absorption, acoustics.max_order
    );

    let room = ShoeboxRoom::new(dims, acoustics.absorption, acoustics.max_order)?;
    let omni = CapsuleSpec {
        orientation: Direction::new(0.0, 0.0),
        offset_radius: 0.0,
        pattern: Pattern::Omnidirectional,
    };
    let len = (1.2 * target * 24_000.0) as usize;
    let rirs = [
        (Vec3::new(1.5, 1.2, 1.4), Vec3::new(6.1, 4.3, 1.5)),
        (Vec3::new(6.6, 1.0, 2.0), Vec3::new(3.0, 4.8, 1.2)),
        (Vec3::new(4.0, 3.0, 2.5), Vec3::new(1.0, 5.0, 1.0)),
    ]
    .into_iter()
    .map(|(s, r)| render_rir(&room, s, r, &omni, 24_000, len))
    .collect::<srirforge::Result<Vec<_>>>()?;

    let result = calibrate_room(&rirs, dims, DEFAULT_REGION, 343.0)?;
    for (i, fit) in result.per_rir.iter().enumerate() {
        println!("rir {i}: rt60 {:.3} s (r2 {:.4})", fit.rt60, fit.r_squared);
    }
    println!(
        "pooled rt60 {:.3} s ({:+.1}%), absorption {:.4}, max_order {}",
        result.rt60,
        100.0 * (result.rt60 - target) / target,
        result.absorption,
        result.max_order
    );
    Ok(())
}
