//! Spatialize a chirp moving along a circular trajectory and print how its
//! annotated azimuth evolves.

use srirforge::bank::{build_bank, RoomSpec, SrirSource};
use srirforge::geometry::{Trajectory, Vec3};
use srirforge::mixer::render::annotate;
use srirforge::mixer::schedule::{trajectory_step, Motion, ScheduleConfig, ScheduledEvent};
use srirforge::mixer::spatialize::{segment_hop, srirs_needed};
use srirforge::mixer::spatialize_moving;

fn main() -> srirforge::Result<()> {
    let mut spec = RoomSpec::new("orbit", Vec3::new(6.0, 5.0, 3.0), Vec3::new(3.0, 2.5, 1.5));
    spec.rt60_target = Some(0.3);
    spec.srir_length = 2400;
    spec.trajectories = vec![Trajectory::circular(0, 0, 1.5, 1.5)];
    let bank = build_bank(&spec)?;
    let layout = bank.layout();
    let fs = layout.sample_rate();

    let speed = 40.0;
    let secs = 3.0;
    let clip: Vec<f64> = (0..(secs * fs as f64) as usize)
        .map(|n| {
            let t = n as f64 / fs as f64;
            0.5 * (2.0 * std::f64::consts::PI * (300.0 + 400.0 * t) * t).sin()
        })
        .collect();

    let step = trajectory_step(layout, &layout.trajectories[0]);
    let hop = segment_hop(step, speed, fs);
    let needed = srirs_needed(clip.len(), hop);
    println!("{speed} deg/s with {step} deg spacing: hop {hop} samples, {needed} SRIRs");

    let srirs = (0..needed).map(|i| bank.srir(i)).collect::<srirforge::Result<Vec<_>>>()?;
    let audio = spatialize_moving(&clip, fs, &srirs, step, speed)?;
    println!("output {} channels x {} samples", audio.len(), audio[0].len());

    let event = ScheduledEvent {
        clip: 0,
        class_id: 0,
        track: 0,
        onset_frame: 0,
        len: clip.len(),
        gain_db: 0.0,
        motion: Motion::Dynamic { trajectory: 0, start: 0, speed, direction: 1 },
    };
    for row in annotate(layout, &[event], &ScheduleConfig::default()).iter().step_by(5) {
        println!("frame {:3}: az {:4} el {:3}", row.frame, row.azimuth, row.elevation);
    }
    Ok(())
}
