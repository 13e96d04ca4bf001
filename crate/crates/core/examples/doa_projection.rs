//! Sample circular and linear trajectories around an array and print their
//! directions of arrival.

use srirforge::geometry::{cart_to_sph, sample_trajectory, Trajectory, Vec3};

fn main() -> srirforge::Result<()> {
    let center = Vec3::new(4.0, 3.0, 1.5);
    let circle = Trajectory::circular(0, 0, 2.0, 1.7);
    let line = Trajectory::linear(1, 0, Vec3::new(1.0, 4.5, 1.5), Vec3::new(7.0, 4.5, 1.5));

    for (name, t, spacing) in [("circle", &circle, 45.0), ("line", &line, 15.0)] {
        let samples = sample_trajectory(t, center, spacing)?;
        println!("{name}: {} samples at {spacing} deg", samples.len());
        for s in &samples {
            let (dir, r) = cart_to_sph(s.position - center).expect("sample away from array");
            println!(
                "  pos ({:5.2}, {:5.2}, {:5.2})  az {:7.2}  el {:6.2}  r {:.2}",
                s.position.x, s.position.y, s.position.z, dir.azimuth, dir.elevation, r
            );
        }
    }
    Ok(())
}
