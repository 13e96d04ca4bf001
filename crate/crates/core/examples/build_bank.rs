//! Render a small SRIR bank to disk, reopen it, and verify an entry.
//!
//! cargo run --example build_bank -- [out_dir]

use srirforge::bank::{render_bank_to_dir, DiskBank, RoomSpec, SrirSource};
use srirforge::geometry::{Trajectory, Vec3};

fn main() -> srirforge::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "bank_demo".into());
    let mut spec = RoomSpec::new("demo", Vec3::new(6.0, 5.0, 3.0), Vec3::new(3.0, 2.5, 1.5));
    spec.rt60_target = Some(0.4);
    spec.spacing_deg = 5.0;
    spec.trajectories = vec![
        Trajectory::circular(0, 0, 1.0, 1.5),
        Trajectory::circular(0, 1, 1.0, 1.9),
        Trajectory::linear(1, 0, Vec3::new(1.0, 4.0, 1.5), Vec3::new(5.0, 4.0, 1.5)),
    ];
    println!("{}", spec.to_toml()?);

    let manifest = render_bank_to_dir(&spec, out.as_ref(), |done, total| {
        if done == total {
            println!("rendered {total} SRIRs");
        }
    })?;
    println!(
        "absorption {:.4}, max_order {}, checksum {}",
        manifest.layout.acoustics.absorption, manifest.layout.acoustics.max_order, manifest.checksum
    );

    let bank = DiskBank::open(out.as_ref())?;
    for t in &bank.layout().trajectories {
        println!("group {} height {}: {} entries", t.group, t.height_index, t.len());
    }
    let srir = bank.srir(10)?;
    println!("entry 10 ({}): DoA {:?}", bank.layout().file_name(10), srir.doa.to_array());
    Ok(())
}
