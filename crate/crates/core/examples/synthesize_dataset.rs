//! Generate a tiny train/val SELD dataset from nine synthetic rooms and a
//! synthetic tone corpus, then verify it regenerates byte-identically.
//!
//! cargo run --release --example synthesize_dataset -- [out_dir]

use srirforge::bank::{build_bank, RoomSpec, SrirBank, SrirSource};
use srirforge::geometry::{Trajectory, Vec3};
use srirforge::mixer::corpus::NUM_CLASSES;
use srirforge::mixer::{generate_dataset, verify_dataset, Corpus, DatasetConfig, EventClip};

fn room(i: usize) -> srirforge::Result<SrirBank> {
    let dims = Vec3::new(5.0 + 0.5 * i as f64, 4.0 + 0.3 * i as f64, 3.0);
    let mut spec = RoomSpec::new(format!("room{i}"), dims, Vec3::new(dims.x / 2.0, dims.y / 2.0, 1.5));
    spec.rt60_target = Some(0.25 + 0.03 * i as f64);
    spec.srir_length = 1200;
    spec.spacing_deg = 5.0;
    spec.trajectories = vec![Trajectory::circular(0, 0, 1.2, 1.5)];
    build_bank(&spec)
}

fn corpus() -> Corpus {
    let clips = (0..NUM_CLASSES)
        .flat_map(|c| {
            (0..2).map(move |k| {
                let len = 24_000 * (1 + (c as usize + k) % 4);
                let f = 200.0 + 70.0 * c as f64 + 30.0 * k as f64;
                EventClip {
                    class_id: c,
                    samples: (0..len)
                        .map(|n| 0.7 * (2.0 * std::f64::consts::PI * f * n as f64 / 24_000.0).sin())
                        .collect(),
                    source: format!("class{c}/tone{k}.wav"),
                }
            })
        })
        .collect();
    Corpus {
        clips,
        ..Corpus::default()
    }
}

fn main() -> srirforge::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "dataset_demo".into());
    let banks = (0..9).map(room).collect::<srirforge::Result<Vec<_>>>()?;
    let refs: Vec<&dyn SrirSource> = banks.iter().map(|b| b as &dyn SrirSource).collect();
    let corpus = corpus();

    let config = DatasetConfig::with_scale(0.01);
    let manifest = generate_dataset(&refs, &corpus, &config, 42, out.as_ref())?;
    println!("train rooms: {}", manifest.train_rooms.join(", "));
    println!("val rooms:   {}", manifest.val_rooms.join(", "));
    for m in &manifest.mixtures {
        println!("{:28} {} events, gain {:+.1} dB", m.name, m.events.len(), m.global_gain_db);
    }

    let checks = verify_dataset(out.as_ref(), &refs, &corpus)?;
    let same = checks.iter().filter(|c| c.identical).count();
    println!("{same}/{} mixtures regenerate identically", checks.len());
    Ok(())
}
