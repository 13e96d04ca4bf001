//! Render one 4-channel SRIR for a source in a shoebox room and write it as WAV.
//!
//! cargo run --example render_srir -- [out.wav]

use srirforge::audio::{encode_wav, write_bytes, WavFormat};
use srirforge::geometry::{tetrahedral_array, Vec3};
use srirforge::ism::{enumerate_images, render_srir, ShoeboxRoom, DEFAULT_SAMPLE_RATE, DEFAULT_SRIR_LENGTH};

fn main() -> srirforge::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "srir.wav".into());
    let room = ShoeboxRoom::new(Vec3::new(7.0, 5.0, 3.0), 0.3, 12)?;
    let array = tetrahedral_array(Vec3::new(3.5, 2.5, 1.5));
    let source = Vec3::new(5.0, 3.2, 1.7);

    let images = enumerate_images(&room, source, 12)?;
    println!("{} image sources up to order 12", images.len());

    let srir = render_srir(&room, source, &array, DEFAULT_SAMPLE_RATE, DEFAULT_SRIR_LENGTH)?;
    for (i, ch) in srir.channels.iter().enumerate() {
        let peak = ch.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        println!("capsule {i}: energy {:.4e}, peak {peak:.4}", ch.energy());
    }
    println!("DoA {:?}", srir.doa.to_array());

    let chans: Vec<Vec<f64>> = srir.channels.into_iter().map(|c| c.samples).collect();
    write_bytes(out.as_ref(), &encode_wav(&chans, DEFAULT_SAMPLE_RATE, WavFormat::Float32)?)?;
    println!("wrote {out}");
    Ok(())
}
