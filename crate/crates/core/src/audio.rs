//! WAV reading/writing, FFT convolution and resampling.

use std::fs;
use std::io::Cursor;
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Deinterleaved multichannel audio.
#[derive(Debug, Clone, PartialEq)]
pub struct Audio {
    pub channels: Vec<Vec<f64>>,
    pub sample_rate: u32,
}

impl Audio {
    pub fn frames(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    /// Channel average.
    pub fn downmix(&self) -> Vec<f64> {
        let n = self.channels.len().max(1) as f64;
        (0..self.frames())
            .map(|i| self.channels.iter().map(|c| c[i]).sum::<f64>() / n)
            .collect()
    }
}

pub fn read_wav(path: &Path) -> Result<Audio> {
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = hound::WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    let n_ch = spec.channels as usize;
    if n_ch == 0 {
        return Err(Error::invalid(format!("{}: zero channels", path.display())));
    }
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_err)?,
        hound::SampleFormat::Int => {
            let scale = 2f64.powi(spec.bits_per_sample as i32 - 1);
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(wav_err)?
        }
    };
    let frames = interleaved.len() / n_ch;
    let mut channels = vec![Vec::with_capacity(frames); n_ch];
    for frame in interleaved.chunks_exact(n_ch) {
        for (c, &v) in channels.iter_mut().zip(frame) {
            c.push(v);
        }
    }
    Ok(Audio {
        channels,
        sample_rate: spec.sample_rate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavFormat {
    Float32,
    Int16,
}

/// Encodes channels as a WAV file image in memory.
pub fn encode_wav(channels: &[Vec<f64>], sample_rate: u32, format: WavFormat) -> Result<Vec<u8>> {
    let frames = channels.first().map_or(0, Vec::len);
    if channels.iter().any(|c| c.len() != frames) {
        return Err(Error::invalid("all channels must have the same length"));
    }
    let spec = hound::WavSpec {
        channels: channels.len() as u16,
        sample_rate,
        bits_per_sample: match format {
            WavFormat::Float32 => 32,
            WavFormat::Int16 => 16,
        },
        sample_format: match format {
            WavFormat::Float32 => hound::SampleFormat::Float,
            WavFormat::Int16 => hound::SampleFormat::Int,
        },
    };
    let to_err = |source| Error::Wav {
        path: "<memory>".into(),
        source,
    };
    let mut buf = Cursor::new(Vec::with_capacity(frames * channels.len() * 4 + 44));
    {
        let mut writer = hound::WavWriter::new(&mut buf, spec).map_err(to_err)?;
        for i in 0..frames {
            for c in channels {
                match format {
                    WavFormat::Float32 => writer.write_sample(c[i] as f32),
                    WavFormat::Int16 => writer.write_sample(to_i16(c[i])),
                }
                .map_err(to_err)?;
            }
        }
        writer.finalize().map_err(to_err)?;
    }
    Ok(buf.into_inner())
}

fn to_i16(v: f64) -> i16 {
    (v * 32767.0).round().clamp(-32768.0, 32767.0) as i16
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Linear convolution, full length `a.len() + b.len() - 1`.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    if a.len().min(b.len()) <= 32 {
        let mut out = vec![0.0; a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        return out;
    }
    FftPlan::new(a.len() + b.len())
        .convolve_many(a, &[b])
        .pop()
        .unwrap_or_default()
}

/// Forward/inverse FFT pair of one size, for repeated linear convolutions
/// whose full output fits in `size` samples.
pub struct FftPlan {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftPlan {
    pub fn new(min_size: usize) -> Self {
        let size = min_size.max(1).next_power_of_two();
        let mut planner = FftPlanner::new();
        FftPlan {
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    fn spectrum(&self, x: &[f64]) -> Vec<Complex<f64>> {
        let mut buf: Vec<Complex<f64>> = x
            .iter()
            .map(|&v| Complex::new(v, 0.0))
            .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
            .take(self.size)
            .collect();
        self.forward.process(&mut buf);
        buf
    }

    /// Full linear convolution of `input` with each kernel.
    pub fn convolve_many(&self, input: &[f64], kernels: &[&[f64]]) -> Vec<Vec<f64>> {
        let longest = kernels.iter().map(|k| k.len()).max().unwrap_or(0);
        assert!(
            input.len() + longest <= self.size + 1,
            "convolution longer than the planned FFT size"
        );
        if input.is_empty() {
            return vec![Vec::new(); kernels.len()];
        }
        let x = self.spectrum(input);
        let norm = 1.0 / self.size as f64;
        kernels
            .iter()
            .map(|k| {
                if k.is_empty() {
                    return Vec::new();
                }
                let mut y = self.spectrum(k);
                for (a, b) in y.iter_mut().zip(&x) {
                    *a *= b;
                }
                self.inverse.process(&mut y);
                y[..input.len() + k.len() - 1]
                    .iter()
                    .map(|c| c.re * norm)
                    .collect()
            })
            .collect()
    }
}

/// Band-limited sample-rate conversion of a mono signal.
pub fn resample(samples: &[f64], from: u32, to: u32) -> Result<Vec<f64>> {
    use rubato::audioadapter_buffers::owned::InterleavedOwned;
    use rubato::{FixedSync, Resampler};

    if from == to || samples.is_empty() {
        return Ok(samples.to_vec());
    }
    let mut resampler = rubato::Fft::<f64>::new(from as usize, to as usize, 1024, 1, FixedSync::Input)
        .map_err(|e| Error::invalid(format!("resampler setup {from} -> {to} Hz: {e}")))?;
    let input = InterleavedOwned::new_from(samples.to_vec(), 1, samples.len())
        .map_err(|e| Error::invalid(format!("resampler input: {e}")))?;
    let output = resampler
        .process_all(&input, samples.len(), None)
        .map_err(|e| Error::invalid(format!("resampling {from} -> {to} Hz: {e}")))?;
    Ok(output.take_data())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn direct(a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; a.len() + b.len() - 1];
        for i in 0..a.len() {
            for j in 0..b.len() {
                out[i + j] += a[i] * b[j];
            }
        }
        out
    }

    #[test]
    fn fft_convolution_matches_direct() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let a: Vec<f64> = (0..777).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..300).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = convolve(&a, &b);
        let slow = direct(&a, &b);
        assert_eq!(fast.len(), 1076);
        for (x, y) in fast.iter().zip(&slow) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn wav_round_trip_float() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        let chans = vec![vec![0.5, -0.25, 0.125], vec![0.0, 1.0, -1.0]];
        write_bytes(&path, &encode_wav(&chans, 24_000, WavFormat::Float32).unwrap()).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.sample_rate, 24_000);
        assert_eq!(back.channels, chans);
    }

    #[test]
    fn int16_clips_and_scales() {
        assert_eq!(to_i16(1.0), 32767);
        assert_eq!(to_i16(2.0), 32767);
        assert_eq!(to_i16(-2.0), -32768);
        assert_eq!(to_i16(0.0), 0);
    }

    #[test]
    fn resample_preserves_duration_and_tone() {
        let from = 48_000;
        let tone: Vec<f64> = (0..48_000)
            .map(|i| (2.0 * std::f64::consts::PI * 440.0 * i as f64 / from as f64).sin())
            .collect();
        let out = resample(&tone, from, 24_000).unwrap();
        assert!((out.len() as i64 - 24_000).abs() <= 1);
        let rms = (out[2000..22000].iter().map(|v| v * v).sum::<f64>() / 20_000.0).sqrt();
        assert!((rms - 0.5f64.sqrt()).abs() < 0.01, "rms {rms}");
    }
}
