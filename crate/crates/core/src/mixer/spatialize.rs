use crate::audio::FftPlan;
use crate::error::{Error, Result};
use crate::ism::Srir;

/// Per-channel full linear convolution; output length is
/// `clip.len() + srir.len() - 1`.
pub fn spatialize_static(clip: &[f64], sample_rate: u32, srir: &Srir) -> Result<Vec<Vec<f64>>> {
    check_rate(sample_rate, srir)?;
    if clip.is_empty() {
        return Ok(vec![Vec::new(); srir.channels.len()]);
    }
    let kernels: Vec<&[f64]> = srir.channels.iter().map(|c| c.samples.as_slice()).collect();
    Ok(FftPlan::new(clip.len() + srir.len()).convolve_many(clip, &kernels))
}

fn check_rate(sample_rate: u32, srir: &Srir) -> Result<()> {
    if srir.sample_rate() != sample_rate {
        return Err(Error::invalid(format!(
            "clip sample rate {sample_rate} Hz differs from SRIR rate {} Hz",
            srir.sample_rate()
        )));
    }
    Ok(())
}

/// Samples per SRIR step for a source moving at `speed` deg/s over SRIRs
/// `step_deg` apart.
pub fn segment_hop(step_deg: f64, speed: f64, sample_rate: u32) -> f64 {
    step_deg / speed * sample_rate as f64
}

/// Number of SRIRs [`spatialize_moving`] consumes for a clip of `len` samples.
pub fn srirs_needed(len: usize, hop: f64) -> usize {
    if len == 0 {
        return 1;
    }
    ((len - 1) as f64 / hop).floor() as usize + 2
}

/// Raised-cosine crossfade of half-width `hop` centered at `center`.
/// Neighbouring windows `hop` apart sum to exactly one.
pub fn crossfade_weight(n: f64, center: f64, hop: f64) -> f64 {
    let u = (n - center) / hop;
    if u.abs() >= 1.0 {
        0.0
    } else {
        0.5 * (1.0 + (std::f64::consts::PI * u).cos())
    }
}

/// Time-varying convolution of a clip with a sequence of SRIRs `step_deg`
/// apart traversed at `speed` deg/s.
///
/// SRIR `k` is centered at sample `k * hop`; the clip is split by 50%-overlap
/// raised-cosine windows, each windowed piece convolved with its SRIR and
/// overlap-added.
pub fn spatialize_moving(
    clip: &[f64],
    sample_rate: u32,
    srirs: &[Srir],
    step_deg: f64,
    speed: f64,
) -> Result<Vec<Vec<f64>>> {
    if !(speed > 0.0) || !(step_deg > 0.0) {
        return Err(Error::invalid("speed and SRIR spacing must be > 0"));
    }
    let first = srirs
        .first()
        .ok_or_else(|| Error::invalid("empty SRIR sequence"))?;
    for s in srirs {
        check_rate(sample_rate, s)?;
        if s.len() != first.len() || s.channels.len() != first.channels.len() {
            return Err(Error::invalid("SRIR sequence has inconsistent shapes"));
        }
    }
    let hop = segment_hop(step_deg, speed, sample_rate);
    let needed = srirs_needed(clip.len(), hop);
    if srirs.len() < needed {
        let duration = clip.len() as f64 / sample_rate as f64;
        return Err(Error::invalid(format!(
            "SRIR sequence too short: {:.1} s at {speed} deg/s needs {needed} SRIRs spanning {:.1} deg, got {}",
            duration,
            (needed - 1) as f64 * step_deg,
            srirs.len()
        )));
    }
    let n_ch = first.channels.len();
    let out_len = clip.len() + first.len() - 1;
    let mut out = vec![vec![0.0; out_len]; n_ch];
    if clip.is_empty() {
        return Ok(vec![Vec::new(); n_ch]);
    }
    let seg_max = (2.0 * hop).ceil() as usize + 1;
    let plan = FftPlan::new(seg_max + first.len());
    for (k, srir) in srirs.iter().take(needed).enumerate() {
        let center = k as f64 * hop;
        let lo = ((center - hop).ceil().max(0.0)) as usize;
        let hi = ((center + hop).floor() as usize + 1).min(clip.len());
        if lo >= hi {
            continue;
        }
        let piece: Vec<f64> = (lo..hi)
            .map(|n| clip[n] * crossfade_weight(n as f64, center, hop))
            .collect();
        let kernels: Vec<&[f64]> = srir.channels.iter().map(|c| c.samples.as_slice()).collect();
        for (dst, y) in out.iter_mut().zip(plan.convolve_many(&piece, &kernels)) {
            for (o, v) in dst[lo..].iter_mut().zip(y) {
                *o += v;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::ism::Rir;
    use rand::{Rng, SeedableRng};

    fn random_srir(seed: u64, len: usize) -> Srir {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Srir {
            channels: (0..4)
                .map(|_| Rir::new((0..len).map(|_| rng.random_range(-1.0..1.0)).collect(), 24_000))
                .collect(),
            doa: Vec3::new(1.0, 0.0, 0.0),
            source_position: Vec3::new(1.0, 0.0, 0.0),
        }
    }

    fn noise(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn max_rel(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        let scale = b.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        a.iter()
            .flatten()
            .zip(b.iter().flatten())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
            / scale
    }

    #[test]
    fn impulse_returns_srir() {
        let srir = random_srir(1, 7200);
        let out = spatialize_static(&[1.0], 24_000, &srir).unwrap();
        for (o, c) in out.iter().zip(&srir.channels) {
            assert_eq!(o.len(), 7200);
            for (a, b) in o.iter().zip(&c.samples) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn static_length_and_linearity() {
        let srir = random_srir(2, 7200);
        let a = noise(3, 5000);
        let b = noise(4, 5000);
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let ya = spatialize_static(&a, 24_000, &srir).unwrap();
        let yb = spatialize_static(&b, 24_000, &srir).unwrap();
        let ys = spatialize_static(&sum, 24_000, &srir).unwrap();
        assert_eq!(ys[0].len(), 5000 + 7199);
        let added: Vec<Vec<f64>> = ya
            .iter()
            .zip(&yb)
            .map(|(p, q)| p.iter().zip(q).map(|(x, y)| x + y).collect())
            .collect();
        assert!(max_rel(&added, &ys) < 1e-6);
    }

    #[test]
    fn rate_mismatch_rejected() {
        let srir = random_srir(2, 10);
        assert!(spatialize_static(&[1.0], 48_000, &srir).is_err());
    }

    #[test]
    fn segment_durations() {
        assert_eq!(segment_hop(1.0, 10.0, 24_000), 2400.0);
        assert_eq!(segment_hop(1.0, 40.0, 24_000), 600.0);
        assert_eq!(srirs_needed(48_000, 1200.0), 41);
    }

    #[test]
    fn crossfades_partition_unity() {
        for hop in [600.0, 1200.0, 2400.0, 777.7] {
            for n in 0..10_000 {
                let n = n as f64 * 0.73;
                let k = (n / hop).floor();
                let s = crossfade_weight(n, k * hop, hop) + crossfade_weight(n, (k + 1.0) * hop, hop);
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_sequence_equals_static() {
        let srir = random_srir(5, 7200);
        let clip = noise(6, 24_000);
        let reference = spatialize_static(&clip, 24_000, &srir).unwrap();
        for speed in [10.0, 20.0, 40.0, 33.0] {
            let seq = vec![srir.clone(); srirs_needed(clip.len(), segment_hop(1.0, speed, 24_000))];
            let moving = spatialize_moving(&clip, 24_000, &seq, 1.0, speed).unwrap();
            assert!(max_rel(&moving, &reference) < 1e-6, "speed {speed}");
        }
    }

    #[test]
    fn short_sequence_reports_span() {
        let srir = random_srir(7, 100);
        let err = spatialize_moving(&noise(1, 48_000), 24_000, &vec![srir; 10], 1.0, 20.0).unwrap_err();
        assert!(err.to_string().contains("41 SRIRs spanning 40.0 deg"), "{err}");
    }
}
