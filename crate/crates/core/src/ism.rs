//! Image source rendering for shoebox rooms.
//!
//! Images follow the Allen–Berkley lattice: along each axis the image
//! coordinate is `±x_s + 2·l·L` and the number of hits on the low and high
//! walls follows from the lattice index. Every arrival is deposited as an
//! 81-tap Hann-windowed sinc so that sub-sample delays stay band-limited.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CapsuleSpec, MicArray, Pattern, Vec3};

pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;
pub const DEFAULT_SAMPLE_RATE: u32 = 24_000;
/// 300 ms at 24 kHz.
pub const DEFAULT_SRIR_LENGTH: usize = 7_200;
pub const KERNEL_TAPS: usize = 81;
/// Cutoff of the post-render high-pass, as in Allen and Berkley's original method.
pub const DEFAULT_HIGHPASS_HZ: f64 = 100.0;
const KERNEL_HALF: i64 = (KERNEL_TAPS as i64 - 1) / 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShoeboxRoom {
    pub dims: Vec3,
    /// Mean absorption coefficient shared by all six walls.
    pub absorption: f64,
    pub max_order: u32,
    pub speed_of_sound: f64,
    /// Cutoff of the high-pass applied to every rendered response; `None`
    /// renders the raw image sum. Real-valued, frequency-independent
    /// reflections stack into a low-frequency swell in the late tail that
    /// otherwise dominates the energy decay.
    #[serde(default = "default_highpass")]
    pub highpass_hz: Option<f64>,
}

fn default_highpass() -> Option<f64> {
    Some(DEFAULT_HIGHPASS_HZ)
}

impl ShoeboxRoom {
    pub fn new(dims: Vec3, absorption: f64, max_order: u32) -> Result<Self> {
        ShoeboxRoom {
            dims,
            absorption,
            max_order,
            speed_of_sound: DEFAULT_SPEED_OF_SOUND,
            highpass_hz: default_highpass(),
        }
        .validated()
    }

    pub fn with_highpass(mut self, cutoff_hz: Option<f64>) -> Result<Self> {
        self.highpass_hz = cutoff_hz;
        self.validated()
    }

    pub fn with_speed_of_sound(mut self, c: f64) -> Result<Self> {
        self.speed_of_sound = c;
        self.validated()
    }

    fn validated(self) -> Result<Self> {
        let d = self.dims;
        if !(d.x > 0.0 && d.y > 0.0 && d.z > 0.0) || !d.is_finite() {
            return Err(Error::invalid(format!(
                "room dimensions must be positive, got {:?}",
                d.to_array()
            )));
        }
        if !(0.0..=1.0).contains(&self.absorption) {
            return Err(Error::invalid(format!(
                "absorption must lie in [0, 1], got {}",
                self.absorption
            )));
        }
        if !(self.speed_of_sound > 0.0) || !self.speed_of_sound.is_finite() {
            return Err(Error::invalid(format!(
                "speed of sound must be > 0, got {}",
                self.speed_of_sound
            )));
        }
        if let Some(fc) = self.highpass_hz {
            if !(fc > 0.0) || !fc.is_finite() {
                return Err(Error::invalid(format!("high-pass cutoff must be > 0, got {fc}")));
            }
        }
        Ok(self)
    }

    /// Strictly inside the room volume.
    pub fn contains(&self, p: Vec3) -> bool {
        p.x > 0.0
            && p.y > 0.0
            && p.z > 0.0
            && p.x < self.dims.x
            && p.y < self.dims.y
            && p.z < self.dims.z
    }

    /// Pressure reflection coefficient β = √(1 − α).
    pub fn reflection_coefficient(&self) -> f64 {
        (1.0 - self.absorption).sqrt()
    }

    pub fn volume(&self) -> f64 {
        self.dims.x * self.dims.y * self.dims.z
    }

    pub fn surface_area(&self) -> f64 {
        let d = self.dims;
        2.0 * (d.x * d.y + d.y * d.z + d.x * d.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageSource {
    pub position: Vec3,
    /// Wall hits ordered x-low, x-high, y-low, y-high, z-low, z-high.
    pub reflection_counts: [u32; 6],
    pub total_order: u32,
}

#[derive(Debug, Clone, Copy)]
struct AxisImage {
    coord: f64,
    low: u32,
    high: u32,
}

impl AxisImage {
    fn order(&self) -> u32 {
        self.low + self.high
    }
}

/// All 1-D images along one axis with order <= `max_order`, sorted by order.
fn axis_images(source: f64, length: f64, max_order: u32) -> Vec<AxisImage> {
    let mut out = vec![AxisImage {
        coord: source,
        low: 0,
        high: 0,
    }];
    for order in 1..=max_order as i64 {
        // order = |2l - q| with parity q
        let q = order % 2;
        let lattice = if q == 0 {
            [order / 2, -order / 2]
        } else {
            [(order + 1) / 2, (1 - order) / 2]
        };
        for l in lattice {
            let sign = if q == 0 { 1.0 } else { -1.0 };
            out.push(AxisImage {
                coord: sign * source + 2.0 * l as f64 * length,
                low: (l - q).unsigned_abs() as u32,
                high: l.unsigned_abs() as u32,
            });
        }
    }
    out
}

fn check_source(room: &ShoeboxRoom, source: Vec3) -> Result<()> {
    if !room.contains(source) {
        return Err(Error::OutsideRoom {
            point: source,
            context: "source must lie strictly inside the room".into(),
        });
    }
    Ok(())
}

/// Every lattice image with total reflection order <= `max_order`,
/// including the direct source.
pub fn enumerate_images(room: &ShoeboxRoom, source: Vec3, max_order: u32) -> Result<Vec<ImageSource>> {
    enumerate_within(room, source, max_order, None)
}

/// Images within `radius` of `center`; used to skip arrivals that cannot
/// reach the rendered window.
fn enumerate_within(
    room: &ShoeboxRoom,
    source: Vec3,
    max_order: u32,
    limit: Option<(Vec3, f64)>,
) -> Result<Vec<ImageSource>> {
    check_source(room, source)?;
    let xs = axis_images(source.x, room.dims.x, max_order);
    let ys = axis_images(source.y, room.dims.y, max_order);
    let zs = axis_images(source.z, room.dims.z, max_order);
    let (center, r2) = match limit {
        Some((c, r)) => (c, r * r),
        None => (Vec3::ZERO, f64::INFINITY),
    };
    let mut images = Vec::new();
    for ix in &xs {
        let ox = ix.order();
        let dx2 = (ix.coord - center.x).powi(2);
        if dx2 > r2 {
            continue;
        }
        for iy in ys.iter().take_while(|iy| ox + iy.order() <= max_order) {
            let oxy = ox + iy.order();
            let dxy2 = dx2 + (iy.coord - center.y).powi(2);
            if dxy2 > r2 {
                continue;
            }
            for iz in zs.iter().take_while(|iz| oxy + iz.order() <= max_order) {
                if dxy2 + (iz.coord - center.z).powi(2) > r2 {
                    continue;
                }
                images.push(ImageSource {
                    position: Vec3::new(ix.coord, iy.coord, iz.coord),
                    reflection_counts: [ix.low, ix.high, iy.low, iy.high, iz.low, iz.high],
                    total_order: oxy + iz.order(),
                });
            }
        }
    }
    Ok(images)
}

/// Spherical-spreading gain `β^order / (4π d)` of one image at `receiver`.
pub fn image_amplitude(img: &ImageSource, receiver: Vec3, absorption: f64) -> Result<f64> {
    let d = img.position.distance(receiver);
    if !(d > 0.0) {
        return Err(Error::invalid("receiver coincides with image source"));
    }
    let beta = (1.0 - absorption).max(0.0).sqrt();
    Ok(beta.powi(img.total_order as i32) / (4.0 * PI * d))
}

/// First-order pattern gain `a + (1 − a)·cos θ` at incidence `angle` degrees.
pub fn directivity_gain(pattern: Pattern, angle: f64) -> f64 {
    directivity_from_cos(pattern, angle.to_radians().cos())
}

fn directivity_from_cos(pattern: Pattern, cos_theta: f64) -> f64 {
    let a = pattern.omni_weight();
    a + (1.0 - a) * cos_theta
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rir {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Rir {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Rir {
            samples,
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }
}

/// Four-channel (or N-channel) impulse response with its source annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct Srir {
    pub channels: Vec<Rir>,
    pub doa: Vec3,
    pub source_position: Vec3,
}

impl Srir {
    pub fn sample_rate(&self) -> u32 {
        self.channels.first().map_or(0, |c| c.sample_rate)
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Rir::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Adds `gain` times the windowed-sinc kernel centered at fractional sample
/// `center` into `out`, dropping taps outside the buffer.
pub(crate) fn deposit_kernel(out: &mut [f64], center: f64, gain: f64) {
    let nearest = center.round();
    let frac = center - nearest; // in [-0.5, 0.5]
    let base = nearest as i64;
    let len = out.len() as i64;
    if base + KERNEL_HALF < 0 || base - KERNEL_HALF >= len {
        return;
    }
    // sin(π(k − f)) = −(−1)^k·sin(π f)
    let sin_pf = (PI * frac).sin();
    // Hann window 0.5·(1 + cos(π x / (H + 1))) evaluated by rotation.
    let w = PI / (KERNEL_HALF + 1) as f64;
    let (step_s, step_c) = w.sin_cos();
    let x0 = (-KERNEL_HALF) as f64 - frac;
    let (mut s, mut c) = (w * x0).sin_cos();
    for k in -KERNEL_HALF..=KERNEL_HALF {
        let idx = base + k;
        if idx >= 0 && idx < len {
            let x = k as f64 - frac;
            let sinc = if x.abs() < 1e-12 {
                1.0
            } else {
                let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
                sign * sin_pf / (PI * x)
            };
            out[idx as usize] += gain * sinc * 0.5 * (1.0 + c);
        }
        let (ns, nc) = (s * step_c + c * step_s, c * step_c - s * step_s);
        s = ns;
        c = nc;
    }
}

/// Second-order high-pass of Allen and Berkley, applied in place.
pub(crate) fn allen_berkley_highpass(samples: &mut [f64], cutoff_hz: f64, sample_rate: f64) {
    let w = 2.0 * PI * cutoff_hz / sample_rate;
    let r1 = (-w).exp();
    let b1 = 2.0 * r1 * w.cos();
    let b2 = -r1 * r1;
    let a1 = -(1.0 + r1);
    let mut y = [0.0; 3];
    for s in samples.iter_mut() {
        y[2] = y[1];
        y[1] = y[0];
        y[0] = b1 * y[1] + b2 * y[2] + *s;
        *s = y[0] + a1 * y[1] + r1 * y[2];
    }
}

/// Renders the given images at one capsule. Arrivals whose kernels fall
/// entirely beyond `length` contribute nothing.
pub fn render_images(
    images: &[ImageSource],
    room: &ShoeboxRoom,
    capsule_position: Vec3,
    capsule: &CapsuleSpec,
    sample_rate: u32,
    length: usize,
) -> Result<Rir> {
    let fs = sample_rate as f64;
    let axis = capsule.axis();
    let mut out = vec![0.0; length];
    let last = length as f64 + KERNEL_HALF as f64;
    for img in images {
        let gain = image_amplitude(img, capsule_position, room.absorption)?;
        if gain == 0.0 {
            continue;
        }
        let offset = img.position - capsule_position;
        let d = offset.norm();
        let center = d / room.speed_of_sound * fs;
        if center > last {
            continue;
        }
        let directivity = directivity_from_cos(capsule.pattern, axis.dot(offset) / d);
        deposit_kernel(&mut out, center, gain * directivity);
    }
    if let Some(fc) = room.highpass_hz {
        allen_berkley_highpass(&mut out, fc, fs);
    }
    Ok(Rir::new(out, sample_rate))
}

fn validate_render(sample_rate: u32, length: usize) -> Result<()> {
    if sample_rate == 0 || length == 0 {
        return Err(Error::invalid("sample rate and length must be > 0"));
    }
    Ok(())
}

/// Radius beyond which an image cannot reach any of the first `length` samples.
fn reach(room: &ShoeboxRoom, sample_rate: u32, length: usize) -> f64 {
    (length as f64 + KERNEL_HALF as f64 + 2.0) / sample_rate as f64 * room.speed_of_sound
}

pub fn render_rir(
    room: &ShoeboxRoom,
    source: Vec3,
    capsule_position: Vec3,
    capsule: &CapsuleSpec,
    sample_rate: u32,
    length: usize,
) -> Result<Rir> {
    validate_render(sample_rate, length)?;
    let limit = (capsule_position, reach(room, sample_rate, length));
    let images = enumerate_within(room, source, room.max_order, Some(limit))?;
    render_images(&images, room, capsule_position, capsule, sample_rate, length)
}

/// One [`render_rir`] per capsule, sharing a single image enumeration.
pub fn render_srir(
    room: &ShoeboxRoom,
    source: Vec3,
    array: &MicArray,
    sample_rate: u32,
    length: usize,
) -> Result<Srir> {
    validate_render(sample_rate, length)?;
    if !room.contains(array.center) {
        return Err(Error::OutsideRoom {
            point: array.center,
            context: "microphone array must lie inside the room".into(),
        });
    }
    let doa = (source - array.center)
        .normalized()
        .ok_or_else(|| Error::invalid("source coincides with the array center"))?;
    let spread = array
        .capsules
        .iter()
        .map(|c| c.offset_radius)
        .fold(0.0, f64::max);
    let limit = (array.center, reach(room, sample_rate, length) + spread);
    let images = enumerate_within(room, source, room.max_order, Some(limit))?;
    let channels = array
        .capsules
        .iter()
        .enumerate()
        .map(|(i, capsule)| {
            render_images(
                &images,
                room,
                array.capsule_position(i),
                capsule,
                sample_rate,
                length,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Srir {
        channels,
        doa,
        source_position: source,
    })
}
