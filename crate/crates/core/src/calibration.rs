//! Reverberation time from Schroeder backward integration, and the inverse
//! Sabine step that turns a target RT60 into a uniform absorption and an
//! image-source reflection order.

use std::f64::consts::LN_10;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::ism::Rir;

/// Level assigned to samples after the last nonzero energy.
pub const EDC_FLOOR_DB: f64 = -300.0;

/// Default fit region, dB relative to the total energy.
pub const DEFAULT_REGION: FitRegion = FitRegion {
    start_db: -5.0,
    end_db: -25.0,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitRegion {
    pub start_db: f64,
    pub end_db: f64,
}

impl FitRegion {
    pub fn new(start_db: f64, end_db: f64) -> Result<Self> {
        if !(start_db > end_db) {
            return Err(Error::invalid(format!(
                "fit region start ({start_db} dB) must be above its end ({end_db} dB)"
            )));
        }
        Ok(FitRegion { start_db, end_db })
    }
}

impl Default for FitRegion {
    fn default() -> Self {
        DEFAULT_REGION
    }
}

impl std::str::FromStr for FitRegion {
    type Err = Error;

    /// `start:end` in dB, e.g. `-5:-25`.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("fit region {s:?} must look like -5:-25")))?;
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("fit region bound {v:?} is not a number")))
        };
        FitRegion::new(num(a)?, num(b)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyDecayCurve {
    /// 10·log10 of the remaining energy fraction; `values[0] == 0`.
    pub values: Vec<f64>,
    pub sample_rate: u32,
}

impl EnergyDecayCurve {
    pub fn time(&self, index: usize) -> f64 {
        index as f64 / self.sample_rate as f64
    }
}

pub fn energy_decay_curve(rir: &Rir) -> Result<EnergyDecayCurve> {
    if rir.sample_rate == 0 {
        return Err(Error::invalid("sample rate must be > 0"));
    }
    if rir.samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("impulse response contains non-finite samples"));
    }
    let mut tail = vec![0.0; rir.samples.len()];
    let mut acc = 0.0;
    for (slot, s) in tail.iter_mut().zip(&rir.samples).rev() {
        acc += s * s;
        *slot = acc;
    }
    let total = tail.first().copied().unwrap_or(0.0);
    if !(total > 0.0) {
        return Err(Error::invalid("impulse response is silent"));
    }
    let values = tail
        .iter()
        .map(|&e| {
            if e > 0.0 {
                (10.0 * (e / total).log10()).max(EDC_FLOOR_DB)
            } else {
                EDC_FLOOR_DB
            }
        })
        .collect();
    Ok(EnergyDecayCurve {
        values,
        sample_rate: rir.sample_rate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rt60: f64,
    /// dB per second (negative for a decaying curve).
    pub slope: f64,
    /// Level of the fitted line at t = 0, in dB.
    pub intercept: f64,
    pub r_squared: f64,
}

impl DecayFit {
    pub fn level_at(&self, t: f64) -> f64 {
        self.intercept + self.slope * t
    }
}

/// Least-squares line through the EDC samples whose level lies within the
/// region; RT60 is the time that line takes to fall 60 dB.
pub fn estimate_rt60(edc: &EnergyDecayCurve, region: FitRegion) -> Result<DecayFit> {
    FitRegion::new(region.start_db, region.end_db)?;
    let reached = edc.values.iter().copied().fold(0.0, f64::min);
    if reached > region.end_db {
        return Err(Error::InsufficientDecay {
            target_db: region.end_db,
            reached_db: reached,
        });
    }
    let (mut n, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, &v) in edc.values.iter().enumerate() {
        if v <= region.start_db && v >= region.end_db {
            let t = edc.time(i);
            n += 1.0;
            sx += t;
            sy += v;
            sxx += t * t;
            sxy += t * v;
        }
    }
    if n < 2.0 {
        return Err(Error::InsufficientDecay {
            target_db: region.end_db,
            reached_db: reached,
        });
    }
    let mean_x = sx / n;
    let mean_y = sy / n;
    let var_x = sxx / n - mean_x * mean_x;
    let cov = sxy / n - mean_x * mean_y;
    if !(var_x > 0.0) {
        return Err(Error::InsufficientDecay {
            target_db: region.end_db,
            reached_db: reached,
        });
    }
    let slope = cov / var_x;
    let intercept = mean_y - slope * mean_x;
    if !(slope < 0.0) {
        return Err(Error::InsufficientDecay {
            target_db: region.end_db,
            reached_db: reached,
        });
    }

    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (i, &v) in edc.values.iter().enumerate() {
        if v <= region.start_db && v >= region.end_db {
            let fit = intercept + slope * edc.time(i);
            ss_res += (v - fit).powi(2);
            ss_tot += (v - mean_y).powi(2);
        }
    }
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(DecayFit {
        rt60: -60.0 / slope,
        slope,
        intercept,
        r_squared,
    })
}

/// Sabine constant `24·ln10 / c`, in s/m.
pub fn sabine_constant(speed_of_sound: f64) -> f64 {
    24.0 * LN_10 / speed_of_sound
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoomAcoustics {
    pub absorption: f64,
    pub max_order: u32,
}

/// Mean absorption reproducing `rt60` under Sabine's law, plus the image
/// order needed to populate the response for that long:
/// `ceil(c·rt60 / min(dims))`.
pub fn inverse_sabine(rt60: f64, dims: Vec3, speed_of_sound: f64) -> Result<RoomAcoustics> {
    if !(rt60 > 0.0) {
        return Err(Error::invalid(format!("rt60 must be > 0, got {rt60}")));
    }
    if !(dims.x > 0.0 && dims.y > 0.0 && dims.z > 0.0) || !dims.is_finite() {
        return Err(Error::invalid("room dimensions must be positive"));
    }
    if !(speed_of_sound > 0.0) {
        return Err(Error::invalid("speed of sound must be > 0"));
    }
    let volume = dims.x * dims.y * dims.z;
    let surface = 2.0 * (dims.x * dims.y + dims.y * dims.z + dims.x * dims.z);
    let absorption = sabine_constant(speed_of_sound) * volume / (surface * rt60);
    if absorption >= 1.0 {
        return Err(Error::InfeasibleRoom { absorption, rt60 });
    }
    let min_dim = dims.x.min(dims.y).min(dims.z);
    let max_order = (speed_of_sound * rt60 / min_dim).ceil() as u32;
    Ok(RoomAcoustics {
        absorption: absorption.max(f64::MIN_POSITIVE),
        max_order,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub rt60: f64,
    pub fit_region: FitRegion,
    /// Median slope across the sample responses, dB/s.
    pub fit_slope: f64,
    pub absorption: f64,
    pub max_order: u32,
    /// Median r² across the sample responses.
    pub r_squared: f64,
    pub per_rir: Vec<DecayFit>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn calibrate_room(
    rirs: &[Rir],
    dims: Vec3,
    region: FitRegion,
    speed_of_sound: f64,
) -> Result<CalibrationResult> {
    if rirs.is_empty() {
        return Err(Error::invalid("calibration needs at least one impulse response"));
    }
    let per_rir = rirs
        .iter()
        .enumerate()
        .map(|(index, rir)| {
            energy_decay_curve(rir)
                .and_then(|edc| estimate_rt60(&edc, region))
                .map_err(|e| Error::AtRir {
                    index,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    let rt60 = median(&mut per_rir.iter().map(|f| f.rt60).collect::<Vec<_>>());
    let fit_slope = median(&mut per_rir.iter().map(|f| f.slope).collect::<Vec<_>>());
    let r_squared = median(&mut per_rir.iter().map(|f| f.r_squared).collect::<Vec<_>>());
    let acoustics = inverse_sabine(rt60, dims, speed_of_sound)?;
    Ok(CalibrationResult {
        rt60,
        fit_region: region,
        fit_slope,
        absorption: acoustics.absorption,
        max_order: acoustics.max_order,
        r_squared,
        per_rir,
    })
}
