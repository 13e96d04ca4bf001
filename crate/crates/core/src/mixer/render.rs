use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::corpus::{db_to_gain, Corpus};
use super::schedule::{
    schedule_events, slice_entry, trajectory_step, EventTimeline, Fold, Motion, ScheduleConfig,
    ScheduledEvent,
};
use super::spatialize::{segment_hop, spatialize_moving, spatialize_static, srirs_needed};
use crate::bank::{BankLayout, SrirSource};
use crate::error::{Error, Result};
use crate::geometry::{Direction, Vec3};

const MIX_PEAK_DBFS: f64 = -1.0;

/// One annotation row: `frame,class,source,azimuth,elevation`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AnnotationRow {
    pub frame: usize,
    pub class_id: u8,
    pub source: usize,
    pub azimuth: i32,
    pub elevation: i32,
}

/// Integer azimuth in [-180, 180) and elevation in [-90, 90].
pub fn doa_to_degrees(doa: Vec3) -> (i32, i32) {
    let d = Direction::from_vector(doa).unwrap_or(Direction::new(0.0, 0.0));
    let mut az = d.azimuth.round() as i32;
    if az >= 180 {
        az -= 360;
    }
    (az, d.elevation.round().clamp(-90.0, 90.0) as i32)
}

pub fn annotations_to_csv(rows: &[AnnotationRow]) -> String {
    rows.iter()
        .map(|r| {
            format!(
                "{},{},{},{},{}\n",
                r.frame, r.class_id, r.source, r.azimuth, r.elevation
            )
        })
        .collect()
}

/// DoA of an event `t` seconds after its onset.
pub fn event_doa(layout: &BankLayout, event: &ScheduledEvent, t: f64) -> Vec3 {
    match event.motion {
        Motion::Static { entry } => layout.entries[entry].doa,
        Motion::Dynamic {
            trajectory,
            start,
            speed,
            direction,
        } => {
            let info = &layout.trajectories[trajectory];
            let pos = t * speed / trajectory_step(layout, info);
            let k = pos.floor();
            let frac = pos - k;
            let a = layout.entries[slice_entry(info, start, direction, k as usize)].doa;
            let b = layout.entries[slice_entry(info, start, direction, k as usize + 1)].doa;
            (a * (1.0 - frac) + b * frac).normalized().unwrap_or(a)
        }
    }
}

/// Frame-level annotations, sorted by (frame, source).
pub fn annotate(
    layout: &BankLayout,
    events: &[ScheduledEvent],
    config: &ScheduleConfig,
) -> Vec<AnnotationRow> {
    let fs = layout.sample_rate();
    let frame_samples = config.frame_samples(fs);
    let duration = |e: &ScheduledEvent| e.len as f64 / fs as f64;
    let mut rows: Vec<AnnotationRow> = events
        .iter()
        .flat_map(|e| {
            e.frames(frame_samples, config.n_frames()).map(move |f| {
                let t = ((f - e.onset_frame) as f64 * config.frame_s).min(duration(e));
                let (azimuth, elevation) = doa_to_degrees(event_doa(layout, e, t));
                AnnotationRow {
                    frame: f,
                    class_id: e.class_id,
                    source: e.track,
                    azimuth,
                    elevation,
                }
            })
        })
        .collect();
    rows.sort();
    rows
}

/// Spatialized 4-channel image of one event before its gain.
pub fn spatialize_event(
    corpus: &Corpus,
    bank: &dyn SrirSource,
    event: &ScheduledEvent,
) -> Result<Vec<Vec<f64>>> {
    let layout = bank.layout();
    let clip = corpus
        .clips
        .get(event.clip)
        .ok_or_else(|| Error::invalid(format!("timeline refers to missing clip {}", event.clip)))?;
    let fs = layout.sample_rate();
    match event.motion {
        Motion::Static { entry } => spatialize_static(&clip.samples, fs, &bank.srir(entry)?),
        Motion::Dynamic {
            trajectory,
            start,
            speed,
            direction,
        } => {
            let info = layout.trajectories.get(trajectory).ok_or_else(|| {
                Error::invalid(format!("timeline refers to missing trajectory {trajectory}"))
            })?;
            let step = trajectory_step(layout, info);
            let needed = srirs_needed(clip.samples.len(), segment_hop(step, speed, fs));
            let srirs = (0..needed)
                .map(|k| bank.srir(slice_entry(info, start, direction, k)))
                .collect::<Result<Vec<_>>>()?;
            spatialize_moving(&clip.samples, fs, &srirs, step, speed)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    pub timeline: EventTimeline,
    pub audio: Vec<Vec<f64>>,
    pub annotations: Vec<AnnotationRow>,
    /// Gain applied to reach the -1 dBFS peak (1 for silence).
    pub global_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixConfig {
    pub schedule: ScheduleConfig,
    /// White noise RMS in dBFS added before normalization; off when `None`.
    pub noise_dbfs: Option<f64>,
}

impl Default for MixConfig {
    fn default() -> Self {
        MixConfig {
            schedule: ScheduleConfig::default(),
            noise_dbfs: None,
        }
    }
}

/// Sums gained, spatialized events at their onsets into a fixed-length
/// 4-channel mix and peak-normalizes it.
pub fn render_mixture(
    timeline: &EventTimeline,
    corpus: &Corpus,
    bank: &dyn SrirSource,
    config: &MixConfig,
) -> Result<Mixture> {
    let layout = bank.layout();
    let fs = layout.sample_rate();
    let schedule = &config.schedule;
    let total = schedule.total_samples(fs);
    let frame_samples = schedule.frame_samples(fs);
    let mut audio = vec![vec![0.0; total]; layout.channels];
    for event in &timeline.events {
        let image = spatialize_event(corpus, bank, event)?;
        let gain = db_to_gain(event.gain_db);
        let offset = event.onset_frame * frame_samples;
        for (dst, src) in audio.iter_mut().zip(&image) {
            if src.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "non-finite samples in event {} ({})",
                    event.track, corpus.clips[event.clip].source
                )));
            }
            for (o, v) in dst.iter_mut().skip(offset).zip(src) {
                *o += gain * v;
            }
        }
    }
    if let Some(db) = config.noise_dbfs {
        let mut rng = ChaCha8Rng::seed_from_u64(timeline.seed ^ 0x6e6f_6973_65);
        let normal = Normal::new(0.0, db_to_gain(db)).map_err(|e| Error::invalid(e.to_string()))?;
        for ch in &mut audio {
            for v in ch.iter_mut() {
                *v += normal.sample(&mut rng);
            }
        }
    }
    let peak = audio.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let global_gain = if peak > 0.0 {
        db_to_gain(MIX_PEAK_DBFS) / peak
    } else {
        1.0
    };
    audio.iter_mut().flatten().for_each(|v| *v *= global_gain);
    Ok(Mixture {
        annotations: annotate(layout, &timeline.events, schedule),
        timeline: timeline.clone(),
        audio,
        global_gain,
    })
}

/// Schedules and renders one mixture from its own seeded stream.
pub fn synthesize_mixture(
    corpus: &Corpus,
    bank: &dyn SrirSource,
    config: &MixConfig,
    fold: Fold,
    seed: u64,
) -> Result<Mixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let events = schedule_events(corpus, bank.layout(), &config.schedule, &mut rng)?;
    let timeline = EventTimeline {
        room: bank.layout().room.name.clone(),
        fold,
        seed,
        events,
    };
    render_mixture(&timeline, corpus, bank, config)
}
