use std::ops::RangeInclusive;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::corpus::Corpus;
use super::spatialize::{segment_hop, srirs_needed};
use crate::bank::{BankLayout, TrajectoryInfo};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassSampling {
    /// Class first, uniformly, then a clip of that class.
    Uniform,
    /// Clip uniformly over the whole corpus.
    Proportional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotionKind {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub duration_s: f64,
    pub frame_s: f64,
    pub max_polyphony: usize,
    pub min_active_s: f64,
    pub p_dynamic: f64,
    pub speeds: Vec<f64>,
    pub gain_db: [f64; 2],
    pub class_sampling: ClassSampling,
    /// Stop after this many events even if activity is still short.
    pub max_events: Option<usize>,
    pub force_motion: Option<MotionKind>,
    /// Rejected placements tolerated before giving up.
    pub max_attempts: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            duration_s: 60.0,
            frame_s: 0.1,
            max_polyphony: 3,
            min_active_s: 40.0,
            p_dynamic: 0.5,
            speeds: vec![10.0, 20.0, 40.0],
            gain_db: [-6.0, 0.0],
            class_sampling: ClassSampling::Uniform,
            max_events: None,
            force_motion: None,
            max_attempts: 20_000,
        }
    }
}

impl ScheduleConfig {
    pub fn frame_samples(&self, sample_rate: u32) -> usize {
        (self.frame_s * sample_rate as f64).round() as usize
    }

    pub fn n_frames(&self) -> usize {
        (self.duration_s / self.frame_s).round() as usize
    }

    pub fn total_samples(&self, sample_rate: u32) -> usize {
        self.n_frames() * self.frame_samples(sample_rate)
    }

    fn validate(&self) -> Result<()> {
        if !(self.frame_s > 0.0 && self.duration_s >= self.frame_s) {
            return Err(Error::invalid("need 0 < frame_s <= duration_s"));
        }
        if self.max_polyphony == 0 {
            return Err(Error::invalid("max_polyphony must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.p_dynamic) {
            return Err(Error::invalid("p_dynamic must lie in [0, 1]"));
        }
        if self.speeds.is_empty() || self.speeds.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::invalid("speeds must be a non-empty list of positive values"));
        }
        if !(self.gain_db[0] <= self.gain_db[1]) {
            return Err(Error::invalid("gain_db must be [low, high]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Motion {
    Static {
        entry: usize,
    },
    /// Walks `trajectory` from its sample `start`, one sample per hop,
    /// forwards (`direction = 1`) or backwards (`-1`), wrapping on closed
    /// trajectories.
    Dynamic {
        trajectory: usize,
        start: usize,
        speed: f64,
        direction: i8,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledEvent {
    /// Index into the corpus.
    pub clip: usize,
    pub class_id: u8,
    pub track: usize,
    pub onset_frame: usize,
    /// Clip length in samples.
    pub len: usize,
    pub gain_db: f64,
    pub motion: Motion,
}

impl ScheduledEvent {
    /// Annotated frames: every grid instant between onset and offset, both
    /// ends included.
    pub fn frames(&self, frame_samples: usize, n_frames: usize) -> RangeInclusive<usize> {
        let last = (self.onset_frame + self.len / frame_samples).min(n_frames.saturating_sub(1));
        self.onset_frame..=last
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fold {
    Train,
    Val,
}

impl Fold {
    pub fn as_str(self) -> &'static str {
        match self {
            Fold::Train => "train",
            Fold::Val => "val",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventTimeline {
    pub room: String,
    pub fold: Fold,
    pub seed: u64,
    pub events: Vec<ScheduledEvent>,
}

/// Mean angular step between consecutive samples of a trajectory, degrees.
pub fn trajectory_step(layout: &BankLayout, traj: &TrajectoryInfo) -> f64 {
    let n = traj.len();
    if n < 2 {
        return f64::INFINITY;
    }
    if traj.closed {
        return 360.0 / n as f64;
    }
    let first = layout.entries[traj.entries.start].angle;
    let last = layout.entries[traj.entries.end - 1].angle;
    (last - first).abs() / (n - 1) as f64
}

/// Bank entry index of step `k` of a dynamic slice.
pub fn slice_entry(traj: &TrajectoryInfo, start: usize, direction: i8, k: usize) -> usize {
    let n = traj.len() as i64;
    let mut i = start as i64 + direction as i64 * k as i64;
    if traj.closed {
        i = i.rem_euclid(n);
    }
    traj.entries.start + i.clamp(0, n - 1) as usize
}

pub fn draw_motion_kind(rng: &mut impl Rng, p_dynamic: f64) -> MotionKind {
    if rng.random_bool(p_dynamic) {
        MotionKind::Dynamic
    } else {
        MotionKind::Static
    }
}

fn draw_dynamic(
    rng: &mut impl Rng,
    layout: &BankLayout,
    config: &ScheduleConfig,
    len: usize,
) -> Option<Motion> {
    let speed = *config.speeds.choose(rng)?;
    let direction: i8 = if rng.random_bool(0.5) { 1 } else { -1 };
    let fitting: Vec<(usize, usize)> = layout
        .trajectories
        .iter()
        .enumerate()
        .filter_map(|(t, info)| {
            if info.len() < 2 {
                return None;
            }
            let hop = segment_hop(trajectory_step(layout, info), speed, layout.sample_rate());
            let steps = srirs_needed(len, hop) - 1;
            (info.closed || steps < info.len()).then_some((t, steps))
        })
        .collect();
    let &(trajectory, steps) = fitting.choose(rng)?;
    let info = &layout.trajectories[trajectory];
    let start = if info.closed {
        rng.random_range(0..info.len())
    } else if direction > 0 {
        rng.random_range(0..info.len() - steps)
    } else {
        rng.random_range(steps..info.len())
    };
    Some(Motion::Dynamic {
        trajectory,
        start,
        speed,
        direction,
    })
}

/// Places corpus events on a 60 s timeline until the activity target is met
/// without exceeding the polyphony cap.
pub fn schedule_events(
    corpus: &Corpus,
    layout: &BankLayout,
    config: &ScheduleConfig,
    rng: &mut impl Rng,
) -> Result<Vec<ScheduledEvent>> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::invalid("empty corpus"));
    }
    if layout.is_empty() {
        return Err(Error::invalid(format!("bank {} has no entries", layout.room.name)));
    }
    let fs = layout.sample_rate();
    let frame_samples = config.frame_samples(fs);
    let n_frames = config.n_frames();
    let total = config.total_samples(fs);
    let target = (config.min_active_s / config.frame_s).round() as usize;
    let classes = corpus.classes();
    let by_class: Vec<Vec<usize>> = classes
        .iter()
        .map(|&c| {
            (0..corpus.clips.len())
                .filter(|&i| corpus.clips[i].class_id == c)
                .collect()
        })
        .collect();

    let mut load = vec![0usize; n_frames];
    let mut active = 0usize;
    let mut events = Vec::new();
    let mut rejected = 0usize;
    let (mut too_long, mut crowded, mut no_trace) = (0usize, 0usize, 0usize);

    while active < target && config.max_events.is_none_or(|m| events.len() < m) {
        if rejected >= config.max_attempts {
            return Err(Error::SchedulingFailure {
                attempts: rejected,
                reason: format!(
                    "activity {:.1} s of {:.1} s required after {} events \
                     (rejections: {too_long} clip too long, {crowded} polyphony, {no_trace} no trajectory fits)",
                    active as f64 * config.frame_s,
                    config.min_active_s,
                    events.len()
                ),
            });
        }
        let clip = match config.class_sampling {
            ClassSampling::Uniform => {
                let k = rng.random_range(0..classes.len());
                by_class[k][rng.random_range(0..by_class[k].len())]
            }
            ClassSampling::Proportional => rng.random_range(0..corpus.clips.len()),
        };
        let len = corpus.clips[clip].samples.len();
        let kind = config
            .force_motion
            .unwrap_or_else(|| draw_motion_kind(rng, config.p_dynamic));
        if len > total {
            rejected += 1;
            too_long += 1;
            continue;
        }
        let onset_frame = rng.random_range(0..=(total - len) / frame_samples);
        let mut event = ScheduledEvent {
            clip,
            class_id: corpus.clips[clip].class_id,
            track: events.len(),
            onset_frame,
            len,
            gain_db: rng.random_range(config.gain_db[0]..=config.gain_db[1]),
            motion: Motion::Static { entry: 0 },
        };
        let frames = event.frames(frame_samples, n_frames);
        if frames.clone().any(|f| load[f] >= config.max_polyphony) {
            rejected += 1;
            crowded += 1;
            continue;
        }
        event.motion = match kind {
            MotionKind::Static => Motion::Static {
                entry: rng.random_range(0..layout.len()),
            },
            MotionKind::Dynamic => match draw_dynamic(rng, layout, config, len) {
                Some(m) => m,
                None => {
                    rejected += 1;
                    no_trace += 1;
                    continue;
                }
            },
        };
        for f in frames {
            if load[f] == 0 {
                active += 1;
            }
            load[f] += 1;
        }
        events.push(event);
    }
    if active < target && config.max_events.is_some() {
        log::debug!(
            "stopped at max_events with {:.1} s active",
            active as f64 * config.frame_s
        );
    }
    Ok(events)
}
