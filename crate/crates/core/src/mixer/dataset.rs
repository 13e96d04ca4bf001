use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::corpus::Corpus;
use super::render::{annotations_to_csv, synthesize_mixture, MixConfig, Mixture};
use super::schedule::{Fold, Motion};
use crate::audio::{self, WavFormat};
use crate::bank::SrirSource;
use crate::error::{Error, Result};

pub const DATASET_MANIFEST: &str = "manifest.json";
pub const DATASET_FORMAT: &str = "srirforge-dataset/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub scale: f64,
    pub train_mixtures: usize,
    pub val_mixtures: usize,
    pub train_rooms: usize,
    pub val_rooms: usize,
    pub mix: MixConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            scale: 1.0,
            train_mixtures: 900,
            val_mixtures: 300,
            train_rooms: 6,
            val_rooms: 3,
            mix: MixConfig::default(),
        }
    }
}

impl DatasetConfig {
    pub fn with_scale(scale: f64) -> Self {
        DatasetConfig {
            scale,
            ..Self::default()
        }
    }

    /// Mixture counts (train, val) after scaling.
    pub fn counts(&self) -> (usize, usize) {
        let n = |full: usize| (full as f64 * self.scale).round() as usize;
        (n(self.train_mixtures), n(self.val_mixtures))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankRef {
    pub room: String,
    pub checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub clip: String,
    pub class_id: u8,
    pub track: usize,
    pub onset_frame: usize,
    pub gain_db: f64,
    pub motion: Motion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureRecord {
    pub name: String,
    pub fold: Fold,
    pub room: String,
    pub seed: u64,
    pub global_gain_db: f64,
    pub events: Vec<EventLog>,
    pub wav: String,
    pub wav_sha256: String,
    pub csv: String,
    pub csv_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub seed: u64,
    pub config: DatasetConfig,
    pub corpus_checksum: String,
    pub corpus_clips: usize,
    pub train_rooms: Vec<String>,
    pub val_rooms: Vec<String>,
    pub banks: Vec<BankRef>,
    pub mixtures: Vec<MixtureRecord>,
}

impl DatasetManifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(DATASET_MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::Manifest {
            path: path.clone(),
            msg: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Manifest {
            path,
            msg: e.to_string(),
        })
    }

    /// SHA-256 of every mixture WAV and CSV, in manifest order.
    pub fn checksum(&self) -> String {
        let joined: String = self
            .mixtures
            .iter()
            .map(|m| format!("{}{}", m.wav_sha256, m.csv_sha256))
            .collect();
        audio::sha256_hex(joined.as_bytes())
    }
}

/// Splits rooms into disjoint train/val sets by a seeded shuffle of the
/// name-sorted room list.
pub fn assign_folds(
    rooms: &[String],
    train: usize,
    val: usize,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>)> {
    let unique: BTreeSet<&String> = rooms.iter().collect();
    if unique.len() != rooms.len() {
        return Err(Error::invalid("room names must be unique across banks"));
    }
    if rooms.len() < train + val || train == 0 || val == 0 {
        return Err(Error::InsufficientRooms {
            needed: (train + val).max(2),
            found: rooms.len(),
        });
    }
    let mut sorted: Vec<String> = unique.into_iter().cloned().collect();
    sorted.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let val_rooms = sorted[train..train + val].to_vec();
    sorted.truncate(train);
    Ok((sorted, val_rooms))
}

struct Job {
    index: usize,
    fold: Fold,
    bank: usize,
}

/// Encoded WAV (16-bit) and CSV of a mixture.
pub fn encode_mixture(m: &Mixture, sample_rate: u32) -> Result<(Vec<u8>, String)> {
    Ok((
        audio::encode_wav(&m.audio, sample_rate, WavFormat::Int16)?,
        annotations_to_csv(&m.annotations),
    ))
}

fn mixture_name(fold: Fold, room: &str, index: usize) -> String {
    format!("{}_{room}_{index:04}", fold.as_str())
}

fn render_job(
    job: &Job,
    banks: &[&dyn SrirSource],
    corpus: &Corpus,
    config: &DatasetConfig,
    seed: u64,
) -> Result<(MixtureRecord, Vec<u8>, String)> {
    let bank = banks[job.bank];
    let room = bank.layout().room.name.clone();
    let mix_seed = seed.wrapping_add(job.index as u64);
    let m = synthesize_mixture(corpus, bank, &config.mix, job.fold, mix_seed)?;
    let (wav, csv) = encode_mixture(&m, bank.layout().sample_rate())?;
    let name = mixture_name(job.fold, &room, job.index);
    let record = MixtureRecord {
        fold: job.fold,
        seed: mix_seed,
        global_gain_db: 20.0 * m.global_gain.log10(),
        events: m
            .timeline
            .events
            .iter()
            .map(|e| EventLog {
                clip: corpus.clips[e.clip].source.clone(),
                class_id: e.class_id,
                track: e.track,
                onset_frame: e.onset_frame,
                gain_db: e.gain_db,
                motion: e.motion,
            })
            .collect(),
        wav: format!("{}/{name}.wav", job.fold.as_str()),
        wav_sha256: audio::sha256_hex(&wav),
        csv: format!("{}/{name}.csv", job.fold.as_str()),
        csv_sha256: audio::sha256_hex(csv.as_bytes()),
        room,
        name,
    };
    Ok((record, wav, csv))
}

fn jobs_for(
    banks: &[&dyn SrirSource],
    train_rooms: &[String],
    val_rooms: &[String],
    counts: (usize, usize),
) -> Vec<Job> {
    let bank_of = |room: &String| {
        banks
            .iter()
            .position(|b| &b.layout().room.name == room)
            .expect("fold rooms come from the bank list")
    };
    let train = (0..counts.0).map(|i| Job {
        index: i,
        fold: Fold::Train,
        bank: bank_of(&train_rooms[i % train_rooms.len()]),
    });
    let val = (0..counts.1).map(|i| Job {
        index: counts.0 + i,
        fold: Fold::Val,
        bank: bank_of(&val_rooms[i % val_rooms.len()]),
    });
    train.chain(val).collect()
}

/// Renders the train and val folds into `out` (`train/`, `val/`,
/// `manifest.json`). Mixture `i` draws from its own stream seeded with
/// `seed + i`, so output is independent of thread count.
pub fn generate_dataset(
    banks: &[&dyn SrirSource],
    corpus: &Corpus,
    config: &DatasetConfig,
    seed: u64,
    out: &Path,
) -> Result<DatasetManifest> {
    if corpus.is_empty() {
        return Err(Error::invalid("corpus is empty"));
    }
    let names: Vec<String> = banks.iter().map(|b| b.layout().room.name.clone()).collect();
    let (train_rooms, val_rooms) =
        assign_folds(&names, config.train_rooms, config.val_rooms, seed)?;
    let jobs = jobs_for(banks, &train_rooms, &val_rooms, config.counts());
    let mixtures = jobs
        .par_iter()
        .map(|job| {
            let (record, wav, csv) = render_job(job, banks, corpus, config, seed)?;
            audio::write_bytes(&out.join(&record.wav), &wav)?;
            audio::write_bytes(&out.join(&record.csv), csv.as_bytes())?;
            log::info!("wrote {}", record.name);
            Ok(record)
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest {
        format: DATASET_FORMAT.into(),
        seed,
        config: config.clone(),
        corpus_checksum: corpus.checksum(),
        corpus_clips: corpus.clips.len(),
        train_rooms,
        val_rooms,
        banks: banks
            .iter()
            .map(|b| BankRef {
                room: b.layout().room.name.clone(),
                checksum: b.checksum().to_string(),
            })
            .collect(),
        mixtures,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::invalid(e.to_string()))?;
    audio::write_bytes(&out.join(DATASET_MANIFEST), text.as_bytes())?;
    Ok(manifest)
}

/// Outcome of re-rendering one mixture from its recorded seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegenerationCheck {
    pub name: String,
    pub identical: bool,
}

/// Re-renders every mixture in a dataset directory from the manifest seeds
/// and compares bytes with the files on disk.
pub fn verify_dataset(
    dir: &Path,
    banks: &[&dyn SrirSource],
    corpus: &Corpus,
) -> Result<Vec<RegenerationCheck>> {
    let manifest = DatasetManifest::read(dir)?;
    if corpus.checksum() != manifest.corpus_checksum {
        return Err(Error::Integrity {
            path: dir.join(DATASET_MANIFEST),
            expected: manifest.corpus_checksum.clone(),
            actual: corpus.checksum(),
        });
    }
    for r in &manifest.banks {
        let bank = banks
            .iter()
            .find(|b| b.layout().room.name == r.room)
            .ok_or_else(|| Error::invalid(format!("bank for room {} not supplied", r.room)))?;
        if bank.checksum() != r.checksum {
            return Err(Error::Integrity {
                path: dir.join(DATASET_MANIFEST),
                expected: r.checksum.clone(),
                actual: bank.checksum().to_string(),
            });
        }
    }
    manifest
        .mixtures
        .par_iter()
        .map(|rec| {
            let bank = banks
                .iter()
                .find(|b| b.layout().room.name == rec.room)
                .ok_or_else(|| Error::invalid(format!("bank for room {} not supplied", rec.room)))?;
            let m = synthesize_mixture(corpus, *bank, &manifest.config.mix, rec.fold, rec.seed)?;
            let (wav, csv) = encode_mixture(&m, bank.layout().sample_rate())?;
            let on_disk_wav = fs::read(dir.join(&rec.wav)).map_err(|e| Error::io(dir.join(&rec.wav), e))?;
            let on_disk_csv = fs::read(dir.join(&rec.csv)).map_err(|e| Error::io(dir.join(&rec.csv), e))?;
            Ok(RegenerationCheck {
                name: rec.name.clone(),
                identical: wav == on_disk_wav
                    && csv.as_bytes() == on_disk_csv.as_slice()
                    && audio::sha256_hex(&wav) == rec.wav_sha256,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bank::{build_bank, RoomSpec, SrirBank};
    use crate::geometry::{Trajectory, Vec3};
    use crate::mixer::corpus::EventClip;
    use crate::mixer::schedule::ScheduleConfig;

    fn banks(n: usize) -> Vec<SrirBank> {
        (0..n)
            .map(|i| {
                let mut spec = RoomSpec::new(
                    format!("room{i}"),
                    Vec3::new(5.0 + i as f64 * 0.3, 4.0, 3.0),
                    Vec3::new(2.5, 2.0, 1.5),
                );
                spec.absorption = Some(0.8);
                spec.max_order = Some(1);
                spec.srir_length = 256;
                spec.spacing_deg = 2.0;
                spec.trajectories = vec![Trajectory::circular(0, 0, 1.2, 1.5)];
                build_bank(&spec).unwrap()
            })
            .collect()
    }

    fn corpus() -> Corpus {
        Corpus {
            clips: (0..4)
                .map(|i| EventClip {
                    class_id: i,
                    samples: (0..24_000 * (i as usize + 1))
                        .map(|n| ((n as f64) * 0.01 * (i as f64 + 1.0)).sin() * 0.5)
                        .collect(),
                    source: format!("c/{i}.wav"),
                })
                .collect(),
            ..Corpus::default()
        }
    }

    fn quick() -> DatasetConfig {
        DatasetConfig {
            scale: 0.01,
            mix: MixConfig {
                schedule: ScheduleConfig {
                    duration_s: 12.0,
                    min_active_s: 6.0,
                    ..ScheduleConfig::default()
                },
                noise_dbfs: None,
            },
            ..DatasetConfig::default()
        }
    }

    #[test]
    fn scaled_counts() {
        assert_eq!(DatasetConfig::with_scale(0.01).counts(), (9, 3));
        assert_eq!(DatasetConfig::with_scale(0.05).counts(), (45, 15));
        assert_eq!(DatasetConfig::default().counts(), (900, 300));
    }

    #[test]
    fn folds_are_disjoint_and_seeded() {
        let rooms: Vec<String> = (0..9).map(|i| format!("r{i}")).collect();
        let (t, v) = assign_folds(&rooms, 6, 3, 5).unwrap();
        assert_eq!((t.len(), v.len()), (6, 3));
        assert!(t.iter().all(|r| !v.contains(r)));
        assert_eq!(assign_folds(&rooms, 6, 3, 5).unwrap(), (t, v));
        match assign_folds(&rooms[..8], 6, 3, 5) {
            Err(e @ Error::InsufficientRooms { .. }) => assert_eq!(e.exit_code(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dataset_regenerates_identically() {
        let owned = banks(9);
        let refs: Vec<&dyn SrirSource> = owned.iter().map(|b| b as &dyn SrirSource).collect();
        let dir = tempfile::tempdir().unwrap();
        let c = corpus();
        let m = generate_dataset(&refs, &c, &quick(), 11, dir.path()).unwrap();
        assert_eq!(m.mixtures.len(), 12);
        assert_eq!(m.mixtures.iter().filter(|r| r.fold == Fold::Val).count(), 3);
        for r in &m.mixtures {
            let rooms = if r.fold == Fold::Train { &m.train_rooms } else { &m.val_rooms };
            assert!(rooms.contains(&r.room));
            let a = audio::read_wav(&dir.path().join(&r.wav)).unwrap();
            assert_eq!((a.channels.len(), a.frames()), (4, 12 * 24_000));
        }
        let checks = verify_dataset(dir.path(), &refs, &c).unwrap();
        assert!(checks.iter().all(|c| c.identical));

        let again = tempfile::tempdir().unwrap();
        let m2 = generate_dataset(&refs, &c, &quick(), 11, again.path()).unwrap();
        assert_eq!(m2.checksum(), m.checksum());
    }
}
