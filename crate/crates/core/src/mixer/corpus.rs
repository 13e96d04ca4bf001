use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::audio::{self, read_wav};
use crate::error::{Error, Result};
use crate::ism::DEFAULT_SAMPLE_RATE;

pub const NUM_CLASSES: u8 = 13;
const PEAK_DBFS: f64 = -3.0;
const TRIM_DBFS: f64 = -60.0;

/// The 13 sound classes of the DCASE 2022 SELD task, in class-id order.
pub const DCASE2022_CLASSES: [&str; 13] = [
    "femaleSpeech",
    "maleSpeech",
    "clapping",
    "telephone",
    "laughter",
    "domesticSounds",
    "footsteps",
    "doorCupboard",
    "music",
    "musicInstrument",
    "waterTap",
    "bell",
    "knock",
];

/// Maps corpus labels (subdirectory names) to class ids in `0..13`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelMap(BTreeMap<String, u8>);

impl LabelMap {
    pub fn new(pairs: impl IntoIterator<Item = (String, u8)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (label, id) in pairs {
            if id >= NUM_CLASSES {
                return Err(Error::invalid(format!(
                    "class id {id} for label {label:?} outside 0..{NUM_CLASSES}"
                )));
            }
            map.insert(label, id);
        }
        Ok(LabelMap(map))
    }

    pub fn dcase2022() -> Self {
        LabelMap(
            DCASE2022_CLASSES
                .iter()
                .enumerate()
                .map(|(i, l)| (l.to_string(), i as u8))
                .collect(),
        )
    }

    /// Sorted subdirectory names get ids 0, 1, 2, ...; names past the
    /// thirteenth stay unmapped.
    pub fn from_subdirs(dir: &Path) -> Result<Self> {
        let mut names: Vec<String> = read_dir_sorted(dir)?
            .into_iter()
            .filter(|p| p.is_dir())
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect();
        names.truncate(NUM_CLASSES as usize);
        Ok(LabelMap(
            names.into_iter().enumerate().map(|(i, n)| (n, i as u8)).collect(),
        ))
    }

    /// Reads `label,class_id` lines; blank lines and `#` comments are skipped.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |msg: &str| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: msg.into(),
            };
            let (label, id) = line
                .rsplit_once(',')
                .ok_or_else(|| parse_err("expected `label,class_id`"))?;
            let id: u8 = id
                .trim()
                .parse()
                .map_err(|_| parse_err("class id is not an integer"))?;
            pairs.push((label.trim().to_string(), id));
        }
        Self::new(pairs)
    }

    pub fn get(&self, label: &str) -> Option<u8> {
        self.0.get(label).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A mono, 24 kHz, peak-normalized sound event.
#[derive(Debug, Clone, PartialEq)]
pub struct EventClip {
    pub class_id: u8,
    pub samples: Vec<f64>,
    /// Path relative to the corpus root.
    pub source: String,
}

impl EventClip {
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / DEFAULT_SAMPLE_RATE as f64
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub clips: Vec<EventClip>,
    pub skipped_unmapped: usize,
    pub skipped_silent: usize,
}

impl Corpus {
    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    /// Class ids present, ascending.
    pub fn classes(&self) -> Vec<u8> {
        let mut ids: Vec<u8> = self.clips.iter().map(|c| c.class_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// SHA-256 over class ids, sources and sample bits, in order.
    pub fn checksum(&self) -> String {
        let mut bytes = Vec::new();
        for c in &self.clips {
            bytes.push(c.class_id);
            bytes.extend_from_slice(c.source.as_bytes());
            for v in &c.samples {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        audio::sha256_hex(&bytes)
    }
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    paths.sort();
    Ok(paths)
}

fn wav_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for p in read_dir_sorted(dir)? {
        if p.is_dir() {
            wav_files(&p, out)?;
        } else if p
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
        {
            out.push(p);
        }
    }
    Ok(())
}

/// Downmixes, resamples to 24 kHz, peak-normalizes to -3 dBFS and trims
/// edges below -60 dBFS. Returns `None` for silent input.
pub fn prepare_clip(channels: &audio::Audio) -> Result<Option<Vec<f64>>> {
    let mono = channels.downmix();
    let mut x = audio::resample(&mono, channels.sample_rate, DEFAULT_SAMPLE_RATE)?;
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(peak > 0.0) || !peak.is_finite() {
        return Ok(None);
    }
    let g = db_to_gain(PEAK_DBFS) / peak;
    x.iter_mut().for_each(|v| *v *= g);
    let floor = db_to_gain(TRIM_DBFS);
    let first = x.iter().position(|v| v.abs() >= floor).unwrap_or(0);
    let last = x.iter().rposition(|v| v.abs() >= floor).unwrap_or(0);
    Ok(Some(x[first..=last].to_vec()))
}

pub(crate) fn db_to_gain(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// Loads every WAV under `<dir>/<label>/...`; the first path component is
/// the label. Files are visited in sorted path order.
pub fn ingest_corpus(dir: &Path, labels: &LabelMap) -> Result<Corpus> {
    let mut corpus = Corpus::default();
    for sub in read_dir_sorted(dir)? {
        if !sub.is_dir() {
            continue;
        }
        let label = sub
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut files = Vec::new();
        wav_files(&sub, &mut files)?;
        let Some(class_id) = labels.get(&label) else {
            corpus.skipped_unmapped += files.len();
            continue;
        };
        for path in files {
            let audio = read_wav(&path)?;
            match prepare_clip(&audio)? {
                Some(samples) => corpus.clips.push(EventClip {
                    class_id,
                    samples,
                    source: path
                        .strip_prefix(dir)
                        .unwrap_or(&path)
                        .to_string_lossy()
                        .replace('\\', "/"),
                }),
                None => corpus.skipped_silent += 1,
            }
        }
    }
    if corpus.skipped_unmapped > 0 {
        log::warn!(
            "skipped {} corpus files with unmapped labels",
            corpus.skipped_unmapped
        );
    }
    if corpus.skipped_silent > 0 {
        log::warn!("skipped {} silent corpus files", corpus.skipped_silent);
    }
    if corpus.is_empty() {
        log::warn!("corpus {} yielded no clips", dir.display());
    }
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{encode_wav, write_bytes, WavFormat};

    fn write(path: &Path, chans: &[Vec<f64>], fs: u32) {
        write_bytes(path, &encode_wav(chans, fs, WavFormat::Float32).unwrap()).unwrap();
    }

    fn tone(n: usize) -> Vec<f64> {
        (0..n).map(|i| 0.3 * (i as f64 * 0.05).sin()).collect()
    }

    #[test]
    fn empty_directory_gives_empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let c = ingest_corpus(dir.path(), &LabelMap::dcase2022()).unwrap();
        assert!(c.is_empty());
    }

    #[test]
    fn thirteen_subdirectories_map_to_class_ids() {
        let dir = tempfile::tempdir().unwrap();
        for name in DCASE2022_CLASSES {
            write(&dir.path().join(name).join("a.wav"), &[tone(2400)], 24_000);
        }
        write(&dir.path().join("unknown").join("b.wav"), &[tone(100)], 24_000);
        let c = ingest_corpus(dir.path(), &LabelMap::dcase2022()).unwrap();
        assert_eq!(c.clips.len(), 13);
        assert_eq!(c.skipped_unmapped, 1);
        for clip in &c.clips {
            let label = clip.source.split('/').next().unwrap();
            assert_eq!(DCASE2022_CLASSES[clip.class_id as usize], label);
        }
        assert_eq!(c.classes(), (0..13).collect::<Vec<u8>>());
    }

    #[test]
    fn stereo_downmix_preserves_length() {
        let dir = tempfile::tempdir().unwrap();
        let mut left = tone(4800);
        left[0] = 0.5;
        left[4799] = 0.5;
        let right: Vec<f64> = left.iter().map(|v| v * 0.5).collect();
        write(&dir.path().join("bell").join("s.wav"), &[left.clone(), right], 24_000);
        let c = ingest_corpus(dir.path(), &LabelMap::dcase2022()).unwrap();
        let clip = &c.clips[0];
        assert_eq!(clip.samples.len(), 4800);
        let peak = clip.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak - db_to_gain(-3.0)).abs() < 1e-6);
        let ratio = clip.samples[100] / left[100];
        assert!((ratio - clip.samples[0] / left[0]).abs() < 1e-6);
    }

    #[test]
    fn resample_and_trim() {
        let dir = tempfile::tempdir().unwrap();
        let mut x = vec![0.0; 4800];
        x.extend(tone(48_000));
        x.extend(vec![0.0; 4800]);
        write(&dir.path().join("knock").join("k.wav"), &[x], 48_000);
        let c = ingest_corpus(dir.path(), &LabelMap::dcase2022()).unwrap();
        let n = c.clips[0].samples.len();
        assert!((n as i64 - 24_000).abs() < 40, "{n}");
    }

    #[test]
    fn silent_files_skipped() {
        let dir = tempfile::tempdir().unwrap();
        write(&dir.path().join("knock").join("z.wav"), &[vec![0.0; 100]], 24_000);
        let c = ingest_corpus(dir.path(), &LabelMap::dcase2022()).unwrap();
        assert!(c.is_empty());
        assert_eq!(c.skipped_silent, 1);
    }

    #[test]
    fn unreadable_file_names_path() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("knock").join("bad.wav");
        write_bytes(&p, b"not a wav").unwrap();
        let err = ingest_corpus(dir.path(), &LabelMap::dcase2022()).unwrap_err();
        assert!(err.to_string().contains("bad.wav"), "{err}");
    }

    #[test]
    fn label_file_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("labels.csv");
        fs::write(&p, "# comment\ndog,3\n\ncat , 12\n").unwrap();
        let m = LabelMap::from_file(&p).unwrap();
        assert_eq!((m.get("dog"), m.get("cat"), m.get("cow")), (Some(3), Some(12), None));
        fs::write(&p, "dog,13\n").unwrap();
        assert!(LabelMap::from_file(&p).is_err());
        fs::write(&p, "dog\n").unwrap();
        assert!(matches!(LabelMap::from_file(&p), Err(Error::Parse { line: 1, .. })));
    }
}
