//! Room specs, SRIR bank rendering and the on-disk bank format.
//!
//! A bank directory holds one 4-channel 32-bit float WAV per entry, named
//! `<room>_<group>_<height>_<index>.wav`, and a `manifest.json` with the full
//! room spec, the resolved acoustics, every entry's position/DoA and the
//! SHA-256 of every WAV.

use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{self, WavFormat};
use crate::calibration::inverse_sabine;
use crate::error::{Error, Result};
use crate::geometry::{sample_trajectory, tetrahedral_array, MicArray, Trajectory, Vec3};
use crate::ism::{
    render_srir, Rir, ShoeboxRoom, Srir, DEFAULT_HIGHPASS_HZ, DEFAULT_SAMPLE_RATE,
    DEFAULT_SPEED_OF_SOUND, DEFAULT_SRIR_LENGTH,
};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const BANK_FORMAT: &str = "srirforge-bank/1";
const RENDER_CHUNK: usize = 64;

fn default_speed_of_sound() -> f64 {
    DEFAULT_SPEED_OF_SOUND
}
fn default_sample_rate() -> u32 {
    DEFAULT_SAMPLE_RATE
}
fn default_srir_length() -> usize {
    DEFAULT_SRIR_LENGTH
}
fn default_spacing() -> f64 {
    1.0
}
fn default_highpass() -> f64 {
    DEFAULT_HIGHPASS_HZ
}

/// Room-spec configuration.
///
/// Give either `rt60_target` (absorption and reflection order then come from
/// inverse Sabine, `max_order` optionally overriding the latter) or both
/// `absorption` and `max_order`. `highpass_hz = 0` disables the high-pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomSpec {
    pub name: String,
    pub dims: Vec3,
    pub array_center: Vec3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rt60_target: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub absorption: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_order: Option<u32>,
    #[serde(default = "default_speed_of_sound")]
    pub speed_of_sound: f64,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: u32,
    #[serde(default = "default_srir_length")]
    pub srir_length: usize,
    #[serde(default = "default_spacing")]
    pub spacing_deg: f64,
    #[serde(default = "default_highpass")]
    pub highpass_hz: f64,
    #[serde(default)]
    pub trajectories: Vec<Trajectory>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Acoustics {
    pub absorption: f64,
    pub max_order: u32,
}

impl RoomSpec {
    pub fn new(name: impl Into<String>, dims: Vec3, array_center: Vec3) -> Self {
        RoomSpec {
            name: name.into(),
            dims,
            array_center,
            rt60_target: None,
            absorption: None,
            max_order: None,
            speed_of_sound: DEFAULT_SPEED_OF_SOUND,
            sample_rate: DEFAULT_SAMPLE_RATE,
            srir_length: DEFAULT_SRIR_LENGTH,
            spacing_deg: 1.0,
            highpass_hz: DEFAULT_HIGHPASS_HZ,
            trajectories: Vec::new(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Spec(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Spec(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Spec(e.to_string()))
    }

    /// Absorption and reflection order, from calibration when an RT60 target
    /// is given.
    pub fn acoustics(&self) -> Result<Acoustics> {
        match (self.rt60_target, self.absorption, self.max_order) {
            (Some(_), Some(_), _) => Err(Error::Spec(
                "give either rt60_target or absorption, not both".into(),
            )),
            (Some(rt60), None, order) => {
                let fit = inverse_sabine(rt60, self.dims, self.speed_of_sound)?;
                Ok(Acoustics {
                    absorption: fit.absorption,
                    max_order: order.unwrap_or(fit.max_order),
                })
            }
            (None, Some(absorption), Some(max_order)) => Ok(Acoustics {
                absorption,
                max_order,
            }),
            (None, Some(_), None) => Err(Error::Spec(
                "absorption requires max_order (or use rt60_target)".into(),
            )),
            (None, None, _) => Err(Error::Spec(
                "one of rt60_target or absorption is required".into(),
            )),
        }
    }

    pub fn room(&self) -> Result<ShoeboxRoom> {
        let a = self.acoustics()?;
        let highpass = (self.highpass_hz > 0.0).then_some(self.highpass_hz);
        ShoeboxRoom::new(self.dims, a.absorption, a.max_order)?
            .with_speed_of_sound(self.speed_of_sound)?
            .with_highpass(highpass)
    }

    pub fn array(&self) -> MicArray {
        tetrahedral_array(self.array_center)
    }

    fn check_fields(&self) -> Result<()> {
        let ok_name = !self.name.is_empty()
            && self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
        if !ok_name {
            return Err(Error::Spec(format!(
                "room name {:?} must be non-empty [A-Za-z0-9_-]",
                self.name
            )));
        }
        if self.sample_rate == 0 || self.srir_length == 0 {
            return Err(Error::Spec("sample_rate and srir_length must be > 0".into()));
        }
        if !(self.spacing_deg > 0.0) {
            return Err(Error::Spec(format!(
                "spacing_deg must be > 0, got {}",
                self.spacing_deg
            )));
        }
        let mut keys: Vec<_> = self
            .trajectories
            .iter()
            .map(|t| (t.group, t.height_index))
            .collect();
        keys.sort_unstable();
        if let Some(w) = keys.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Spec(format!(
                "duplicate trajectory group {} height {}",
                w[0].0, w[0].1
            )));
        }
        Ok(())
    }
}

/// One bank entry's annotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntryInfo {
    pub group: usize,
    pub height_index: usize,
    pub index: usize,
    pub position: Vec3,
    pub doa: Vec3,
    /// Progress along the trace in degrees.
    pub angle: f64,
}

impl EntryInfo {
    pub fn file_name(&self, room: &str) -> String {
        format!(
            "{room}_{}_{}_{}.wav",
            self.group, self.height_index, self.index
        )
    }
}

/// A contiguous run of entries sampled from one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryInfo {
    pub group: usize,
    pub height_index: usize,
    pub closed: bool,
    pub entries: Range<usize>,
}

impl TrajectoryInfo {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Everything about a bank except the sample data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankLayout {
    pub room: RoomSpec,
    pub acoustics: Acoustics,
    pub channels: usize,
    pub trajectories: Vec<TrajectoryInfo>,
    pub entries: Vec<EntryInfo>,
}

impl BankLayout {
    /// Validates the spec and samples every trajectory, ordered by
    /// (group, height, sample index).
    pub fn plan(spec: &RoomSpec) -> Result<Self> {
        spec.check_fields()?;
        let room = spec.room()?;
        if !room.contains(spec.array_center) {
            return Err(Error::OutsideRoom {
                point: spec.array_center,
                context: format!("array center of room {}", spec.name),
            });
        }
        let mut trajs: Vec<&Trajectory> = spec.trajectories.iter().collect();
        trajs.sort_by_key(|t| (t.group, t.height_index));

        let mut entries = Vec::new();
        let mut trajectories = Vec::with_capacity(trajs.len());
        for t in trajs {
            let start = entries.len();
            for s in sample_trajectory(t, spec.array_center, spec.spacing_deg)? {
                if !room.contains(s.position) {
                    return Err(Error::OutsideRoom {
                        point: s.position,
                        context: format!(
                            "sample {} of trajectory group {} height {}",
                            s.index, t.group, t.height_index
                        ),
                    });
                }
                entries.push(EntryInfo {
                    group: t.group,
                    height_index: t.height_index,
                    index: s.index,
                    position: s.position,
                    doa: s.doa,
                    angle: s.angle,
                });
            }
            trajectories.push(TrajectoryInfo {
                group: t.group,
                height_index: t.height_index,
                closed: t.is_closed(),
                entries: start..entries.len(),
            });
        }
        Ok(BankLayout {
            room: spec.clone(),
            acoustics: spec.acoustics()?,
            channels: spec.array().capsules.len(),
            trajectories,
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sample_rate(&self) -> u32 {
        self.room.sample_rate
    }

    pub fn file_name(&self, entry: usize) -> String {
        self.entries[entry].file_name(&self.room.name)
    }

    /// Bank checksum: SHA-256 over the layout JSON followed by every entry's
    /// WAV hash.
    pub fn checksum(&self, entry_hashes: &[String]) -> Result<String> {
        let mut text = serde_json::to_string(self).map_err(|e| Error::invalid(e.to_string()))?;
        for h in entry_hashes {
            text.push('\n');
            text.push_str(h);
        }
        Ok(audio::sha256_hex(text.as_bytes()))
    }

    fn render_entry(&self, room: &ShoeboxRoom, array: &MicArray, entry: usize) -> Result<Srir> {
        let info = &self.entries[entry];
        let srir = render_srir(
            room,
            info.position,
            array,
            self.room.sample_rate,
            self.room.srir_length,
        )?;
        Ok(quantize(srir))
    }
}

/// Rounds every sample to f32 so the in-memory bank equals its WAV image.
fn quantize(mut srir: Srir) -> Srir {
    for ch in &mut srir.channels {
        for v in &mut ch.samples {
            *v = *v as f32 as f64;
        }
    }
    srir
}

fn encode_srir(srir: &Srir) -> Result<Vec<u8>> {
    let chans: Vec<Vec<f64>> = srir.channels.iter().map(|c| c.samples.clone()).collect();
    audio::encode_wav(&chans, srir.sample_rate(), WavFormat::Float32)
}

/// Access to bank SRIRs by entry index, in memory or on disk.
pub trait SrirSource: Sync {
    fn layout(&self) -> &BankLayout;
    fn srir(&self, entry: usize) -> Result<Srir>;
    fn checksum(&self) -> &str;
}

/// A fully rendered bank held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct SrirBank {
    pub layout: BankLayout,
    pub srirs: Vec<Srir>,
    pub entry_hashes: Vec<String>,
    pub checksum: String,
}

impl SrirSource for SrirBank {
    fn layout(&self) -> &BankLayout {
        &self.layout
    }

    fn srir(&self, entry: usize) -> Result<Srir> {
        self.srirs
            .get(entry)
            .cloned()
            .ok_or_else(|| Error::invalid(format!("bank entry {entry} out of range")))
    }

    fn checksum(&self) -> &str {
        &self.checksum
    }
}

/// Renders every trajectory sample of `spec` in memory.
pub fn build_bank(spec: &RoomSpec) -> Result<SrirBank> {
    let layout = BankLayout::plan(spec)?;
    let room = spec.room()?;
    let array = spec.array();
    let rendered: Vec<(Srir, String)> = (0..layout.len())
        .into_par_iter()
        .map(|i| {
            let srir = layout.render_entry(&room, &array, i)?;
            let hash = audio::sha256_hex(&encode_srir(&srir)?);
            Ok((srir, hash))
        })
        .collect::<Result<_>>()?;
    let (srirs, entry_hashes): (Vec<_>, Vec<_>) = rendered.into_iter().unzip();
    let checksum = layout.checksum(&entry_hashes)?;
    Ok(SrirBank {
        layout,
        srirs,
        entry_hashes,
        checksum,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankManifest {
    pub format: String,
    pub checksum: String,
    #[serde(flatten)]
    pub layout: BankLayout,
    pub files: Vec<ManifestEntry>,
}

impl BankManifest {
    fn new(layout: BankLayout, entry_hashes: Vec<String>) -> Result<Self> {
        let checksum = layout.checksum(&entry_hashes)?;
        let files = entry_hashes
            .into_iter()
            .enumerate()
            .map(|(i, sha256)| ManifestEntry {
                file: layout.file_name(i),
                sha256,
            })
            .collect();
        Ok(BankManifest {
            format: BANK_FORMAT.into(),
            checksum,
            layout,
            files,
        })
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let manifest_err = |msg: String| Error::Manifest {
            path: path.clone(),
            msg,
        };
        let text = fs::read_to_string(&path).map_err(|e| manifest_err(e.to_string()))?;
        let m: BankManifest =
            serde_json::from_str(&text).map_err(|e| manifest_err(e.to_string()))?;
        if m.format != BANK_FORMAT {
            return Err(manifest_err(format!("unsupported format {:?}", m.format)));
        }
        if m.files.len() != m.layout.entries.len() {
            return Err(manifest_err(format!(
                "{} files listed for {} entries",
                m.files.len(),
                m.layout.entries.len()
            )));
        }
        let hashes: Vec<String> = m.files.iter().map(|f| f.sha256.clone()).collect();
        let actual = m.layout.checksum(&hashes)?;
        if actual != m.checksum {
            return Err(Error::Integrity {
                path,
                expected: m.checksum,
                actual,
            });
        }
        Ok(m)
    }

    fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::invalid(e.to_string()))?;
        audio::write_bytes(&dir.join(MANIFEST_FILE), text.as_bytes())
    }
}

/// Writes a bank directory; the manifest goes last.
pub fn save_bank(bank: &SrirBank, dir: &Path) -> Result<()> {
    (0..bank.srirs.len())
        .into_par_iter()
        .try_for_each(|i| {
            let bytes = encode_srir(&bank.srirs[i])?;
            audio::write_bytes(&dir.join(bank.layout.file_name(i)), &bytes)
        })?;
    BankManifest::new(bank.layout.clone(), bank.entry_hashes.clone())?.write(dir)
}

/// Renders a spec straight to a bank directory, holding at most one chunk of
/// SRIRs in memory. `progress` receives (done, total) after each chunk.
pub fn render_bank_to_dir(
    spec: &RoomSpec,
    dir: &Path,
    mut progress: impl FnMut(usize, usize),
) -> Result<BankManifest> {
    let layout = BankLayout::plan(spec)?;
    let room = spec.room()?;
    let array = spec.array();
    let total = layout.len();
    let mut hashes = Vec::with_capacity(total);
    for chunk in (0..total).collect::<Vec<_>>().chunks(RENDER_CHUNK) {
        let part: Vec<String> = chunk
            .par_iter()
            .map(|&i| {
                let bytes = encode_srir(&layout.render_entry(&room, &array, i)?)?;
                audio::write_bytes(&dir.join(layout.file_name(i)), &bytes)?;
                Ok(audio::sha256_hex(&bytes))
            })
            .collect::<Result<_>>()?;
        hashes.extend(part);
        progress(hashes.len(), total);
    }
    let manifest = BankManifest::new(layout, hashes)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    manifest.write(dir)?;
    Ok(manifest)
}

/// A bank directory whose SRIRs are read (and hash-checked) on demand.
#[derive(Debug, Clone)]
pub struct DiskBank {
    pub dir: PathBuf,
    pub manifest: BankManifest,
}

impl DiskBank {
    pub fn open(dir: &Path) -> Result<Self> {
        Ok(DiskBank {
            dir: dir.to_path_buf(),
            manifest: BankManifest::read(dir)?,
        })
    }

    /// Reads every entry into memory.
    pub fn load_all(&self) -> Result<SrirBank> {
        let srirs = (0..self.manifest.files.len())
            .into_par_iter()
            .map(|i| self.srir(i))
            .collect::<Result<Vec<_>>>()?;
        Ok(SrirBank {
            layout: self.manifest.layout.clone(),
            srirs,
            entry_hashes: self.manifest.files.iter().map(|f| f.sha256.clone()).collect(),
            checksum: self.manifest.checksum.clone(),
        })
    }
}

impl SrirSource for DiskBank {
    fn layout(&self) -> &BankLayout {
        &self.manifest.layout
    }

    fn srir(&self, entry: usize) -> Result<Srir> {
        let layout = &self.manifest.layout;
        let (Some(info), Some(file)) = (layout.entries.get(entry), self.manifest.files.get(entry))
        else {
            return Err(Error::invalid(format!("bank entry {entry} out of range")));
        };
        let path = self.dir.join(&file.file);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let actual = audio::sha256_hex(&bytes);
        if actual != file.sha256 {
            return Err(Error::Integrity {
                path,
                expected: file.sha256.clone(),
                actual,
            });
        }
        let audio = audio::read_wav(&path)?;
        if audio.channels.len() != layout.channels || audio.sample_rate != layout.sample_rate() {
            return Err(Error::Manifest {
                path,
                msg: "WAV shape disagrees with manifest".into(),
            });
        }
        Ok(Srir {
            channels: audio
                .channels
                .into_iter()
                .map(|c| Rir::new(c, audio.sample_rate))
                .collect(),
            doa: info.doa,
            source_position: info.position,
        })
    }

    fn checksum(&self) -> &str {
        &self.manifest.checksum
    }
}

pub fn load_bank(dir: &Path) -> Result<SrirBank> {
    DiskBank::open(dir)?.load_all()
}

/// Names accepted by [`preset`].
pub const PRESET_NAMES: [&str; 9] = [
    "bomb_shelter",
    "gym",
    "pb132",
    "pc226",
    "sa203",
    "sc203",
    "se203",
    "tb103",
    "tc352",
];

/// Placeholder spec for one of the nine measured rooms. Trajectory counts
/// follow the measured dataset; dimensions and RT60 targets are plausible
/// stand-ins to be replaced with real values.
pub fn preset(name: &str) -> Option<RoomSpec> {
    let spec = match name {
        "bomb_shelter" => circular_preset(name, [12.0, 8.0, 3.5], 0.8),
        "gym" => circular_preset(name, [20.0, 14.0, 6.0], 1.1),
        "pb132" => circular_preset(name, [8.0, 6.0, 3.2], 0.5),
        "pc226" => circular_preset(name, [10.0, 7.0, 3.2], 0.55),
        "tc352" => circular_preset(name, [9.0, 7.0, 3.3], 0.6),
        "sa203" => linear_preset(name, [9.0, 8.0, 3.0], 0.6, &[1.2, 2.0, 2.8], 3),
        "sc203" => linear_preset(name, [9.0, 7.0, 3.3], 0.55, &[1.2, 2.2], 5),
        "se203" => linear_preset(name, [8.0, 7.0, 3.2], 0.6, &[1.2, 2.2], 4),
        "tb103" => linear_preset(name, [7.0, 6.0, 3.0], 0.5, &[1.2, 2.0], 3),
        _ => return None,
    };
    Some(spec)
}

const ARRAY_HEIGHT: f64 = 1.5;

/// Two orbit radii, nine heights 0.2 m apart around the array height.
fn circular_preset(name: &str, dims: [f64; 3], rt60: f64) -> RoomSpec {
    let center = Vec3::new(dims[0] / 2.0, dims[1] / 2.0, ARRAY_HEIGHT);
    let mut spec = RoomSpec::new(name, dims.into(), center);
    spec.rt60_target = Some(rt60);
    for (group, radius) in [1.0, 2.0].into_iter().enumerate() {
        for h in 0..9 {
            let z = ARRAY_HEIGHT + (h as f64 - 4.0) * 0.2;
            spec.trajectories.push(Trajectory::circular(group, h, radius, z));
        }
    }
    spec
}

/// Straight traces parallel to the x axis at each distance, mirrored to both
/// sides of the array, repeated over `heights` levels.
fn linear_preset(name: &str, dims: [f64; 3], rt60: f64, distances: &[f64], heights: usize) -> RoomSpec {
    let center = Vec3::new(dims[0] / 2.0, dims[1] / 2.0, ARRAY_HEIGHT);
    let mut spec = RoomSpec::new(name, dims.into(), center);
    spec.rt60_target = Some(rt60);
    let half_len = dims[0] / 2.0 - 0.5;
    let mut group = 0;
    for &d in distances {
        for side in [1.0, -1.0] {
            for h in 0..heights {
                let z = ARRAY_HEIGHT + (h as f64 - (heights as f64 - 1.0) / 2.0) * 0.3;
                let y = center.y + side * d;
                spec.trajectories.push(Trajectory::linear(
                    group,
                    h,
                    Vec3::new(center.x - half_len, y, z),
                    Vec3::new(center.x + half_len, y, z),
                ));
            }
            group += 1;
        }
    }
    spec
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> RoomSpec {
        let mut spec = RoomSpec::new("lab", Vec3::new(5.0, 4.0, 3.0), Vec3::new(2.5, 2.0, 1.5));
        spec.absorption = Some(0.6);
        spec.max_order = Some(2);
        spec.srir_length = 600;
        spec.spacing_deg = 120.0;
        spec.trajectories.push(Trajectory::circular(0, 0, 1.0, 1.5));
        spec
    }

    #[test]
    fn toml_round_trip() {
        let mut spec = small_spec();
        spec.trajectories.push(Trajectory::linear(
            1,
            0,
            Vec3::new(1.0, 3.0, 1.2),
            Vec3::new(4.0, 3.0, 1.2),
        ));
        let text = spec.to_toml().unwrap();
        assert_eq!(RoomSpec::from_toml_str(&text).unwrap(), spec);
    }

    #[test]
    fn toml_defaults() {
        let spec = RoomSpec::from_toml_str(
            "name = \"r\"\ndims = [5, 4, 3]\narray_center = [2, 2, 1.5]\nrt60_target = 0.5\n",
        )
        .unwrap();
        assert_eq!(spec.sample_rate, 24_000);
        assert_eq!(spec.srir_length, 7_200);
        assert_eq!(spec.spacing_deg, 1.0);
        assert!(spec.trajectories.is_empty());
        let a = spec.acoustics().unwrap();
        assert!((a.absorption - 0.205_677).abs() < 1e-5);
        assert_eq!(a.max_order, 58);
    }

    #[test]
    fn acoustics_requires_one_source() {
        let mut spec = small_spec();
        spec.rt60_target = Some(0.5);
        assert!(matches!(spec.acoustics(), Err(Error::Spec(_))));
        spec.absorption = None;
        spec.max_order = Some(3);
        assert_eq!(spec.acoustics().unwrap().max_order, 3);
        spec.rt60_target = None;
        assert!(matches!(spec.acoustics(), Err(Error::Spec(_))));
    }

    #[test]
    fn empty_trajectories_give_empty_valid_bank() {
        let mut spec = small_spec();
        spec.trajectories.clear();
        let bank = build_bank(&spec).unwrap();
        assert!(bank.srirs.is_empty());
        let dir = tempfile::tempdir().unwrap();
        save_bank(&bank, dir.path()).unwrap();
        assert_eq!(load_bank(dir.path()).unwrap(), bank);
    }

    #[test]
    fn round_trip_three_entries() {
        let bank = build_bank(&small_spec()).unwrap();
        assert_eq!(bank.srirs.len(), 3);
        let dir = tempfile::tempdir().unwrap();
        save_bank(&bank, dir.path()).unwrap();
        let back = load_bank(dir.path()).unwrap();
        assert_eq!(back, bank);
        for (i, e) in back.layout.entries.iter().enumerate() {
            let name = back.layout.file_name(i);
            assert_eq!(name, format!("lab_0_0_{}.wav", e.index));
            assert!(dir.path().join(&name).exists());
            let a = audio::read_wav(&dir.path().join(&name)).unwrap();
            assert_eq!((a.channels.len(), a.frames(), a.sample_rate), (4, 600, 24_000));
        }
    }

    #[test]
    fn streaming_render_matches_in_memory_build() {
        let spec = small_spec();
        let bank = build_bank(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let mut calls = 0;
        let manifest = render_bank_to_dir(&spec, dir.path(), |_, _| calls += 1).unwrap();
        assert_eq!(calls, 1);
        assert_eq!(manifest.checksum, bank.checksum);
        assert_eq!(load_bank(dir.path()).unwrap(), bank);
    }

    #[test]
    fn corrupted_wav_is_an_integrity_error() {
        let bank = build_bank(&small_spec()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_bank(&bank, dir.path()).unwrap();
        let path = dir.path().join(bank.layout.file_name(1));
        let mut bytes = fs::read(&path).unwrap();
        let n = bytes.len();
        bytes[n - 1] ^= 0x40;
        fs::write(&path, bytes).unwrap();
        assert!(matches!(load_bank(dir.path()), Err(Error::Integrity { .. })));
    }

    #[test]
    fn missing_or_tampered_manifest() {
        let dir = tempfile::tempdir().unwrap();
        match load_bank(dir.path()) {
            Err(Error::Manifest { path, .. }) => assert!(path.ends_with(MANIFEST_FILE)),
            other => panic!("{other:?}"),
        }
        let bank = build_bank(&small_spec()).unwrap();
        save_bank(&bank, dir.path()).unwrap();
        let path = dir.path().join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, text.replacen("\"angle\": 0.0", "\"angle\": 1.0", 1)).unwrap();
        assert!(matches!(load_bank(dir.path()), Err(Error::Integrity { .. })));
        fs::write(&path, "{ not json").unwrap();
        assert!(matches!(load_bank(dir.path()), Err(Error::Manifest { .. })));
    }

    #[test]
    fn outside_point_is_named() {
        let mut spec = small_spec();
        spec.trajectories[0] = Trajectory::circular(0, 0, 3.0, 1.5);
        match BankLayout::plan(&spec) {
            Err(e @ Error::OutsideRoom { .. }) => {
                assert_eq!(e.exit_code(), 4);
                assert!(e.to_string().contains("(5.500, 2.000, 1.500)"), "{e}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_trajectory_keys_rejected() {
        let mut spec = small_spec();
        spec.trajectories.push(Trajectory::circular(0, 0, 0.5, 1.5));
        assert!(matches!(BankLayout::plan(&spec), Err(Error::Spec(_))));
    }

    #[test]
    fn ordering_is_group_height_index() {
        let mut spec = small_spec();
        spec.trajectories = vec![
            Trajectory::circular(1, 0, 1.0, 1.5),
            Trajectory::circular(0, 1, 1.0, 1.7),
            Trajectory::circular(0, 0, 1.0, 1.3),
        ];
        let layout = BankLayout::plan(&spec).unwrap();
        let keys: Vec<_> = layout
            .entries
            .iter()
            .map(|e| (e.group, e.height_index, e.index))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(layout.trajectories[1].entries, 3..6);
    }

    #[test]
    fn presets_match_table_counts() {
        let expected = [
            ("bomb_shelter", 2, 9),
            ("gym", 2, 9),
            ("pb132", 2, 9),
            ("pc226", 2, 9),
            ("sa203", 6, 3),
            ("sc203", 4, 5),
            ("se203", 4, 4),
            ("tb103", 4, 3),
            ("tc352", 2, 9),
        ];
        for (name, groups, heights) in expected {
            let spec = preset(name).unwrap();
            let layout = BankLayout::plan(&spec).unwrap();
            let n_groups = spec.trajectories.iter().map(|t| t.group).max().unwrap() + 1;
            let n_heights = spec.trajectories.iter().map(|t| t.height_index).max().unwrap() + 1;
            assert_eq!((n_groups, n_heights), (groups, heights), "{name}");
            assert_eq!(spec.trajectories.len(), groups * heights);
            if spec.trajectories[0].is_closed() {
                assert_eq!(layout.len(), 6480, "{name}");
            }
        }
        assert!(preset("nowhere").is_none());
    }

    #[test]
    fn preset_specs_survive_toml() {
        for name in PRESET_NAMES {
            let spec = preset(name).unwrap();
            assert_eq!(RoomSpec::from_toml_str(&spec.to_toml().unwrap()).unwrap(), spec);
        }
    }
}
