//! The `srirforge` command line: calibrate, inspect, render-srirs,
//! synthesize, evaluate and preset.
//!
//! Exit codes: 0 success, 2 input/config error, 3 insufficient data,
//! 4 infeasible physics, 5 scheduling failure.

use std::fs;
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::audio::{self, read_wav};
use crate::bank::{self, BankLayout, DiskBank, RoomSpec, SrirSource, MANIFEST_FILE};
use crate::calibration::{calibrate_room, energy_decay_curve, estimate_rt60, FitRegion};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::ism::{Rir, DEFAULT_SPEED_OF_SOUND};
use crate::metrics::{read_annotations, MetricsConfig, ScoreAccumulator, DEFAULT_THRESHOLD};
use crate::mixer::{self, ingest_corpus, DatasetConfig, LabelMap};
use crate::plot::{Chart, Series};

#[derive(Debug, Parser)]
#[command(name = "srirforge", version, about = "Image-source SRIR banks and SELD mixture synthesis")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<NonZeroUsize>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate RT60, absorption and reflection order from measured RIRs.
    Calibrate(CalibrateArgs),
    /// Summarize a bank directory or a single RIR file.
    Inspect(InspectArgs),
    /// Render a room spec into a bank directory.
    RenderSrirs(RenderArgs),
    /// Synthesize a train/val SELD dataset from room banks and a corpus.
    Synthesize(SynthesizeArgs),
    /// Score predicted annotations against references.
    Evaluate(EvaluateArgs),
    /// Print a built-in room spec as TOML.
    Preset(PresetArgs),
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Directory of RIR WAV files; every channel counts as one RIR.
    #[arg(long)]
    pub rir_dir: PathBuf,
    /// Room dimensions `X,Y,Z` in meters.
    #[arg(long, value_parser = parse_vec3)]
    pub dims: Vec3,
    /// Schroeder fit region `start:end` in dB.
    #[arg(long, default_value = "-5:-25", allow_hyphen_values = true)]
    pub region: FitRegion,
    #[arg(long, default_value_t = DEFAULT_SPEED_OF_SOUND)]
    pub speed_of_sound: f64,
    /// Write EDC and fit-line CSV + SVG into this directory.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false, id = "target")]
pub struct InspectTarget {
    /// Bank directory.
    #[arg(long)]
    pub bank: Option<PathBuf>,
    /// A single RIR WAV.
    #[arg(long)]
    pub rir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[command(flatten)]
    pub target: InspectTarget,
    #[arg(long, default_value = "-5:-25", allow_hyphen_values = true)]
    pub region: FitRegion,
    /// Write CSV + SVG diagnostics into this directory.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Room spec (TOML).
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    /// Directory of bank directories and/or room-spec TOML files. Specs are
    /// rendered into `<out>/banks/<room>` first (reused when unchanged).
    #[arg(long)]
    pub spec_dir: PathBuf,
    /// Corpus root with one subdirectory per label.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, env = "SRIRFORGE_SEED")]
    pub seed: u64,
    /// Fraction of the 900 train + 300 val mixtures.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// `label,class_id` file; default assigns ids to sorted subdirectories.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Add white noise at this RMS level (dBFS); off by default.
    #[arg(long, allow_hyphen_values = true)]
    pub noise_dbfs: Option<f64>,
    /// Sample each class in proportion to its clip count instead of uniformly.
    #[arg(long)]
    pub proportional_classes: bool,
    /// Re-render an existing dataset from its manifest and compare bytes.
    #[arg(long)]
    pub verify: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Reference CSV, or a directory of them.
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Prediction CSV, or a directory with the same file names.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Frames pooled per scoring segment (1 = frame-level).
    #[arg(long, default_value_t = 1)]
    pub segment_frames: usize,
    /// Also write the CSV report here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PresetArgs {
    /// One of the built-in room names; `--list` shows them.
    #[arg(required_unless_present = "list")]
    pub name: Option<String>,
    #[arg(long)]
    pub list: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn parse_vec3(s: &str) -> std::result::Result<Vec3, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("{p:?} is not a number")))
        .collect::<std::result::Result<_, _>>()?;
    match v[..] {
        [x, y, z] => Ok(Vec3::new(x, y, z)),
        _ => Err(format!("expected X,Y,Z, got {s:?}")),
    }
}

/// Parses `std::env::args`, runs, and returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        builder = builder.num_threads(j.get());
    }
    let pool = builder
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Calibrate(a) => calibrate(a),
        Command::Inspect(a) => inspect(a),
        Command::RenderSrirs(a) => render_srirs(a),
        Command::Synthesize(a) => synthesize(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Preset(a) => preset(a),
    })
}

fn wav_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")))
        .collect();
    paths.sort();
    Ok(paths)
}

fn load_rirs(paths: &[PathBuf]) -> Result<Vec<(String, Rir)>> {
    let mut rirs = Vec::new();
    for p in paths {
        let audio = read_wav(p)?;
        let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let multi = audio.channels.len() > 1;
        for (c, samples) in audio.channels.into_iter().enumerate() {
            let name = if multi { format!("{stem}:{c}") } else { stem.clone() };
            rirs.push((name, Rir::new(samples, audio.sample_rate)));
        }
    }
    Ok(rirs)
}

fn write_chart(dir: &Path, stem: &str, chart: &Chart) -> Result<()> {
    audio::write_bytes(&dir.join(format!("{stem}.csv")), chart.to_csv().as_bytes())?;
    audio::write_bytes(&dir.join(format!("{stem}.svg")), chart.to_svg().as_bytes())?;
    eprintln!("wrote {}", dir.join(format!("{stem}.{{csv,svg}}")).display());
    Ok(())
}

/// EDC and fitted line for each RIR (at most six drawn, all in the CSV).
fn edc_chart(rirs: &[(String, Rir)], region: FitRegion) -> Result<Chart> {
    let mut chart = Chart {
        title: "Energy decay curves".into(),
        x_label: "time (s)".into(),
        y_label: "energy (dB)".into(),
        series: Vec::new(),
        y_range: Some((-80.0, 0.0)),
    };
    for (name, rir) in rirs {
        let edc = energy_decay_curve(rir)?;
        let fit = estimate_rt60(&edc, region)?;
        let stride = (edc.values.len() / 600).max(1);
        let end = edc.values.iter().position(|&v| v < -90.0).unwrap_or(edc.values.len());
        let curve: Vec<(f64, f64)> = (0..end).step_by(stride).map(|i| (edc.time(i), edc.values[i])).collect();
        let t_end = curve.last().map_or(0.0, |p| p.0);
        chart.series.push(Series::line(format!("{name} EDC"), curve));
        chart.series.push(
            Series::line(
                format!("{name} fit (RT60 {:.3} s)", fit.rt60),
                vec![(0.0, fit.level_at(0.0)), (t_end, fit.level_at(t_end))],
            )
            .dashed(),
        );
    }
    let t_max = chart.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).fold(0.0, f64::max);
    for db in [region.start_db, region.end_db] {
        chart
            .series
            .push(Series::line(format!("region {db} dB"), vec![(0.0, db), (t_max, db)]).dashed());
    }
    Ok(chart)
}

fn calibrate(a: CalibrateArgs) -> Result<()> {
    let paths = wav_paths(&a.rir_dir)?;
    if paths.is_empty() {
        return Err(Error::invalid(format!("no WAV files in {}", a.rir_dir.display())));
    }
    let rirs = load_rirs(&paths)?;
    let only: Vec<Rir> = rirs.iter().map(|r| r.1.clone()).collect();
    let result = calibrate_room(&only, a.dims, a.region, a.speed_of_sound)?;
    println!("rirs        {}", rirs.len());
    println!("rt60        {:.4} s", result.rt60);
    println!("fit region  {}..{} dB", result.fit_region.start_db, result.fit_region.end_db);
    println!("slope       {:.2} dB/s", result.fit_slope);
    println!("r2          {:.4}", result.r_squared);
    println!("absorption  {:.6}", result.absorption);
    println!("max_order   {}", result.max_order);
    if let Some(dir) = &a.plot {
        let shown: Vec<(String, Rir)> = rirs.into_iter().take(6).collect();
        write_chart(dir, "edc", &edc_chart(&shown, a.region)?)?;
    }
    Ok(())
}

fn inspect(a: InspectArgs) -> Result<()> {
    if let Some(path) = &a.target.rir {
        let rirs = load_rirs(std::slice::from_ref(path))?;
        for (name, rir) in &rirs {
            let fit = estimate_rt60(&energy_decay_curve(rir)?, a.region)?;
            println!(
                "{name}: {} samples at {} Hz, rt60 {:.4} s, slope {:.2} dB/s, r2 {:.4}",
                rir.len(),
                rir.sample_rate,
                fit.rt60,
                fit.slope,
                fit.r_squared
            );
        }
        if let Some(dir) = &a.plot {
            write_chart(dir, "edc", &edc_chart(&rirs, a.region)?)?;
        }
        return Ok(());
    }
    let Some(dir) = &a.target.bank else {
        return Err(Error::invalid("give --bank or --rir"));
    };
    let bank = DiskBank::open(dir)?;
    let layout = bank.layout();
    println!("room        {}", layout.room.name);
    println!("dims        {:?}", layout.room.dims.to_array());
    println!("array       {:?}", layout.room.array_center.to_array());
    println!("absorption  {:.6}", layout.acoustics.absorption);
    println!("max_order   {}", layout.acoustics.max_order);
    println!("entries     {}", layout.len());
    println!("shape       {} x {} @ {} Hz", layout.room.srir_length, layout.channels, layout.sample_rate());
    println!("checksum    {}", bank.checksum());
    for t in &layout.trajectories {
        println!(
            "  group {} height {}: {} samples ({})",
            t.group,
            t.height_index,
            t.len(),
            if t.closed { "circular" } else { "linear" }
        );
    }
    if let Some(out) = &a.plot {
        write_chart(out, "positions", &positions_chart(layout))?;
    }
    Ok(())
}

/// Top view of every SRIR position, one series per trajectory group.
fn positions_chart(layout: &BankLayout) -> Chart {
    let mut groups: Vec<usize> = layout.entries.iter().map(|e| e.group).collect();
    groups.sort_unstable();
    groups.dedup();
    let mut series: Vec<Series> = groups
        .iter()
        .map(|&g| {
            Series::line(
                format!("group {g}"),
                layout
                    .entries
                    .iter()
                    .filter(|e| e.group == g)
                    .map(|e| (e.position.x, e.position.y))
                    .collect(),
            )
            .scatter()
        })
        .collect();
    let c = layout.room.array_center;
    series.push(Series::line("array", vec![(c.x, c.y)]).scatter());
    Chart {
        title: format!("SRIR positions, {}", layout.room.name),
        x_label: "x (m)".into(),
        y_label: "y (m)".into(),
        series,
        y_range: None,
    }
}

fn render_srirs(a: RenderArgs) -> Result<()> {
    let spec = RoomSpec::from_file(&a.spec)?;
    let manifest = bank::render_bank_to_dir(&spec, &a.out, |done, total| {
        eprint!("\rrendered {done}/{total}");
        if done == total {
            eprintln!();
        }
    })?;
    println!(
        "{}: {} entries, absorption {:.6}, max_order {}, checksum {}",
        spec.name,
        manifest.layout.len(),
        manifest.layout.acoustics.absorption,
        manifest.layout.acoustics.max_order,
        manifest.checksum
    );
    Ok(())
}

/// Opens every bank under `spec_dir`, rendering TOML specs into
/// `<out>/banks/<room>` when no matching bank exists yet.
pub fn collect_banks(spec_dir: &Path, out: &Path) -> Result<Vec<DiskBank>> {
    let mut entries: Vec<PathBuf> = fs::read_dir(spec_dir)
        .map_err(|e| Error::io(spec_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    let mut banks = Vec::new();
    for p in entries {
        if p.is_dir() && p.join(MANIFEST_FILE).exists() {
            banks.push(DiskBank::open(&p)?);
        } else if p.extension().is_some_and(|e| e == "toml") {
            let spec = RoomSpec::from_file(&p)?;
            let dir = out.join("banks").join(&spec.name);
            let fresh = DiskBank::open(&dir).ok().filter(|b| b.layout().room == spec);
            let bank = match fresh {
                Some(b) => b,
                None => {
                    eprintln!("rendering bank {}", spec.name);
                    bank::render_bank_to_dir(&spec, &dir, |done, total| {
                        eprint!("\r  {done}/{total}");
                        if done == total {
                            eprintln!();
                        }
                    })?;
                    DiskBank::open(&dir)?
                }
            };
            banks.push(bank);
        }
    }
    Ok(banks)
}

fn synthesize(a: SynthesizeArgs) -> Result<()> {
    if !(a.scale > 0.0) {
        return Err(Error::invalid("--scale must be > 0"));
    }
    let labels = match &a.labels {
        Some(p) => LabelMap::from_file(p)?,
        None => LabelMap::from_subdirs(&a.corpus)?,
    };
    let corpus = ingest_corpus(&a.corpus, &labels)?;
    if corpus.is_empty() {
        return Err(Error::invalid(format!("no usable clips in {}", a.corpus.display())));
    }
    let banks = collect_banks(&a.spec_dir, &a.out)?;
    let refs: Vec<&dyn SrirSource> = banks.iter().map(|b| b as &dyn SrirSource).collect();
    if a.verify {
        let checks = mixer::verify_dataset(&a.out, &refs, &corpus)?;
        let bad: Vec<&str> = checks.iter().filter(|c| !c.identical).map(|c| c.name.as_str()).collect();
        println!("{} mixtures re-rendered, {} differ", checks.len(), bad.len());
        if !bad.is_empty() {
            return Err(Error::Integrity {
                path: a.out.clone(),
                expected: "identical regeneration".into(),
                actual: bad.join(", "),
            });
        }
        return Ok(());
    }
    let mut config = DatasetConfig::with_scale(a.scale);
    config.mix.noise_dbfs = a.noise_dbfs;
    if a.proportional_classes {
        config.mix.schedule.class_sampling = mixer::schedule::ClassSampling::Proportional;
    }
    let (n_train, n_val) = config.counts();
    eprintln!(
        "{} clips, {} banks, {n_train} train + {n_val} val mixtures",
        corpus.clips.len(),
        banks.len()
    );
    let manifest = mixer::generate_dataset(&refs, &corpus, &config, a.seed, &a.out)?;
    println!("train rooms {}", manifest.train_rooms.join(", "));
    println!("val rooms   {}", manifest.val_rooms.join(", "));
    println!("mixtures    {}", manifest.mixtures.len());
    println!("checksum    {}", manifest.checksum());
    Ok(())
}

fn csv_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    v.sort();
    Ok(v)
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let config = MetricsConfig {
        threshold: a.threshold,
        segment_frames: a.segment_frames.max(1),
    };
    let mut acc = ScoreAccumulator::new(config);
    if a.reference.is_dir() {
        for r in csv_files(&a.reference)? {
            let name = r.file_name().expect("listed files have names");
            let p = a.pred.join(name);
            let pred = if p.exists() {
                read_annotations(&p)?
            } else {
                log::warn!("no prediction for {}; scoring as empty", name.to_string_lossy());
                Vec::new()
            };
            acc.add(&read_annotations(&r)?, &pred);
        }
    } else {
        acc.add(&read_annotations(&a.reference)?, &read_annotations(&a.pred)?);
    }
    let scores = acc.finish()?;
    println!("{}", scores.text_report());
    if let Some(path) = &a.csv {
        audio::write_bytes(path, scores.csv_report().as_bytes())?;
    }
    Ok(())
}

fn preset(a: PresetArgs) -> Result<()> {
    if a.list {
        for name in bank::PRESET_NAMES {
            println!("{name}");
        }
        return Ok(());
    }
    let name = a.name.unwrap_or_default();
    let spec = bank::preset(&name).ok_or_else(|| {
        Error::invalid(format!(
            "unknown preset {name:?}; choose from {}",
            bank::PRESET_NAMES.join(", ")
        ))
    })?;
    let text = spec.to_toml()?;
    match &a.out {
        Some(p) => audio::write_bytes(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::DEFAULT_REGION;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn region_default_matches_constant() {
        let cli = Cli::try_parse_from(["srirforge", "calibrate", "--rir-dir", "x", "--dims", "5,4,3"]).unwrap();
        let Command::Calibrate(a) = cli.command else { panic!() };
        assert_eq!(a.region, DEFAULT_REGION);
        assert_eq!(a.dims, Vec3::new(5.0, 4.0, 3.0));
        let cli = Cli::try_parse_from([
            "srirforge", "calibrate", "--rir-dir", "x", "--dims", "5,4,3", "--region", "-10:-30",
        ])
        .unwrap();
        let Command::Calibrate(a) = cli.command else { panic!() };
        assert_eq!((a.region.start_db, a.region.end_db), (-10.0, -30.0));
    }

    #[test]
    fn bad_vectors_rejected() {
        assert!(parse_vec3("1,2").is_err());
        assert!(parse_vec3("1,a,3").is_err());
    }
}
