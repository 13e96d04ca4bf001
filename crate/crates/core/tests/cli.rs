use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use srirforge::audio::{encode_wav, write_bytes, WavFormat};
use srirforge::bank::RoomSpec;
use srirforge::calibration::inverse_sabine;
use srirforge::geometry::{CapsuleSpec, Direction, Pattern, Trajectory, Vec3};
use srirforge::ism::{render_rir, ShoeboxRoom};

fn srirforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srirforge"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_rirs(dir: &Path, dims: Vec3, rt60: f64) {
    let acoustics = inverse_sabine(rt60, dims, 343.0).unwrap();
    let room = ShoeboxRoom::new(dims, acoustics.absorption, acoustics.max_order).unwrap();
    let omni = CapsuleSpec {
        orientation: Direction::new(0.0, 0.0),
        offset_radius: 0.0,
        pattern: Pattern::Omnidirectional,
    };
    let pairs = [
        (Vec3::new(1.3, 1.1, 1.2), Vec3::new(4.9, 3.2, 1.6)),
        (Vec3::new(5.6, 0.9, 2.1), Vec3::new(2.2, 3.7, 1.4)),
    ];
    for (i, (s, r)) in pairs.into_iter().enumerate() {
        let rir = render_rir(&room, s, r, &omni, 24_000, (1.2 * rt60 * 24_000.0) as usize).unwrap();
        let bytes = encode_wav(&[rir.samples], 24_000, WavFormat::Float32).unwrap();
        write_bytes(&dir.join(format!("rir{i}.wav")), &bytes).unwrap();
    }
}

fn rt60_line(out: &str) -> f64 {
    out.lines()
        .find(|l| l.starts_with("rt60"))
        .and_then(|l| l.split_whitespace().nth(1))
        .unwrap()
        .parse()
        .unwrap()
}

#[test]
fn calibrate_recovers_synthetic_rt60() {
    let dir = tempfile::tempdir().unwrap();
    write_rirs(dir.path(), Vec3::new(7.0, 5.0, 3.0), 0.5);
    let out = srirforge(&["calibrate", "--rir-dir", p(dir.path()), "--dims", "7,5,3"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rt60 = rt60_line(&stdout(&out));
    assert!((0.4..=0.6).contains(&rt60), "rt60 {rt60}");

    let explicit = srirforge(&["calibrate", "--rir-dir", p(dir.path()), "--dims", "7,5,3", "--region", "-5:-25"]);
    assert_eq!(stdout(&explicit), stdout(&out));

    let plot = dir.path().join("plots");
    let out = srirforge(&["calibrate", "--rir-dir", p(dir.path()), "--dims", "7,5,3", "--plot", p(&plot)]);
    assert!(out.status.success());
    assert!(plot.join("edc.svg").exists() && plot.join("edc.csv").exists());
}

#[test]
fn calibrate_empty_dir_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = srirforge(&["calibrate", "--rir-dir", p(dir.path()), "--dims", "7,5,3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("no WAV files"));
}

#[test]
fn bad_region_is_rejected() {
    let out = srirforge(&["calibrate", "--rir-dir", ".", "--dims", "7,5,3", "--region", "-25:-5"]);
    assert_eq!(out.status.code(), Some(2));
}

fn small_spec(name: &str) -> RoomSpec {
    let mut spec = RoomSpec::new(name, Vec3::new(5.0, 4.0, 3.0), Vec3::new(2.5, 2.0, 1.5));
    spec.absorption = Some(0.6);
    spec.max_order = Some(2);
    spec.srir_length = 256;
    spec.spacing_deg = 10.0;
    spec.trajectories = vec![Trajectory::circular(0, 0, 1.0, 1.5)];
    spec
}

#[test]
fn render_outside_trajectory_is_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = small_spec("bad");
    spec.trajectories = vec![Trajectory::circular(0, 0, 3.0, 1.5)];
    let path = dir.path().join("bad.toml");
    fs::write(&path, spec.to_toml().unwrap()).unwrap();
    let out = srirforge(&["render-srirs", "--spec", p(&path), "--out", p(&dir.path().join("bank"))]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    assert!(stderr(&out).contains("outside"), "{}", stderr(&out));
}

#[test]
fn render_checksum_independent_of_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("small.toml");
    fs::write(&path, small_spec("small").to_toml().unwrap()).unwrap();
    let mut lines = Vec::new();
    for jobs in ["1", "2"] {
        let out_dir = dir.path().join(format!("bank{jobs}"));
        let out = srirforge(&["--jobs", jobs, "render-srirs", "--spec", p(&path), "--out", p(&out_dir)]);
        assert!(out.status.success(), "{}", stderr(&out));
        lines.push(stdout(&out));
    }
    assert_eq!(lines[0], lines[1]);
    assert!(lines[0].contains("36 entries"));

    let out = srirforge(&["inspect", "--bank", p(&dir.path().join("bank1"))]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("entries     36"));
}

const REF: &str = "0,1,0,30,10\n0,2,1,-90,0\n3,1,0,120,-20\n";

#[test]
fn evaluate_reference_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    let r = dir.path().join("ref.csv");
    fs::write(&r, REF).unwrap();
    let out = srirforge(&["evaluate", "--ref", p(&r), "--pred", p(&r)]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("ER 0.00  F 100.0%  LE 0.0°  LR 100.0%"), "{}", stdout(&out));
}

#[test]
fn evaluate_threshold_only_moves_detection_scores() {
    let dir = tempfile::tempdir().unwrap();
    let r = dir.path().join("ref.csv");
    let q = dir.path().join("pred.csv");
    fs::write(&r, REF).unwrap();
    fs::write(&q, "0,1,0,60,10\n0,2,1,-90,0\n3,1,0,120,-20\n").unwrap();
    let summary = |threshold: &str| {
        let csv = dir.path().join(format!("report{threshold}.csv"));
        let out = srirforge(&["evaluate", "--ref", p(&r), "--pred", p(&q), "--threshold", threshold, "--csv", p(&csv)]);
        assert!(out.status.success());
        srirforge::metrics::SeldScores::from_csv_report(&fs::read_to_string(csv).unwrap()).unwrap()
    };
    let (strict, loose) = (summary("20"), summary("40"));
    assert_eq!(strict.le_cd, loose.le_cd);
    assert_eq!(strict.lr_cd, loose.lr_cd);
    assert!(loose.f20 > strict.f20);
}

#[test]
fn evaluate_malformed_csv_names_line() {
    let dir = tempfile::tempdir().unwrap();
    let r = dir.path().join("ref.csv");
    fs::write(&r, "0,1,0,30,10\n1,1,0,thirty,10\n").unwrap();
    let out = srirforge(&["evaluate", "--ref", p(&r), "--pred", p(&r)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains(":2") || stderr(&out).contains("line 2"), "{}", stderr(&out));
}

#[test]
fn synthesize_needs_nine_rooms() {
    let dir = tempfile::tempdir().unwrap();
    let specs = dir.path().join("specs");
    for i in 0..3 {
        write_bytes(&specs.join(format!("r{i}.toml")), small_spec(&format!("r{i}")).to_toml().unwrap().as_bytes()).unwrap();
    }
    let corpus = dir.path().join("corpus");
    let tone: Vec<f64> = (0..24_000).map(|n| 0.5 * (n as f64 * 0.05).sin()).collect();
    write_bytes(
        &corpus.join("footsteps").join("a.wav"),
        &encode_wav(&[tone], 24_000, WavFormat::Float32).unwrap(),
    )
    .unwrap();
    let out = srirforge(&[
        "synthesize", "--spec-dir", p(&specs), "--corpus", p(&corpus), "--out", p(&dir.path().join("out")), "--seed", "1",
        "--scale", "0.01",
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains('9'), "{}", stderr(&out));
}

#[test]
fn preset_prints_parseable_toml() {
    let out = srirforge(&["preset", "gym"]);
    assert!(out.status.success());
    let spec = RoomSpec::from_toml_str(&stdout(&out)).unwrap();
    assert_eq!(spec.name, "gym");
    let list = srirforge(&["preset", "--list"]);
    assert_eq!(stdout(&list).lines().count(), 9);
}
