//! Joint localization-detection scores: ER and macro F with a spatial
//! threshold, class-dependent localization error and recall.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Direction, Vec3};
use crate::mixer::corpus::NUM_CLASSES;
use crate::mixer::AnnotationRow;

pub const DEFAULT_THRESHOLD: f64 = 20.0;

/// Minimum-cost assignment for a rectangular cost matrix (rows × cols).
/// Returns `min(rows, cols)` (row, col) pairs sorted by row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let n = cost.len();
    let m = cost.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return Vec::new();
    }
    if n > m {
        let transposed: Vec<Vec<f64>> = (0..m).map(|j| (0..n).map(|i| cost[i][j]).collect()).collect();
        let mut pairs: Vec<_> = hungarian(&transposed).into_iter().map(|(j, i)| (i, j)).collect();
        pairs.sort_unstable();
        return pairs;
    }
    // Shortest augmenting paths with row/column potentials, 1-based with a
    // virtual column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut row_of = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut pairs: Vec<_> = (1..=m)
        .filter(|&j| row_of[j] != 0)
        .map(|j| (row_of[j] - 1, j - 1))
        .collect();
    pairs.sort_unstable();
    pairs
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameEvent {
    pub frame: usize,
    pub class_id: u8,
    pub doa: Vec3,
}

impl FrameEvent {
    pub fn from_row(row: &AnnotationRow) -> Self {
        FrameEvent {
            frame: row.frame,
            class_id: row.class_id,
            doa: Direction::new(row.azimuth as f64, row.elevation as f64).unit_vector(),
        }
    }
}

/// Angle between two unit vectors, degrees.
pub fn angle_between(a: Vec3, b: Vec3) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos().to_degrees()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameMatch {
    /// (ref index, pred index, angular error in degrees).
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_refs: Vec<usize>,
    pub unmatched_preds: Vec<usize>,
}

/// Per-class minimum-total-angle assignment between one frame's events.
pub fn match_frame(refs: &[FrameEvent], preds: &[FrameEvent]) -> FrameMatch {
    let mut classes: Vec<u8> = refs.iter().chain(preds).map(|e| e.class_id).collect();
    classes.sort_unstable();
    classes.dedup();
    let mut out = FrameMatch::default();
    for c in classes {
        let r: Vec<usize> = (0..refs.len()).filter(|&i| refs[i].class_id == c).collect();
        let p: Vec<usize> = (0..preds.len()).filter(|&i| preds[i].class_id == c).collect();
        let cost: Vec<Vec<f64>> = r
            .iter()
            .map(|&i| p.iter().map(|&j| angle_between(refs[i].doa, preds[j].doa)).collect())
            .collect();
        let assigned = hungarian(&cost);
        let mut ref_used = vec![false; r.len()];
        let mut pred_used = vec![false; p.len()];
        for (a, b) in assigned {
            ref_used[a] = true;
            pred_used[b] = true;
            out.pairs.push((r[a], p[b], cost[a][b]));
        }
        out.unmatched_refs
            .extend(r.iter().zip(&ref_used).filter(|(_, &u)| !u).map(|(&i, _)| i));
        out.unmatched_preds
            .extend(p.iter().zip(&pred_used).filter(|(_, &u)| !u).map(|(&j, _)| j));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    pub threshold: f64,
    /// Frames pooled per scoring segment; 1 scores frame by frame. Larger
    /// values average each (class, source) track's DoA within the segment.
    pub segment_frames: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            threshold: DEFAULT_THRESHOLD,
            segment_frames: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub refs: usize,
    pub matched: usize,
    pub sum_error: f64,
}

impl ClassCounts {
    pub fn f20(&self) -> f64 {
        let d = 2 * self.tp + self.fp + self.fn_;
        if d == 0 {
            0.0
        } else {
            2.0 * self.tp as f64 / d as f64
        }
    }

    pub fn le(&self) -> Option<f64> {
        (self.matched > 0).then(|| self.sum_error / self.matched as f64)
    }

    pub fn lr(&self) -> f64 {
        if self.refs == 0 {
            0.0
        } else {
            self.matched as f64 / self.refs as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeldScores {
    pub threshold: f64,
    pub er20: f64,
    pub f20: f64,
    /// `None` when no class-matched pair exists.
    pub le_cd: Option<f64>,
    pub lr_cd: f64,
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub n_ref: usize,
    pub per_class: BTreeMap<u8, ClassCounts>,
}

/// Running totals across frames (and files) before the final averages.
#[derive(Debug, Clone, Default)]
pub struct ScoreAccumulator {
    config: MetricsConfig,
    s: usize,
    d: usize,
    i: usize,
    n: usize,
    per_class: BTreeMap<u8, ClassCounts>,
}

fn pool_segment(rows: &[AnnotationRow], segment_frames: usize) -> BTreeMap<usize, Vec<FrameEvent>> {
    let mut out: BTreeMap<usize, Vec<FrameEvent>> = BTreeMap::new();
    if segment_frames <= 1 {
        for r in rows {
            out.entry(r.frame).or_default().push(FrameEvent::from_row(r));
        }
        return out;
    }
    let mut tracks: BTreeMap<(usize, u8, usize), Vec3> = BTreeMap::new();
    for r in rows {
        let seg = r.frame / segment_frames;
        let doa = FrameEvent::from_row(r).doa;
        *tracks.entry((seg, r.class_id, r.source)).or_insert(Vec3::ZERO) += doa;
    }
    for ((seg, class_id, _), sum) in tracks {
        out.entry(seg).or_default().push(FrameEvent {
            frame: seg,
            class_id,
            doa: sum.normalized().unwrap_or(Vec3::new(1.0, 0.0, 0.0)),
        });
    }
    out
}

impl ScoreAccumulator {
    pub fn new(config: MetricsConfig) -> Self {
        ScoreAccumulator {
            config,
            ..Default::default()
        }
    }

    /// Scores one reference/prediction pair sharing a frame grid.
    pub fn add(&mut self, reference: &[AnnotationRow], prediction: &[AnnotationRow]) {
        let refs = pool_segment(reference, self.config.segment_frames);
        let preds = pool_segment(prediction, self.config.segment_frames);
        let mut frames: Vec<usize> = refs.keys().chain(preds.keys()).copied().collect();
        frames.sort_unstable();
        frames.dedup();
        let empty = Vec::new();
        for f in frames {
            let r = refs.get(&f).unwrap_or(&empty);
            let p = preds.get(&f).unwrap_or(&empty);
            self.add_frame(r, p);
        }
    }

    pub fn add_frame(&mut self, refs: &[FrameEvent], preds: &[FrameEvent]) {
        let m = match_frame(refs, preds);
        let (mut fp, mut fn_) = (0usize, 0usize);
        for e in refs {
            self.per_class.entry(e.class_id).or_default().refs += 1;
        }
        for &(ri, _, err) in &m.pairs {
            let c = self.per_class.entry(refs[ri].class_id).or_default();
            c.matched += 1;
            c.sum_error += err;
            if err <= self.config.threshold {
                c.tp += 1;
            } else {
                c.fp += 1;
                c.fn_ += 1;
                fp += 1;
                fn_ += 1;
            }
        }
        for &ri in &m.unmatched_refs {
            self.per_class.entry(refs[ri].class_id).or_default().fn_ += 1;
            fn_ += 1;
        }
        for &pi in &m.unmatched_preds {
            self.per_class.entry(preds[pi].class_id).or_default().fp += 1;
            fp += 1;
        }
        self.s += fp.min(fn_);
        self.d += fn_.saturating_sub(fp);
        self.i += fp.saturating_sub(fn_);
        self.n += refs.len();
    }

    pub fn finish(self) -> Result<SeldScores> {
        if self.n == 0 {
            return Err(Error::UndefinedMetrics);
        }
        let present: Vec<&ClassCounts> = self.per_class.values().filter(|c| c.refs > 0).collect();
        let mean = |xs: Vec<f64>| xs.iter().sum::<f64>() / xs.len() as f64;
        let les: Vec<f64> = present.iter().filter_map(|c| c.le()).collect();
        Ok(SeldScores {
            threshold: self.config.threshold,
            er20: (self.s + self.d + self.i) as f64 / self.n as f64,
            f20: mean(present.iter().map(|c| c.f20()).collect()),
            le_cd: (!les.is_empty()).then(|| mean(les)),
            lr_cd: mean(present.iter().map(|c| c.lr()).collect()),
            substitutions: self.s,
            deletions: self.d,
            insertions: self.i,
            n_ref: self.n,
            per_class: self.per_class,
        })
    }
}

pub fn compute_scores(
    reference: &[AnnotationRow],
    prediction: &[AnnotationRow],
    config: MetricsConfig,
) -> Result<SeldScores> {
    let mut acc = ScoreAccumulator::new(config);
    acc.add(reference, prediction);
    acc.finish()
}

/// Parses `frame,class,source,azimuth,elevation` rows; a leading header line
/// starting with `frame` is skipped.
pub fn parse_annotations(text: &str, path: &Path) -> Result<Vec<AnnotationRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("frame")) {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(err(format!("expected 5 fields, found {}", fields.len())));
        }
        let int = |k: usize| -> Result<i64> {
            fields[k]
                .parse::<i64>()
                .map_err(|_| err(format!("field {} ({:?}) is not an integer", k + 1, fields[k])))
        };
        let (frame, class, source, az, el) = (int(0)?, int(1)?, int(2)?, int(3)?, int(4)?);
        if frame < 0 || source < 0 {
            return Err(err("negative frame or source index".into()));
        }
        if !(0..NUM_CLASSES as i64).contains(&class) {
            return Err(err(format!("class {class} outside 0..{NUM_CLASSES}")));
        }
        if !(-180..=180).contains(&az) || !(-90..=90).contains(&el) {
            return Err(err(format!("DoA ({az}, {el}) out of range")));
        }
        rows.push(AnnotationRow {
            frame: frame as usize,
            class_id: class as u8,
            source: source as usize,
            azimuth: az as i32,
            elevation: el as i32,
        });
    }
    Ok(rows)
}

pub fn read_annotations(path: &Path) -> Result<Vec<AnnotationRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(&text, path)
}

fn pct(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

fn le_text(le: Option<f64>) -> String {
    le.map_or("n/a".into(), |v| format!("{v:.1}°"))
}

impl SeldScores {
    /// `ER 0.00  F 100.0%  LE 0.0°  LR 100.0%`
    pub fn summary_line(&self) -> String {
        format!(
            "ER {:.2}  F {}  LE {}  LR {}",
            self.er20,
            pct(self.f20),
            le_text(self.le_cd),
            pct(self.lr_cd)
        )
    }

    /// Summary line plus a per-class table (F, LE, LR and raw counts).
    pub fn text_report(&self) -> String {
        let mut s = self.summary_line();
        s.push_str("\n\nclass      F       LE      LR     TP    FP    FN  refs\n");
        for (c, k) in &self.per_class {
            let _ = writeln!(
                s,
                "{c:>5} {:>6} {:>8} {:>7} {:>6} {:>5} {:>5} {:>5}",
                pct(k.f20()),
                le_text(k.le()),
                pct(k.lr()),
                k.tp,
                k.fp,
                k.fn_,
                k.refs
            );
        }
        s
    }

    pub fn csv_report(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        let mut s = String::from(
            "scope,threshold,er20,f20,le_cd,lr_cd,substitutions,deletions,insertions,n_ref,tp,fp,fn,matched,sum_error_deg\n",
        );
        let _ = writeln!(
            s,
            "all,{},{},{},{},{},{},{},{},{},,,,,",
            self.threshold,
            self.er20,
            self.f20,
            opt(self.le_cd),
            self.lr_cd,
            self.substitutions,
            self.deletions,
            self.insertions,
            self.n_ref
        );
        for (c, k) in &self.per_class {
            let _ = writeln!(
                s,
                "{c},,,{},{},{},,,,{},{},{},{},{},{}",
                k.f20(),
                opt(k.le()),
                k.lr(),
                k.refs,
                k.tp,
                k.fp,
                k.fn_,
                k.matched,
                k.sum_error
            );
        }
        s
    }

    pub fn from_csv_report(text: &str) -> Result<SeldScores> {
        let path = Path::new("<report>");
        let err = |line: usize, msg: &str| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: msg.into(),
        };
        let mut lines = text.lines().enumerate().skip(1);
        let (ln, all) = lines.next().ok_or_else(|| err(2, "missing summary row"))?;
        let f: Vec<&str> = all.split(',').collect();
        if f.len() != 15 || f[0] != "all" {
            return Err(err(ln + 1, "malformed summary row"));
        }
        let num = |s: &str, line: usize| s.parse::<f64>().map_err(|_| err(line, "bad number"));
        let int = |s: &str, line: usize| s.parse::<usize>().map_err(|_| err(line, "bad integer"));
        let mut scores = SeldScores {
            threshold: num(f[1], ln + 1)?,
            er20: num(f[2], ln + 1)?,
            f20: num(f[3], ln + 1)?,
            le_cd: if f[4].is_empty() { None } else { Some(num(f[4], ln + 1)?) },
            lr_cd: num(f[5], ln + 1)?,
            substitutions: int(f[6], ln + 1)?,
            deletions: int(f[7], ln + 1)?,
            insertions: int(f[8], ln + 1)?,
            n_ref: int(f[9], ln + 1)?,
            per_class: BTreeMap::new(),
        };
        for (ln, row) in lines {
            let f: Vec<&str> = row.split(',').collect();
            if f.len() != 15 {
                return Err(err(ln + 1, "malformed class row"));
            }
            let class: u8 = f[0].parse().map_err(|_| err(ln + 1, "bad class id"))?;
            scores.per_class.insert(
                class,
                ClassCounts {
                    refs: int(f[9], ln + 1)?,
                    tp: int(f[10], ln + 1)?,
                    fp: int(f[11], ln + 1)?,
                    fn_: int(f[12], ln + 1)?,
                    matched: int(f[13], ln + 1)?,
                    sum_error: num(f[14], ln + 1)?,
                },
            );
        }
        Ok(scores)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn row(frame: usize, class_id: u8, source: usize, azimuth: i32, elevation: i32) -> AnnotationRow {
        AnnotationRow {
            frame,
            class_id,
            source,
            azimuth,
            elevation,
        }
    }

    fn ev(class_id: u8, az: f64) -> FrameEvent {
        FrameEvent {
            frame: 0,
            class_id,
            doa: Direction::new(az, 0.0).unit_vector(),
        }
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for k in 0..=p.len() {
                let mut q = p.clone();
                q.insert(k, n - 1);
                out.push(q);
            }
        }
        out
    }

    /// Best total over every injective map from the smaller side.
    fn exhaustive(cost: &[Vec<f64>]) -> f64 {
        let (n, m) = (cost.len(), cost.first().map_or(0, Vec::len));
        if n == 0 || m == 0 {
            return 0.0;
        }
        let k = n.min(m);
        let big = n.max(m);
        let mut best = f64::INFINITY;
        for perm in permutations(big) {
            let total: f64 = (0..k)
                .map(|i| if n <= m { cost[i][perm[i]] } else { cost[perm[i]][i] })
                .sum();
            best = best.min(total);
        }
        best
    }

    #[test]
    fn crossing_assignment() {
        let m = match_frame(&[ev(0, 0.0), ev(0, 90.0)], &[ev(0, 85.0), ev(0, 5.0)]);
        let mut pairs: Vec<_> = m.pairs.iter().map(|&(r, p, _)| (r, p)).collect();
        pairs.sort();
        assert_eq!(pairs, vec![(0, 1), (1, 0)]);
        let total: f64 = m.pairs.iter().map(|p| p.2).sum();
        assert!((total - 10.0).abs() < 1e-9);
    }

    #[test]
    fn forced_and_disjoint_matches() {
        let m = match_frame(&[ev(2, 10.0)], &[ev(2, 40.0)]);
        assert_eq!(m.pairs.len(), 1);
        assert!((m.pairs[0].2 - 30.0).abs() < 1e-9);
        let m = match_frame(&[ev(1, 0.0), ev(1, 50.0)], &[ev(3, 0.0)]);
        assert!(m.pairs.is_empty());
        assert_eq!((m.unmatched_refs.len(), m.unmatched_preds.len()), (2, 1));
    }

    #[test]
    fn hungarian_matches_exhaustive_search() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let n = rng.random_range(0..=3);
            let m = rng.random_range(0..=3);
            let cost: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..m).map(|_| rng.random_range(0.0..180.0)).collect())
                .collect();
            let pairs = hungarian(&cost);
            assert_eq!(pairs.len(), n.min(m));
            let total: f64 = pairs.iter().map(|&(i, j)| cost[i][j]).sum();
            assert!((total - exhaustive(&cost)).abs() < 1e-9);
        }
    }

    #[test]
    fn hungarian_larger_rectangles() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for (n, m) in [(5, 7), (7, 5), (6, 6)] {
            let cost: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..m).map(|_| rng.random_range(0.0..10.0)).collect())
                .collect();
            let total: f64 = hungarian(&cost).iter().map(|&(i, j)| cost[i][j]).sum();
            assert!((total - exhaustive(&cost)).abs() < 1e-9);
        }
    }

    #[test]
    fn perfect_prediction() {
        let r = vec![row(0, 1, 0, 30, 10), row(0, 2, 1, -90, 0), row(5, 1, 0, 170, -20)];
        let s = compute_scores(&r, &r, MetricsConfig::default()).unwrap();
        assert_eq!((s.er20, s.f20, s.le_cd, s.lr_cd), (0.0, 1.0, Some(0.0), 1.0));
        assert_eq!(s.summary_line(), "ER 0.00  F 100.0%  LE 0.0°  LR 100.0%");
    }

    #[test]
    fn empty_prediction() {
        let r = vec![row(0, 1, 0, 30, 10), row(1, 4, 0, 0, 0)];
        let s = compute_scores(&r, &[], MetricsConfig::default()).unwrap();
        assert_eq!((s.er20, s.f20, s.le_cd, s.lr_cd), (1.0, 0.0, None, 0.0));
        assert_eq!(s.deletions, 2);
        assert!(s.summary_line().contains("LE n/a"));
    }

    #[test]
    fn one_pair_thirty_degrees() {
        let s = compute_scores(&[row(0, 3, 0, 0, 0)], &[row(0, 3, 0, 30, 0)], MetricsConfig::default()).unwrap();
        let c = s.per_class[&3];
        assert_eq!((c.tp, c.fp, c.fn_), (0, 1, 1));
        assert_eq!(s.f20, 0.0);
        assert!((s.le_cd.unwrap() - 30.0).abs() < 1e-9);
        assert_eq!(s.lr_cd, 1.0);
        assert_eq!((s.substitutions, s.er20), (1, 1.0));
    }

    #[test]
    fn empty_reference_is_undefined() {
        let err = compute_scores(&[], &[row(0, 0, 0, 0, 0)], MetricsConfig::default()).unwrap_err();
        assert!(matches!(err, Error::UndefinedMetrics));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn absent_classes_excluded_from_macro_but_count_in_er() {
        let r = vec![row(0, 1, 0, 0, 0)];
        let p = vec![row(0, 1, 0, 0, 0), row(0, 7, 1, 0, 0)];
        let s = compute_scores(&r, &p, MetricsConfig::default()).unwrap();
        assert_eq!(s.f20, 1.0);
        assert_eq!(s.er20, 1.0);
    }

    #[test]
    fn segment_pooling_averages_tracks() {
        let r: Vec<_> = (0..10).map(|f| row(f, 0, 0, 0, 0)).collect();
        let p: Vec<_> = (0..10).map(|f| row(f, 0, 0, if f % 2 == 0 { 30 } else { -30 }, 0)).collect();
        let frame = compute_scores(&r, &p, MetricsConfig::default()).unwrap();
        assert_eq!(frame.f20, 0.0);
        let seg = compute_scores(&r, &p, MetricsConfig { segment_frames: 10, ..Default::default() }).unwrap();
        assert_eq!(seg.n_ref, 1);
        assert_eq!(seg.f20, 1.0);
    }

    #[test]
    fn csv_parse_errors_carry_line_numbers() {
        let p = Path::new("ref.csv");
        assert_eq!(parse_annotations("frame,class,source,azimuth,elevation\n1,2,0,10,5\n", p).unwrap().len(), 1);
        match parse_annotations("1,2,0,10,5\n1,2,x,10,5\n", p) {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(parse_annotations("1,2,0,10\n", p).is_err());
        assert!(parse_annotations("1,13,0,10,0\n", p).is_err());
        assert!(parse_annotations("1,1,0,10,91\n", p).is_err());
    }

    fn arb_rows() -> impl Strategy<Value = Vec<AnnotationRow>> {
        prop::collection::vec((0usize..6, 0u8..4, 0usize..3, -180i32..180, -60i32..60), 1..25).prop_map(|v| {
            v.into_iter().map(|(f, c, s, a, e)| row(f, c, s, a, e)).collect()
        })
    }

    proptest! {
        #[test]
        fn permutation_invariant(r in arb_rows(), p in arb_rows(), seed in any::<u64>()) {
            let base = compute_scores(&r, &p, MetricsConfig::default()).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let (mut r2, mut p2) = (r.clone(), p.clone());
            use rand::seq::SliceRandom;
            r2.shuffle(&mut rng);
            p2.shuffle(&mut rng);
            let other = compute_scores(&r2, &p2, MetricsConfig::default()).unwrap();
            prop_assert!((base.er20 - other.er20).abs() < 1e-12);
            prop_assert!((base.f20 - other.f20).abs() < 1e-12);
            prop_assert!((base.lr_cd - other.lr_cd).abs() < 1e-12);
            match (base.le_cd, other.le_cd) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-9),
                (a, b) => prop_assert_eq!(a, b),
            }
        }

        #[test]
        fn spurious_prediction_is_monotone(r in arb_rows(), p in arb_rows(), frame in 0usize..6, az in -180i32..180) {
            let base = compute_scores(&r, &p, MetricsConfig::default()).unwrap();
            let taken: Vec<u8> = r.iter().filter(|x| x.frame == frame).map(|x| x.class_id).collect();
            let class = (0u8..13).find(|c| !taken.contains(c)).unwrap();
            let mut p2 = p.clone();
            p2.push(row(frame, class, 9, az, 0));
            let more = compute_scores(&r, &p2, MetricsConfig::default()).unwrap();
            prop_assert!(more.er20 >= base.er20 - 1e-12);
            prop_assert!(more.f20 <= base.f20 + 1e-12);
        }

        #[test]
        fn cd_metrics_ignore_threshold(r in arb_rows(), p in arb_rows()) {
            let a = compute_scores(&r, &p, MetricsConfig { threshold: 20.0, ..Default::default() }).unwrap();
            let b = compute_scores(&r, &p, MetricsConfig { threshold: 40.0, ..Default::default() }).unwrap();
            prop_assert_eq!(a.le_cd, b.le_cd);
            prop_assert_eq!(a.lr_cd, b.lr_cd);
        }

        #[test]
        fn f_bounded_by_matches(r in arb_rows(), p in arb_rows()) {
            let s = compute_scores(&r, &p, MetricsConfig::default()).unwrap();
            let mut preds: BTreeMap<u8, usize> = BTreeMap::new();
            for x in &p {
                *preds.entry(x.class_id).or_default() += 1;
            }
            for (c, k) in &s.per_class {
                let n_pred = preds.get(c).copied().unwrap_or(0);
                if k.refs + n_pred > 0 {
                    prop_assert!(k.f20() <= 2.0 * k.matched as f64 / (k.refs + n_pred) as f64 + 1e-12);
                }
                prop_assert!(k.le().is_none_or(|le| (0.0..=180.0).contains(&le)));
            }
        }

        #[test]
        fn csv_report_round_trip(r in arb_rows(), p in arb_rows()) {
            let s = compute_scores(&r, &p, MetricsConfig::default()).unwrap();
            prop_assert_eq!(SeldScores::from_csv_report(&s.csv_report()).unwrap(), s);
        }
    }
}
