//! Frame-level feature ingestion and functional summarization.
//!
//! A clip arrives as a frame-indexed matrix of low-level descriptors (LLDs).
//! It can be cut into per-task segments using manually marked timestamps,
//! regrouped by the emotion each task elicits, and finally summarized into a
//! fixed-length vector of ten functionals per descriptor.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

/// Frame-indexed matrix of low-level descriptors for one clip or segment.
#[derive(Debug, Clone, PartialEq)]
pub struct LldSeries {
    frames: Array2<f64>,
    descriptor_names: Vec<String>,
    clip_id: String,
    task_id: Option<u8>,
}

impl LldSeries {
    pub fn new(
        frames: Array2<f64>,
        descriptor_names: Vec<String>,
        clip_id: String,
        task_id: Option<u8>,
    ) -> Result<Self> {
        if descriptor_names.len() != frames.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} descriptor names for {} columns",
                descriptor_names.len(),
                frames.ncols()
            )));
        }
        if frames.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParam(
                "LLD series contains non-finite values".into(),
            ));
        }
        if let Some(t) = task_id {
            validate_task_id(t)?;
        }
        Ok(Self {
            frames,
            descriptor_names,
            clip_id,
            task_id,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn n_descriptors(&self) -> usize {
        self.frames.ncols()
    }

    pub fn frames(&self) -> &Array2<f64> {
        &self.frames
    }

    pub fn descriptor_names(&self) -> &[String] {
        &self.descriptor_names
    }

    pub fn clip_id(&self) -> &str {
        &self.clip_id
    }

    pub fn task_id(&self) -> Option<u8> {
        self.task_id
    }
}

fn validate_task_id(t: u8) -> Result<()> {
    if !(1..=7).contains(&t) {
        return Err(Error::InvalidParam(format!("task id {t} outside 1..=7")));
    }
    Ok(())
}

/// Half-open frame interval of one task within a clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskSpan {
    pub task_id: u8,
    pub start_frame: usize,
    pub end_frame: usize,
}

/// Manually marked task boundaries for one clip. Absent task ids mean the
/// task was skipped during the session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskTimestamps {
    clip_id: String,
    entries: Vec<TaskSpan>,
}

impl TaskTimestamps {
    pub fn new(clip_id: String, entries: Vec<TaskSpan>) -> Result<Self> {
        let mut prev: Option<&TaskSpan> = None;
        for span in &entries {
            validate_task_id(span.task_id)?;
            if span.start_frame >= span.end_frame {
                return Err(Error::InvalidParam(format!(
                    "task {} interval [{}, {}) is empty or reversed",
                    span.task_id, span.start_frame, span.end_frame
                )));
            }
            if let Some(p) = prev {
                if span.task_id <= p.task_id {
                    return Err(Error::InvalidParam(format!(
                        "task ids must be strictly increasing ({} after {})",
                        span.task_id, p.task_id
                    )));
                }
                if span.start_frame < p.end_frame {
                    return Err(Error::InvalidParam(format!(
                        "task {} overlaps task {}",
                        span.task_id, p.task_id
                    )));
                }
            }
            prev = Some(span);
        }
        Ok(Self { clip_id, entries })
    }

    pub fn clip_id(&self) -> &str {
        &self.clip_id
    }

    pub fn entries(&self) -> &[TaskSpan] {
        &self.entries
    }
}

/// Fixed-length summary vector with `<descriptor>_<functional>` names.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub names: Vec<String>,
}

/// Emotion elicited by a task group: tasks 1-3 negative, 4-5 neutral,
/// 6-7 positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EmotionGroup {
    Negative,
    Neutral,
    Positive,
}

impl EmotionGroup {
    pub fn of_task(task_id: u8) -> Result<Self> {
        match task_id {
            1..=3 => Ok(EmotionGroup::Negative),
            4 | 5 => Ok(EmotionGroup::Neutral),
            6 | 7 => Ok(EmotionGroup::Positive),
            other => Err(Error::InvalidParam(format!("task id {other} outside 1..=7"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            EmotionGroup::Negative => "negative",
            EmotionGroup::Neutral => "neutral",
            EmotionGroup::Positive => "positive",
        }
    }
}

impl fmt::Display for EmotionGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Loads a frame-level LLD table: one header row of descriptor names, then
/// one comma-separated row of finite decimal values per frame.
pub fn load_lld_csv(path: &Path) -> Result<LldSeries> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: display.clone(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();

    let header = match lines.next() {
        Some((_, line)) => line.map_err(|source| Error::Io {
            path: display.clone(),
            source,
        })?,
        None => {
            return Err(Error::Parse {
                path: display,
                line: 1,
                message: "empty file".into(),
            })
        }
    };
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if names.iter().any(|n| n.is_empty()) {
        return Err(Error::Parse {
            path: display,
            line: 1,
            message: "empty descriptor name in header".into(),
        });
    }
    let d = names.len();

    let mut data: Vec<f64> = Vec::new();
    let mut n_frames = 0usize;
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.map_err(|source| Error::Io {
            path: display.clone(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != d {
            return Err(Error::Parse {
                path: display,
                line: line_no,
                message: format!("expected {d} values, found {}", cells.len()),
            });
        }
        for cell in cells {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                path: display.clone(),
                line: line_no,
                message: format!("non-numeric value {:?}", cell.trim()),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: display.clone(),
                    line: line_no,
                    message: format!("non-finite value {:?}", cell.trim()),
                });
            }
            data.push(v);
        }
        n_frames += 1;
    }
    if n_frames == 0 {
        return Err(Error::EmptyInput(format!("no frames in {display}")));
    }

    let frames = Array2::from_shape_vec((n_frames, d), data)
        .expect("row-major frame data matches the declared shape");
    let clip_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    LldSeries::new(frames, names, clip_id, None)
}

/// Loads task timestamps (`clip_id,task_id,start_frame,end_frame` rows),
/// grouped per clip in file order.
pub fn load_task_timestamps_csv(path: &Path) -> Result<Vec<TaskTimestamps>> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: display.clone(),
        source,
    })?;
    let reader = BufReader::new(file);

    let mut per_clip: Vec<(String, Vec<TaskSpan>)> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| Error::Io {
            path: display.clone(),
            source,
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if line_no == 1 && trimmed.starts_with("clip_id") {
            continue;
        }
        let cells: Vec<&str> = trimmed.split(',').collect();
        if cells.len() != 4 {
            return Err(Error::Parse {
                path: display,
                line: line_no,
                message: format!("expected 4 columns, found {}", cells.len()),
            });
        }
        let parse_usize = |s: &str, what: &str| -> Result<usize> {
            s.trim().parse().map_err(|_| Error::Parse {
                path: display.clone(),
                line: line_no,
                message: format!("invalid {what} {:?}", s.trim()),
            })
        };
        let clip = cells[0].trim().to_string();
        let task_id = parse_usize(cells[1], "task id")? as u8;
        let span = TaskSpan {
            task_id,
            start_frame: parse_usize(cells[2], "start frame")?,
            end_frame: parse_usize(cells[3], "end frame")?,
        };
        match per_clip.last_mut() {
            Some((c, spans)) if *c == clip => spans.push(span),
            _ => per_clip.push((clip, vec![span])),
        }
    }

    per_clip
        .into_iter()
        .map(|(clip, spans)| TaskTimestamps::new(clip, spans))
        .collect()
}

/// Cuts a clip series into one sub-series per timestamp entry; frames outside
/// every interval are dropped.
pub fn segment_tasks(series: &LldSeries, ts: &TaskTimestamps) -> Result<Vec<LldSeries>> {
    let f = series.n_frames();
    let mut out = Vec::with_capacity(ts.entries().len());
    for span in ts.entries() {
        if span.end_frame > f {
            return Err(Error::IntervalOutOfBounds {
                start: span.start_frame,
                end: span.end_frame,
                frames: f,
            });
        }
        let frames = series
            .frames
            .slice(ndarray::s![span.start_frame..span.end_frame, ..])
            .to_owned();
        out.push(LldSeries {
            frames,
            descriptor_names: series.descriptor_names.clone(),
            clip_id: series.clip_id.clone(),
            task_id: Some(span.task_id),
        });
    }
    Ok(out)
}

/// Row-concatenates task series into emotion groups. A group whose tasks are
/// all missing is absent from the map; a group with some tasks missing is
/// built from the remaining ones.
pub fn group_tasks_by_emotion(
    tasks: &[LldSeries],
) -> Result<BTreeMap<EmotionGroup, LldSeries>> {
    let mut grouped: BTreeMap<EmotionGroup, Vec<&LldSeries>> = BTreeMap::new();
    for series in tasks {
        let task_id = series.task_id.ok_or_else(|| {
            Error::InvalidParam(format!(
                "series for clip {:?} has no task id",
                series.clip_id
            ))
        })?;
        if let Some(first) = tasks.first() {
            if series.descriptor_names != first.descriptor_names {
                return Err(Error::DimensionMismatch(
                    "task series disagree on descriptor names".into(),
                ));
            }
        }
        grouped
            .entry(EmotionGroup::of_task(task_id)?)
            .or_default()
            .push(series);
    }

    let mut out = BTreeMap::new();
    for (group, mut members) in grouped {
        members.sort_by_key(|s| s.task_id);
        let total: usize = members.iter().map(|s| s.n_frames()).sum();
        let d = members[0].n_descriptors();
        let mut frames = Array2::<f64>::zeros((total, d));
        let mut offset = 0;
        for m in &members {
            frames
                .slice_mut(ndarray::s![offset..offset + m.n_frames(), ..])
                .assign(&m.frames);
            offset += m.n_frames();
        }
        out.insert(
            group,
            LldSeries {
                frames,
                descriptor_names: members[0].descriptor_names.clone(),
                clip_id: members[0].clip_id.clone(),
                task_id: None,
            },
        );
    }
    Ok(out)
}

/// The ten functionals, in output order.
pub const BD10_FUNCTIONALS: [&str; 10] = [
    "mean",
    "std",
    "curvature",
    "slope",
    "offset",
    "min",
    "min_relpos",
    "max",
    "max_relpos",
    "range",
];

/// Summarizes a series into ten functionals per descriptor.
///
/// Per descriptor contour, over normalized time `t_i = i/(F-1)`:
/// population standard deviation, degree-1 least-squares slope and offset,
/// the degree-2 coefficient of the quadratic fit (curvature, 0 when F < 3),
/// extrema with their relative positions (first occurrence on ties), and the
/// max-min range.
pub fn summarize_bd10(series: &LldSeries) -> Result<FeatureVector> {
    let f = series.n_frames();
    if f == 0 {
        return Err(Error::EmptyInput(format!(
            "series {:?} has no frames",
            series.clip_id
        )));
    }
    let d = series.n_descriptors();
    let mut values = Vec::with_capacity(d * 10);
    let mut names = Vec::with_capacity(d * 10);
    for (j, name) in series.descriptor_names.iter().enumerate() {
        let column = series.frames.index_axis(Axis(1), j);
        values.extend_from_slice(&functionals_of(column));
        for func in BD10_FUNCTIONALS {
            names.push(format!("{name}_{func}"));
        }
    }
    Ok(FeatureVector { values, names })
}

fn functionals_of(y: ArrayView1<'_, f64>) -> [f64; 10] {
    let f = y.len();
    let n = f as f64;
    let mean = y.sum() / n;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();

    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut min_idx = 0usize;
    let mut max_idx = 0usize;
    for (i, &v) in y.iter().enumerate() {
        if v < min {
            min = v;
            min_idx = i;
        }
        if v > max {
            max = v;
            max_idx = i;
        }
    }
    let denom = if f > 1 { (f - 1) as f64 } else { 1.0 };
    let min_relpos = min_idx as f64 / denom;
    let max_relpos = max_idx as f64 / denom;

    let t = |i: usize| -> f64 {
        if f > 1 {
            i as f64 / (f - 1) as f64
        } else {
            0.0
        }
    };

    // Degree-1 fit y = slope*t + offset.
    let (slope, offset) = if f > 1 {
        let t_mean = (0..f).map(t).sum::<f64>() / n;
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &v) in y.iter().enumerate() {
            let dt = t(i) - t_mean;
            num += dt * (v - mean);
            den += dt * dt;
        }
        let slope = num / den;
        (slope, mean - slope * t_mean)
    } else {
        (0.0, y[0])
    };

    // Degree-2 fit y = c2*t^2 + c1*t + c0; curvature is c2.
    let curvature = if f >= 3 { quadratic_coefficient(y, t) } else { 0.0 };

    [
        mean,
        std,
        curvature,
        slope,
        offset,
        min,
        min_relpos,
        max,
        max_relpos,
        max - min,
    ]
}

/// Leading coefficient of the least-squares quadratic through (t_i, y_i),
/// solved from the 3x3 normal equations with partial pivoting.
fn quadratic_coefficient(y: ArrayView1<'_, f64>, t: impl Fn(usize) -> f64) -> f64 {
    let f = y.len();
    // Power sums s_k = sum t^k and moment sums m_k = sum t^k y.
    let mut s = [0.0f64; 5];
    let mut m = [0.0f64; 3];
    for i in 0..f {
        let ti = t(i);
        let mut p = 1.0;
        for k in 0..5 {
            s[k] += p;
            if k < 3 {
                m[k] += p * y[i];
            }
            p *= ti;
        }
    }
    // Normal equations in (c0, c1, c2).
    let mut a = [
        [s[0], s[1], s[2], m[0]],
        [s[1], s[2], s[3], m[1]],
        [s[2], s[3], s[4], m[2]],
    ];
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        if a[col][col].abs() < 1e-300 {
            return 0.0;
        }
        for row in (col + 1)..3 {
            let k = a[row][col] / a[col][col];
            for x in col..4 {
                a[row][x] -= k * a[col][x];
            }
        }
    }
    let mut c = [0.0f64; 3];
    for row in (0..3).rev() {
        let mut v = a[row][3];
        for x in (row + 1)..3 {
            v -= a[row][x] * c[x];
        }
        c[row] = v / a[row][row];
    }
    c[2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::io::Write;

    fn series(frames: Array2<f64>, names: &[&str]) -> LldSeries {
        LldSeries::new(
            frames,
            names.iter().map(|s| s.to_string()).collect(),
            "clip".into(),
            None,
        )
        .unwrap()
    }

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_lld_csv_reads_two_by_two() {
        let f = write_temp("a,b\n1,2\n3,4\n");
        let s = load_lld_csv(f.path()).unwrap();
        assert_eq!(s.n_frames(), 2);
        assert_eq!(s.descriptor_names(), ["a", "b"]);
        assert_eq!(s.frames(), &array![[1.0, 2.0], [3.0, 4.0]]);
    }

    #[test]
    fn load_lld_csv_rejects_header_only() {
        let f = write_temp("a,b\n");
        let err = load_lld_csv(f.path()).unwrap_err();
        assert!(err.to_string().contains("no frames"), "{err}");
    }

    #[test]
    fn load_lld_csv_reports_bad_line() {
        let f = write_temp("a,b\n1,2\n1,x\n");
        let err = load_lld_csv(f.path()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn load_lld_csv_rejects_nan() {
        let f = write_temp("a\nNaN\n");
        assert!(load_lld_csv(f.path()).is_err());
        let f = write_temp("a\ninf\n");
        assert!(load_lld_csv(f.path()).is_err());
    }

    #[test]
    fn load_lld_csv_rejects_wrong_arity() {
        let f = write_temp("a,b\n1\n");
        match load_lld_csv(f.path()).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other}"),
        }
    }

    fn ten_frame_series() -> LldSeries {
        let frames = Array2::from_shape_fn((10, 2), |(i, j)| (i * 2 + j) as f64);
        series(frames, &["a", "b"])
    }

    #[test]
    fn segment_tasks_partitions_frames() {
        let s = ten_frame_series();
        let ts = TaskTimestamps::new(
            "clip".into(),
            vec![
                TaskSpan { task_id: 1, start_frame: 0, end_frame: 4 },
                TaskSpan { task_id: 2, start_frame: 4, end_frame: 10 },
            ],
        )
        .unwrap();
        let parts = segment_tasks(&s, &ts).unwrap();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].n_frames(), 4);
        assert_eq!(parts[1].n_frames(), 6);
        assert_eq!(parts[0].task_id(), Some(1));
        assert_eq!(parts[1].task_id(), Some(2));
    }

    #[test]
    fn segment_tasks_single_interval() {
        let s = ten_frame_series();
        let ts = TaskTimestamps::new(
            "clip".into(),
            vec![TaskSpan { task_id: 3, start_frame: 2, end_frame: 5 }],
        )
        .unwrap();
        let parts = segment_tasks(&s, &ts).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].n_frames(), 3);
        assert_eq!(parts[0].task_id(), Some(3));
    }

    #[test]
    fn segment_tasks_bounds_error() {
        let s = ten_frame_series();
        let ts = TaskTimestamps::new(
            "clip".into(),
            vec![TaskSpan { task_id: 1, start_frame: 8, end_frame: 12 }],
        )
        .unwrap();
        assert!(matches!(
            segment_tasks(&s, &ts),
            Err(Error::IntervalOutOfBounds { .. })
        ));
    }

    #[test]
    fn segment_then_concat_reproduces_covered_frames() {
        let s = ten_frame_series();
        let ts = TaskTimestamps::new(
            "clip".into(),
            vec![
                TaskSpan { task_id: 1, start_frame: 1, end_frame: 3 },
                TaskSpan { task_id: 2, start_frame: 5, end_frame: 8 },
            ],
        )
        .unwrap();
        let parts = segment_tasks(&s, &ts).unwrap();
        let mut rows: Vec<f64> = Vec::new();
        for p in &parts {
            rows.extend(p.frames().iter());
        }
        let mut expected: Vec<f64> = Vec::new();
        for span in ts.entries() {
            expected.extend(
                s.frames()
                    .slice(ndarray::s![span.start_frame..span.end_frame, ..])
                    .iter(),
            );
        }
        assert_eq!(rows, expected);
    }

    fn task(frames: usize, id: u8) -> LldSeries {
        LldSeries::new(
            Array2::from_elem((frames, 1), id as f64),
            vec!["x".into()],
            "clip".into(),
            Some(id),
        )
        .unwrap()
    }

    #[test]
    fn group_all_tasks_present() {
        let tasks: Vec<LldSeries> = (1..=7).map(|i| task(i as usize + 2, i)).collect();
        let groups = group_tasks_by_emotion(&tasks).unwrap();
        assert_eq!(groups.len(), 3);
        assert_eq!(groups[&EmotionGroup::Negative].n_frames(), 3 + 4 + 5);
        assert_eq!(groups[&EmotionGroup::Neutral].n_frames(), 6 + 7);
        assert_eq!(groups[&EmotionGroup::Positive].n_frames(), 8 + 9);
    }

    #[test]
    fn group_with_missing_tasks_uses_remaining() {
        let tasks = vec![task(4, 1), task(6, 3)];
        let groups = group_tasks_by_emotion(&tasks).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[&EmotionGroup::Negative].n_frames(), 10);
    }

    #[test]
    fn group_empty_input_is_empty_map() {
        assert!(group_tasks_by_emotion(&[]).unwrap().is_empty());
    }

    #[test]
    fn group_rejects_mismatched_descriptors() {
        let a = task(3, 1);
        let b = LldSeries::new(
            Array2::zeros((3, 1)),
            vec!["y".into()],
            "clip".into(),
            Some(2),
        )
        .unwrap();
        assert!(group_tasks_by_emotion(&[a, b]).is_err());
    }

    #[test]
    fn bd10_linear_contour() {
        let s = series(array![[1.0], [2.0], [3.0]], &["v"]);
        let fv = summarize_bd10(&s).unwrap();
        let get = |func: &str| fv.values[fv.names.iter().position(|n| n == &format!("v_{func}")).unwrap()];
        assert_eq!(get("mean"), 2.0);
        assert_eq!(get("range"), 2.0);
        assert_eq!(get("min_relpos"), 0.0);
        assert_eq!(get("max_relpos"), 1.0);
        assert!(get("curvature").abs() < 1e-9, "linear data has no curvature");
        // Fit over t = 0, 0.5, 1: y = 2t + 1.
        assert!((get("slope") - 2.0).abs() < 1e-12);
        assert!((get("offset") - 1.0).abs() < 1e-12);
        assert!((get("std") - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn bd10_dimensions_match_descriptor_counts() {
        for d in [23, 39, 76] {
            let frames = Array2::from_shape_fn((5, d), |(i, j)| (i + j) as f64);
            let names: Vec<&str> = (0..d).map(|_| "x").collect();
            let s = LldSeries::new(
                frames,
                names.iter().enumerate().map(|(i, _)| format!("x{i}")).collect(),
                "clip".into(),
                None,
            )
            .unwrap();
            let fv = summarize_bd10(&s).unwrap();
            assert_eq!(fv.values.len(), 10 * d);
            assert_eq!(fv.names.len(), 10 * d);
        }
    }

    #[test]
    fn bd10_constant_series() {
        let s = series(Array2::from_elem((6, 1), 4.25), &["v"]);
        let fv = summarize_bd10(&s).unwrap();
        let get = |func: &str| fv.values[fv.names.iter().position(|n| n == &format!("v_{func}")).unwrap()];
        assert_eq!(get("std"), 0.0);
        assert_eq!(get("slope"), 0.0);
        assert!(get("curvature").abs() < 1e-12);
        assert_eq!(get("range"), 0.0);
        assert_eq!(get("mean"), 4.25);
        assert_eq!(get("min"), 4.25);
        assert_eq!(get("max"), 4.25);
    }

    #[test]
    fn bd10_single_frame() {
        let s = series(array![[7.0]], &["v"]);
        let fv = summarize_bd10(&s).unwrap();
        assert_eq!(fv.values, vec![7.0, 0.0, 0.0, 0.0, 7.0, 7.0, 0.0, 7.0, 0.0, 0.0]);
    }

    #[test]
    fn bd10_quadratic_contour_recovers_leading_coefficient() {
        // y = t^2 exactly over five points; curvature must be 1.
        let f = 5usize;
        let frames = Array2::from_shape_fn((f, 1), |(i, _)| {
            let t = i as f64 / (f - 1) as f64;
            t * t
        });
        let s = series(frames, &["v"]);
        let fv = summarize_bd10(&s).unwrap();
        let c = fv.values[fv.names.iter().position(|n| n == "v_curvature").unwrap()];
        assert!((c - 1.0).abs() < 1e-9, "curvature {c}");
    }

    #[test]
    fn bd10_ties_take_first_occurrence() {
        let s = series(array![[2.0], [1.0], [1.0], [2.0]], &["v"]);
        let fv = summarize_bd10(&s).unwrap();
        let get = |func: &str| fv.values[fv.names.iter().position(|n| n == &format!("v_{func}")).unwrap()];
        assert_eq!(get("min_relpos"), 1.0 / 3.0);
        assert_eq!(get("max_relpos"), 0.0);
    }

    #[test]
    fn timestamps_reject_overlap_and_order() {
        assert!(TaskTimestamps::new(
            "c".into(),
            vec![
                TaskSpan { task_id: 1, start_frame: 0, end_frame: 5 },
                TaskSpan { task_id: 2, start_frame: 4, end_frame: 8 },
            ],
        )
        .is_err());
        assert!(TaskTimestamps::new(
            "c".into(),
            vec![
                TaskSpan { task_id: 2, start_frame: 0, end_frame: 2 },
                TaskSpan { task_id: 1, start_frame: 2, end_frame: 4 },
            ],
        )
        .is_err());
        assert!(TaskTimestamps::new(
            "c".into(),
            vec![TaskSpan { task_id: 1, start_frame: 3, end_frame: 3 }],
        )
        .is_err());
    }

    #[test]
    fn timestamps_csv_round_trip() {
        let f = write_temp("clip_id,task_id,start_frame,end_frame\nc1,1,0,4\nc1,2,4,9\nc2,3,0,5\n");
        let all = load_task_timestamps_csv(f.path()).unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(all[0].clip_id(), "c1");
        assert_eq!(all[0].entries().len(), 2);
        assert_eq!(all[1].entries()[0].task_id, 3);
    }
}
