//! Labeled IMU recordings, their CSV form, and sliding windows over them.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Nominal smartwatch sampling rate.
pub const DEFAULT_RATE_HZ: f64 = 50.0;
/// Number of label classes: background plus nine gestures.
pub const NUM_CLASSES: usize = 10;
pub const CSV_HEADER: &str = "t,ax,ay,az,gx,gy,gz,label";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("empty file: no header")]
    Empty,
    #[error("line 1: header must be `{CSV_HEADER}`, found {0:?}")]
    Header(String),
    #[error("line {line}: expected 8 columns, found {found}")]
    ColumnCount { line: usize, found: usize },
    #[error("line {line}: column `{column}` is not a number: {text:?}")]
    Number {
        line: usize,
        column: &'static str,
        text: String,
    },
    #[error("line {line}: timestamp is not strictly increasing")]
    NonMonotone { line: usize },
    #[error("line {line}: label {label} outside 0..9")]
    LabelRange { line: usize, label: i64 },
    #[error("no data rows")]
    NoRows,
    #[error("series fields have different lengths (t {t}, accel {accel}, gyro {gyro}, label {label})")]
    LengthMismatch {
        t: usize,
        accel: usize,
        gyro: usize,
        label: usize,
    },
    #[error("sample {index}: {reason}")]
    Invalid { index: usize, reason: String },
    #[error("window length {length} exceeds series length {series}")]
    WindowTooLong { length: usize, series: usize },
    #[error("invalid window parameters: {0}")]
    WindowParams(String),
    #[error("file name {0:?} does not match <location>_<participant>_<procedure>.csv")]
    FileName(String),
}

/// One recording with per-sample labels and its identity within a corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSeries {
    pub participant_id: String,
    pub location_id: String,
    pub procedure_id: u32,
    rate_hz: f64,
    t: Vec<f64>,
    accel: Vec<[f64; 3]>,
    gyro: Vec<[f64; 3]>,
    label: Vec<u8>,
}

impl SampleSeries {
    pub fn new(
        participant_id: impl Into<String>,
        location_id: impl Into<String>,
        procedure_id: u32,
        rate_hz: f64,
        t: Vec<f64>,
        accel: Vec<[f64; 3]>,
        gyro: Vec<[f64; 3]>,
        label: Vec<u8>,
    ) -> Result<Self, SignalError> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(SignalError::Invalid {
                index: 0,
                reason: format!("rate {rate_hz} Hz is not positive"),
            });
        }
        let n = t.len();
        if accel.len() != n || gyro.len() != n || label.len() != n {
            return Err(SignalError::LengthMismatch {
                t: n,
                accel: accel.len(),
                gyro: gyro.len(),
                label: label.len(),
            });
        }
        if n == 0 {
            return Err(SignalError::NoRows);
        }
        for i in 0..n {
            if let Some(&l) = label.get(i).filter(|&&l| l as usize >= NUM_CLASSES) {
                return Err(SignalError::Invalid {
                    index: i,
                    reason: format!("label {l} outside 0..9"),
                });
            }
            if i > 0 && !(t[i] > t[i - 1]) {
                return Err(SignalError::Invalid {
                    index: i,
                    reason: "timestamp is not strictly increasing".into(),
                });
            }
            if !accel[i].iter().chain(&gyro[i]).chain(&[t[i]]).all(|v| v.is_finite()) {
                return Err(SignalError::Invalid {
                    index: i,
                    reason: "non-finite value".into(),
                });
            }
        }
        Ok(SampleSeries {
            participant_id: participant_id.into(),
            location_id: location_id.into(),
            procedure_id,
            rate_hz,
            t,
            accel,
            gyro,
            label,
        })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.t
    }

    pub fn accel(&self) -> &[[f64; 3]] {
        &self.accel
    }

    pub fn gyro(&self) -> &[[f64; 3]] {
        &self.gyro
    }

    pub fn labels(&self) -> &[u8] {
        &self.label
    }

    /// Duration covered by the samples, `len / rate`.
    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.rate_hz
    }

    /// `<location>_<participant>_<procedure>.csv`
    pub fn file_name(&self) -> String {
        format!(
            "{}_{}_{}.csv",
            self.location_id, self.participant_id, self.procedure_id
        )
    }
}

/// A fixed-length view into a series.
#[derive(Clone, Copy, Debug)]
pub struct Window<'a> {
    pub source: &'a SampleSeries,
    pub start_index: usize,
    pub length: usize,
    /// Appended to reach the series end when the stride grid falls short.
    pub tail: bool,
}

impl<'a> Window<'a> {
    pub fn accel_slice(&self) -> &'a [[f64; 3]] {
        &self.source.accel[self.start_index..self.start_index + self.length]
    }

    pub fn gyro_slice(&self) -> &'a [[f64; 3]] {
        &self.source.gyro[self.start_index..self.start_index + self.length]
    }

    pub fn label_slice(&self) -> &'a [u8] {
        &self.source.label[self.start_index..self.start_index + self.length]
    }
}

/// Start indices `0, stride, 2·stride, …` that fit in `n` samples; when the
/// last one stops short of the end and `stride > 1`, an end-aligned start is
/// appended and flagged as tail.
pub fn window_starts(
    n: usize,
    length: usize,
    stride: usize,
) -> Result<Vec<(usize, bool)>, SignalError> {
    if length == 0 || stride == 0 {
        return Err(SignalError::WindowParams(format!(
            "length {length} and stride {stride} must both be ≥ 1"
        )));
    }
    if length > n {
        return Err(SignalError::WindowTooLong { length, series: n });
    }
    let mut starts: Vec<(usize, bool)> = (0..=n - length).step_by(stride).map(|s| (s, false)).collect();
    let last = starts.last().map(|&(s, _)| s).unwrap_or(0);
    if stride > 1 && last + length < n {
        starts.push((n - length, true));
    }
    Ok(starts)
}

pub fn extract_windows(
    series: &SampleSeries,
    length: usize,
    stride: usize,
) -> Result<Vec<Window<'_>>, SignalError> {
    Ok(window_starts(series.len(), length, stride)?
        .into_iter()
        .map(|(start_index, tail)| Window {
            source: series,
            start_index,
            length,
            tail,
        })
        .collect())
}

const COLUMNS: [&str; 8] = ["t", "ax", "ay", "az", "gx", "gy", "gz", "label"];

/// Parses CSV text; identity fields are supplied by the caller.
pub fn parse_csv(
    text: &str,
    participant_id: &str,
    location_id: &str,
    procedure_id: u32,
    rate_hz: f64,
) -> Result<SampleSeries, SignalError> {
    let mut lines = text.lines().enumerate();
    let header = lines.next().ok_or(SignalError::Empty)?.1;
    if header.trim().trim_start_matches('\u{feff}') != CSV_HEADER {
        return Err(SignalError::Header(header.to_string()));
    }
    let mut t = Vec::new();
    let mut accel = Vec::new();
    let mut gyro = Vec::new();
    let mut label = Vec::new();
    for (i, raw) in lines {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = raw.split(',').map(str::trim).collect();
        if cols.len() != 8 {
            return Err(SignalError::ColumnCount {
                line,
                found: cols.len(),
            });
        }
        let mut vals = [0.0; 7];
        for (k, v) in vals.iter_mut().enumerate() {
            *v = cols[k]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| SignalError::Number {
                    line,
                    column: COLUMNS[k],
                    text: cols[k].to_string(),
                })?;
        }
        let lab: i64 = cols[7].parse().map_err(|_| SignalError::Number {
            line,
            column: "label",
            text: cols[7].to_string(),
        })?;
        if !(0..NUM_CLASSES as i64).contains(&lab) {
            return Err(SignalError::LabelRange { line, label: lab });
        }
        if t.last().is_some_and(|&prev| !(vals[0] > prev)) {
            return Err(SignalError::NonMonotone { line });
        }
        t.push(vals[0]);
        accel.push([vals[1], vals[2], vals[3]]);
        gyro.push([vals[4], vals[5], vals[6]]);
        label.push(lab as u8);
    }
    if t.is_empty() {
        return Err(SignalError::NoRows);
    }
    SampleSeries::new(participant_id, location_id, procedure_id, rate_hz, t, accel, gyro, label)
}

/// Splits `<location>_<participant>_<procedure>.csv` into its parts.
pub fn parse_file_name(name: &str) -> Result<(String, String, u32), SignalError> {
    let bad = || SignalError::FileName(name.to_string());
    let stem = name.strip_suffix(".csv").ok_or_else(bad)?;
    let parts: Vec<&str> = stem.split('_').collect();
    match parts[..] {
        [loc, part, proc_] if !loc.is_empty() && !part.is_empty() => {
            Ok((loc.to_string(), part.to_string(), proc_.parse().map_err(|_| bad())?))
        }
        _ => Err(bad()),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> SignalError {
    SignalError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Loads one CSV file. Identity comes from the file name when it follows
/// the corpus naming scheme, otherwise from the stem alone.
pub fn load_csv(path: &Path) -> Result<SampleSeries, SignalError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    let (loc, part, proc_) = parse_file_name(name).unwrap_or_else(|_| {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("series");
        ("unknown".to_string(), stem.to_string(), 0)
    });
    parse_csv(&text, &part, &loc, proc_, DEFAULT_RATE_HZ)
}

pub fn to_csv(series: &SampleSeries) -> String {
    let mut out = String::with_capacity(series.len() * 64);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for i in 0..series.len() {
        let [ax, ay, az] = series.accel[i];
        let [gx, gy, gz] = series.gyro[i];
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            series.t[i], ax, ay, az, gx, gy, gz, series.label[i]
        );
    }
    out
}

pub fn write_csv(series: &SampleSeries, path: &Path) -> Result<(), SignalError> {
    fs::write(path, to_csv(series)).map_err(|e| io_err(path, e))
}

/// Loads every `*.csv` in `dir` that follows the corpus naming scheme,
/// sorted by file name.
pub fn load_dir(dir: &Path) -> Result<Vec<SampleSeries>, SignalError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    paths.sort();
    let mut out = Vec::with_capacity(paths.len());
    for p in paths {
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let (loc, part, proc_) = parse_file_name(name)?;
        let text = fs::read_to_string(&p).map_err(|e| io_err(&p, e))?;
        out.push(parse_csv(&text, &part, &loc, proc_, DEFAULT_RATE_HZ)?);
    }
    Ok(out)
}

pub fn write_dir(series: &[SampleSeries], dir: &Path) -> Result<(), SignalError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    for s in series {
        write_csv(s, &dir.join(s.file_name()))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_rows(n: usize) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for i in 0..n {
            s.push_str(&format!("{},{},0,9.8,0.1,0.2,0.3,{}\n", i as f64 * 0.02, i, i % 10));
        }
        s
    }

    fn series(n: usize) -> SampleSeries {
        parse_csv(&csv_rows(n), "P01", "L1", 1, 50.0).unwrap()
    }

    #[test]
    fn valid_file_of_64_rows() {
        assert_eq!(series(64).len(), 64);
    }

    #[test]
    fn label_out_of_range_names_the_line() {
        let text = csv_rows(10).replacen(",9.8,0.1,0.2,0.3,5\n", ",9.8,0.1,0.2,0.3,10\n", 1);
        // row index 5 is on file line 7 (header is line 1)
        assert_eq!(
            parse_csv(&text, "p", "l", 1, 50.0),
            Err(SignalError::LabelRange { line: 7, label: 10 })
        );
    }

    #[test]
    fn duplicate_timestamp_is_non_monotone() {
        let text = format!("{CSV_HEADER}\n0,0,0,0,0,0,0,0\n0.02,0,0,0,0,0,0,0\n0.02,0,0,0,0,0,0,0\n");
        assert_eq!(
            parse_csv(&text, "p", "l", 1, 50.0),
            Err(SignalError::NonMonotone { line: 4 })
        );
    }

    #[test]
    fn malformed_and_empty_inputs() {
        assert_eq!(parse_csv("", "p", "l", 1, 50.0), Err(SignalError::Empty));
        assert_eq!(
            parse_csv(&format!("{CSV_HEADER}\n"), "p", "l", 1, 50.0),
            Err(SignalError::NoRows)
        );
        let text = format!("{CSV_HEADER}\n0,0,0,0,0,0,0\n");
        assert_eq!(
            parse_csv(&text, "p", "l", 1, 50.0),
            Err(SignalError::ColumnCount { line: 2, found: 7 })
        );
        assert!(matches!(
            parse_csv("a,b\n", "p", "l", 1, 50.0),
            Err(SignalError::Header(_))
        ));
        let text = format!("{CSV_HEADER}\n0,x,0,0,0,0,0,0\n");
        assert!(matches!(
            parse_csv(&text, "p", "l", 1, 50.0),
            Err(SignalError::Number { line: 2, column: "ax", .. })
        ));
    }

    #[test]
    fn window_counts() {
        assert_eq!(extract_windows(&series(128), 64, 1).unwrap().len(), 65);
        assert_eq!(extract_windows(&series(64), 64, 64).unwrap().len(), 1);
        let s = series(100);
        let w = extract_windows(&s, 64, 64).unwrap();
        let starts: Vec<_> = w.iter().map(|w| (w.start_index, w.tail)).collect();
        assert_eq!(starts, vec![(0, false), (36, true)]);
        assert!(matches!(
            extract_windows(&series(10), 64, 1),
            Err(SignalError::WindowTooLong { length: 64, series: 10 })
        ));
    }

    #[test]
    fn window_slices_line_up() {
        let s = series(70);
        let w = &extract_windows(&s, 64, 64).unwrap()[1];
        assert_eq!(w.start_index, 6);
        assert_eq!(w.label_slice()[0], 6);
        assert_eq!(w.accel_slice()[0][0], 6.0);
        assert_eq!(w.gyro_slice().len(), 64);
    }

    #[test]
    fn file_names() {
        assert_eq!(
            parse_file_name("L2_P07_3.csv").unwrap(),
            ("L2".to_string(), "P07".to_string(), 3)
        );
        assert!(parse_file_name("bad.csv").is_err());
        assert!(parse_file_name("a_b_c.csv").is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let s = series(50);
        let back = parse_csv(&to_csv(&s), "P01", "L1", 1, 50.0).unwrap();
        assert_eq!(back, s);
    }
}
