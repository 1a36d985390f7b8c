//! From a trained model and a raw series to a smoothed per-sample label
//! track, the detected procedure and per-gesture durations.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::net::UWashModel;
use crate::nn::loss::argmax_classes;
use crate::nn::{NnError, Tensor};
use crate::scoring::NUM_GESTURES;
use crate::signal::{window_starts, SampleSeries, SignalError, NUM_CLASSES};

pub const DEFAULT_INFER_STRIDE: usize = 64;
pub const DEFAULT_FILTER_WINDOW: usize = 128;
pub const DEFAULT_GAP_MERGE: usize = 64;
const INFER_BATCH: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("label track of length {track} for a series of length {series}")]
    LengthMismatch { track: usize, series: usize },
    #[error("unknown smoothing {0:?}; expected none, mtv, tmf or mtv+tmf")]
    Smoothing(String),
    #[error("window predictions do not contain start {0}")]
    MissingWindow(usize),
}

/// Anything that labels every sample of a batch of `(B,3,L)` windows.
pub trait WindowLabeler {
    fn window_length(&self) -> usize;
    /// Returns `B·L` labels in batch-major order.
    fn label_windows(&self, accel: &Tensor, gyro: &Tensor) -> Result<Vec<u8>, NnError>;
}

impl WindowLabeler for UWashModel {
    fn window_length(&self) -> usize {
        self.config().input_length
    }

    fn label_windows(&self, accel: &Tensor, gyro: &Tensor) -> Result<Vec<u8>, NnError> {
        argmax_classes(&self.predict(accel, gyro)?)
    }
}

/// Per-sample labels plus the votes every covering window cast.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelTrack {
    pub labels: Vec<u8>,
    pub votes: Vec<[u32; NUM_CLASSES]>,
}

impl LabelTrack {
    /// A track with no recorded votes.
    pub fn from_labels(labels: Vec<u8>) -> Self {
        let votes = vec![[0; NUM_CLASSES]; labels.len()];
        LabelTrack { labels, votes }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Per-sample predictions of a set of windows over one series.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WindowPredictions {
    series_len: usize,
    length: usize,
    starts: Vec<usize>,
    labels: Vec<u8>,
}

impl WindowPredictions {
    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    pub fn window(&self, k: usize) -> &[u8] {
        &self.labels[k * self.length..][..self.length]
    }

    /// Builds a track from the windows at `starts`, in order. A sample takes
    /// the label of the first listed window that covers it; every window
    /// contributes to the votes.
    fn track_over(&self, starts: impl Iterator<Item = usize>) -> Result<LabelTrack, PipelineError> {
        let mut labels: Vec<Option<u8>> = vec![None; self.series_len];
        let mut votes = vec![[0u32; NUM_CLASSES]; self.series_len];
        for s in starts {
            let k = self
                .starts
                .binary_search(&s)
                .map_err(|_| PipelineError::MissingWindow(s))?;
            for (j, &c) in self.window(k).iter().enumerate() {
                votes[s + j][c as usize] += 1;
                labels[s + j].get_or_insert(c);
            }
        }
        Ok(LabelTrack {
            labels: labels.into_iter().map(|l| l.unwrap_or(0)).collect(),
            votes,
        })
    }

    /// Track over all stored windows.
    pub fn track(&self) -> LabelTrack {
        self.track_over(self.starts.iter().copied())
            .expect("own starts are present")
    }

    /// Track over the subset of windows a `stride` sweep would visit.
    pub fn track_at_stride(&self, stride: usize) -> Result<LabelTrack, PipelineError> {
        let starts = window_starts(self.series_len, self.length, stride)?;
        self.track_over(starts.into_iter().map(|(s, _)| s))
    }
}

/// Runs `model` over every window of a `stride` sweep.
pub fn infer_windows<M: WindowLabeler + ?Sized>(
    model: &M,
    series: &SampleSeries,
    stride: usize,
) -> Result<WindowPredictions, PipelineError> {
    let l = model.window_length();
    let starts: Vec<usize> = window_starts(series.len(), l, stride)?
        .into_iter()
        .map(|(s, _)| s)
        .collect();
    let mut labels = Vec::with_capacity(starts.len() * l);
    for chunk in starts.chunks(INFER_BATCH) {
        let mut accel = Tensor::zeros(&[chunk.len(), 3, l]);
        let mut gyro = Tensor::zeros(&[chunk.len(), 3, l]);
        for (bi, &s) in chunk.iter().enumerate() {
            crate::net::train::fill_window(&mut accel, bi, &series.accel()[s..s + l]);
            crate::net::train::fill_window(&mut gyro, bi, &series.gyro()[s..s + l]);
        }
        labels.extend(model.label_windows(&accel, &gyro)?);
    }
    Ok(WindowPredictions {
        series_len: series.len(),
        length: l,
        starts,
        labels,
    })
}

/// Per-sample labels from a `stride` sweep. With stride equal to the window
/// length each sample has a single covering window except in the end-aligned
/// tail, where the earlier window wins. With stride 1 the votes hold every
/// covering window's output.
pub fn infer_track<M: WindowLabeler + ?Sized>(
    model: &M,
    series: &SampleSeries,
    stride: usize,
) -> Result<LabelTrack, PipelineError> {
    Ok(infer_windows(model, series, stride)?.track())
}

/// Index of the largest count; ties go to the smallest label.
fn mode_of(counts: &[u32; NUM_CLASSES]) -> u8 {
    let mut best = 0;
    for c in 1..NUM_CLASSES {
        if counts[c] > counts[best] {
            best = c;
        }
    }
    best as u8
}

/// Replaces each label by the mode of its votes. Samples without votes keep
/// their label.
pub fn multiple_test_voting(track: &LabelTrack) -> LabelTrack {
    let labels = track
        .labels
        .iter()
        .zip(&track.votes)
        .map(|(&l, v)| if v.iter().all(|&c| c == 0) { l } else { mode_of(v) })
        .collect();
    LabelTrack {
        labels,
        votes: track.votes.clone(),
    }
}

/// Mode over the `window` samples centered on each position, i.e. indices
/// `[i - window/2, i - window/2 + window)` clipped to the series.
pub fn mode_filter_labels(labels: &[u8], window: usize) -> Vec<u8> {
    let n = labels.len();
    let window = window.max(1);
    let back = window / 2;
    let mut counts = [0u32; NUM_CLASSES];
    let (mut lo, mut hi) = (0usize, 0usize);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let want_lo = i.saturating_sub(back);
        let want_hi = (i + window - back).min(n);
        while hi < want_hi {
            counts[labels[hi] as usize] += 1;
            hi += 1;
        }
        while lo < want_lo {
            counts[labels[lo] as usize] -= 1;
            lo += 1;
        }
        out.push(mode_of(&counts));
    }
    out
}

pub fn mode_filter(track: &LabelTrack, window: usize) -> LabelTrack {
    LabelTrack {
        labels: mode_filter_labels(&track.labels, window),
        votes: track.votes.clone(),
    }
}

/// Post-processing applied to a raw track.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Smoothing {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "mtv")]
    Mtv,
    #[serde(rename = "tmf")]
    Tmf,
    #[serde(rename = "mtv+tmf")]
    MtvTmf,
}

impl Smoothing {
    pub const ALL: [Smoothing; 4] = [Smoothing::None, Smoothing::Mtv, Smoothing::Tmf, Smoothing::MtvTmf];

    pub fn name(self) -> &'static str {
        match self {
            Smoothing::None => "none",
            Smoothing::Mtv => "mtv",
            Smoothing::Tmf => "tmf",
            Smoothing::MtvTmf => "mtv+tmf",
        }
    }

    pub fn uses_voting(self) -> bool {
        matches!(self, Smoothing::Mtv | Smoothing::MtvTmf)
    }

    /// Applies this smoothing given stride-1 window predictions. Variants
    /// without voting start from the non-overlapping sweep.
    pub fn apply(
        self,
        windows: &WindowPredictions,
        nonoverlap_stride: usize,
        filter_window: usize,
    ) -> Result<LabelTrack, PipelineError> {
        let base = if self.uses_voting() {
            multiple_test_voting(&windows.track_at_stride(1)?)
        } else {
            windows.track_at_stride(nonoverlap_stride)?
        };
        Ok(match self {
            Smoothing::Tmf | Smoothing::MtvTmf => mode_filter(&base, filter_window),
            _ => base,
        })
    }
}

impl FromStr for Smoothing {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Smoothing::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| PipelineError::Smoothing(s.to_string()))
    }
}

/// Segments `series` with `model` and the given smoothing, using the
/// default window sweep and filter width.
pub fn segment<M: WindowLabeler + ?Sized>(
    model: &M,
    series: &SampleSeries,
    smoothing: Smoothing,
) -> Result<LabelTrack, PipelineError> {
    let stride = if smoothing.uses_voting() {
        1
    } else {
        DEFAULT_INFER_STRIDE
    };
    let windows = infer_windows(model, series, stride)?;
    smoothing.apply(&windows, DEFAULT_INFER_STRIDE, DEFAULT_FILTER_WINDOW)
}

/// Sample span `[start, end)` of a detected handwashing procedure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProcedureSpan {
    pub start: usize,
    pub end: usize,
    pub onset_s: f64,
    pub offset_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Detection {
    NoHandwashing,
    Procedure(ProcedureSpan),
}

impl Detection {
    pub fn span(&self) -> Option<&ProcedureSpan> {
        match self {
            Detection::Procedure(p) => Some(p),
            Detection::NoHandwashing => None,
        }
    }
}

/// Finds the handwashing procedure in a label track. Non-background runs
/// closer than `gap_merge` samples are merged; if several groups remain, the
/// one with the most non-background samples is taken (earliest on ties).
/// Onset is the time of the first sample, offset the end of the last.
pub fn detect_procedure(labels: &[u8], rate_hz: f64, gap_merge: usize) -> Detection {
    // (start, end, non-background count)
    let mut groups: Vec<(usize, usize, usize)> = Vec::new();
    let mut last_end: Option<usize> = None;
    for (i, &l) in labels.iter().enumerate() {
        if l == 0 {
            continue;
        }
        match (groups.last_mut(), last_end) {
            (Some(g), Some(e)) if i - e < gap_merge => {
                g.1 = i + 1;
                g.2 += 1;
            }
            _ => groups.push((i, i + 1, 1)),
        }
        last_end = Some(i + 1);
    }
    let mut best: Option<(usize, usize, usize)> = None;
    for g in groups {
        if best.is_none_or(|b| g.2 > b.2) {
            best = Some(g);
        }
    }
    match best {
        None => Detection::NoHandwashing,
        Some((start, end, _)) => Detection::Procedure(ProcedureSpan {
            start,
            end,
            onset_s: start as f64 / rate_hz,
            offset_s: end as f64 / rate_hz,
        }),
    }
}

/// Sample counts per gesture inside the detected procedure, and everything
/// else as background.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DurationBreakdown {
    pub rate_hz: f64,
    pub gesture_samples: [usize; NUM_GESTURES],
    pub background_samples: usize,
}

impl DurationBreakdown {
    /// `D^e` for G1..G9 in seconds.
    pub fn gesture_durations(&self) -> [f64; NUM_GESTURES] {
        self.gesture_samples.map(|c| c as f64 / self.rate_hz)
    }

    pub fn background_duration(&self) -> f64 {
        self.background_samples as f64 / self.rate_hz
    }

    pub fn total_samples(&self) -> usize {
        self.background_samples + self.gesture_samples.iter().sum::<usize>()
    }
}

pub fn duration_breakdown(labels: &[u8], rate_hz: f64, gap_merge: usize) -> DurationBreakdown {
    let mut gesture_samples = [0usize; NUM_GESTURES];
    if let Detection::Procedure(p) = detect_procedure(labels, rate_hz, gap_merge) {
        for &l in &labels[p.start..p.end] {
            if l > 0 {
                gesture_samples[l as usize - 1] += 1;
            }
        }
    }
    DurationBreakdown {
        rate_hz,
        gesture_samples,
        background_samples: labels.len() - gesture_samples.iter().sum::<usize>(),
    }
}

/// Per-gesture durations with the default run-merging gap.
pub fn gesture_durations(labels: &[u8], rate_hz: f64) -> [f64; NUM_GESTURES] {
    duration_breakdown(labels, rate_hz, DEFAULT_GAP_MERGE).gesture_durations()
}

/// A maximal run of one gesture label.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GestureSegment {
    pub label: u8,
    pub onset_s: f64,
    pub offset_s: f64,
    pub duration_s: f64,
}

pub fn gesture_segments(labels: &[u8], rate_hz: f64) -> Vec<GestureSegment> {
    runs(labels)
        .into_iter()
        .filter(|&(l, _, _)| l > 0)
        .map(|(label, s, e)| GestureSegment {
            label,
            onset_s: s as f64 / rate_hz,
            offset_s: e as f64 / rate_hz,
            duration_s: (e - s) as f64 / rate_hz,
        })
        .collect()
}

/// `(label, start, end)` for each maximal constant run.
fn runs(labels: &[u8]) -> Vec<(u8, usize, usize)> {
    let mut out: Vec<(u8, usize, usize)> = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        match out.last_mut() {
            Some(r) if r.0 == l => r.2 = i + 1,
            _ => out.push((l, i, i + 1)),
        }
    }
    out
}

/// `index,t,predicted,ground_truth` rows.
pub fn track_csv(series: &SampleSeries, predicted: &[u8]) -> Result<String, PipelineError> {
    if predicted.len() != series.len() {
        return Err(PipelineError::LengthMismatch {
            track: predicted.len(),
            series: series.len(),
        });
    }
    let mut s = String::from("index,t,predicted,ground_truth\n");
    for (i, (&p, (&t, &g))) in predicted
        .iter()
        .zip(series.timestamps().iter().zip(series.labels()))
        .enumerate()
    {
        let _ = writeln!(s, "{i},{t},{p},{g}");
    }
    Ok(s)
}

const PALETTE: [&str; NUM_CLASSES] = [
    "#d0d0d0", "#e6194b", "#3cb44b", "#ffe119", "#4363d8", "#f58231", "#911eb4", "#42d4f4",
    "#f032e6", "#9a6324",
];

/// Two-row timeline: prediction on top, ground truth below.
pub fn timeline_svg(predicted: &[u8], ground_truth: &[u8], rate_hz: f64) -> String {
    let n = predicted.len().max(ground_truth.len()).max(1);
    let width = 1000.0;
    let scale = width / n as f64;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"90\" viewBox=\"0 0 {} 90\">\n",
        width + 110.0,
        width + 110.0
    );
    for (row, (name, labels)) in [("predicted", predicted), ("ground truth", ground_truth)]
        .into_iter()
        .enumerate()
    {
        let y = 10 + row * 40;
        let _ = writeln!(s, "<text x=\"0\" y=\"{}\" font-size=\"12\">{name}</text>", y + 20);
        for (l, a, b) in runs(labels) {
            let _ = writeln!(
                s,
                "<rect x=\"{:.3}\" y=\"{y}\" width=\"{:.3}\" height=\"30\" fill=\"{}\"><title>{} {:.2}-{:.2}s</title></rect>",
                110.0 + a as f64 * scale,
                (b - a) as f64 * scale,
                PALETTE[l as usize % NUM_CLASSES],
                if l == 0 { "background".to_string() } else { format!("G{l}") },
                a as f64 / rate_hz,
                b as f64 / rate_hz,
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Constant(u8);

    impl WindowLabeler for Constant {
        fn window_length(&self) -> usize {
            64
        }
        fn label_windows(&self, accel: &Tensor, _: &Tensor) -> Result<Vec<u8>, NnError> {
            Ok(vec![self.0; accel.shape()[0] * 64])
        }
    }

    /// Labels each sample by `(window start + offset) % 10`.
    struct ByStart;

    impl WindowLabeler for ByStart {
        fn window_length(&self) -> usize {
            64
        }
        fn label_windows(&self, accel: &Tensor, _: &Tensor) -> Result<Vec<u8>, NnError> {
            // the accel x channel carries the sample index
            let (b, _, l) = accel.dims3("label_windows")?;
            let mut out = Vec::new();
            for bi in 0..b {
                let start = accel.at3(bi, 0, 0) as usize;
                out.extend((0..l).map(|_| (start % 10) as u8));
            }
            Ok(out)
        }
    }

    fn series(n: usize) -> SampleSeries {
        SampleSeries::new(
            "P01",
            "L1",
            1,
            50.0,
            (0..n).map(|i| i as f64 / 50.0).collect(),
            (0..n).map(|i| [i as f64, 0.0, 0.0]).collect(),
            vec![[0.0; 3]; n],
            vec![0; n],
        )
        .unwrap()
    }

    fn brute_mode(labels: &[u8], window: usize) -> Vec<u8> {
        let n = labels.len() as i64;
        (0..n)
            .map(|i| {
                let lo = (i - (window / 2) as i64).max(0);
                let hi = (i - (window / 2) as i64 + window as i64).min(n);
                let mut counts = [0u32; 10];
                for j in lo..hi {
                    counts[labels[j as usize] as usize] += 1;
                }
                let max = *counts.iter().max().unwrap();
                counts.iter().position(|&c| c == max).unwrap() as u8
            })
            .collect()
    }

    #[test]
    fn constant_model_gives_constant_track() {
        let t = infer_track(&Constant(3), &series(200), 64).unwrap();
        assert!(t.labels.iter().all(|&l| l == 3));
    }

    #[test]
    fn single_window_series() {
        let t = infer_track(&ByStart, &series(64), 64).unwrap();
        assert_eq!(t.labels, vec![0; 64]);
        assert!(t.votes.iter().all(|v| v[0] == 1));
    }

    #[test]
    fn too_short_series_is_an_error() {
        assert!(matches!(
            infer_track(&Constant(1), &series(63), 64),
            Err(PipelineError::Signal(SignalError::WindowTooLong { .. }))
        ));
    }

    #[test]
    fn tail_samples_keep_first_covering_window() {
        // window at 0 and the end-aligned tail at 36
        let t = infer_track(&ByStart, &series(100), 64).unwrap();
        assert_eq!(t.labels[..64], [0; 64]);
        assert_eq!(t.labels[64..], [6; 36]);
        assert_eq!(t.votes[50][6], 1);
    }

    #[test]
    fn stride_one_interior_has_64_votes() {
        let t = infer_track(&Constant(2), &series(300), 1).unwrap();
        let total = |i: usize| t.votes[i].iter().sum::<u32>();
        assert_eq!(total(150), 64);
        assert_eq!(total(0), 1);
        assert_eq!(total(63), 64);
        assert_eq!(total(299), 1);
    }

    #[test]
    fn restricted_track_matches_direct_sweep() {
        let s = series(300);
        let w = infer_windows(&ByStart, &s, 1).unwrap();
        assert_eq!(w.track_at_stride(64).unwrap(), infer_track(&ByStart, &s, 64).unwrap());
    }

    #[test]
    fn voting_examples() {
        let mut v = [0u32; 10];
        v[3] = 40;
        v[0] = 24;
        let mut tie = [0u32; 10];
        tie[2] = 32;
        tie[5] = 32;
        let t = LabelTrack {
            labels: vec![0, 0],
            votes: vec![v, tie],
        };
        assert_eq!(multiple_test_voting(&t).labels, vec![3, 2]);
    }

    #[test]
    fn mode_filter_examples() {
        assert_eq!(mode_filter_labels(&[1, 1, 1, 2, 1, 1], 3), vec![1; 6]);
        assert_eq!(mode_filter_labels(&[4; 10], 128), vec![4; 10]);
        let mut x = vec![5u8; 200];
        x[100] = 7;
        assert_eq!(mode_filter_labels(&x, 128), vec![5; 200]);
    }

    #[test]
    fn mode_filter_matches_brute_force() {
        let mut state = 12345u64;
        for trial in 0..200 {
            let n = 1 + trial % 57;
            let labels: Vec<u8> = (0..n)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    ((state >> 33) % 4) as u8
                })
                .collect();
            for w in [1, 2, 3, 4, 7, 16, 128] {
                assert_eq!(mode_filter_labels(&labels, w), brute_mode(&labels, w));
            }
        }
    }

    #[test]
    fn detection_examples() {
        let mut labels = vec![0u8; 100];
        for g in 1..=9u8 {
            labels.extend(std::iter::repeat_n(g, if g == 1 { 200 } else { 150 }));
        }
        labels.extend([0u8; 100]);
        let d = detect_procedure(&labels, 50.0, 64);
        let p = d.span().unwrap();
        assert_eq!(p.onset_s, 2.0);
        assert_eq!(p.offset_s, (labels.len() - 100) as f64 / 50.0);
        assert_eq!(detect_procedure(&[0; 50], 50.0, 64), Detection::NoHandwashing);

        let mut split = vec![0u8; 20];
        split.extend([2u8; 30]);
        split.extend([0u8; 10]);
        split.extend([3u8; 30]);
        split.extend([0u8; 20]);
        let p = *detect_procedure(&split, 50.0, 64).span().unwrap();
        assert_eq!((p.start, p.end), (20, 90));
    }

    #[test]
    fn largest_group_wins() {
        let mut x = vec![1u8; 10];
        x.extend([0u8; 100]);
        x.extend([2u8; 50]);
        x.extend([0u8; 100]);
        let p = *detect_procedure(&x, 50.0, 64).span().unwrap();
        assert_eq!((p.start, p.end), (110, 160));
    }

    #[test]
    fn duration_examples() {
        let mut x = vec![0u8; 10];
        x.extend([1u8; 245]);
        x.extend([4u8; 100]);
        x.extend([2u8; 5]);
        x.extend([4u8; 50]);
        x.extend([0u8; 10]);
        let d = gesture_durations(&x, 50.0);
        assert_eq!(d[0], 4.9);
        assert_eq!(d[3], 3.0);
        assert_eq!(d[8], 0.0);
        let b = duration_breakdown(&x, 50.0, 64);
        assert_eq!(b.total_samples(), x.len());
        assert_eq!(b.background_samples, 20);
    }

    #[test]
    fn segments_and_exports() {
        let x = [0u8, 0, 3, 3, 3, 0, 5];
        let segs = gesture_segments(&x, 1.0);
        assert_eq!(segs.len(), 2);
        assert_eq!((segs[0].label, segs[0].onset_s, segs[0].offset_s), (3, 2.0, 5.0));
        let s = series(7);
        let csv = track_csv(&s, &x).unwrap();
        assert_eq!(csv.lines().nth(3), Some("2,0.04,3,0"));
        assert!(track_csv(&s, &x[..3]).is_err());
        let svg = timeline_svg(&x, &[0; 7], 50.0);
        assert!(svg.starts_with("<svg") && svg.contains("G3"));
    }

    #[test]
    fn smoothing_names() {
        for m in Smoothing::ALL {
            assert_eq!(m.name().parse::<Smoothing>().unwrap(), m);
        }
        assert!("median".parse::<Smoothing>().is_err());
    }
}
