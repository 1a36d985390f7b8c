//! Accuracy, precision/recall/F1, confusion matrices, onset/offset and
//! scoring errors, and the train/test split protocols.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::net::{train, ArchConfig, ModelError, TrainConfig, TrainError, UWashModel, WindowDataset};
use crate::par;
use crate::pipeline::{
    detect_procedure, duration_breakdown, infer_windows, PipelineError, Smoothing, DEFAULT_FILTER_WINDOW,
    DEFAULT_GAP_MERGE, DEFAULT_INFER_STRIDE,
};
use crate::scoring::{score, score_error, ProfessionalDurations, ScoringError};
use crate::signal::{SampleSeries, NUM_CLASSES};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{context}: {predicted} predictions for {truth} ground-truth labels")]
    LengthMismatch {
        context: String,
        predicted: usize,
        truth: usize,
    },
    #[error("no samples to evaluate")]
    Empty,
    #[error("split: {0}")]
    Split(String),
    #[error("participant {participant} has {found} procedures, expected 5")]
    ProcedureCount { participant: String, found: usize },
    #[error("fold {fold}: train and test share {what}")]
    Overlap { fold: String, what: String },
    #[error("unknown split {0:?}; expected user-dep, lopo or lolo")]
    UnknownSplit(String),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

fn check_len(context: &str, predicted: &[u8], truth: &[u8]) -> Result<(), EvalError> {
    if predicted.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            context: context.to_string(),
            predicted: predicted.len(),
            truth: truth.len(),
        });
    }
    Ok(())
}

fn correct(predicted: &[u8], truth: &[u8]) -> usize {
    predicted.iter().zip(truth).filter(|(p, t)| p == t).count()
}

/// Correct samples over all samples, pooled across every `(predicted,
/// truth)` pair.
pub fn accuracy_global(pairs: &[(&[u8], &[u8])]) -> Result<f64, EvalError> {
    let (mut hits, mut total) = (0usize, 0usize);
    for (i, (p, t)) in pairs.iter().enumerate() {
        check_len(&format!("series {i}"), p, t)?;
        hits += correct(p, t);
        total += t.len();
    }
    if total == 0 {
        return Err(EvalError::Empty);
    }
    Ok(hits as f64 / total as f64)
}

/// Accuracy over one participant's test samples.
pub fn accuracy_per_participant(predicted: &[u8], truth: &[u8]) -> Result<f64, EvalError> {
    accuracy_global(&[(predicted, truth)])
}

/// Rows are ground truth, columns predictions.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn add(&mut self, predicted: &[u8], truth: &[u8]) -> Result<(), EvalError> {
        check_len("confusion", predicted, truth)?;
        for (&p, &t) in predicted.iter().zip(truth) {
            self.counts[t as usize][p as usize] += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (r, o) in self.counts.iter_mut().zip(&other.counts) {
            for (a, b) in r.iter_mut().zip(o) {
                *a += b;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|c| self.counts[c][c]).sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn column_sum(&self, c: usize) -> u64 {
        self.counts.iter().map(|r| r[c]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.trace() as f64 / self.total() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("truth");
        for c in 0..NUM_CLASSES {
            let _ = write!(s, ",pred_{c}");
        }
        s.push('\n');
        for (t, row) in self.counts.iter().enumerate() {
            let _ = write!(s, "{t}");
            for v in row {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// No sample was predicted as this class; precision reported as 0.
    pub precision_undefined: bool,
    /// No sample of this class exists; recall reported as 0.
    pub recall_undefined: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrfReport {
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    /// Mean of the per-class F1 values.
    pub macro_f1: f64,
}

pub fn prf_from_confusion(cm: &ConfusionMatrix) -> PrfReport {
    let ratio = |num: u64, den: u64| if den == 0 { (0.0, true) } else { (num as f64 / den as f64, false) };
    let per_class: Vec<ClassMetrics> = (0..NUM_CLASSES)
        .map(|c| {
            let tp = cm.counts[c][c];
            let (precision, precision_undefined) = ratio(tp, cm.column_sum(c));
            let (recall, recall_undefined) = ratio(tp, cm.row_sum(c));
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                precision,
                recall,
                f1,
                precision_undefined,
                recall_undefined,
            }
        })
        .collect();
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / NUM_CLASSES as f64;
    PrfReport {
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        per_class,
    }
}

pub fn prf_confusion(predicted: &[u8], truth: &[u8]) -> Result<(ConfusionMatrix, PrfReport), EvalError> {
    let mut cm = ConfusionMatrix::default();
    cm.add(predicted, truth)?;
    let prf = prf_from_confusion(&cm);
    Ok((cm, prf))
}

/// Mean and population standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

pub fn mean_sd(values: &[f64]) -> Option<MeanSd> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some(MeanSd {
        mean,
        sd: var.sqrt(),
        n: values.len(),
    })
}

/// `(|t_s* − t_s|, |t_e* − t_e|)`, or `None` when either side detected no
/// procedure.
pub fn onset_offset_error(predicted: &[u8], truth: &[u8], rate_hz: f64, gap_merge: usize) -> Option<(f64, f64)> {
    let p = *detect_procedure(predicted, rate_hz, gap_merge).span()?;
    let t = *detect_procedure(truth, rate_hz, gap_merge).span()?;
    Some(((p.onset_s - t.onset_s).abs(), (p.offset_s - t.offset_s).abs()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SplitKind {
    #[serde(rename = "user-dep")]
    UserDependent,
    #[serde(rename = "lopo")]
    LeaveOneParticipantOut,
    #[serde(rename = "lolo")]
    LeaveOneLocationOut,
}

impl SplitKind {
    pub fn name(self) -> &'static str {
        match self {
            SplitKind::UserDependent => "user-dep",
            SplitKind::LeaveOneParticipantOut => "lopo",
            SplitKind::LeaveOneLocationOut => "lolo",
        }
    }
}

impl FromStr for SplitKind {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "user-dep" => Ok(SplitKind::UserDependent),
            "lopo" => Ok(SplitKind::LeaveOneParticipantOut),
            "lolo" => Ok(SplitKind::LeaveOneLocationOut),
            _ => Err(EvalError::UnknownSplit(s.to_string())),
        }
    }
}

/// Train and test series, as indices into the corpus.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Fold {
    pub name: String,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SplitPlan {
    pub kind: SplitKind,
    pub folds: Vec<Fold>,
}

fn group_by<'a>(corpus: &'a [SampleSeries], key: impl Fn(&'a SampleSeries) -> &'a str) -> BTreeMap<&'a str, Vec<usize>> {
    let mut m: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in corpus.iter().enumerate() {
        m.entry(key(s)).or_default().push(i);
    }
    m
}

/// Builds the folds of `kind`. Every fold is checked for train/test
/// disjointness in series and, for the leave-one-out kinds, in the held-out
/// attribute.
pub fn make_split(corpus: &[SampleSeries], kind: SplitKind) -> Result<SplitPlan, EvalError> {
    if corpus.is_empty() {
        return Err(EvalError::Empty);
    }
    let folds = match kind {
        SplitKind::UserDependent => {
            let (mut train, mut test) = (Vec::new(), Vec::new());
            for (p, mut ids) in group_by(corpus, |s| &s.participant_id) {
                if ids.len() != 5 {
                    return Err(EvalError::ProcedureCount {
                        participant: p.to_string(),
                        found: ids.len(),
                    });
                }
                ids.sort_by_key(|&i| corpus[i].procedure_id);
                test.push(ids.pop().expect("five ids"));
                train.extend(ids);
            }
            train.sort_unstable();
            test.sort_unstable();
            vec![Fold {
                name: "user-dep".into(),
                train,
                test,
            }]
        }
        SplitKind::LeaveOneParticipantOut | SplitKind::LeaveOneLocationOut => {
            let key = |s: &SampleSeries| -> String {
                if kind == SplitKind::LeaveOneParticipantOut {
                    s.participant_id.clone()
                } else {
                    s.location_id.clone()
                }
            };
            let groups: BTreeSet<String> = corpus.iter().map(key).collect();
            if groups.len() < 2 {
                return Err(EvalError::Split(format!(
                    "{} needs at least two groups, found {}",
                    kind.name(),
                    groups.len()
                )));
            }
            groups
                .into_iter()
                .map(|g| {
                    let (test, train): (Vec<usize>, Vec<usize>) = (0..corpus.len()).partition(|&i| key(&corpus[i]) == g);
                    Fold { name: g, train, test }
                })
                .collect()
        }
    };
    let plan = SplitPlan { kind, folds };
    check_disjoint(corpus, &plan)?;
    Ok(plan)
}

fn check_disjoint(corpus: &[SampleSeries], plan: &SplitPlan) -> Result<(), EvalError> {
    for f in &plan.folds {
        let train: BTreeSet<usize> = f.train.iter().copied().collect();
        if let Some(i) = f.test.iter().find(|i| train.contains(i)) {
            return Err(EvalError::Overlap {
                fold: f.name.clone(),
                what: format!("series {}", corpus[*i].file_name()),
            });
        }
        let attr = |s: &SampleSeries| match plan.kind {
            SplitKind::UserDependent => None,
            SplitKind::LeaveOneParticipantOut => Some(s.participant_id.clone()),
            SplitKind::LeaveOneLocationOut => Some(s.location_id.clone()),
        };
        let held: BTreeSet<String> = f.test.iter().filter_map(|&i| attr(&corpus[i])).collect();
        if let Some(a) = f.train.iter().filter_map(|&i| attr(&corpus[i])).find(|a| held.contains(a)) {
            return Err(EvalError::Overlap {
                fold: f.name.clone(),
                what: a,
            });
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct EvalConfig {
    pub arch: ArchConfig,
    pub train: TrainConfig,
    pub nonoverlap_stride: usize,
    pub filter_window: usize,
    pub gap_merge: usize,
    pub professional: ProfessionalDurations,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            arch: ArchConfig::default(),
            train: TrainConfig::default(),
            nonoverlap_stride: DEFAULT_INFER_STRIDE,
            filter_window: DEFAULT_FILTER_WINDOW,
            gap_merge: DEFAULT_GAP_MERGE,
            professional: ProfessionalDurations::WHO,
        }
    }
}

/// Running totals for one smoothing variant.
#[derive(Clone, Debug, Default)]
struct Tally {
    confusion: ConfusionMatrix,
    participants: BTreeMap<String, (usize, usize)>,
    onset: Vec<f64>,
    offset: Vec<f64>,
    detection_failures: usize,
    score_errors: Vec<f64>,
}

impl Tally {
    fn add(&mut self, series: &SampleSeries, predicted: &[u8], cfg: &EvalConfig) -> Result<(), EvalError> {
        let truth = series.labels();
        self.confusion.add(predicted, truth)?;
        let e = self.participants.entry(series.participant_id.clone()).or_default();
        e.0 += correct(predicted, truth);
        e.1 += truth.len();
        let rate = series.rate_hz();
        match onset_offset_error(predicted, truth, rate, cfg.gap_merge) {
            Some((on, off)) => {
                self.onset.push(on);
                self.offset.push(off);
            }
            None => self.detection_failures += 1,
        }
        let sp = score(&duration_breakdown(predicted, rate, cfg.gap_merge).gesture_durations(), &cfg.professional)?;
        let st = score(&duration_breakdown(truth, rate, cfg.gap_merge).gesture_durations(), &cfg.professional)?;
        self.score_errors.push(score_error(&sp, &st));
        Ok(())
    }

    fn merge(&mut self, o: &Tally) {
        self.confusion.merge(&o.confusion);
        for (k, v) in &o.participants {
            let e = self.participants.entry(k.clone()).or_default();
            e.0 += v.0;
            e.1 += v.1;
        }
        self.onset.extend(&o.onset);
        self.offset.extend(&o.offset);
        self.detection_failures += o.detection_failures;
        self.score_errors.extend(&o.score_errors);
    }

    fn report(&self) -> MetricReport {
        let per_participant: BTreeMap<String, f64> =
            self.participants.iter().map(|(k, &(c, n))| (k.clone(), c as f64 / n as f64)).collect();
        let accs: Vec<f64> = per_participant.values().copied().collect();
        MetricReport {
            samples: self.confusion.total(),
            accuracy: self.confusion.accuracy(),
            mean_participant_accuracy: mean_sd(&accs).map_or(f64::NAN, |m| m.mean),
            prf: prf_from_confusion(&self.confusion),
            confusion: self.confusion.clone(),
            per_participant,
            onset_error_s: mean_sd(&self.onset),
            offset_error_s: mean_sd(&self.offset),
            detection_failures: self.detection_failures,
            score_error_pts: mean_sd(&self.score_errors),
        }
    }
}

/// Metrics of one smoothing variant. Spreads are population SDs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricReport {
    pub samples: u64,
    pub accuracy: f64,
    pub mean_participant_accuracy: f64,
    pub prf: PrfReport,
    pub confusion: ConfusionMatrix,
    pub per_participant: BTreeMap<String, f64>,
    pub onset_error_s: Option<MeanSd>,
    pub offset_error_s: Option<MeanSd>,
    pub detection_failures: usize,
    pub score_error_pts: Option<MeanSd>,
}

impl MetricReport {
    /// `participant,accuracy` rows.
    pub fn participant_csv(&self) -> String {
        let mut s = String::from("participant,accuracy\n");
        for (p, a) in &self.per_participant {
            let _ = writeln!(s, "{p},{a}");
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FoldTraining {
    pub epochs_run: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub stopped_early: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FoldReport {
    pub name: String,
    pub train_series: usize,
    pub test_series: usize,
    pub training: Option<FoldTraining>,
    pub variants: BTreeMap<&'static str, MetricReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub split: SplitKind,
    pub sd_kind: &'static str,
    pub folds: Vec<FoldReport>,
    /// Pooled over every test sample of every fold.
    pub aggregate: BTreeMap<&'static str, MetricReport>,
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn variant(&self, s: Smoothing) -> &MetricReport {
        &self.aggregate[s.name()]
    }
}

/// Where each fold's model comes from.
#[derive(Clone, Debug)]
pub enum ModelSource<'a> {
    /// Train a fresh model per fold.
    Train,
    /// Evaluate a fixed model on every fold's test set.
    Fixed(&'a UWashModel),
}

/// Model seed of fold `k`.
pub fn fold_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_add((k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

fn tally_series(
    model: &UWashModel,
    series: &SampleSeries,
    cfg: &EvalConfig,
) -> Result<Vec<Tally>, EvalError> {
    let windows = infer_windows(model, series, 1)?;
    let mut out = Vec::with_capacity(Smoothing::ALL.len());
    for m in Smoothing::ALL {
        let track = m.apply(&windows, cfg.nonoverlap_stride, cfg.filter_window)?;
        let mut t = Tally::default();
        t.add(series, &track.labels, cfg)?;
        out.push(t);
    }
    Ok(out)
}

fn run_fold(
    corpus: &[SampleSeries],
    fold: &Fold,
    k: usize,
    source: &ModelSource<'_>,
    cfg: &EvalConfig,
) -> Result<(FoldReport, Vec<Tally>), EvalError> {
    let (model, training) = match source {
        ModelSource::Fixed(m) => ((*m).clone(), None),
        ModelSource::Train => {
            let mut model = UWashModel::new(cfg.arch.clone(), fold_seed(cfg.train.seed, k))?;
            let series: Vec<&SampleSeries> = fold.train.iter().map(|&i| &corpus[i]).collect();
            let data = WindowDataset::new(&series, cfg.arch.input_length, cfg.train.window_stride)?;
            let tc = TrainConfig {
                seed: fold_seed(cfg.train.seed, k),
                ..cfg.train.clone()
            };
            let log = train(&mut model, &data, &tc)?;
            let t = FoldTraining {
                epochs_run: log.epochs.len(),
                initial_loss: log.initial_loss,
                final_loss: log.final_loss().unwrap_or(f64::NAN),
                stopped_early: log.stopped_early,
            };
            (model, Some(t))
        }
    };
    let per_series = par::map(&fold.test, |&i| tally_series(&model, &corpus[i], cfg));
    let mut tallies = vec![Tally::default(); Smoothing::ALL.len()];
    for r in per_series {
        for (acc, t) in tallies.iter_mut().zip(r?) {
            acc.merge(&t);
        }
    }
    let variants = Smoothing::ALL
        .iter()
        .zip(&tallies)
        .map(|(m, t)| (m.name(), t.report()))
        .collect();
    Ok((
        FoldReport {
            name: fold.name.clone(),
            train_series: fold.train.len(),
            test_series: fold.test.len(),
            training,
            variants,
        },
        tallies,
    ))
}

/// Trains (or reuses) a model per fold and evaluates the four smoothing
/// variants on its test series. Deterministic for a fixed seed.
pub fn run_evaluation(
    corpus: &[SampleSeries],
    plan: &SplitPlan,
    source: &ModelSource<'_>,
    cfg: &EvalConfig,
) -> Result<EvaluationReport, EvalError> {
    check_disjoint(corpus, plan)?;
    let results = par::map_range(plan.folds.len(), |k| run_fold(corpus, &plan.folds[k], k, source, cfg));
    let mut folds = Vec::with_capacity(results.len());
    let mut pooled = vec![Tally::default(); Smoothing::ALL.len()];
    for r in results {
        let (report, tallies) = r?;
        for (acc, t) in pooled.iter_mut().zip(&tallies) {
            acc.merge(t);
        }
        folds.push(report);
    }
    if pooled[0].confusion.total() == 0 {
        return Err(EvalError::Empty);
    }
    let aggregate = Smoothing::ALL
        .iter()
        .zip(&pooled)
        .map(|(m, t)| (m.name(), t.report()))
        .collect();
    Ok(EvaluationReport {
        split: plan.kind,
        sd_kind: "population",
        folds,
        aggregate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(p: &str, loc: &str, proc_: u32, labels: Vec<u8>) -> SampleSeries {
        let n = labels.len();
        SampleSeries::new(
            p,
            loc,
            proc_,
            50.0,
            (0..n).map(|i| i as f64 / 50.0).collect(),
            vec![[0.0; 3]; n],
            vec![[0.0; 3]; n],
            labels,
        )
        .unwrap()
    }

    fn corpus(participants: usize, locations: usize) -> Vec<SampleSeries> {
        let mut c = Vec::new();
        for p in 0..participants {
            for k in 1..=5 {
                c.push(series(&format!("P{:02}", p + 1), &format!("L{}", p % locations + 1), k, vec![0; 4]));
            }
        }
        c
    }

    #[test]
    fn accuracy_fixtures() {
        let t = [1u8, 2, 3, 4];
        assert_eq!(accuracy_global(&[(&t, &t)]).unwrap(), 1.0);
        assert_eq!(accuracy_global(&[(&[1, 2, 0, 0], &t)]).unwrap(), 0.5);
        // 10 + 8 + 7 of 30
        let truth = [5u8; 10];
        let mut p2 = [5u8; 10];
        p2[..2].fill(0);
        let mut p3 = [5u8; 10];
        p3[..3].fill(1);
        let acc = accuracy_global(&[(&truth, &truth), (&p2, &truth), (&p3, &truth)]).unwrap();
        assert_eq!(acc, 25.0 / 30.0);
        assert_eq!(accuracy_per_participant(&p3, &truth).unwrap(), 0.7);
        assert!(accuracy_global(&[(&t[..3], &t)]).is_err());
        assert!(matches!(accuracy_per_participant(&[], &[]), Err(EvalError::Empty)));
    }

    #[test]
    fn constant_predictor_on_balanced_data() {
        let truth: Vec<u8> = (0..100).map(|i| (i % 10) as u8).collect();
        let (cm, prf) = prf_confusion(&[0; 100], &truth).unwrap();
        assert_eq!(prf.per_class[0].recall, 1.0);
        assert_eq!(prf.per_class[0].precision, 0.1);
        assert!(prf.per_class[3].precision_undefined);
        assert!(!prf.per_class[3].recall_undefined);
        for c in 0..10 {
            assert_eq!(cm.row_sum(c), 10);
        }
        assert_eq!(cm.accuracy(), 0.1);
        let f1_0 = 2.0 * 0.1 / 1.1;
        assert_eq!(prf.macro_f1, f1_0 / 10.0);
    }

    #[test]
    fn perfect_prf() {
        let truth: Vec<u8> = (0..50).map(|i| (i % 10) as u8).collect();
        let (cm, prf) = prf_confusion(&truth, &truth).unwrap();
        assert_eq!(cm.trace(), cm.total());
        assert!(prf.per_class.iter().all(|m| m.precision == 1.0 && m.recall == 1.0 && m.f1 == 1.0));
        assert_eq!(prf.macro_f1, 1.0);
        assert!(cm.to_csv().starts_with("truth,pred_0,"));
    }

    #[test]
    fn population_sd() {
        let m = mean_sd(&[1.0, 3.0]).unwrap();
        assert_eq!((m.mean, m.sd, m.n), (2.0, 1.0, 2));
        assert!(mean_sd(&[]).is_none());
    }

    #[test]
    fn onset_offset_fixture() {
        let mut truth = vec![0u8; 100];
        truth.extend([1u8; 100]);
        truth.extend([0u8; 50]);
        let mut pred = vec![0u8; 105];
        pred.extend([1u8; 100]);
        pred.extend([0u8; 45]);
        let (on, off) = onset_offset_error(&pred, &truth, 50.0, 64).unwrap();
        assert!((on - 0.1).abs() < 1e-12 && (off - 0.1).abs() < 1e-12);
        assert_eq!(onset_offset_error(&truth, &truth, 50.0, 64), Some((0.0, 0.0)));
        assert_eq!(onset_offset_error(&[0; 250], &truth, 50.0, 64), None);
    }

    #[test]
    fn splits() {
        let c = corpus(4, 2);
        let ud = make_split(&c, SplitKind::UserDependent).unwrap();
        assert_eq!(ud.folds.len(), 1);
        assert_eq!(ud.folds[0].train.len(), 16);
        assert_eq!(ud.folds[0].test.len(), 4);
        assert!(ud.folds[0].test.iter().all(|&i| c[i].procedure_id == 5));

        let lopo = make_split(&c, SplitKind::LeaveOneParticipantOut).unwrap();
        assert_eq!(lopo.folds.len(), 4);
        assert!(lopo.folds.iter().all(|f| f.test.len() == 5 && f.train.len() == 15));

        let lolo = make_split(&c, SplitKind::LeaveOneLocationOut).unwrap();
        assert_eq!(lolo.folds.len(), 2);
        assert_eq!(lolo.folds[0].test.len(), 10);

        let mut short = corpus(2, 1);
        short.remove(3);
        match make_split(&short, SplitKind::UserDependent) {
            Err(EvalError::ProcedureCount { participant, found }) => {
                assert_eq!((participant.as_str(), found), ("P01", 4));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(make_split(&corpus(1, 1), SplitKind::LeaveOneParticipantOut).is_err());
    }

    #[test]
    fn overlapping_plan_rejected() {
        let c = corpus(2, 1);
        let plan = SplitPlan {
            kind: SplitKind::UserDependent,
            folds: vec![Fold {
                name: "bad".into(),
                train: vec![0, 1],
                test: vec![1],
            }],
        };
        assert!(matches!(check_disjoint(&c, &plan), Err(EvalError::Overlap { .. })));
    }

    #[test]
    fn split_names() {
        for k in [SplitKind::UserDependent, SplitKind::LeaveOneParticipantOut, SplitKind::LeaveOneLocationOut] {
            assert_eq!(k.name().parse::<SplitKind>().unwrap(), k);
        }
        assert!("kfold".parse::<SplitKind>().is_err());
    }
}
