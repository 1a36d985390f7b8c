use std::collections::BTreeSet;

use uwash::eval::{make_split, run_evaluation, EvalConfig, ModelSource, SplitKind};
use uwash::net::{ArchConfig, UWashModel};
use uwash::pipeline::Smoothing;
use uwash::synth::{generate, GenSpec};

#[test]
fn fixed_model_evaluation_covers_every_split() {
    let corpus = generate(&GenSpec {
        seed: 21,
        participants: 3,
        locations: 2,
        ..GenSpec::default()
    })
    .unwrap();
    let model = UWashModel::new(ArchConfig::default(), 1).unwrap();
    let cfg = EvalConfig::default();
    for (kind, folds) in [
        (SplitKind::UserDependent, 1),
        (SplitKind::LeaveOneParticipantOut, 3),
        (SplitKind::LeaveOneLocationOut, 2),
    ] {
        let plan = make_split(&corpus, kind).unwrap();
        assert_eq!(plan.folds.len(), folds, "{kind:?}");
        let mut tested = BTreeSet::new();
        for f in &plan.folds {
            let train: BTreeSet<_> = f.train.iter().collect();
            assert!(f.test.iter().all(|t| !train.contains(t)));
            for &t in &f.test {
                assert!(tested.insert(t), "series {t} tested twice");
            }
        }
        if kind == SplitKind::UserDependent {
            assert_eq!(tested.len(), 3);
            assert!(tested.iter().all(|&i| corpus[i].procedure_id == 5));
        } else {
            assert_eq!(tested.len(), corpus.len());
        }

        let report = run_evaluation(&corpus, &plan, &ModelSource::Fixed(&model), &cfg).unwrap();
        let samples: usize = tested.iter().map(|&i| corpus[i].len()).sum();
        for s in Smoothing::ALL {
            let v = report.variant(s);
            assert_eq!(v.samples as usize, samples);
            assert_eq!(v.confusion.total() as usize, samples);
            assert_eq!(v.accuracy, v.confusion.trace() as f64 / samples as f64);
        }
        let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(json["folds"].as_array().unwrap().len(), folds);
    }
}
