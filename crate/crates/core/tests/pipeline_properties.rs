use proptest::prelude::*;
use uwash::pipeline::{
    duration_breakdown, mode_filter, mode_filter_labels, multiple_test_voting, LabelTrack,
};
use uwash::scoring::{score, ProfessionalDurations};

fn track() -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec((0u8..10, 1usize..90), 1..30)
        .prop_map(|runs| runs.into_iter().flat_map(|(l, n)| std::iter::repeat_n(l, n)).collect())
}

proptest! {
    #[test]
    fn durations_partition_the_series(labels in track(), gap in 1usize..100) {
        let d = duration_breakdown(&labels, 50.0, gap);
        prop_assert_eq!(d.gesture_samples.iter().sum::<usize>() + d.background_samples, labels.len());
        let secs: f64 = d.gesture_durations().iter().sum::<f64>() + d.background_duration();
        prop_assert!((secs - labels.len() as f64 / 50.0).abs() < 1e-9);
    }

    #[test]
    fn filter_only_emits_labels_from_its_window(labels in track(), w in 1usize..200) {
        let f = mode_filter_labels(&labels, w);
        prop_assert_eq!(f.len(), labels.len());
        let n = labels.len() as i64;
        for (i, l) in f.iter().enumerate() {
            let lo = (i as i64 - (w / 2) as i64).max(0) as usize;
            let hi = ((i as i64 - (w / 2) as i64 + w as i64).min(n)) as usize;
            prop_assert!(labels[lo..hi].contains(l));
        }
    }

    #[test]
    fn odd_filter_is_idempotent_on_runs_of_at_least_one_window(
        runs in prop::collection::vec((0u8..10, 0usize..40), 1..12),
        half in 0usize..40,
    ) {
        let w = 2 * half + 1;
        let labels: Vec<u8> = runs.into_iter().flat_map(|(l, extra)| std::iter::repeat_n(l, w + extra)).collect();
        let once = mode_filter_labels(&labels, w);
        prop_assert_eq!(mode_filter_labels(&once, w), once);
    }

    #[test]
    fn voting_is_idempotent_and_keeps_length(labels in track()) {
        let t = LabelTrack::from_labels(labels);
        let once = multiple_test_voting(&t);
        prop_assert_eq!(once.labels.len(), t.len());
        prop_assert_eq!(multiple_test_voting(&once).labels, once.labels.clone());
        prop_assert_eq!(mode_filter(&once, 1).labels, once.labels);
    }

    #[test]
    fn score_is_bounded_and_monotone(
        d in prop::array::uniform9(0.0f64..12.0),
        g in 0usize..9,
        bump in 0.0f64..5.0,
    ) {
        let p = ProfessionalDurations::WHO;
        let s = score(&d, &p).unwrap();
        prop_assert!((0.0..=100.0).contains(&s.total));
        let mut more = d;
        more[g] += bump;
        prop_assert!(score(&more, &p).unwrap().total >= s.total);
    }
}
