//! Parametric generator of labeled 6-axis handwashing-like procedures.
//!
//! Each procedure is a background run, the nine gestures (locally shuffled,
//! some possibly dropped) and a closing background run. A gesture emits, per
//! axis, a sinusoid at its base frequency plus its first harmonic on top of a
//! gesture-specific accelerometer bias. Participants differ by tempo and by
//! per-gesture, per-axis amplitude, phase and orientation offsets. Background
//! is a mean-reverting random walk around a resting pose.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use thiserror::Error;

use crate::kv::{join_list, KvError, KvMap};
use crate::par;
use crate::scoring::{ProfessionalDurations, NUM_GESTURES};
use crate::signal::{SampleSeries, SignalError, DEFAULT_RATE_HZ, NUM_CLASSES};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid generator spec: {0}")]
    Invalid(String),
    #[error(transparent)]
    Kv(#[from] KvError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("corpus is empty")]
    EmptyCorpus,
}

/// Motion pattern of one gesture.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Motif {
    pub frequency_hz: f64,
    /// Resting accelerometer reading while performing the gesture, in g.
    pub accel_bias: [f64; 3],
    pub accel_amp: [f64; 3],
    /// Gyroscope amplitude in rad/s.
    pub gyro_amp: [f64; 3],
}

const ACCEL_BIAS: [[f64; 3]; NUM_GESTURES] = [
    [0.0, 0.3, 0.95],
    [0.45, 0.2, 0.85],
    [-0.2, 0.55, 0.8],
    [0.3, -0.45, 0.85],
    [0.65, 0.0, 0.75],
    [-0.55, 0.25, 0.8],
    [-0.45, -0.1, 0.9],
    [-0.65, -0.3, 0.7],
    [0.5, 0.45, 0.75],
];

const ACCEL_AMP: [[f64; 3]; NUM_GESTURES] = [
    [0.5, 0.15, 0.1],
    [0.2, 0.45, 0.15],
    [0.4, 0.1, 0.3],
    [0.15, 0.35, 0.35],
    [0.3, 0.3, 0.1],
    [0.1, 0.2, 0.45],
    [0.35, 0.4, 0.1],
    [0.25, 0.1, 0.4],
    [0.1, 0.5, 0.25],
];

const GYRO_AMP: [[f64; 3]; NUM_GESTURES] = [
    [0.3, 1.2, 0.4],
    [1.0, 0.3, 0.8],
    [0.5, 0.5, 1.4],
    [1.3, 0.8, 0.2],
    [0.4, 1.5, 0.9],
    [0.9, 0.2, 1.1],
    [0.2, 1.0, 1.3],
    [1.4, 0.6, 0.5],
    [0.7, 1.1, 0.3],
];

/// Default motifs: base frequencies 1.0 to 3.4 Hz in steps of 0.3 Hz.
pub fn default_motifs() -> [Motif; NUM_GESTURES] {
    std::array::from_fn(|g| Motif {
        frequency_hz: 1.0 + 0.3 * g as f64,
        accel_bias: ACCEL_BIAS[g],
        accel_amp: ACCEL_AMP[g],
        gyro_amp: GYRO_AMP[g],
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GenSpec {
    pub seed: u64,
    pub participants: usize,
    pub locations: usize,
    pub procedures_per_participant: usize,
    pub rate_hz: f64,
    pub motifs: [Motif; NUM_GESTURES],
    /// Amplitude of the first harmonic relative to the fundamental.
    pub harmonic_ratio: f64,
    pub duration_means: [f64; NUM_GESTURES],
    pub duration_jitter: f64,
    pub noise_sigma: f64,
    /// Inclusive sample range of each leading and trailing background run.
    pub background_min: usize,
    pub background_max: usize,
    pub walk_sigma: f64,
    /// Pull toward the resting pose per sample, in `[0, 1]`.
    pub walk_revert: f64,
    pub sequence_shuffle_prob: f64,
    pub gesture_drop_prob: f64,
    /// Half-width of the per-participant tempo factor around 1.
    pub participant_tempo_jitter: f64,
    /// Half-width of per-participant amplitude scales around 1.
    pub participant_amp_jitter: f64,
    /// Half-width of per-participant phase offsets, in radians.
    pub participant_phase_jitter: f64,
    /// Half-width of per-participant offsets of each gesture's
    /// accelerometer bias, in g.
    pub participant_bias_jitter: f64,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec {
            seed: 0,
            participants: 10,
            locations: 5,
            procedures_per_participant: 5,
            rate_hz: DEFAULT_RATE_HZ,
            motifs: default_motifs(),
            harmonic_ratio: 0.5,
            duration_means: ProfessionalDurations::WHO.0,
            duration_jitter: 0.2,
            noise_sigma: 0.1,
            background_min: 200,
            background_max: 400,
            walk_sigma: 0.02,
            walk_revert: 0.02,
            sequence_shuffle_prob: 0.1,
            gesture_drop_prob: 0.05,
            participant_tempo_jitter: 0.15,
            participant_amp_jitter: 0.5,
            participant_phase_jitter: 2.0,
            participant_bias_jitter: 0.3,
        }
    }
}

impl GenSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Invalid(m));
        if self.participants == 0 || self.locations == 0 || self.procedures_per_participant == 0 {
            return bad("participants, locations and procedures_per_participant must be ≥ 1".into());
        }
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return bad(format!("rate_hz {} must be positive", self.rate_hz));
        }
        for (name, p) in [
            ("sequence_shuffle_prob", self.sequence_shuffle_prob),
            ("gesture_drop_prob", self.gesture_drop_prob),
            ("walk_revert", self.walk_revert),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} {p} must lie in [0, 1]"));
            }
        }
        if !(0.0..1.0).contains(&self.duration_jitter) {
            return bad(format!("duration_jitter {} must lie in [0, 1)", self.duration_jitter));
        }
        if !(0.0..1.0).contains(&self.participant_tempo_jitter)
            || !(0.0..1.0).contains(&self.participant_amp_jitter)
        {
            return bad("participant tempo and amplitude jitter must lie in [0, 1)".into());
        }
        for (name, v) in [
            ("noise_sigma", self.noise_sigma),
            ("walk_sigma", self.walk_sigma),
            ("harmonic_ratio", self.harmonic_ratio),
            ("participant_phase_jitter", self.participant_phase_jitter),
            ("participant_bias_jitter", self.participant_bias_jitter),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} {v} must be finite and ≥ 0"));
            }
        }
        if self.background_min == 0 || self.background_min > self.background_max {
            return bad(format!(
                "background range {}..={} must be nonempty and start at ≥ 1",
                self.background_min, self.background_max
            ));
        }
        for (g, &d) in self.duration_means.iter().enumerate() {
            if !(d.is_finite() && d > 0.0) {
                return bad(format!("duration mean of G{} is {d}", g + 1));
            }
        }
        for (g, m) in self.motifs.iter().enumerate() {
            if !(m.frequency_hz.is_finite() && m.frequency_hz > 0.0) {
                return bad(format!("frequency of G{} is {}", g + 1, m.frequency_hz));
            }
            if m.accel_bias.iter().chain(&m.accel_amp).chain(&m.gyro_amp).any(|v| !v.is_finite()) {
                return bad(format!("motif of G{} has a non-finite entry", g + 1));
            }
            for (h, other) in self.motifs[..g].iter().enumerate() {
                if other.frequency_hz == m.frequency_hz {
                    return bad(format!("G{} and G{} share frequency {}", h + 1, g + 1, m.frequency_hz));
                }
            }
        }
        Ok(())
    }

    pub fn to_kv(&self) -> String {
        let mut s = format!(
            "seed = {}\nparticipants = {}\nlocations = {}\nprocedures_per_participant = {}\n\
             rate_hz = {}\nharmonic_ratio = {}\nduration_means = {}\nduration_jitter = {}\n\
             noise_sigma = {}\nbackground_min = {}\nbackground_max = {}\nwalk_sigma = {}\n\
             walk_revert = {}\nsequence_shuffle_prob = {}\ngesture_drop_prob = {}\n\
             participant_tempo_jitter = {}\nparticipant_amp_jitter = {}\nparticipant_phase_jitter = {}\n\
             participant_bias_jitter = {}\n",
            self.seed,
            self.participants,
            self.locations,
            self.procedures_per_participant,
            self.rate_hz,
            self.harmonic_ratio,
            join_list(&self.duration_means),
            self.duration_jitter,
            self.noise_sigma,
            self.background_min,
            self.background_max,
            self.walk_sigma,
            self.walk_revert,
            self.sequence_shuffle_prob,
            self.gesture_drop_prob,
            self.participant_tempo_jitter,
            self.participant_amp_jitter,
            self.participant_phase_jitter,
            self.participant_bias_jitter,
        );
        for (g, m) in self.motifs.iter().enumerate() {
            let g = g + 1;
            s.push_str(&format!(
                "g{g}.frequency_hz = {}\ng{g}.accel_bias = {}\ng{g}.accel_amp = {}\ng{g}.gyro_amp = {}\n",
                m.frequency_hz,
                join_list(&m.accel_bias),
                join_list(&m.accel_amp),
                join_list(&m.gyro_amp),
            ));
        }
        s
    }

    /// Parses a key-value block; missing keys keep their defaults.
    pub fn from_kv(text: &str) -> Result<Self, SynthError> {
        let mut m = KvMap::parse(text)?;
        let d = GenSpec::default();
        let mut motifs = d.motifs;
        for (g, motif) in motifs.iter_mut().enumerate() {
            let g = g + 1;
            motif.frequency_hz = m.take_or(&format!("g{g}.frequency_hz"), motif.frequency_hz)?;
            for (field, dst) in [
                ("accel_bias", &mut motif.accel_bias),
                ("accel_amp", &mut motif.accel_amp),
                ("gyro_amp", &mut motif.gyro_amp),
            ] {
                if let Some(v) = take_array::<3>(&mut m, &format!("g{g}.{field}"))? {
                    *dst = v;
                }
            }
        }
        let spec = GenSpec {
            seed: m.take_or("seed", d.seed)?,
            participants: m.take_or("participants", d.participants)?,
            locations: m.take_or("locations", d.locations)?,
            procedures_per_participant: m.take_or("procedures_per_participant", d.procedures_per_participant)?,
            rate_hz: m.take_or("rate_hz", d.rate_hz)?,
            motifs,
            harmonic_ratio: m.take_or("harmonic_ratio", d.harmonic_ratio)?,
            duration_means: take_array::<NUM_GESTURES>(&mut m, "duration_means")?.unwrap_or(d.duration_means),
            duration_jitter: m.take_or("duration_jitter", d.duration_jitter)?,
            noise_sigma: m.take_or("noise_sigma", d.noise_sigma)?,
            background_min: m.take_or("background_min", d.background_min)?,
            background_max: m.take_or("background_max", d.background_max)?,
            walk_sigma: m.take_or("walk_sigma", d.walk_sigma)?,
            walk_revert: m.take_or("walk_revert", d.walk_revert)?,
            sequence_shuffle_prob: m.take_or("sequence_shuffle_prob", d.sequence_shuffle_prob)?,
            gesture_drop_prob: m.take_or("gesture_drop_prob", d.gesture_drop_prob)?,
            participant_tempo_jitter: m.take_or("participant_tempo_jitter", d.participant_tempo_jitter)?,
            participant_amp_jitter: m.take_or("participant_amp_jitter", d.participant_amp_jitter)?,
            participant_phase_jitter: m.take_or("participant_phase_jitter", d.participant_phase_jitter)?,
            participant_bias_jitter: m.take_or("participant_bias_jitter", d.participant_bias_jitter)?,
        };
        m.finish()?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn participant_id(p: usize) -> String {
        format!("P{:02}", p + 1)
    }

    pub fn location_id(&self, p: usize) -> String {
        format!("L{}", p % self.locations + 1)
    }
}

fn take_array<const N: usize>(m: &mut KvMap, key: &str) -> Result<Option<[f64; N]>, KvError> {
    match m.take_list::<f64>(key)? {
        None => Ok(None),
        Some(v) => v.clone().try_into().map(Some).map_err(|_| KvError::Value {
            key: key.to_string(),
            value: join_list(&v),
            reason: format!("expected {N} values"),
        }),
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Sub-seed for `(participant, stream)`; stream 0 holds participant traits
/// and stream `k ≥ 1` procedure `k`.
pub fn sub_seed(seed: u64, participant: usize, stream: usize) -> u64 {
    let a = mix(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let b = mix(a ^ (participant as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    mix(b ^ (stream as u64).wrapping_add(1).wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// Per-participant deviations from the shared motifs.
#[derive(Clone, Debug, PartialEq)]
struct Traits {
    tempo: f64,
    /// `[gesture][axis]`, accel axes 0..3 then gyro axes 3..6.
    amp: [[f64; 6]; NUM_GESTURES],
    phase: [[f64; 6]; NUM_GESTURES],
    bias: [[f64; 3]; NUM_GESTURES],
}

fn traits(spec: &GenSpec, participant: usize) -> Traits {
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(spec.seed, participant, 0));
    let mut sym = |w: f64| if w > 0.0 { rng.random_range(-w..w) } else { 0.0 };
    let tempo = 1.0 + sym(spec.participant_tempo_jitter);
    let mut amp = [[0.0; 6]; NUM_GESTURES];
    let mut phase = [[0.0; 6]; NUM_GESTURES];
    let mut bias = [[0.0; 3]; NUM_GESTURES];
    for g in 0..NUM_GESTURES {
        for a in 0..6 {
            amp[g][a] = 1.0 + sym(spec.participant_amp_jitter);
            phase[g][a] = sym(spec.participant_phase_jitter);
        }
        for b in &mut bias[g] {
            *b = sym(spec.participant_bias_jitter);
        }
    }
    Traits {
        tempo,
        amp,
        phase,
        bias,
    }
}

const REST_ACCEL: [f64; 3] = [0.0, 0.0, 1.0];

fn procedure(spec: &GenSpec, participant: usize, procedure: usize, tr: &Traits) -> Result<SampleSeries, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(spec.seed, participant, procedure + 1));
    let noise = Normal::new(0.0, spec.noise_sigma).expect("validated sigma");
    let step = Normal::new(0.0, spec.walk_sigma).expect("validated sigma");

    let mut order: Vec<usize> = (0..NUM_GESTURES).collect();
    for i in 0..NUM_GESTURES - 1 {
        if rng.random_bool(spec.sequence_shuffle_prob) {
            order.swap(i, i + 1);
        }
    }
    let mut plan: Vec<(u8, usize)> = Vec::new();
    let lead = rng.random_range(spec.background_min..=spec.background_max);
    plan.push((0, lead));
    for g in order {
        if rng.random_bool(spec.gesture_drop_prob) {
            continue;
        }
        let j = if spec.duration_jitter > 0.0 {
            rng.random_range(-spec.duration_jitter..spec.duration_jitter)
        } else {
            0.0
        };
        let samples = (spec.duration_means[g] * (1.0 + j) * spec.rate_hz).round() as usize;
        plan.push((g as u8 + 1, samples));
    }
    let trail = rng.random_range(spec.background_min..=spec.background_max);
    plan.push((0, trail));

    let n: usize = plan.iter().map(|p| p.1).sum();
    let mut accel = Vec::with_capacity(n);
    let mut gyro = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut walk_a = REST_ACCEL;
    let mut walk_g = [0.0; 3];
    for (label, len) in plan {
        if label == 0 {
            for _ in 0..len {
                for a in 0..3 {
                    walk_a[a] += spec.walk_revert * (REST_ACCEL[a] - walk_a[a]) + step.sample(&mut rng);
                    walk_g[a] += -spec.walk_revert * walk_g[a] + step.sample(&mut rng);
                }
                accel.push(walk_a);
                gyro.push(walk_g);
                labels.push(0);
            }
            continue;
        }
        let g = label as usize - 1;
        let m = &spec.motifs[g];
        let w = 2.0 * PI * m.frequency_hz * tr.tempo;
        let start_phase = rng.random_range(0.0..2.0 * PI);
        for k in 0..len {
            let tau = k as f64 / spec.rate_hz;
            let wave = |axis: usize| {
                let p = w * tau + start_phase + tr.phase[g][axis];
                p.sin() + spec.harmonic_ratio * (2.0 * p + tr.phase[g][(axis + 3) % 6]).sin()
            };
            let mut a = [0.0; 3];
            let mut r = [0.0; 3];
            for ax in 0..3 {
                a[ax] = m.accel_bias[ax] + tr.bias[g][ax] + m.accel_amp[ax] * tr.amp[g][ax] * wave(ax);
                r[ax] = m.gyro_amp[ax] * tr.amp[g][ax + 3] * wave(ax + 3);
            }
            accel.push(a);
            gyro.push(r);
            labels.push(label);
        }
        // the walk resumes from the last pose
        walk_a = *accel.last().expect("nonempty gesture");
        walk_g = *gyro.last().expect("nonempty gesture");
    }
    for v in accel.iter_mut().chain(gyro.iter_mut()) {
        for x in v.iter_mut() {
            *x += noise.sample(&mut rng);
        }
    }
    let t = (0..n).map(|i| i as f64 / spec.rate_hz).collect();
    Ok(SampleSeries::new(
        GenSpec::participant_id(participant),
        spec.location_id(participant),
        procedure as u32 + 1,
        spec.rate_hz,
        t,
        accel,
        gyro,
        labels,
    )?)
}

/// Generates every procedure of every participant, ordered by participant
/// then procedure. A pure function of `spec`.
pub fn generate(spec: &GenSpec) -> Result<Vec<SampleSeries>, SynthError> {
    spec.validate()?;
    let all_traits = par::map_range(spec.participants, |p| traits(spec, p));
    let per = spec.procedures_per_participant;
    par::map_range(spec.participants * per, |i| {
        let p = i / per;
        procedure(spec, p, i % per, &all_traits[p])
    })
    .into_iter()
    .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct GroupStats {
    pub series: usize,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorpusStats {
    pub series: usize,
    pub samples: usize,
    pub window_length: usize,
    /// Instances after stride-1 windowing.
    pub windows: usize,
    pub class_counts: [usize; NUM_CLASSES],
    pub class_fractions: [f64; NUM_CLASSES],
    pub per_location: BTreeMap<String, GroupStats>,
    pub per_participant: BTreeMap<String, GroupStats>,
    /// File names of procedures that contain no gesture sample.
    pub empty_procedures: Vec<String>,
}

impl CorpusStats {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }
}

pub fn describe(corpus: &[SampleSeries], window_length: usize) -> Result<CorpusStats, SynthError> {
    if corpus.is_empty() {
        return Err(SynthError::EmptyCorpus);
    }
    let mut stats = CorpusStats {
        series: corpus.len(),
        samples: 0,
        window_length,
        windows: 0,
        class_counts: [0; NUM_CLASSES],
        class_fractions: [0.0; NUM_CLASSES],
        per_location: BTreeMap::new(),
        per_participant: BTreeMap::new(),
        empty_procedures: Vec::new(),
    };
    for s in corpus {
        let n = s.len();
        stats.samples += n;
        stats.windows += (n + 1).saturating_sub(window_length);
        for &l in s.labels() {
            stats.class_counts[l as usize] += 1;
        }
        if s.labels().iter().all(|&l| l == 0) {
            stats.empty_procedures.push(s.file_name());
        }
        for (map, key) in [
            (&mut stats.per_location, &s.location_id),
            (&mut stats.per_participant, &s.participant_id),
        ] {
            let e = map.entry(key.clone()).or_default();
            e.series += 1;
            e.samples += n;
        }
    }
    for c in 0..NUM_CLASSES {
        stats.class_fractions[c] = stats.class_counts[c] as f64 / stats.samples as f64;
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GenSpec {
        GenSpec {
            seed: 7,
            participants: 3,
            locations: 2,
            procedures_per_participant: 2,
            ..GenSpec::default()
        }
    }

    #[test]
    fn deterministic() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a, b);
        let c = generate(&GenSpec { seed: 8, ..small() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sequential_path_matches() {
        let a = generate(&small()).unwrap();
        let b = par::sequential(|| generate(&small())).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn metadata_layout() {
        let c = generate(&small()).unwrap();
        assert_eq!(c.len(), 6);
        assert_eq!(c[0].file_name(), "L1_P01_1.csv");
        assert_eq!(c[3].file_name(), "L2_P02_2.csv");
        assert_eq!(c[5].location_id, "L1");
    }

    #[test]
    fn exact_means_without_jitter() {
        let spec = GenSpec {
            duration_jitter: 0.0,
            gesture_drop_prob: 0.0,
            sequence_shuffle_prob: 0.0,
            ..small()
        };
        for s in generate(&spec).unwrap() {
            let mut counts = [0usize; 10];
            for &l in s.labels() {
                counts[l as usize] += 1;
            }
            for g in 0..9 {
                let want = (spec.duration_means[g] * 50.0).round() as usize;
                assert_eq!(counts[g + 1], want);
            }
            // gestures in order
            let firsts: Vec<usize> = (1..=9u8).map(|g| s.labels().iter().position(|&l| l == g).unwrap()).collect();
            assert!(firsts.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn durations_within_jitter() {
        let spec = small();
        for s in generate(&spec).unwrap() {
            for g in 1..=9u8 {
                let c = s.labels().iter().filter(|&&l| l == g).count();
                if c == 0 {
                    continue;
                }
                let d = c as f64 / 50.0;
                let mean = spec.duration_means[g as usize - 1];
                assert!((d - mean).abs() <= mean * spec.duration_jitter + 0.5 / 50.0);
            }
        }
    }

    #[test]
    fn kv_round_trip_and_validation() {
        let s = small();
        assert_eq!(GenSpec::from_kv(&s.to_kv()).unwrap(), s);
        assert!(matches!(GenSpec::from_kv("gesture_drop_prob = 1.5"), Err(SynthError::Invalid(_))));
        assert!(matches!(GenSpec::from_kv("duration_jitter = 1"), Err(SynthError::Invalid(_))));
        assert!(matches!(GenSpec::from_kv("g2.frequency_hz = 1.0"), Err(SynthError::Invalid(_))));
        assert!(matches!(GenSpec::from_kv("flavour = 3"), Err(SynthError::Kv(KvError::Unknown(_)))));
        assert!(GenSpec::from_kv("g1.accel_amp = 1,2").is_err());
    }

    #[test]
    fn describe_counts() {
        let c = generate(&small()).unwrap();
        let st = describe(&c, 64).unwrap();
        assert_eq!(st.series, 6);
        assert_eq!(st.samples, c.iter().map(|s| s.len()).sum::<usize>());
        assert_eq!(st.windows, c.iter().map(|s| s.len() - 63).sum::<usize>());
        assert!((st.class_fractions.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(st.per_participant.len(), 3);
        assert_eq!(st.per_location["L1"].series, 4);
        assert!(st.empty_procedures.is_empty());
        assert!(describe(&[], 64).is_err());
    }

    #[test]
    fn empty_procedure_flagged() {
        let spec = GenSpec {
            gesture_drop_prob: 1.0,
            ..small()
        };
        let c = generate(&spec).unwrap();
        assert_eq!(describe(&c, 64).unwrap().empty_procedures.len(), 6);
    }
}
