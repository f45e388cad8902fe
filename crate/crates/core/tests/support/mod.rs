//! Reference implementations and fixtures shared by the oracle tests and the
//! acceptance suite. Nothing here calls into the library's own arithmetic.
#![allow(dead_code)]

use beatscribe::eval::{EditOps, LabeledOnset};
use beatscribe::features::{FeatureVector, FEATURE_COUNT, N_MFCC};
use beatscribe::learn::{LabeledDataset, Normalizer};
use beatscribe::pipeline::{DrumEvent, Transcription};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SR: f64 = 44_100.0;
pub const N_BINS: usize = 513;

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1e-9)
}

// ---- features ----

pub fn bin_freqs() -> Vec<f64> {
    (0..N_BINS).map(|b| b as f64 * SR / 1024.0).collect()
}

/// Triangles written as min of the two slopes, clipped at zero.
pub fn oracle_filterbank(n_mels: usize) -> Vec<Vec<f64>> {
    let mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
    let inv = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
    let top = mel(SR / 2.0);
    let edges: Vec<f64> = (0..n_mels + 2).map(|i| inv(top * i as f64 / (n_mels as f64 + 1.0))).collect();
    (0..n_mels)
        .map(|m| {
            bin_freqs()
                .iter()
                .map(|&f| {
                    let up = (f - edges[m]) / (edges[m + 1] - edges[m]);
                    let down = (edges[m + 2] - f) / (edges[m + 2] - edges[m + 1]);
                    up.min(down).max(0.0)
                })
                .collect()
        })
        .collect()
}

pub fn oracle_mfcc(power: &[f64], fb: &[Vec<f64>]) -> Vec<f64> {
    let e: Vec<f64> = fb
        .iter()
        .map(|row| row.iter().zip(power).map(|(w, p)| w * p).sum::<f64>().max(1e-10).ln())
        .collect();
    let n = e.len() as f64;
    // DCT-II basis with orthonormal scaling, row by row
    (0..N_MFCC)
        .map(|k| {
            let alpha = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            alpha
                * e.iter()
                    .enumerate()
                    .map(|(m, v)| v * (std::f64::consts::PI / n * (m as f64 + 0.5) * k as f64).cos())
                    .sum::<f64>()
        })
        .collect()
}

pub struct Desc {
    pub centroid: f64,
    pub spread: f64,
    pub slope: f64,
    pub decrease: f64,
    pub rolloff: f64,
}

pub fn oracle_descriptors(mag: &[f64], freqs: &[f64], fraction: f64) -> Desc {
    let total: f64 = mag.iter().sum();
    if total == 0.0 {
        return Desc { centroid: 0.0, spread: 0.0, slope: 0.0, decrease: 0.0, rolloff: 0.0 };
    }
    let p: Vec<f64> = mag.iter().map(|m| m / total).collect();
    let centroid: f64 = freqs.iter().zip(&p).map(|(f, p)| f * p).sum();
    let spread = freqs.iter().zip(&p).map(|(f, p)| (f - centroid).powi(2) * p).sum::<f64>().sqrt();
    // normal equations for y = a + s x
    let n = mag.len() as f64;
    let sx: f64 = freqs.iter().sum();
    let sy: f64 = mag.iter().sum();
    let sxx: f64 = freqs.iter().map(|x| x * x).sum();
    let sxy: f64 = freqs.iter().zip(mag).map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let tail: f64 = mag[1..].iter().sum();
    let decrease = if tail > 0.0 {
        (1..mag.len()).map(|b| (mag[b] - mag[0]) / b as f64).sum::<f64>() / tail
    } else {
        0.0
    };
    let energy: f64 = mag.iter().map(|m| m * m).sum();
    let rolloff = (0..mag.len())
        .find(|&r| mag[..=r].iter().map(|m| m * m).sum::<f64>() >= fraction * energy)
        .map_or(*freqs.last().unwrap(), |r| freqs[r]);
    Desc { centroid, spread, slope, decrease, rolloff }
}

pub fn random_spectrum(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let sparsity = rng.gen_range(0.0..0.5);
    (0..N_BINS)
        .map(|_| if rng.gen_bool(sparsity) { 0.0 } else { rng.gen_range(0.0..1.0f64).powi(3) * 10.0 })
        .collect()
}

// ---- learning ----

pub type Ds = LabeledDataset<f64>;

pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, n_classes: usize, integer: bool) -> Ds {
    let names: Vec<String> = (0..n_classes).map(|c| format!("c{c}")).collect();
    let mut labels: Vec<usize> = (0..n).map(|i| i % n_classes).collect();
    labels[n_classes..].iter_mut().for_each(|l| *l = rng.gen_range(0..n_classes));
    let vectors = labels
        .iter()
        .map(|&l| {
            let mut v = [0.0; FEATURE_COUNT];
            for (f, x) in v.iter_mut().enumerate() {
                *x = if integer {
                    f64::from(rng.gen_range(0..3i32))
                } else {
                    // a few informative features, the rest noise
                    let signal = if f % 5 == 0 { l as f64 * 1.5 } else { 0.0 };
                    signal + rng.gen_range(-1.0..1.0) * (f as f64 + 1.0)
                };
            }
            FeatureVector::new(v)
        })
        .collect();
    LabeledDataset::new(vectors, labels, names).unwrap()
}

pub fn random_mask(rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut all: Vec<usize> = (0..FEATURE_COUNT).collect();
    for i in (1..all.len()).rev() {
        all.swap(i, rng.gen_range(0..=i));
    }
    all.truncate(rng.gen_range(1..=6));
    all
}

/// Exhaustive kNN: every distance, full sort, explicit per-class tallies.
pub fn oracle_knn(ds: &Ds, norm: &Normalizer<f64>, mask: &[usize], k: usize, q: &FeatureVector<f64>) -> usize {
    let zq = norm.normalize(q);
    let mut all: Vec<(f64, usize)> = ds
        .vectors()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let z = norm.normalize(v);
            (mask.iter().map(|&f| (z[f] - zq[f]) * (z[f] - zq[f])).sum::<f64>().sqrt(), i)
        })
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let nearest = &all[..k];
    let n_classes = ds.class_names().len();
    let tally: Vec<(usize, f64)> = (0..n_classes)
        .map(|c| {
            let mine: Vec<f64> = nearest.iter().filter(|(_, i)| ds.labels()[*i] == c).map(|(d, _)| *d).collect();
            (mine.len(), mine.iter().sum())
        })
        .collect();
    (0..n_classes)
        .filter(|&c| tally[c].0 > 0)
        .min_by(|&a, &b| tally[b].0.cmp(&tally[a].0).then(tally[a].1.total_cmp(&tally[b].1)).then(a.cmp(&b)))
        .unwrap()
}

/// One query of the 1000-query kNN comparison: dataset, mask, k, query.
pub struct KnnQuery {
    pub round: usize,
    pub mask: Vec<usize>,
    pub k: usize,
    pub query: FeatureVector<f64>,
}

/// 40 datasets x 25 queries; odd rounds are integer-valued to force distance and vote ties.
pub fn knn_rounds(seed: u64) -> Vec<(Ds, Vec<KnnQuery>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..40)
        .map(|round| {
            let integer = round % 2 == 1;
            let n = rng.gen_range(4..40);
            let c = rng.gen_range(2..5);
            let ds = random_dataset(&mut rng, n, c, integer);
            let queries = (0..25)
                .map(|_| {
                    let mask = random_mask(&mut rng);
                    let k = rng.gen_range(1..=n.min(7));
                    let query = if integer {
                        FeatureVector::new(std::array::from_fn(|_| f64::from(rng.gen_range(0..3i32))))
                    } else {
                        FeatureVector::new(std::array::from_fn(|f| rng.gen_range(-1.0..1.0) * (f as f64 + 2.0)))
                    };
                    KnnQuery { round, mask, k, query }
                })
                .collect();
            (ds, queries)
        })
        .collect()
}

/// Feature 7 separates two classes by a wide margin; every other feature is noise.
pub fn planted_dataset(seed: u64) -> Ds {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vectors = Vec::new();
    let mut names = Vec::new();
    for i in 0..24 {
        let class = i % 2;
        let mut v: [f64; FEATURE_COUNT] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        v[7] = class as f64 * 10.0 + rng.gen_range(-1.0..1.0);
        vectors.push(FeatureVector::new(v));
        names.push(if class == 0 { "kick" } else { "snare" });
    }
    LabeledDataset::from_named(vectors, &names).unwrap()
}

// ---- evaluation ----

pub fn ev(list: &[(f64, &str)]) -> Vec<LabeledOnset> {
    list.iter().map(|&(t, l)| LabeledOnset::new(t, l)).collect()
}

pub struct HandCase {
    pub name: &'static str,
    pub pred: Vec<LabeledOnset>,
    pub reference: Vec<LabeledOnset>,
    pub ops: EditOps,
    /// (class, precision, recall, f) for every class that must be reported
    pub scores: Vec<(&'static str, f64, f64, f64)>,
}

fn f(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

fn ops(modify: usize, add: usize, remove: usize) -> EditOps {
    EditOps { modify, add, remove }
}

/// Ten cases worked out by hand at 50 ms tolerance.
pub fn hand_cases() -> Vec<HandCase> {
    let mut worked_pred: Vec<_> = (1..=8).map(|i| LabeledOnset::new(i as f64, "kick")).collect();
    worked_pred.push(LabeledOnset::new(9.0, "snare"));
    worked_pred.push(LabeledOnset::new(20.0, "kick"));
    let worked_ref: Vec<_> = (1..=10).map(|i| LabeledOnset::new(i as f64, "kick")).collect();
    vec![
        HandCase {
            name: "worked example",
            pred: worked_pred,
            reference: worked_ref,
            ops: ops(1, 1, 1),
            scores: vec![("kick", 8.0 / 9.0, 0.8, f(8.0 / 9.0, 0.8)), ("snare", 0.0, 0.0, 0.0)],
        },
        HandCase {
            name: "identical lists",
            pred: ev(&[(0.5, "kick"), (1.0, "snare"), (1.5, "hihat")]),
            reference: ev(&[(0.5, "kick"), (1.0, "snare"), (1.5, "hihat")]),
            ops: ops(0, 0, 0),
            scores: vec![("kick", 1.0, 1.0, 1.0), ("snare", 1.0, 1.0, 1.0), ("hihat", 1.0, 1.0, 1.0)],
        },
        HandCase {
            name: "30 ms offset",
            pred: ev(&[(0.53, "kick")]),
            reference: ev(&[(0.5, "kick")]),
            ops: ops(0, 0, 0),
            scores: vec![("kick", 1.0, 1.0, 1.0)],
        },
        HandCase {
            name: "offset equal to tolerance",
            pred: ev(&[(0.55, "kick")]),
            reference: ev(&[(0.5, "kick")]),
            ops: ops(0, 0, 0),
            scores: vec![("kick", 1.0, 1.0, 1.0)],
        },
        HandCase {
            name: "offset beyond tolerance",
            pred: ev(&[(0.551, "kick")]),
            reference: ev(&[(0.5, "kick")]),
            ops: ops(0, 1, 1),
            scores: vec![("kick", 0.0, 0.0, 0.0)],
        },
        HandCase {
            name: "two candidates at equal distance",
            pred: ev(&[(0.49, "kick"), (0.51, "kick")]),
            reference: ev(&[(0.5, "kick")]),
            ops: ops(0, 0, 1),
            scores: vec![("kick", 0.5, 1.0, f(0.5, 1.0))],
        },
        HandCase {
            name: "wrong label",
            pred: ev(&[(0.5, "snare")]),
            reference: ev(&[(0.5, "kick")]),
            ops: ops(1, 0, 0),
            scores: vec![("kick", 0.0, 0.0, 0.0), ("snare", 0.0, 0.0, 0.0)],
        },
        HandCase {
            name: "empty prediction",
            pred: vec![],
            reference: ev(&[(0.1, "kick"), (0.6, "snare"), (1.1, "kick")]),
            ops: ops(0, 3, 0),
            scores: vec![("kick", 0.0, 0.0, 0.0), ("snare", 0.0, 0.0, 0.0)],
        },
        HandCase {
            name: "spurious extras",
            pred: ev(&[(0.5, "kick"), (0.8, "hihat"), (1.0, "snare"), (2.0, "kick")]),
            reference: ev(&[(0.5, "kick"), (1.0, "snare")]),
            ops: ops(0, 0, 2),
            scores: vec![("kick", 0.5, 1.0, f(0.5, 1.0)), ("snare", 1.0, 1.0, 1.0), ("hihat", 0.0, 0.0, 0.0)],
        },
        HandCase {
            name: "mixed errors",
            pred: ev(&[(1.01, "kick"), (2.02, "kick"), (3.0, "snare"), (5.0, "kick")]),
            reference: ev(&[(1.0, "kick"), (2.0, "kick"), (3.0, "kick"), (4.0, "kick"), (5.0, "snare")]),
            ops: ops(2, 1, 0),
            scores: vec![("kick", 2.0 / 3.0, 0.5, 4.0 / 7.0), ("snare", 0.0, 0.0, 0.0)],
        },
    ]
}

pub fn random_onset_list(rng: &mut ChaCha8Rng) -> Vec<LabeledOnset> {
    let labels = ["kick", "snare", "hihat", "clap"];
    let n = rng.gen_range(0..25);
    let mut v: Vec<LabeledOnset> =
        (0..n).map(|_| LabeledOnset::new(rng.gen_range(0.0..4.0), labels[rng.gen_range(0..labels.len())])).collect();
    v.sort_by(|a, b| a.time.total_cmp(&b.time));
    v
}

// ---- midi ----

pub fn random_transcription(rng: &mut ChaCha8Rng) -> Transcription {
    let labels = ["kick", "snare", "hihat", "clap", "tom"];
    let mut t = 0.0;
    let events = (0..rng.gen_range(0..60))
        .map(|_| {
            // occasional simultaneous hits
            if rng.gen_bool(0.9) {
                t += rng.gen_range(0.001..0.5);
            }
            DrumEvent { time: t, label: labels[rng.gen_range(0..labels.len())].into(), velocity: rng.gen_range(1..=127) }
        })
        .collect();
    Transcription { events, duration: t + 1.0, model_id: "test".into() }
}
