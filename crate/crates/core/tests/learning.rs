use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use facecov::bof::{kmeans, quantize, train_codebook, Codebook, CodebookKind, KMeansParams};
use facecov::classify::{train, SvmParams};
use facecov::pipeline::{FoldReport, Prediction};
use facecov::Label;

const SIX: [Label; 6] = [
    Label::Happy,
    Label::Sad,
    Label::Disgust,
    Label::Surprise,
    Label::Fear,
    Label::Angry,
];

fn cloud(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

/// `per_class` points around each of `classes` centres spaced `spacing`
/// apart along the axes, with Gaussian noise of scale `noise`.
fn blobs(
    classes: &[Label],
    per_class: usize,
    spacing: f64,
    noise: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<(Vec<f64>, Label)> {
    let dim = classes.len();
    let normal = Normal::new(0.0, noise).unwrap();
    let mut out = Vec::new();
    for (c, &label) in classes.iter().enumerate() {
        for _ in 0..per_class {
            let x: Vec<f64> = (0..dim)
                .map(|j| if j == c { spacing } else { 0.0 } + normal.sample(rng))
                .collect();
            out.push((x, label));
        }
    }
    out
}

fn accuracy(model: &facecov::classify::LinearModel, samples: &[(Vec<f64>, Label)]) -> f64 {
    let hits = samples.iter().filter(|(x, l)| model.predict(x).unwrap() == *l).count();
    hits as f64 / samples.len() as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kmeans_never_ends_above_its_seeding(seed in any::<u64>(), n in 10usize..80, k in 1usize..8, dim in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = cloud(n, dim, &mut rng);
        let fit = train_codebook(&data, k.min(n), seed).unwrap();
        prop_assert!(fit.objective() <= fit.initial_objective());
        prop_assert!(fit.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn quantize_ignores_descriptor_order(seed in any::<u64>(), n in 1usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centroids = cloud(16, 3, &mut rng);
        let book = Codebook::new(CodebookKind::Shallow, "shallow", seed, centroids).unwrap();
        let mut data = cloud(n, 3, &mut rng);
        let before = quantize(&data, &book).unwrap();
        data.shuffle(&mut rng);
        prop_assert_eq!(quantize(&data, &book).unwrap(), before.clone());
        let doubled: Vec<Vec<f64>> = data.iter().chain(data.iter()).cloned().collect();
        prop_assert_eq!(quantize(&doubled, &book).unwrap(), before);
    }

    #[test]
    fn larger_c_never_lowers_training_accuracy_on_separable_data(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = blobs(&SIX[..3], 12, 3.0, 0.3, &mut rng);
        let mut last = 0.0;
        for c in [0.01, 0.1, 1.0, 10.0] {
            let model = train(&data, &SvmParams { c, seed, ..SvmParams::default() }).unwrap();
            let acc = accuracy(&model, &data);
            prop_assert!(acc >= last, "C={}: {} < {}", c, acc, last);
            last = acc;
        }
    }
}

#[test]
fn duplicated_training_samples_leave_predictions_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let data = blobs(&SIX, 15, 4.0, 0.3, &mut rng);
    let probe = blobs(&SIX, 30, 4.0, 0.6, &mut rng);
    // the blobs are far enough apart that no multiplier reaches C = 1, so
    // repeats of a point cannot move the separator
    let params = SvmParams {
        tolerance: 1e-10,
        ..SvmParams::default()
    };
    let base = train(&data, &params).unwrap();
    let mut augmented = data.clone();
    for i in (0..data.len()).step_by(3) {
        augmented.push(data[i].clone());
        augmented.push(data[i].clone());
    }
    let dup = train(&augmented, &params).unwrap();
    for (x, _) in &probe {
        assert_eq!(base.predict(x).unwrap(), dup.predict(x).unwrap());
    }
    for (a, b) in base.pairs.iter().zip(&dup.pairs) {
        let pa = a.primal_objective(&data, &base.classes, params.c);
        let pb = b.primal_objective(&data, &dup.classes, params.c);
        assert!((pa - pb).abs() <= 1e-6 * pa.max(1.0), "pair objective {pa} vs {pb}");
    }
}

#[test]
fn predict_is_pure() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let data = blobs(&SIX, 10, 3.0, 0.5, &mut rng);
    let model = train(&data, &SvmParams::default()).unwrap();
    let snapshot = model.clone();
    let x = &data[7].0;
    let first = model.predict(x).unwrap();
    for (other, _) in &data {
        model.predict(other).unwrap();
    }
    assert_eq!(model.predict(x).unwrap(), first);
    assert_eq!(model, snapshot);
}

#[test]
fn six_separated_blobs_generalize() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    // centres 3 apart against noise 0.5 per axis
    let train_set = blobs(&SIX, 40, 3.0, 0.5, &mut rng);
    let test_set = blobs(&SIX, 40, 3.0, 0.5, &mut rng);
    let model = train(&train_set, &SvmParams::default()).unwrap();
    let acc = accuracy(&model, &test_set);
    assert!(acc >= 0.95, "held-out accuracy {acc}");
}

#[test]
fn multi_restart_kmeans_is_no_worse_than_its_first_run() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let data = cloud(200, 4, &mut rng);
    let single = kmeans(&data, &KMeansParams::new(8, 3)).unwrap();
    let many = kmeans(
        &data,
        &KMeansParams {
            restarts: 6,
            ..KMeansParams::new(8, 3)
        },
    )
    .unwrap();
    assert!(many.objective() <= single.objective());
}

#[test]
fn uniform_random_predictions_score_near_chance() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let predictions: Vec<Prediction> = (0..600)
            .map(|i| Prediction {
                sample_id: format!("s{i}"),
                truth: SIX[i % 6],
                predicted: SIX[rng.random_range(0..6)],
            })
            .collect();
        let report = FoldReport::new(0, SIX.to_vec(), vec![], predictions);
        let acc = report.accuracy();
        assert!((acc - 1.0 / 6.0).abs() <= 0.05, "seed {seed}: {acc}");
        let rows: Vec<usize> = report.confusion.iter().map(|r| r.iter().sum()).collect();
        assert_eq!(rows, vec![100; 6]);
    }
}
