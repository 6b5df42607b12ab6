//! Synthetic Gaussian-blob classification data for fast tests.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Dataset, Split};
use crate::Real;

const SHAPE: (usize, usize, usize) = (1, 4, 4);

fn class_means(classes: usize, separation: Real, rng: &mut ChaCha8Rng) -> Vec<Vec<Real>> {
    let dim = SHAPE.0 * SHAPE.1 * SHAPE.2;
    (0..classes)
        .map(|_| {
            let dir: Vec<Real> = (0..dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal) as Real)
                .collect();
            let norm = dir.iter().map(|v| v * v).sum::<Real>().sqrt().max(1e-12);
            dir.into_iter().map(|v| v / norm * separation).collect()
        })
        .collect()
}

fn blob_split(
    n: usize,
    means: &[Vec<Real>],
    split: Split,
    rng: &mut ChaCha8Rng,
) -> Dataset {
    let classes = means.len();
    let dim = SHAPE.0 * SHAPE.1 * SHAPE.2;
    let mut images = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % classes;
        labels.push(label);
        for d in 0..dim {
            let noise: f64 = rng.sample(StandardNormal);
            images.push(means[label][d] + noise as Real);
        }
    }
    Dataset {
        name: "synthetic".into(),
        split,
        shape: SHAPE,
        images,
        labels,
        num_classes: classes,
    }
}

/// Gaussian blobs: class means `separation` apart from the origin along
/// random unit directions, unit-variance noise, labels balanced round-robin.
/// Byte-identical per (n, classes, separation, seed).
pub fn synthetic_classification(
    n: usize,
    classes: usize,
    separation: Real,
    seed: u64,
) -> Dataset {
    use rand::SeedableRng;
    let mut mean_rng = ChaCha8Rng::seed_from_u64(seed);
    let means = class_means(classes, separation, &mut mean_rng);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    noise_rng.set_stream(1);
    blob_split(n, &means, Split::Train, &mut noise_rng)
}

/// Train and test splits drawn around the same class means but with
/// independent noise.
pub fn synthetic_pair(
    n_train: usize,
    n_test: usize,
    classes: usize,
    separation: Real,
    seed: u64,
) -> (Dataset, Dataset) {
    use rand::SeedableRng;
    let mut mean_rng = ChaCha8Rng::seed_from_u64(seed);
    let means = class_means(classes, separation, &mut mean_rng);
    let mut train_rng = ChaCha8Rng::seed_from_u64(seed);
    train_rng.set_stream(1);
    let train = blob_split(n_train, &means, Split::Train, &mut train_rng);
    let mut test_rng = ChaCha8Rng::seed_from_u64(seed);
    test_rng.set_stream(2);
    let test = blob_split(n_test, &means, Split::Test, &mut test_rng);
    (train, test)
}
