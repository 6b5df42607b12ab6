//! Seeded epoch shuffling and batch assembly. Order is a pure function of
//! (seed, epoch); the last partial batch is kept.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::{Mat, Real};

/// The visit order for one epoch: a seeded permutation of `0..n`,
/// reproducible per (seed, epoch).
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// Copy the indexed images into one contiguous buffer plus their labels.
pub fn gather_batch(ds: &Dataset, indices: &[usize]) -> (Vec<Real>, Vec<usize>) {
    let image_len = ds.image_len();
    let mut buf = Vec::with_capacity(indices.len() * image_len);
    let mut labels = Vec::with_capacity(indices.len());
    for &i in indices {
        buf.extend_from_slice(ds.image(i));
        labels.push(ds.labels[i]);
    }
    (buf, labels)
}

/// Turn a batch buffer (`B * units` image-major) into the unit-by-sample
/// matrix the model consumes.
pub fn batch_matrix(buf: &[Real], units: usize) -> Mat {
    let b = buf.len() / units;
    let mut m = Mat::zeros((units, b));
    for j in 0..b {
        for u in 0..units {
            m[[u, j]] = buf[j * units + u];
        }
    }
    m
}
