//! Deterministic dataset ingestion, normalization, augmentation, and
//! batching. Loaders are pure functions of file bytes; all randomness flows
//! from explicit seeds.

mod augment;
mod batch;
mod cifar;
mod idx;
mod synthetic;

pub use augment::{augment_batch, hflip_image, AugmentationPolicy};
pub use batch::{batch_matrix, epoch_order, gather_batch};
pub use cifar::{load_cifar10, load_cifar10_batch, load_cifar100};
pub use idx::{load_idx_u8, load_mnist, write_idx_u8};
pub use synthetic::{synthetic_classification, synthetic_pair};

use thiserror::Error;

use crate::Real;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DataError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("bad magic 0x{found:08x} at byte offset {offset} of {path}")]
    BadMagic {
        path: String,
        offset: usize,
        found: u32,
    },
    #[error("truncated file {path}: needed {expected} bytes, found {found}")]
    Truncated {
        path: String,
        expected: usize,
        found: usize,
    },
    #[error("malformed data: {0}")]
    Malformed(String),
    #[error("zero standard deviation for channel {0}")]
    ZeroStd(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// An image-classification dataset held fully in memory. Pixels are reals,
/// [0, 1] as loaded, arbitrary after normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub split: Split,
    /// (channels, height, width)
    pub shape: (usize, usize, usize),
    /// `len * channels * height * width` values, image-major.
    pub images: Vec<Real>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_len(&self) -> usize {
        self.shape.0 * self.shape.1 * self.shape.2
    }

    pub fn image(&self, i: usize) -> &[Real] {
        let len = self.image_len();
        &self.images[i * len..(i + 1) * len]
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.images.len() != self.len() * self.image_len() {
            return Err(DataError::Malformed(format!(
                "{} images of {} values, buffer holds {}",
                self.len(),
                self.image_len(),
                self.images.len()
            )));
        }
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= self.num_classes) {
            return Err(DataError::Malformed(format!(
                "label {bad} outside {} classes",
                self.num_classes
            )));
        }
        Ok(())
    }
}

/// Per-channel normalization constants.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizeConstants {
    pub mean: Vec<Real>,
    pub std: Vec<Real>,
}

impl NormalizeConstants {
    pub fn cifar10() -> Self {
        Self {
            mean: vec![0.491, 0.482, 0.447],
            std: vec![0.247, 0.243, 0.262],
        }
    }

    pub fn cifar100() -> Self {
        Self {
            mean: vec![0.507, 0.487, 0.441],
            std: vec![0.267, 0.256, 0.276],
        }
    }

    pub fn mnist() -> Self {
        Self {
            mean: vec![0.1307],
            std: vec![0.3081],
        }
    }

    pub fn identity(channels: usize) -> Self {
        Self {
            mean: vec![0.0; channels],
            std: vec![1.0; channels],
        }
    }

    pub fn for_dataset(name: &str) -> Self {
        match name {
            "cifar10" => Self::cifar10(),
            "cifar100" => Self::cifar100(),
            "mnist" => Self::mnist(),
            _ => Self::identity(1),
        }
    }
}

/// In-place per-channel standardization: `x' = (x - mean_c) / std_c`.
pub fn normalize(ds: &mut Dataset, constants: &NormalizeConstants) -> Result<(), DataError> {
    apply_channelwise(ds, constants, |x, m, s| (x - m) / s)
}

/// Inverse of [`normalize`].
pub fn denormalize(ds: &mut Dataset, constants: &NormalizeConstants) -> Result<(), DataError> {
    apply_channelwise(ds, constants, |x, m, s| x * s + m)
}

fn apply_channelwise(
    ds: &mut Dataset,
    constants: &NormalizeConstants,
    f: impl Fn(Real, Real, Real) -> Real,
) -> Result<(), DataError> {
    let (c, h, w) = ds.shape;
    if constants.mean.len() != c || constants.std.len() != c {
        return Err(DataError::Malformed(format!(
            "{} channels, {} normalization constants",
            c,
            constants.mean.len()
        )));
    }
    if let Some(ch) = constants.std.iter().position(|&s| s == 0.0) {
        return Err(DataError::ZeroStd(ch));
    }
    let plane = h * w;
    for img in 0..ds.len() {
        for ch in 0..c {
            let base = (img * c + ch) * plane;
            for v in &mut ds.images[base..base + plane] {
                *v = f(*v, constants.mean[ch], constants.std[ch]);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(pixels: Vec<Real>) -> Dataset {
        Dataset {
            name: "toy".into(),
            split: Split::Train,
            shape: (1, 2, 2),
            labels: vec![0; pixels.len() / 4],
            num_classes: 2,
            images: pixels,
        }
    }

    #[test]
    fn pixel_at_mean_maps_to_zero() {
        let mut ds = toy(vec![0.1307; 4]);
        normalize(&mut ds, &NormalizeConstants::mnist()).unwrap();
        for v in &ds.images {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn red_channel_arithmetic() {
        // (0.738 - 0.491) / 0.247 = 1.0 for the red channel constants
        let mut ds = Dataset {
            name: "c".into(),
            split: Split::Train,
            shape: (3, 1, 1),
            images: vec![0.738, 0.482, 0.447],
            labels: vec![0],
            num_classes: 10,
        };
        normalize(&mut ds, &NormalizeConstants::cifar10()).unwrap();
        assert!((ds.images[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalize_then_denormalize_is_identity() {
        let pixels: Vec<Real> = (0..8).map(|i| i as Real / 7.0).collect();
        let mut ds = toy(pixels.clone());
        let c = NormalizeConstants { mean: vec![0.3], std: vec![0.21] };
        normalize(&mut ds, &c).unwrap();
        denormalize(&mut ds, &c).unwrap();
        for (got, want) in ds.images.iter().zip(&pixels) {
            assert!((got - want).abs() < 1e-7);
        }
    }

    #[test]
    fn zero_std_is_rejected() {
        let mut ds = toy(vec![0.0; 4]);
        let c = NormalizeConstants { mean: vec![0.0], std: vec![0.0] };
        assert_eq!(normalize(&mut ds, &c), Err(DataError::ZeroStd(0)));
    }
}
