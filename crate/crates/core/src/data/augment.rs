//! Training-split augmentation: zero-pad, random square crop, random
//! horizontal flip. Seeded and per-image independent.

use rand::Rng;

use super::DataError;
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentationPolicy {
    pub pad_pixels: usize,
    pub crop_size: usize,
    pub hflip_prob: Real,
}

impl AugmentationPolicy {
    /// Pad 4 black pixels on every side, crop back to 32x32, flip with
    /// probability one half.
    pub fn cifar() -> Self {
        Self {
            pad_pixels: 4,
            crop_size: 32,
            hflip_prob: 0.5,
        }
    }

    /// Shape must be preserved: the crop equals the original square size and
    /// fits inside the padded image.
    pub fn validate(&self, shape: (usize, usize, usize)) -> Result<(), DataError> {
        let (_, h, w) = shape;
        if h != w || self.crop_size != h {
            return Err(DataError::Malformed(format!(
                "crop {} must match the {h}x{w} image",
                self.crop_size
            )));
        }
        if self.crop_size > h + 2 * self.pad_pixels {
            return Err(DataError::Malformed(format!(
                "crop {} exceeds padded size {}",
                self.crop_size,
                h + 2 * self.pad_pixels
            )));
        }
        if !(0.0..=1.0).contains(&self.hflip_prob) {
            return Err(DataError::Malformed(format!(
                "flip probability {}",
                self.hflip_prob
            )));
        }
        Ok(())
    }
}

/// Flip one image buffer (channels x h x w) horizontally in place.
pub fn hflip_image(image: &mut [Real], shape: (usize, usize, usize)) {
    let (c, h, w) = shape;
    for ch in 0..c {
        for y in 0..h {
            let row = &mut image[(ch * h + y) * w..(ch * h + y + 1) * w];
            row.reverse();
        }
    }
}

fn crop_image(image: &mut [Real], shape: (usize, usize, usize), pad: usize, oy: usize, ox: usize) {
    let (c, h, w) = shape;
    let mut out = vec![0.0; image.len()];
    for ch in 0..c {
        for y in 0..h {
            // source row in the virtual padded image
            let sy = y as isize + oy as isize - pad as isize;
            if sy < 0 || sy >= h as isize {
                continue;
            }
            for x in 0..w {
                let sx = x as isize + ox as isize - pad as isize;
                if sx < 0 || sx >= w as isize {
                    continue;
                }
                out[(ch * h + y) * w + x] = image[(ch * h + sy as usize) * w + sx as usize];
            }
        }
    }
    image.copy_from_slice(&out);
}

/// Augment a batch buffer (`B * channels * h * w`) in place. Each image
/// draws its own crop offset, uniform over the (2 pad + 1)^2 positions, and
/// its own flip decision.
pub fn augment_batch<R: Rng + ?Sized>(
    batch: &mut [Real],
    shape: (usize, usize, usize),
    policy: &AugmentationPolicy,
    rng: &mut R,
) {
    let image_len = shape.0 * shape.1 * shape.2;
    debug_assert_eq!(batch.len() % image_len, 0);
    let span = 2 * policy.pad_pixels + 1;
    for image in batch.chunks_mut(image_len) {
        let oy = rng.gen_range(0..span);
        let ox = rng.gen_range(0..span);
        if policy.pad_pixels > 0 {
            crop_image(image, shape, policy.pad_pixels, oy, ox);
        }
        if policy.hflip_prob > 0.0 && rng.gen_bool(policy.hflip_prob as f64) {
            hflip_image(image, shape);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ramp(len: usize) -> Vec<Real> {
        (0..len).map(|i| i as Real).collect()
    }

    #[test]
    fn no_padding_and_no_flip_is_identity() {
        let policy = AugmentationPolicy { pad_pixels: 0, crop_size: 4, hflip_prob: 0.0 };
        policy.validate((2, 4, 4)).unwrap();
        let mut batch = ramp(2 * 16 * 3);
        let want = batch.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        augment_batch(&mut batch, (2, 4, 4), &policy, &mut rng);
        assert_eq!(batch, want);
    }

    #[test]
    fn forced_flip_twice_is_identity() {
        let policy = AugmentationPolicy { pad_pixels: 0, crop_size: 4, hflip_prob: 1.0 };
        let mut batch = ramp(16);
        let want = batch.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        augment_batch(&mut batch, (1, 4, 4), &policy, &mut rng);
        assert_ne!(batch, want, "one flip must change the ramp image");
        augment_batch(&mut batch, (1, 4, 4), &policy, &mut rng);
        assert_eq!(batch, want);
    }

    #[test]
    fn centered_crop_is_identity() {
        // pad 2 with the offset forced to the center restores the original
        let mut image = ramp(25);
        let want = image.clone();
        crop_image(&mut image, (1, 5, 5), 2, 2, 2);
        assert_eq!(image, want);
    }

    #[test]
    fn corner_crop_pulls_in_padding_zeros() {
        let mut image = ramp(9);
        crop_image(&mut image, (1, 3, 3), 1, 0, 0);
        // offset (0,0) shifts content down-right; first row/col become zero
        assert_eq!(image, vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 3.0, 4.0]);
    }

    #[test]
    fn crop_offsets_are_uniform() {
        // recover each draw's offset from where a marker pixel lands
        let policy = AugmentationPolicy { pad_pixels: 4, crop_size: 32, hflip_prob: 0.0 };
        policy.validate((1, 32, 32)).unwrap();
        let span = 9usize;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut counts = vec![0usize; span * span];
        let draws = 10_000;
        for _ in 0..draws {
            let mut image = vec![0.0; 32 * 32];
            image[16 * 32 + 16] = 1.0;
            augment_batch(&mut image, (1, 32, 32), &policy, &mut rng);
            let pos = image.iter().position(|&v| v == 1.0).unwrap();
            let (y, x) = (pos / 32, pos % 32);
            let (oy, ox) = (16 + 4 - y, 16 + 4 - x);
            counts[oy * span + ox] += 1;
        }
        let expected = draws as f64 / (span * span) as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // df = 80, significance 0.01
        assert!(chi2 < 112.33, "chi-squared {chi2}");
    }

    #[test]
    fn oversized_crop_is_rejected() {
        let policy = AugmentationPolicy { pad_pixels: 0, crop_size: 8, hflip_prob: 0.5 };
        assert!(policy.validate((1, 4, 4)).is_err());
    }
}
