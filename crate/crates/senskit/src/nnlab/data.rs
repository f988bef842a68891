//! Synthetic 5×5 bar images.
//!
//! Two classes on a white (1.0) background: class 0 draws a vertical
//! black (0.0) bar down the center column (pixel indices 2, 7, 12, 17,
//! 22 in row-major order), class 1 a horizontal bar across the center
//! row (indices 10–14). Each sample adds i.i.d. Gaussian pixel noise,
//! deliberately unclipped so the noise stays exactly Gaussian.
//!
//! Generation order is fixed — class 0 train, class 1 train, class 0
//! test, class 1 test, pixels in row-major order within a sample — and
//! all noise comes from one labeled substream of the counter PRNG, so a
//! seed fully determines every byte of the dataset.

use serde::{Deserialize, Serialize};

use crate::rng::CounterRng;

/// Image side length; images are `SIDE × SIDE`.
pub const IMAGE_SIDE: usize = 5;
/// Pixels per image.
pub const PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;

/// Vertical-bar class label.
pub const LABEL_VERTICAL: u8 = 0;
/// Horizontal-bar class label.
pub const LABEL_HORIZONTAL: u8 = 1;

/// Parameters of the synthetic dataset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSpec {
    pub n_train_per_class: usize,
    pub n_test_per_class: usize,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for DataSpec {
    /// The documented defaults: 1000 train and 100 test images per
    /// class, pixel noise of standard deviation 0.2.
    fn default() -> Self {
        DataSpec {
            n_train_per_class: 1000,
            n_test_per_class: 100,
            noise_std: 0.2,
            seed: 7,
        }
    }
}

/// Which split a [`Dataset`] holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// One split: images (row-major pixels) with aligned labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub images: Vec<[f64; PIXELS]>,
    pub labels: Vec<u8>,
    pub split: Split,
}

impl Dataset {
    /// Number of samples.
    pub fn len(&self) -> usize {
        self.images.len()
    }

    /// True when the split holds no samples.
    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

/// Both splits of one generated dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticData {
    pub spec: DataSpec,
    pub train: Dataset,
    pub test: Dataset,
}

/// Noise-free template for a class.
pub fn base_image(label: u8) -> [f64; PIXELS] {
    let mut img = [1.0; PIXELS];
    for k in 0..IMAGE_SIDE {
        let idx = if label == LABEL_VERTICAL {
            k * IMAGE_SIDE + IMAGE_SIDE / 2 // center column
        } else {
            (IMAGE_SIDE / 2) * IMAGE_SIDE + k // center row
        };
        img[idx] = 0.0;
    }
    img
}

/// Generates both splits deterministically from the spec.
pub fn gen_synthetic(spec: &DataSpec) -> SyntheticData {
    let mut rng = CounterRng::new(spec.seed).substream("synthetic-data");
    let mut sample = |label: u8| -> [f64; PIXELS] {
        let mut img = base_image(label);
        if spec.noise_std > 0.0 {
            for px in img.iter_mut() {
                *px += spec.noise_std * rng.next_gaussian();
            }
        }
        img
    };

    let split = |n_per_class: usize, tag: Split, rng_sample: &mut dyn FnMut(u8) -> [f64; PIXELS]| {
        let mut images = Vec::with_capacity(2 * n_per_class);
        let mut labels = Vec::with_capacity(2 * n_per_class);
        for label in [LABEL_VERTICAL, LABEL_HORIZONTAL] {
            for _ in 0..n_per_class {
                images.push(rng_sample(label));
                labels.push(label);
            }
        }
        Dataset { images, labels, split: tag }
    };

    let train = split(spec.n_train_per_class, Split::Train, &mut sample);
    let test = split(spec.n_test_per_class, Split::Test, &mut sample);
    SyntheticData { spec: *spec, train, test }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_free_templates() {
        let spec = DataSpec { noise_std: 0.0, n_train_per_class: 2, n_test_per_class: 1, seed: 0 };
        let data = gen_synthetic(&spec);
        let vertical = &data.train.images[0];
        for (i, &px) in vertical.iter().enumerate() {
            let expect = if [2, 7, 12, 17, 22].contains(&i) { 0.0 } else { 1.0 };
            assert_eq!(px, expect, "vertical pixel {i}");
        }
        let horizontal = &data.train.images[2];
        for (i, &px) in horizontal.iter().enumerate() {
            let expect = if (10..=14).contains(&i) { 0.0 } else { 1.0 };
            assert_eq!(px, expect, "horizontal pixel {i}");
        }
    }

    #[test]
    fn counts_labels_and_split_tags() {
        let spec = DataSpec::default();
        let data = gen_synthetic(&spec);
        assert_eq!(data.train.len(), 2000);
        assert_eq!(data.test.len(), 200);
        assert_eq!(data.train.split, Split::Train);
        assert_eq!(data.test.split, Split::Test);
        // Class blocks: first half label 0, second half label 1.
        assert!(data.train.labels[..1000].iter().all(|&l| l == LABEL_VERTICAL));
        assert!(data.train.labels[1000..].iter().all(|&l| l == LABEL_HORIZONTAL));
        assert_eq!(data.test.labels.iter().filter(|&&l| l == 1).count(), 100);
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = DataSpec::default();
        let a = gen_synthetic(&spec);
        let b = gen_synthetic(&spec);
        assert_eq!(a, b);
        let c = gen_synthetic(&DataSpec { seed: 8, ..spec });
        assert_ne!(a.train.images[0], c.train.images[0]);
    }

    #[test]
    fn noise_statistics_are_plausible() {
        let spec = DataSpec { n_train_per_class: 200, ..DataSpec::default() };
        let data = gen_synthetic(&spec);
        // Background pixels of vertical-class images: mean ≈ 1, std ≈ 0.2.
        let mut values = Vec::new();
        for img in &data.train.images[..200] {
            for (i, &px) in img.iter().enumerate() {
                if ![2, 7, 12, 17, 22].contains(&i) {
                    values.push(px);
                }
            }
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std =
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
        assert!((std - 0.2).abs() < 0.01, "std {std}");
        // Unclipped: with std 0.2 some background pixels exceed 1.
        assert!(values.iter().any(|&v| v > 1.0));
    }
}
