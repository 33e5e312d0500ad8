//! Client-side image preprocessing and seeded crop/flip augmentation.

use image::imageops::{self, FilterType};
use image::{DynamicImage, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{FindrError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentationPolicy {
    /// Augmented views per image.
    pub count: usize,
    pub crop_scale_min: f64,
    pub flip_probability: f64,
    pub seed: u64,
}

impl Default for AugmentationPolicy {
    fn default() -> Self {
        AugmentationPolicy {
            count: 10,
            crop_scale_min: 0.8,
            flip_probability: 0.5,
            seed: 0,
        }
    }
}

impl AugmentationPolicy {
    pub fn identity() -> Self {
        AugmentationPolicy {
            count: 1,
            crop_scale_min: 1.0,
            flip_probability: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(FindrError::Config("augmentation count must be at least 1".into()));
        }
        if !(self.crop_scale_min > 0.0 && self.crop_scale_min <= 1.0) {
            return Err(FindrError::Config(format!(
                "crop_scale_min must lie in (0, 1], got {}",
                self.crop_scale_min
            )));
        }
        if !(0.0..=1.0).contains(&self.flip_probability) {
            return Err(FindrError::Config(format!(
                "flip_probability must lie in [0, 1], got {}",
                self.flip_probability
            )));
        }
        Ok(())
    }

    /// The `count` augmentations drawn for an image of the given size and digest.
    pub fn draw(&self, width: u32, height: u32, digest: &[u8; 32]) -> Vec<AugParams> {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(digest);
        let mut rng = ChaCha8Rng::from_seed(hasher.finalize().into());
        (0..self.count)
            .map(|_| draw_one(&mut rng, self, width, height))
            .collect()
    }
}

/// One drawn augmentation: a crop rectangle in source pixels, then an optional flip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugParams {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
    pub flip: bool,
}

impl AugParams {
    pub fn full(width: u32, height: u32) -> Self {
        AugParams {
            x: 0,
            y: 0,
            width,
            height,
            flip: false,
        }
    }

    pub fn is_identity_for(&self, width: u32, height: u32) -> bool {
        *self == AugParams::full(width, height)
    }
}

fn draw_one(rng: &mut ChaCha8Rng, policy: &AugmentationPolicy, width: u32, height: u32) -> AugParams {
    let scale = rng.random_range(policy.crop_scale_min..=1.0);
    // Relative aspect jitter, clamped so the crop always fits inside the image.
    let lo = (0.75f64).ln().max(scale.ln());
    let hi = (4.0f64 / 3.0).ln().min(-scale.ln());
    let ratio = rng.random_range(lo..=hi).exp();
    let w = ((width as f64) * (scale * ratio).sqrt()).round().clamp(1.0, width as f64) as u32;
    let h = ((height as f64) * (scale / ratio).sqrt()).round().clamp(1.0, height as f64) as u32;
    let x = rng.random_range(0..=width - w);
    let y = rng.random_range(0..=height - h);
    let flip = rng.random_bool(policy.flip_probability);
    AugParams {
        x,
        y,
        width: w,
        height: h,
        flip,
    }
}

/// Center-pads to square with black and resizes to `side`×`side`.
pub fn square_resize(img: &RgbImage, side: u32) -> RgbImage {
    let (w, h) = img.dimensions();
    let s = w.max(h);
    let padded = if w == h {
        img.clone()
    } else {
        let mut canvas = RgbImage::new(s, s);
        imageops::replace(&mut canvas, img, ((s - w) / 2) as i64, ((s - h) / 2) as i64);
        canvas
    };
    if s == side {
        padded
    } else {
        imageops::resize(&padded, side, side, FilterType::Triangle)
    }
}

/// Applies `params` to the decoded image and returns the provider-ready pixels.
pub fn apply(img: &DynamicImage, params: &AugParams, side: u32) -> RgbImage {
    let rgb = img.to_rgb8();
    let cropped = if params.is_identity_for(rgb.width(), rgb.height()) {
        rgb
    } else {
        imageops::crop_imm(&rgb, params.x, params.y, params.width, params.height).to_image()
    };
    let flipped = if params.flip {
        imageops::flip_horizontal(&cropped)
    } else {
        cropped
    };
    square_resize(&flipped, side)
}
