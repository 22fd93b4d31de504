use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::image::GrayImage;

use super::ViewSet;

const BLOCK: usize = 8;

/// Blueprint degradation settings. All randomness derives from `seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    /// Per-pixel uniform noise in `[-a, a]`.
    pub noise_amplitude: f32,
    /// Blend factor toward the 8×8 block average.
    pub block_artifact_strength: f32,
    pub extra_line_count: usize,
    /// Use the interior-visible variant of a view when one is stored.
    pub window_removal: bool,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self { noise_amplitude: 0.0, block_artifact_strength: 0.0, extra_line_count: 0, window_removal: false, seed: 0 }
    }
}

impl AugmentConfig {
    pub fn is_identity(&self) -> bool {
        self.noise_amplitude == 0.0
            && self.block_artifact_strength == 0.0
            && self.extra_line_count == 0
            && !self.window_removal
    }
}

fn block_artifacts(img: &GrayImage, strength: f32) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let mut out = img.clone();
    for by in (0..h).step_by(BLOCK) {
        for bx in (0..w).step_by(BLOCK) {
            let (x1, y1) = ((bx + BLOCK).min(w), (by + BLOCK).min(h));
            let mut sum = 0.0f32;
            for y in by..y1 {
                for x in bx..x1 {
                    sum += img.get(x, y);
                }
            }
            let mean = sum / ((x1 - bx) * (y1 - by)) as f32;
            for y in by..y1 {
                for x in bx..x1 {
                    let v = img.get(x, y);
                    out.set(x, y, v + strength * (mean - v));
                }
            }
        }
    }
    out
}

/// Bresenham segment; returns the touched pixels.
fn draw_line(img: &mut GrayImage, from: (i64, i64), to: (i64, i64), value: f32, touched: &mut [bool]) {
    let (mut x, mut y) = from;
    let dx = (to.0 - x).abs();
    let dy = -(to.1 - y).abs();
    let sx = if x < to.0 { 1 } else { -1 };
    let sy = if y < to.1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        if x >= 0 && y >= 0 && (x as usize) < img.width() && (y as usize) < img.height() {
            img.set(x as usize, y as usize, value);
            touched[y as usize * img.width() + x as usize] = true;
        }
        if x == to.0 && y == to.1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Degrades one image; also returns the mask of pixels covered by added lines.
pub(crate) fn augment_image(img: &GrayImage, cfg: &AugmentConfig, rng: &mut ChaCha8Rng) -> (GrayImage, Vec<bool>) {
    let mut out = img.clone();
    let mut touched = vec![false; img.width() * img.height()];
    if cfg.block_artifact_strength > 0.0 {
        out = block_artifacts(&out, cfg.block_artifact_strength);
    }
    if cfg.noise_amplitude > 0.0 {
        let a = cfg.noise_amplitude;
        out = GrayImage::from_fn(out.width(), out.height(), |x, y| out.get(x, y) + rng.random_range(-a..=a));
    }
    if cfg.extra_line_count > 0 && img.width() > 0 && img.height() > 0 {
        // Stroke intensities are drawn from the existing line pixels.
        let ink: Vec<f32> = img.data().iter().copied().filter(|&v| v < 0.9).collect();
        let (w, h) = (img.width() as i64, img.height() as i64);
        for _ in 0..cfg.extra_line_count {
            let value = if ink.is_empty() { 0.0 } else { ink[rng.random_range(0..ink.len())] };
            let a = (rng.random_range(0..w), rng.random_range(0..h));
            let b = (rng.random_range(0..w), rng.random_range(0..h));
            draw_line(&mut out, a, b, value, &mut touched);
        }
    }
    (out, touched)
}

/// Applies window removal, block artifacts, noise and extra lines to every view.
/// Box geometry is never changed.
pub fn augment(views: &ViewSet, cfg: &AugmentConfig) -> ViewSet {
    let mut out = views.clone();
    if cfg.is_identity() {
        return out;
    }
    for (i, view) in out.views.iter_mut().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(i as u64 + 1);
        if cfg.window_removal {
            if let Some(interior) = &view.interior {
                if interior.width() == view.image.width() && interior.height() == view.image.height() {
                    view.image = interior.clone();
                }
            }
        }
        view.image = augment_image(&view.image, cfg, &mut rng).0;
    }
    out
}
